"""The relying-party service and its embeddable SDK.

The SDK is exactly two calls:

* :func:`build_token_request` -- verify a signed registration result
  against the session's negotiated values and produce the token-request
  parameters;
* :func:`derive_account_from_token` -- verify an identity token and strip
  the trapdoor to recover the permanent account.

:class:`RpService` wires those into the per-cookie session state machine
(ExpectRegistration -> ExpectToken -> LoggedIn) and :class:`RpHttp`
exposes the protocol paths: GET /script, GET /login, POST
/startNegotiation, POST /registrationResult, POST /uploadToken.
"""

from __future__ import annotations

import json
import secrets
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from cryptography.hazmat.primitives.asymmetric.rsa import RSAPublicKey

from .group import GroupParams, Rng, SYSTEM_RNG
from .httpbase import HttpRequest, HttpResponse, JsonHttpServer, json_error
from .signing import hash_bytes, verify
from .tokens import (
    Clock,
    IdentityToken,
    PidRegistrationResult,
    RpCertificate,
    cert_to_wire,
    canonical_bytes,
    registration_result_from_wire,
    token_from_wire,
    system_clock,
    verify_token,
    Expired as TokenExpired,
    MalformedToken,
    SignatureInvalid,
)
from .transform import (
    Account,
    RpId,
    RpPseudoId,
    Trapdoor,
    TrapdoorOutOfRange,
    check_trapdoor_range,
    derive_pid_rp,
)
from .webassets import RP_SCRIPT_FALLBACK, RP_SCRIPT_NAME, load_script


class RpError(Exception):
    error_class = "Fail"


class BadState(RpError):
    error_class = "BadState"


class RpSignatureInvalid(RpError):
    error_class = "SignatureInvalid"


class Mismatch(RpError):
    error_class = "Mismatch"


class PidMismatch(RpError):
    error_class = "PidMismatch"


class RpExpired(RpError):
    error_class = "Expired"


class RpPhase(Enum):
    EXPECT_REGISTRATION = "ExpectRegistration"
    EXPECT_TOKEN = "ExpectToken"
    LOGGED_IN = "LoggedIn"


@dataclass
class RpSession:
    cookie: str
    t: Optional[Trapdoor] = None
    t_inv: Optional[int] = None
    pid_rp: Optional[RpPseudoId] = None
    pid_validity: Optional[int] = None
    state: Optional[RpPhase] = None
    nonce_out: Optional[str] = None
    account: Optional[Account] = None
    # per-cookie serialization; distinct sessions stay fully concurrent
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)


@dataclass
class TokenRequestParams:
    """What the RP hands back for the agent to turn into a token request."""

    pid_rp: RpPseudoId
    endpoint: str
    nonce: str

    def to_wire(self) -> dict:
        return {"PID_RP": self.pid_rp.point.wire(), "Enpt": self.endpoint, "Nonce": self.nonce}


# ---------------------------------------------------------------------------
# SDK: the two calls an integrating RP makes
# ---------------------------------------------------------------------------


def build_token_request(
    session: RpSession,
    result: PidRegistrationResult,
    idp_pk: RSAPublicKey,
    own_endpoint: str,
    now: int,
    rng: Rng = SYSTEM_RNG,
) -> TokenRequestParams:
    """Check a signed registration result and emit token-request params.

    The result must be signed by the issuer, carry status OK, match the
    session's blinded identity and trapdoor hash, and be unexpired.
    Raises on any failure; callers clear the session then.
    """
    if session.state is not RpPhase.EXPECT_REGISTRATION:
        raise BadState(f"registration result while in {session.state}")
    if not verify(canonical_bytes(result), result.sig, idp_pk):
        raise RpSignatureInvalid("registration result signature does not verify")
    if not result.ok:
        raise Mismatch("issuer rejected the registration")
    if result.pid_rp != session.pid_rp:
        raise Mismatch("registration result is for a different blinded identity")
    if result.nonce != hash_bytes(str(session.t.value).encode()):
        raise Mismatch("trapdoor hash does not match this negotiation")
    if now > result.validity:
        raise RpExpired("registration result already expired")
    session.pid_validity = result.validity
    session.state = RpPhase.EXPECT_TOKEN
    session.nonce_out = rng.randbytes(16).hex()
    return TokenRequestParams(session.pid_rp, own_endpoint, session.nonce_out)


def derive_account_from_token(
    session: RpSession,
    token: IdentityToken,
    idp_pk: RSAPublicKey,
    params: GroupParams,
    now: int,
) -> Account:
    """Verify an identity token for this session and recover the account."""
    if session.state is not RpPhase.EXPECT_TOKEN:
        raise BadState(f"token upload while in {session.state}")
    try:
        verify_token(token, idp_pk, now)
    except SignatureInvalid as exc:
        raise RpSignatureInvalid(str(exc)) from exc
    except TokenExpired as exc:
        raise RpExpired(str(exc)) from exc
    if token.pid_rp != session.pid_rp:
        raise PidMismatch("token designates a different blinded identity")
    if now > session.pid_validity:
        raise RpExpired("blinded identity registration has expired")
    account = Account(params.scalar_mul(token.pid_u.point, session.t_inv))
    session.account = account
    session.state = RpPhase.LOGGED_IN
    return account


# ---------------------------------------------------------------------------
# Service
# ---------------------------------------------------------------------------


class AccountStore:
    """Set of known accounts keyed by encoded point; optionally file-backed."""

    def __init__(self, path: Optional[str | Path] = None):
        self._path = Path(path) if path else None
        self._accounts: set[str] = set()
        self._lock = threading.Lock()
        if self._path and self._path.is_file():
            self._accounts = set(json.loads(self._path.read_text()))

    def insert_if_absent(self, account: Account) -> bool:
        """True when the account was new (auto-provisioning)."""
        key = account.point.wire()
        with self._lock:
            if key in self._accounts:
                return False
            self._accounts.add(key)
            if self._path:
                self._path.write_text(json.dumps(sorted(self._accounts)))
            return True

    def __contains__(self, account: Account) -> bool:
        with self._lock:
            return account.point.wire() in self._accounts

    def __len__(self) -> int:
        with self._lock:
            return len(self._accounts)


@dataclass
class RpConfig:
    host: str = "127.0.0.1"
    port: int = 0
    static_dir: Optional[str] = None
    accounts_path: Optional[str] = None
    # standalone deployments
    group_id: str = "toy"
    cert_path: Optional[str] = None
    idp_pk_path: Optional[str] = None
    idp_script_url: Optional[str] = None

    @classmethod
    def from_file(cls, path: str | Path) -> "RpConfig":
        data = json.loads(Path(path).read_text())
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown rp config keys: {sorted(unknown)}")
        return cls(**data)


class RpService:
    """Transport-free RP core around the two SDK calls."""

    def __init__(
        self,
        id_rp: RpId,
        endpoint: str,
        cert: RpCertificate,
        idp_pk: RSAPublicKey,
        idp_script_url: str,
        params: GroupParams,
        config: RpConfig | None = None,
        clock: Clock = system_clock,
        rng: Rng = SYSTEM_RNG,
    ):
        if cert.id_rp != id_rp or not verify(canonical_bytes(cert), cert.sig, idp_pk):
            raise ValueError("certificate does not match this RP under the issuer key")
        self.id_rp = id_rp
        self.endpoint = endpoint
        self.cert = cert
        self.idp_pk = idp_pk
        self.idp_script_url = idp_script_url
        self.params = params
        self.config = config or RpConfig()
        self.clock = clock
        self.rng = rng
        self.accounts = AccountStore(self.config.accounts_path)
        self.sessions: dict[str, RpSession] = {}
        self.receive_log: list[dict] = []
        self._lock = threading.Lock()

    def ensure_session(self, cookie: Optional[str]) -> RpSession:
        with self._lock:
            if cookie and cookie in self.sessions:
                return self.sessions[cookie]
            fresh = secrets.token_hex(16)
            session = RpSession(cookie=fresh)
            self.sessions[fresh] = session
            return session

    def _record(self, path: str, **values):
        with self._lock:
            self.receive_log.append({"path": path, **values})

    def handle_login_redirect(self, cookie: Optional[str]) -> tuple[RpSession, str]:
        session = self.ensure_session(cookie)
        self._record("/login")
        return session, self.idp_script_url

    def handle_start_negotiation(self, cookie: Optional[str], t: int) -> tuple[RpSession, RpCertificate]:
        self._record("/startNegotiation", t=str(t))
        check_trapdoor_range(t, self.params)
        session = self.ensure_session(cookie)
        trapdoor = Trapdoor(t)
        with session.lock:
            # re-negotiation on a live session starts over from scratch
            session.t = trapdoor
            session.pid_rp = derive_pid_rp(self.id_rp, trapdoor, self.params)
            session.t_inv = trapdoor.inverse(self.params)
            session.pid_validity = None
            session.nonce_out = None
            session.account = None
            session.state = RpPhase.EXPECT_REGISTRATION
        return session, self.cert

    def handle_registration_result(
        self, cookie: Optional[str], result: PidRegistrationResult, now: Optional[int] = None
    ) -> TokenRequestParams:
        now = self.clock() if now is None else now
        self._record(
            "/registrationResult",
            status=result.status,
            pid_rp=result.pid_rp.point.wire(),
            nonce=result.nonce.hex(),
            validity=str(result.validity),
        )
        session = self.ensure_session(cookie)
        with session.lock:
            try:
                return build_token_request(
                    session, result, self.idp_pk, self.endpoint, now, self.rng
                )
            except RpError:
                self._reset(session)
                raise

    def handle_upload_token(
        self, cookie: Optional[str], token: IdentityToken, now: Optional[int] = None
    ) -> Account:
        now = self.clock() if now is None else now
        self._record(
            "/uploadToken",
            pid_rp=token.pid_rp.point.wire(),
            pid_u=token.pid_u.point.wire(),
            issuer=token.issuer,
            validity=str(token.validity),
        )
        session = self.ensure_session(cookie)
        with session.lock:
            account = derive_account_from_token(session, token, self.idp_pk, self.params, now)
            self.accounts.insert_if_absent(account)
            return account

    def plain_login_session(self, cookie: Optional[str]) -> RpSession:
        """Bench baseline only: session primed as if t=1 had been negotiated
        and registered, so a token bound to the permanent identity logs in."""
        session = self.ensure_session(cookie)
        with session.lock:
            session.t = Trapdoor(1)
            session.t_inv = 1
            session.pid_rp = RpPseudoId(self.id_rp.point)
            session.pid_validity = self.clock() + 10**9
            session.state = RpPhase.EXPECT_TOKEN
            session.nonce_out = self.rng.randbytes(16).hex()
        return session

    def _reset(self, session: RpSession) -> None:
        # a failed check voids the whole negotiation
        session.t = None
        session.t_inv = None
        session.pid_rp = None
        session.pid_validity = None
        session.nonce_out = None
        session.account = None
        session.state = None


class RpHttp:
    """HTTP adapter exposing the protocol paths."""

    def __init__(self, service: RpService):
        self.service = service
        cfg = service.config
        self.server = JsonHttpServer(
            {
                ("GET", "/script"): self._script,
                ("GET", "/login"): self._login,
                ("POST", "/startNegotiation"): self._start_negotiation,
                ("POST", "/registrationResult"): self._registration_result,
                ("POST", "/uploadToken"): self._upload_token,
                ("POST", "/plainLogin"): self._plain_login,
                ("GET", "/config"): self._config,
                ("GET", "/demo/"): self._demo_page,
            },
            host=cfg.host,
            port=cfg.port,
        )

    @property
    def url(self) -> str:
        return self.server.url

    def start(self) -> "RpHttp":
        self.server.start()
        return self

    def stop(self) -> None:
        self.server.stop()

    def _script(self, req: HttpRequest) -> HttpResponse:
        data = load_script(self.service.config.static_dir, RP_SCRIPT_NAME, RP_SCRIPT_FALLBACK)
        return HttpResponse(body=data, content_type="text/javascript")

    def _config(self, req: HttpRequest) -> HttpResponse:
        # the issuer script location the login window is sent to; same data
        # the 302 from /login carries, exposed for the demo page script
        return HttpResponse(body={"idp_script_url": self.service.idp_script_url,
                                  "group": self.service.params.group_id.value})

    def _demo_page(self, req: HttpRequest) -> HttpResponse:
        page = load_script(self.service.config.static_dir, "index.html",
                           b"<!doctype html><p>no demo assets configured</p>")
        return HttpResponse(body=page, content_type="text/html")

    def _login(self, req: HttpRequest) -> HttpResponse:
        session, target = self.service.handle_login_redirect(req.cookie)
        resp = HttpResponse(status=302, body=b"", headers={"Location": target})
        if session.cookie != req.cookie:
            resp.set_cookie = session.cookie
        return resp

    def _start_negotiation(self, req: HttpRequest) -> HttpResponse:
        t = (req.body or {}).get("t")
        if isinstance(t, str) and t.isdigit():
            t = int(t)
        if not isinstance(t, int) or isinstance(t, bool):
            return json_error(400, "MalformedRequest")
        try:
            session, cert = self.service.handle_start_negotiation(req.cookie, t)
        except TrapdoorOutOfRange:
            return HttpResponse(body={"result": "Fail", "error": "TrapdoorOutOfRange"})
        resp = HttpResponse(body={"cert": cert_to_wire(cert)})
        if session.cookie != req.cookie:
            resp.set_cookie = session.cookie
        return resp

    def _registration_result(self, req: HttpRequest) -> HttpResponse:
        wire = (req.body or {}).get("registration_result")
        try:
            result = registration_result_from_wire(wire, self.service.params)
        except MalformedToken:
            return json_error(400, "MalformedRequest")
        try:
            params = self.service.handle_registration_result(req.cookie, result)
        except RpError as exc:
            return HttpResponse(body={"result": "Fail", "error": exc.error_class})
        return HttpResponse(body=params.to_wire())

    def _upload_token(self, req: HttpRequest) -> HttpResponse:
        wire = (req.body or {}).get("token")
        try:
            token = token_from_wire(wire, self.service.params)
        except MalformedToken:
            return json_error(400, "MalformedRequest")
        try:
            account = self.service.handle_upload_token(req.cookie, token)
        except RpError as exc:
            return HttpResponse(body={"result": "Fail", "error": exc.error_class})
        return HttpResponse(body={"result": "LoginSuccess", "account": account.point.wire()})

    def _plain_login(self, req: HttpRequest) -> HttpResponse:
        session = self.service.plain_login_session(req.cookie)
        resp = HttpResponse(body={"result": "OK", "PID_RP": session.pid_rp.point.wire(),
                                  "Enpt": self.service.endpoint, "Nonce": session.nonce_out})
        if session.cookie != req.cookie:
            resp.set_cookie = session.cookie
        return resp
