"""The identity-provider service: session login, blinded-RP registration
and identity-token issuance.

The core class is transport-free; :class:`IdpHttp` exposes it over HTTP
with the endpoint set the user-agent scripts expect: GET /script,
POST /login, GET /loginInfo, POST /dynamicRegistration, GET /authorize
(plus GET /pk so agents can fetch the verification key that the browser
script downloads from the same origin).

The load-bearing invariant lives in ``handle_dynamic_registration``: the
collision check against unexpired registrations and the insert happen
under one lock, so a blinded RP identity is only ever registered once per
validity window no matter how many requests race.
"""

from __future__ import annotations

import json
import secrets
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .group import GroupParams, InvalidElement, Rng, SYSTEM_RNG
from .httpbase import HttpRequest, HttpResponse, JsonHttpServer, json_error
from .signing import SigningKeyPair, hash_bytes
from .tokens import (
    Clock,
    IdentityToken,
    PidRegistrationRequest,
    PidRegistrationResult,
    RpCertificate,
    Validity,
    cert_to_wire,
    issue_cert,
    issue_registration_result,
    issue_token,
    registration_result_to_wire,
    token_to_wire,
    system_clock,
)
from .transform import DegenerateIdentity, IdRegistry, RpPseudoId, UserId, derive_pid_u
from .webassets import IDP_SCRIPT_FALLBACK, IDP_SCRIPT_NAME, load_script


class IdpError(Exception):
    error_class = "Fail"


class Unauthenticated(IdpError):
    error_class = "Unauthenticated"


class UnknownPid(IdpError):
    error_class = "UnknownPid"


class Duplicate(IdpError):
    error_class = "Duplicate"


class MalformedRequest(IdpError):
    error_class = "MalformedRequest"


LOGIN_SUCCESS = "LoginSuccess"
LOGIN_FAILURE = "LoginFailure"
LOGGED = "Logged"
UNLOGGED = "Unlogged"


@dataclass
class IdpConfig:
    issuer: str = "https://idp.example"
    validity_secs: int = 180
    host: str = "127.0.0.1"
    port: int = 0
    static_dir: Optional[str] = None
    # bench baseline only: lets /authorize accept a permanent RP identity
    # with its certified endpoint, skipping blinding and registration
    allow_plain: bool = False
    # standalone deployments: where the signing key and durable registries live
    group_id: str = "toy"
    key_path: Optional[str] = None
    registry_path: Optional[str] = None

    @classmethod
    def from_file(cls, path: str | Path) -> "IdpConfig":
        data = json.loads(Path(path).read_text())
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown idp config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class Session:
    cookie: str
    uid: Optional[UserId] = None


@dataclass
class _UserRecord:
    salt: bytes
    pw_hash: bytes
    user_id: UserId
    attributes: dict[str, str] = field(default_factory=dict)


@dataclass
class _PidEntry:
    pid_rp: RpPseudoId
    pseudo_endpoint: str
    nonce: bytes
    validity: int


class PasswordStore:
    """Salted-hash credential verifier; swap this class for another scheme."""

    def __init__(self):
        self._users: dict[str, _UserRecord] = {}

    def add(self, username: str, password: str, user_id: UserId, attributes: dict[str, str]):
        salt = secrets.token_bytes(16)
        self._users[username] = _UserRecord(
            salt, hash_bytes(salt + password.encode()), user_id, dict(attributes)
        )

    def __contains__(self, username: str) -> bool:
        return username in self._users

    def verify(self, username: str, password: str) -> Optional[_UserRecord]:
        rec = self._users.get(username)
        if rec is None:
            return None
        if hash_bytes(rec.salt + password.encode()) != rec.pw_hash:
            return None
        return rec

    def items(self):
        return self._users.items()


class IdpService:
    """Transport-free IdP core. All handlers take explicit time."""

    def __init__(
        self,
        params: GroupParams,
        keypair: SigningKeyPair,
        config: IdpConfig | None = None,
        clock: Clock = system_clock,
        rng: Rng = SYSTEM_RNG,
    ):
        self.params = params
        self.keypair = keypair
        self.config = config or IdpConfig()
        self.clock = clock
        self.rng = rng
        self.validity = Validity(self.config.validity_secs)
        self.id_registry = IdRegistry(params)
        self.passwords = PasswordStore()
        self.sessions: dict[str, Session] = {}
        self.rp_certs: dict[str, RpCertificate] = {}  # endpoint -> cert
        self.pid_registry: list[_PidEntry] = []
        self.token_log: list[IdentityToken] = []
        self.receive_log: list[dict] = []
        self._lock = threading.Lock()

    # -- administrative registration (out of band, not a protocol path) -----

    def register_user(self, username: str, password: str, attributes: dict[str, str] | None = None) -> UserId:
        with self._lock:
            if username in self.passwords:
                raise Duplicate(f"username {username!r} already registered")
        user_id = self.id_registry.new_user_id(self.rng)
        with self._lock:
            self.passwords.add(username, password, user_id, attributes or {})
        return user_id

    def register_rp(self, endpoint: str, supplementary: dict[str, str] | None = None) -> RpCertificate:
        with self._lock:
            if endpoint in self.rp_certs:
                raise Duplicate(f"endpoint {endpoint!r} already registered")
        # the blinding exponent r lives only inside new_rp_id
        id_rp = self.id_registry.new_rp_id(self.rng)
        cert = issue_cert(id_rp, endpoint, supplementary or {}, self.keypair)
        with self._lock:
            self.rp_certs[endpoint] = cert
        return cert

    # -- sessions ------------------------------------------------------------

    def ensure_session(self, cookie: Optional[str]) -> Session:
        with self._lock:
            if cookie and cookie in self.sessions:
                return self.sessions[cookie]
            fresh = secrets.token_hex(16)
            session = Session(cookie=fresh)
            self.sessions[fresh] = session
            return session

    def _record(self, path: str, **values):
        with self._lock:
            self.receive_log.append({"path": path, **values})

    # -- protocol handlers ----------------------------------------------------

    def handle_login(self, cookie: Optional[str], credential: dict) -> tuple[Session, str]:
        session = self.ensure_session(cookie)
        username = str(credential.get("username", ""))
        password = str(credential.get("password", ""))
        self._record("/login", username=username)
        rec = self.passwords.verify(username, password)
        if rec is None:
            # wrong password and unknown user are indistinguishable
            return session, LOGIN_FAILURE
        with self._lock:
            session.uid = rec.user_id
        return session, LOGIN_SUCCESS

    def handle_login_info(self, cookie: Optional[str]) -> tuple[Session, str]:
        session = self.ensure_session(cookie)
        self._record("/loginInfo")
        return session, LOGGED if session.uid is not None else UNLOGGED

    def handle_dynamic_registration(
        self, req: PidRegistrationRequest, now: Optional[int] = None
    ) -> PidRegistrationResult:
        now = self.clock() if now is None else now
        self._record(
            "/dynamicRegistration",
            pid_rp=req.pid_rp.point.wire(),
            pseudo_endpoint=req.pseudo_endpoint,
            nonce=req.nonce.hex(),
        )
        with self._lock:
            collision = any(
                entry.pid_rp == req.pid_rp and now <= entry.validity
                for entry in self.pid_registry
            )
            if not collision:
                self.pid_registry.append(
                    _PidEntry(req.pid_rp, req.pseudo_endpoint, req.nonce,
                              now + self.validity.duration)
                )
        return issue_registration_result(req, not collision, now, self.validity, self.keypair)

    def handle_authorize(
        self,
        cookie: Optional[str],
        pid_rp_wire: str,
        endpoint: str,
        nonce: str,
        now: Optional[int] = None,
    ) -> dict:
        now = self.clock() if now is None else now
        self._record("/authorize", pid_rp=pid_rp_wire, endpoint=endpoint, nonce=nonce)
        session = self.ensure_session(cookie)
        if session.uid is None:
            raise Unauthenticated("no authenticated user on this session")
        try:
            pid_rp = RpPseudoId(self.params.element_from_wire(pid_rp_wire))
        except (InvalidElement, DegenerateIdentity) as exc:
            raise UnknownPid(f"not a usable group element: {pid_rp_wire!r}") from exc
        with self._lock:
            registered = any(
                entry.pid_rp == pid_rp
                and entry.pseudo_endpoint == endpoint
                and now <= entry.validity
                for entry in self.pid_registry
            )
            plain_ok = False
            if self.config.allow_plain and not registered:
                plain_ok = any(
                    cert.id_rp.point == pid_rp.point and cert.endpoint == endpoint
                    for cert in self.rp_certs.values()
                )
            attributes = dict(self._attributes_of(session.uid))
        if not registered and not plain_ok:
            raise UnknownPid("pseudo-identity and endpoint pair is not registered")
        pid_u = derive_pid_u(session.uid, pid_rp, self.params)
        token = issue_token(
            pid_rp, pid_u, self.config.issuer, attributes, now, self.validity, self.keypair
        )
        with self._lock:
            self.token_log.append(token)
        # the response is addressed to the registered pseudo-endpoint; the
        # nonce rides along outside the signed content
        return {"result": "OK", "token": token_to_wire(token), "nonce": nonce,
                "pseudo_endpoint": endpoint}

    def _attributes_of(self, uid: UserId) -> dict[str, str]:
        for _, rec in self.passwords.items():
            if rec.user_id == uid:
                return rec.attributes
        return {}

    def prune_expired(self, now: Optional[int] = None) -> int:
        now = self.clock() if now is None else now
        with self._lock:
            before = len(self.pid_registry)
            self.pid_registry = [e for e in self.pid_registry if now <= e.validity]
            return before - len(self.pid_registry)

    # -- durable registries ----------------------------------------------------

    def save_registry(self, path: str | Path) -> None:
        """Snapshot users and RP certificates (sessions are memory-only)."""
        data = {
            "users": [
                {
                    "username": name,
                    "salt": rec.salt.hex(),
                    "pw_hash": rec.pw_hash.hex(),
                    "uid": rec.user_id.value,
                    "attributes": rec.attributes,
                }
                for name, rec in self.passwords.items()
            ],
            "rp_certs": [cert_to_wire(cert) for cert in self.rp_certs.values()],
        }
        Path(path).write_text(json.dumps(data, indent=1))

    def load_registry(self, path: str | Path) -> None:
        from .tokens import cert_from_wire

        data = json.loads(Path(path).read_text())
        with self._lock:
            for u in data["users"]:
                rec = _UserRecord(
                    bytes.fromhex(u["salt"]),
                    bytes.fromhex(u["pw_hash"]),
                    UserId(u["uid"]),
                    dict(u["attributes"]),
                )
                self.passwords._users[u["username"]] = rec
                self.id_registry._user_ids.add(u["uid"])
            for wire in data["rp_certs"]:
                cert = cert_from_wire(wire, self.params)
                self.rp_certs[cert.endpoint] = cert
                self.id_registry._rp_points.add(cert.id_rp.point)


class IdpHttp:
    """HTTP adapter exposing the protocol paths."""

    def __init__(self, service: IdpService):
        self.service = service
        cfg = service.config
        self.server = JsonHttpServer(
            {
                ("GET", "/script"): self._script,
                ("GET", "/pk"): self._pk,
                ("POST", "/login"): self._login,
                ("GET", "/loginInfo"): self._login_info,
                ("POST", "/dynamicRegistration"): self._dynamic_registration,
                ("GET", "/authorize"): self._authorize,
                ("GET", "/config"): self._config,
                ("GET", "/demo/"): self._demo_page,
            },
            host=cfg.host,
            port=cfg.port,
        )

    @property
    def url(self) -> str:
        return self.server.url

    def start(self) -> "IdpHttp":
        self.server.start()
        return self

    def stop(self) -> None:
        self.server.stop()

    def _script(self, req: HttpRequest) -> HttpResponse:
        data = load_script(self.service.config.static_dir, IDP_SCRIPT_NAME, IDP_SCRIPT_FALLBACK)
        return HttpResponse(body=data, content_type="text/javascript")

    def _demo_page(self, req: HttpRequest) -> HttpResponse:
        page = load_script(self.service.config.static_dir, "index.html",
                           b"<!doctype html><p>no demo assets configured</p>")
        return HttpResponse(body=page, content_type="text/html")

    def _pk(self, req: HttpRequest) -> HttpResponse:
        return HttpResponse(
            body=self.service.keypair.public_pem(), content_type="application/x-pem-file"
        )

    def _config(self, req: HttpRequest) -> HttpResponse:
        return HttpResponse(body={"issuer": self.service.config.issuer,
                                  "group": self.service.params.group_id.value})

    def _login(self, req: HttpRequest) -> HttpResponse:
        credential = (req.body or {}).get("credential")
        if not isinstance(credential, dict):
            return json_error(400, MalformedRequest.error_class)
        session, outcome = self.service.handle_login(req.cookie, credential)
        resp = HttpResponse(body={"result": outcome})
        if session.cookie != req.cookie:
            resp.set_cookie = session.cookie
        return resp

    def _login_info(self, req: HttpRequest) -> HttpResponse:
        session, state = self.service.handle_login_info(req.cookie)
        resp = HttpResponse(body={"result": state})
        if session.cookie != req.cookie:
            resp.set_cookie = session.cookie
        return resp

    def _dynamic_registration(self, req: HttpRequest) -> HttpResponse:
        body = req.body or {}
        pid_wire = body.get("PID_RP")
        penpt = body.get("Enpt")
        nonce_hex = body.get("Nonce")
        if not all(isinstance(v, str) and v for v in (pid_wire, penpt, nonce_hex)):
            return json_error(400, MalformedRequest.error_class)
        try:
            pid_rp = RpPseudoId(self.service.params.element_from_wire(pid_wire))
            nonce = bytes.fromhex(nonce_hex)
            request = PidRegistrationRequest(pid_rp, penpt, nonce)
        except Exception:
            return json_error(400, MalformedRequest.error_class)
        result = self.service.handle_dynamic_registration(request)
        return HttpResponse(body={"registration_result": registration_result_to_wire(result)})

    def _authorize(self, req: HttpRequest) -> HttpResponse:
        pid_wire = req.query.get("PID_RP", "")
        endpoint = req.query.get("Enpt", "")
        nonce = req.query.get("Nonce", "")
        try:
            envelope = self.service.handle_authorize(req.cookie, pid_wire, endpoint, nonce)
        except IdpError as exc:
            # bare Fail plus a distinguishing class, unsigned by design
            return HttpResponse(body={"result": "Fail", "error": exc.error_class})
        return HttpResponse(body=envelope)
