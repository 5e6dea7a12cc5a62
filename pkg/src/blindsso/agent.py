"""Headless user agent: the two in-browser scripts as pure state machines
driven over live HTTP, with an in-process message bus standing in for
cross-window postMessage.

The trust structure of the web design is preserved exactly:

* the issuer-window script talks HTTP only to the issuer, the RP-window
  script only to the RP (a cross request would leak the RP via Referer);
* the identity token is posted between windows with an origin
  restriction, so no third window can observe it;
* the agent runs only scripts whose downloaded bytes hash to a known
  machine.

Each step function is a pure transition ``(state, input) -> (state',
commands)`` given the injected RNG stream; unmatched inputs leave the
state untouched.  Every verification failure parks the machine in the
Stop phase and the driver raises :class:`FlowHalted` with the protocol
step that failed.
"""

from __future__ import annotations

import time
import uuid
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional
from urllib.parse import urlparse

import requests

from .group import GroupParams, Rng, SYSTEM_RNG
from .signing import hash_bytes, public_key_from_pem
from .tokens import cert_from_wire, verify_cert
from .transcript import LoginTranscript, PhaseTimings, ViewEntry
from .transform import RpId, Trapdoor, derive_pid_rp
from .webassets import (
    IDP_SCRIPT_FALLBACK,
    RP_SCRIPT_FALLBACK,
    script_hash,
)


class FlowHalted(Exception):
    """A verification failed; the flow stops at the named protocol step."""

    def __init__(self, step: str, cause: str):
        self.step = step
        self.cause = cause
        super().__init__(f"halted at step {step}: {cause}")


class EndpointMismatch(Exception):
    """Token request named an endpoint other than the certified one."""


# ---------------------------------------------------------------------------
# Script inputs and commands
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SelfTrigger:
    pass


@dataclass(frozen=True)
class PostMessageInput:
    content: Mapping[str, Any]
    sender_origin: str


@dataclass(frozen=True)
class HttpResponseInput:
    ref: str
    status: int
    body: Any
    headers: Mapping[str, str]


@dataclass(frozen=True)
class HttpCommand:
    service: str  # "idp" | "rp"
    method: str
    path: str
    ref: str
    params: Mapping[str, str] = field(default_factory=dict)
    body: Any = None


@dataclass(frozen=True)
class PostMessageCommand:
    content: Mapping[str, Any]
    target_origin: Optional[str]  # None = unrestricted


@dataclass(frozen=True)
class OpenWindowCommand:
    url: str


# ---------------------------------------------------------------------------
# Issuer-window script (phases Start .. Stop)
# ---------------------------------------------------------------------------

IDP_PHASES = (
    "Start",
    "ExpectCert",
    "ExpectRegistrationResult",
    "ExpectTokenRequest",
    "ExpectLoginState",
    "ExpectLoginResult",
    "ExpectToken",
    "Stop",
)

RP_PHASES = (
    "Start",
    "ExpectT",
    "ExpectCert",
    "ExpectRegistrationResult",
    "ExpectTokenRequest",
    "ExpectToken",
    "ExpectLoginResult",
)


@dataclass(frozen=True)
class IdpScriptState:
    phase: str = "Start"
    params: Mapping[str, Any] = field(default_factory=dict)
    halt: Optional[tuple[str, str]] = None  # (step, cause)
    done: bool = False


@dataclass(frozen=True)
class RpScriptState:
    phase: str = "Start"
    params: Mapping[str, Any] = field(default_factory=dict)
    halt: Optional[tuple[str, str]] = None
    done: bool = False
    account: Optional[str] = None


@dataclass(frozen=True)
class ScriptContext:
    """Static per-flow facts the scripts close over."""

    group: GroupParams
    idp_pk: Any  # RSAPublicKey
    username: str
    password: str
    rp_login_url: str = ""
    idp_origin: str = ""


def _with(state, **updates):
    merged = dict(state.params)
    merged.update(updates.pop("params", {}))
    return replace(state, params=merged, **updates)


def _stop(state, step: str, cause: str):
    return replace(state, phase="Stop", halt=(step, cause)), []


def idp_script_step(
    state: IdpScriptState, inp, ctx: ScriptContext, rng: Rng = SYSTEM_RNG
) -> tuple[IdpScriptState, list]:
    """One transition of the issuer-window script."""
    p = state.params

    if state.phase == "Start" and isinstance(inp, SelfTrigger):
        t = ctx.group.random_scalar(1, rng)
        cmd = PostMessageCommand({"t": str(t)}, None)
        return _with(state, phase="ExpectCert", params={"t": t}), [cmd]

    if state.phase == "ExpectCert" and isinstance(inp, PostMessageInput):
        wire = inp.content.get("cert")
        if wire is None:
            return state, []
        try:
            cert = cert_from_wire(wire, ctx.group)
        except Exception as exc:
            return _stop(state, "2.3", f"unparseable certificate: {exc}")
        if not verify_cert(cert, ctx.idp_pk, ctx.group):
            return _stop(state, "2.3", "certificate signature invalid")
        t = p["t"]
        pid_rp = derive_pid_rp(RpId(cert.id_rp.point), Trapdoor(t), ctx.group)
        pseudo_endpoint = "penpt-" + rng.randbytes(16).hex()
        nonce = hash_bytes(str(t).encode()).hex()
        ref = rng.randbytes(8).hex()
        cmd = HttpCommand(
            "idp",
            "POST",
            "/dynamicRegistration",
            ref,
            body={"PID_RP": pid_rp.point.wire(), "Nonce": nonce, "Enpt": pseudo_endpoint},
        )
        return (
            _with(
                state,
                phase="ExpectRegistrationResult",
                params={
                    "cert_endpoint": cert.endpoint,
                    "pid_rp": pid_rp.point.wire(),
                    "pseudo_endpoint": pseudo_endpoint,
                    "nonce_t": nonce,
                    "ref": ref,
                },
            ),
            [cmd],
        )

    if state.phase == "ExpectRegistrationResult" and isinstance(inp, HttpResponseInput):
        if inp.ref != p.get("ref"):
            return state, []
        wire = (inp.body or {}).get("registration_result")
        if not wire:
            return _stop(state, "3.3", "no registration result in response")
        if wire.get("content", {}).get("status") != "OK":
            return _stop(state, "3", "issuer rejected the blinded identity")
        cmd = PostMessageCommand({"registration_result": wire}, None)
        return _with(state, phase="ExpectTokenRequest"), [cmd]

    if state.phase == "ExpectTokenRequest" and isinstance(inp, PostMessageInput):
        if "PID_RP" not in inp.content:
            return state, []
        rp_endpoint = inp.content.get("Enpt")
        if rp_endpoint != p["cert_endpoint"]:
            return _stop(state, "4.1", "endpoint does not match the certificate")
        if inp.content.get("PID_RP") != p["pid_rp"]:
            return _stop(state, "4.1", "blinded identity mismatch in token request")
        ref = rng.randbytes(8).hex()
        cmd = HttpCommand("idp", "GET", "/loginInfo", ref)
        return (
            _with(
                state,
                phase="ExpectLoginState",
                params={"rp_endpoint": rp_endpoint, "nonce_out": inp.content.get("Nonce"), "ref": ref},
            ),
            [cmd],
        )

    if state.phase == "ExpectLoginState" and isinstance(inp, HttpResponseInput):
        if inp.ref != p.get("ref"):
            return state, []
        status = (inp.body or {}).get("result")
        if status == "Logged":
            return _authorize(state, ctx, rng)
        ref = rng.randbytes(8).hex()
        cmd = HttpCommand(
            "idp",
            "POST",
            "/login",
            ref,
            body={"credential": {"username": ctx.username, "password": ctx.password}},
        )
        return _with(state, phase="ExpectLoginResult", params={"ref": ref}), [cmd]

    if state.phase == "ExpectLoginResult" and isinstance(inp, HttpResponseInput):
        if inp.ref != p.get("ref"):
            return state, []
        if (inp.body or {}).get("result") != "LoginSuccess":
            return _stop(state, "4.2", "authentication failed")
        return _authorize(state, ctx, rng)

    if state.phase == "ExpectToken" and isinstance(inp, HttpResponseInput):
        if inp.ref != p.get("ref"):
            return state, []
        body = inp.body or {}
        if body.get("result") != "OK" or "token" not in body:
            return _stop(state, "4.3", f"token issuance failed: {body.get('error', 'Fail')}")
        # deliver to the RP window only: origin pinned to the certified endpoint
        rp_origin = _origin_of(p["rp_endpoint"])
        cmd = PostMessageCommand({"token": body["token"]}, rp_origin)
        return _with(state, phase="Stop", done=True), [cmd]

    return state, []


def _authorize(state: IdpScriptState, ctx: ScriptContext, rng: Rng):
    p = state.params
    ref = rng.randbytes(8).hex()
    # the certified endpoint is replaced by the per-login pseudo-endpoint
    cmd = HttpCommand(
        "idp",
        "GET",
        "/authorize",
        ref,
        params={"PID_RP": p["pid_rp"], "Enpt": p["pseudo_endpoint"], "Nonce": p["nonce_out"] or ""},
    )
    return _with(state, phase="ExpectToken", params={"ref": ref}), [cmd]


def endpoint_substitution(token_request: Mapping[str, str], pseudo_endpoint: str, cert_endpoint: str) -> dict:
    """Swap the RP endpoint for the per-login pseudo-endpoint.

    The original endpoint must already equal the certified one; the caller
    keeps it for the final token forwarding.
    """
    if token_request.get("Enpt") != cert_endpoint:
        raise EndpointMismatch(
            f"token request endpoint {token_request.get('Enpt')!r} != certified {cert_endpoint!r}"
        )
    out = dict(token_request)
    out["Enpt"] = pseudo_endpoint
    return out


def _origin_of(url: str) -> str:
    parsed = urlparse(url)
    return f"{parsed.scheme}://{parsed.netloc}"


def rp_script_step(
    state: RpScriptState, inp, ctx: ScriptContext, rng: Rng = SYSTEM_RNG
) -> tuple[RpScriptState, list]:
    """One transition of the RP-window script."""
    p = state.params

    if state.phase == "Start" and isinstance(inp, SelfTrigger):
        return _with(state, phase="ExpectT"), [OpenWindowCommand(ctx.rp_login_url)]

    if state.phase == "ExpectT" and isinstance(inp, PostMessageInput):
        t = inp.content.get("t")
        if t is None:
            return state, []
        ref = rng.randbytes(8).hex()
        cmd = HttpCommand("rp", "POST", "/startNegotiation", ref, body={"t": int(t)})
        return _with(state, phase="ExpectCert", params={"ref": ref, "t": int(t)}), [cmd]

    if state.phase == "ExpectCert" and isinstance(inp, HttpResponseInput):
        if inp.ref != p.get("ref"):
            return state, []
        body = inp.body or {}
        if "cert" not in body:
            return _stop(state, "2.2", f"negotiation failed: {body.get('error', 'Fail')}")
        cmd = PostMessageCommand({"cert": body["cert"]}, ctx.idp_origin)
        return _with(state, phase="ExpectRegistrationResult"), [cmd]

    if state.phase == "ExpectRegistrationResult" and isinstance(inp, PostMessageInput):
        wire = inp.content.get("registration_result")
        if wire is None:
            return state, []
        ref = rng.randbytes(8).hex()
        cmd = HttpCommand("rp", "POST", "/registrationResult", ref, body={"registration_result": wire})
        return _with(state, phase="ExpectTokenRequest", params={"ref": ref}), [cmd]

    if state.phase == "ExpectTokenRequest" and isinstance(inp, HttpResponseInput):
        if inp.ref != p.get("ref"):
            return state, []
        body = inp.body or {}
        if "PID_RP" not in body:
            return _stop(state, "3.4", f"rp rejected registration result: {body.get('error', 'Fail')}")
        content = {"PID_RP": body["PID_RP"], "Enpt": body["Enpt"], "Nonce": body["Nonce"]}
        cmd = PostMessageCommand(content, ctx.idp_origin)
        return _with(state, phase="ExpectToken"), [cmd]

    if state.phase == "ExpectToken" and isinstance(inp, PostMessageInput):
        wire = inp.content.get("token")
        if wire is None:
            return state, []
        ref = rng.randbytes(8).hex()
        cmd = HttpCommand("rp", "POST", "/uploadToken", ref, body={"token": wire})
        return _with(state, phase="ExpectLoginResult", params={"ref": ref}), [cmd]

    if state.phase == "ExpectLoginResult" and isinstance(inp, HttpResponseInput):
        if inp.ref != p.get("ref"):
            return state, []
        body = inp.body or {}
        if body.get("result") != "LoginSuccess":
            return _stop(state, "5.2", f"rp rejected the token: {body.get('error', 'Fail')}")
        return replace(state, done=True, account=body.get("account")), []

    return state, []


# ---------------------------------------------------------------------------
# Windows and postMessage bus
# ---------------------------------------------------------------------------


@dataclass
class Window:
    window_id: str
    origin: str
    inbox: deque = field(default_factory=deque)


class MessageBus:
    """Models cross-window postMessage with origin restriction.

    A message restricted to an origin is dropped unless the target window
    was created from that origin; a registered eavesdropper window only
    ever sees messages addressed to it.
    """

    def __init__(self):
        self.windows: dict[str, Window] = {}
        self.log: list[dict] = []

    def register(self, window_id: str, origin: str) -> Window:
        win = Window(window_id, origin)
        self.windows[window_id] = win
        return win

    def post(
        self,
        sender_id: str,
        target_id: str,
        content: Mapping[str, Any],
        target_origin: Optional[str],
    ) -> bool:
        target = self.windows[target_id]
        delivered = target_origin is None or target.origin == target_origin
        self.log.append(
            {
                "sender": sender_id,
                "target": target_id,
                "target_origin": target_origin,
                "delivered": delivered,
                "keys": sorted(content.keys()),
            }
        )
        if delivered:
            sender_origin = self.windows[sender_id].origin if sender_id in self.windows else ""
            target.inbox.append(PostMessageInput(dict(content), sender_origin))
        return delivered


# ---------------------------------------------------------------------------
# Flow driver
# ---------------------------------------------------------------------------


def default_trusted_scripts() -> dict[str, str]:
    return {
        script_hash(IDP_SCRIPT_FALLBACK): "idp",
        script_hash(RP_SCRIPT_FALLBACK): "rp",
    }


_PHASE1_PATHS = {
    "/script", "/login", "/loginInfo", "/startNegotiation",
    "/dynamicRegistration", "/registrationResult",
}


class _FlowDriver:
    def __init__(
        self,
        idp_url: str,
        rp_url: str,
        username: str,
        password: str,
        rng: Rng,
        group: GroupParams,
        trusted_scripts: dict[str, str],
        attacker_origin: Optional[str],
    ):
        self.idp_url = idp_url
        self.rp_url = rp_url
        self.group = group
        self.rng = rng
        self.trusted = trusted_scripts
        self.username = username
        self.password = password
        self.http = {"idp": requests.Session(), "rp": requests.Session()}
        self.base = {"idp": idp_url, "rp": rp_url}
        self.bus = MessageBus()
        self.attacker: Optional[Window] = None
        if attacker_origin:
            self.attacker = self.bus.register("attacker", attacker_origin)
        self.idp_view: list[ViewEntry] = []
        self.rp_view: list[ViewEntry] = []
        self.agent_view: list[ViewEntry] = []
        self.timings = PhaseTimings()
        self.phase_clock = time.perf_counter
        self._flow_start: float = 0.0
        self._authorize_end: Optional[float] = None

    def _view(self, service: str) -> list[ViewEntry]:
        return self.idp_view if service == "idp" else self.rp_view

    def _request(self, service: str, method: str, path: str, params=None, body=None):
        url = self.base[service] + path
        view = self._view(service)
        view.append(ViewEntry.of("request", path, {"params": params or {}, "body": body or {}}))
        started = self.phase_clock()
        if method == "GET":
            resp = self.http[service].get(url, params=params or None, allow_redirects=False)
        else:
            resp = self.http[service].post(url, json=body)
        elapsed_ms = (self.phase_clock() - started) * 1000
        try:
            payload = resp.json()
        except ValueError:
            payload = None
        view.append(ViewEntry.of("response", path, payload if payload is not None else {}))
        if path == "/authorize":
            # milestone accounting: everything before token issuance is
            # preparation, the issuance round trip stands alone, and the
            # remainder through LoginSuccess is acceptance
            self.timings.prepare_request_ms = (started - self._flow_start) * 1000
            self.timings.token_generation_ms = elapsed_ms
            self._authorize_end = self.phase_clock()
        return resp, payload

    def fetch_script(self, service: str) -> str:
        url = self.base[service] + "/script"
        resp = self.http[service].get(url)
        digest = script_hash(resp.content)
        kind = self.trusted.get(digest)
        if kind is None:
            raise FlowHalted("1", f"unrecognized {service} script (sha256 {digest[:16]}...)")
        self.agent_view.append(ViewEntry.of("script", f"{service}/script", {"sha256": digest}))
        return kind

    def run(self) -> LoginTranscript:
        self._flow_start = self.phase_clock()
        # step 1: scripts and windows
        if self.fetch_script("rp") != "rp":
            raise FlowHalted("1.1", "rp served a non-rp script")
        rp_window = self.bus.register("rp-window", self.rp_url)

        resp, _ = self._request("rp", "GET", "/login")
        if resp.status_code != 302 or "Location" not in resp.headers:
            raise FlowHalted("1.2", "rp /login did not redirect to the issuer")
        idp_page = resp.headers["Location"]

        if self.fetch_script("idp") != "idp":
            raise FlowHalted("1.3", "issuer served a non-issuer script")
        pk_resp = self.http["idp"].get(self.base["idp"] + "/pk")
        idp_pk = public_key_from_pem(pk_resp.content)
        idp_window = self.bus.register("idp-window", _origin_of(idp_page))

        ctx = ScriptContext(
            group=self.group,
            idp_pk=idp_pk,
            username=self.username,
            password=self.password,
            rp_login_url=self.rp_url + "/login",
            idp_origin=_origin_of(idp_page),
        )

        machines: dict[str, Any] = {
            "idp-window": IdpScriptState(),
            "rp-window": RpScriptState(),
        }
        steps = {"idp-window": idp_script_step, "rp-window": rp_script_step}
        peers = {"idp-window": "rp-window", "rp-window": "idp-window"}
        services = {"idp-window": "idp", "rp-window": "rp"}
        pending: deque[tuple[str, Any]] = deque(
            [("idp-window", SelfTrigger()), ("rp-window", SelfTrigger())]
        )

        while True:
            rp_state = machines["rp-window"]
            idp_state = machines["idp-window"]
            for st in (idp_state, rp_state):
                if st.halt is not None:
                    raise FlowHalted(*st.halt)
            if rp_state.done:
                break
            if not pending:
                for win_id in machines:
                    while self.bus.windows[win_id].inbox:
                        pending.append((win_id, self.bus.windows[win_id].inbox.popleft()))
                if not pending:
                    raise FlowHalted("stalled", "no deliverable inputs remain")

            win_id, inp = pending.popleft()
            step = steps[win_id]
            state, commands = step(machines[win_id], inp, ctx, self.rng)
            machines[win_id] = state
            for cmd in commands:
                if isinstance(cmd, OpenWindowCommand):
                    continue  # window creation handled during step 1
                if isinstance(cmd, PostMessageCommand):
                    self.agent_view.append(
                        ViewEntry.of(
                            "postMessage",
                            f"{win_id}->{peers[win_id]}",
                            {"keys": ",".join(sorted(cmd.content.keys())),
                             "origin": cmd.target_origin or "*"},
                        )
                    )
                    self.bus.post(win_id, peers[win_id], cmd.content, cmd.target_origin)
                elif isinstance(cmd, HttpCommand):
                    # scripts only ever call their own service; a cross call
                    # would leak the RP to the issuer via Referer
                    if cmd.service != services[win_id]:
                        raise FlowHalted("origin", f"{win_id} tried to call {cmd.service}")
                    resp, payload = self._request(
                        cmd.service, cmd.method, cmd.path, dict(cmd.params), cmd.body
                    )
                    pending.append(
                        (win_id, HttpResponseInput(cmd.ref, resp.status_code, payload, dict(resp.headers)))
                    )

        if self._authorize_end is not None:
            self.timings.token_acceptance_ms = (self.phase_clock() - self._authorize_end) * 1000

        idp_final: IdpScriptState = machines["idp-window"]
        rp_final: RpScriptState = machines["rp-window"]
        p = idp_final.params
        token_wire = None
        for entry in reversed(self.rp_view):
            if entry.kind == "request" and entry.path == "/uploadToken":
                token_wire = entry
                break
        pid_u = token_wire.values.get("body.token.content.pid_u", "") if token_wire else ""
        return LoginTranscript(
            instance_id=uuid.uuid4().hex,
            username=self.username,
            rp_url=self.rp_url,
            idp_url=self.idp_url,
            trapdoor=p.get("t", 0),
            pid_rp=p.get("pid_rp", ""),
            pid_u=pid_u,
            pseudo_endpoint=p.get("pseudo_endpoint", ""),
            account=rp_final.account or "",
            idp_view=self.idp_view,
            rp_view=self.rp_view,
            agent_view=self.agent_view,
            timings=self.timings,
        )


def run_login_flow(
    idp_url: str,
    rp_url: str,
    username: str,
    password: str,
    rng: Rng = SYSTEM_RNG,
    group: Optional[GroupParams] = None,
    trusted_scripts: Optional[dict[str, str]] = None,
    attacker_origin: Optional[str] = None,
) -> LoginTranscript:
    """Drive one complete login against live services; returns the transcript.

    Raises :class:`FlowHalted` the moment any verification fails.
    """
    if group is None:
        raise ValueError("group parameters are required")
    driver = _FlowDriver(
        idp_url,
        rp_url,
        username,
        password,
        rng,
        group,
        trusted_scripts or default_trusted_scripts(),
        attacker_origin,
    )
    transcript = driver.run()
    if attacker_origin and driver.attacker is not None:
        transcript.agent_view.append(
            ViewEntry.of(
                "eavesdropper",
                "attacker",
                {"observed": str(len(driver.attacker.inbox))},
            )
        )
    return transcript
