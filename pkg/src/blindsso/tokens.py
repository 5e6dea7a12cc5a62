"""The three issuer-signed artifacts and their encodings.

Artifacts travel as JSON ``{"content": {...}, "sig": "<base64>"}``.  The
signature never covers the JSON text: it covers ``canonical_bytes`` of the
content, a length-prefixed binary layout with a per-artifact type tag, so
whitespace, key order and unicode quirks cannot break verification.  The
browser front end reproduces the same bytes.

Canonical layout: ``tag || field_1 || ... || field_k`` where every piece
is ``len(4-byte BE) || bytes``.  Strings are UTF-8, integers 8-byte BE,
group elements their canonical encoding, string maps a 4-byte BE pair
count followed by key/value pieces in sorted key order.
"""

from __future__ import annotations

import base64
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping
from urllib.parse import urlparse

from cryptography.hazmat.primitives.asymmetric.rsa import RSAPublicKey

from .group import GroupParams, InvalidElement
from .signing import DIGEST_LEN, SigningKeyPair, verify
from .transform import RpId, RpPseudoId, UserPseudoId

Clock = Callable[[], int]


def system_clock() -> int:
    return int(time.time())


class MalformedEndpoint(Exception):
    """Endpoint is not an absolute URL."""


class MalformedToken(Exception):
    """Artifact wire form is structurally broken."""


class SignatureInvalid(Exception):
    """Artifact signature does not verify under the issuer key."""


class Expired(Exception):
    """Artifact presented after its validity instant."""


@dataclass(frozen=True)
class Validity:
    """How long issued artifacts stay valid, in seconds."""

    duration: int = 180

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("validity duration must be positive")


@dataclass(frozen=True)
class RpCertificate:
    """Issuer-signed binding of an RP identity to its token endpoint."""

    id_rp: RpId
    endpoint: str
    supplementary: Mapping[str, str]
    sig: bytes


@dataclass(frozen=True)
class PidRegistrationRequest:
    pid_rp: RpPseudoId
    pseudo_endpoint: str
    nonce: bytes  # H(t), 32 bytes

    def __post_init__(self):
        if len(self.nonce) != DIGEST_LEN:
            raise MalformedToken(f"nonce must be {DIGEST_LEN} bytes")


STATUS_OK = "OK"
STATUS_FAIL = "Fail"


@dataclass(frozen=True)
class PidRegistrationResult:
    """Signed outcome of registering a blinded RP identity.

    Fail results are signed too; their validity field is fixed to 0
    since a rejection carries no expiry obligation.
    """

    status: str
    pid_rp: RpPseudoId
    nonce: bytes
    validity: int
    sig: bytes

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


@dataclass(frozen=True)
class IdentityToken:
    pid_rp: RpPseudoId
    pid_u: UserPseudoId
    issuer: str
    validity: int
    attributes: Mapping[str, str]
    sig: bytes


# ---------------------------------------------------------------------------
# Canonical encoding
# ---------------------------------------------------------------------------

TAG_CERT = "rp-certificate/v1"
TAG_REGISTRATION = "pid-registration-result/v1"
TAG_TOKEN = "identity-token/v1"


def _piece(raw: bytes) -> bytes:
    return len(raw).to_bytes(4, "big") + raw


def _enc_str(s: str) -> bytes:
    return _piece(s.encode("utf-8"))


def _enc_int(v: int) -> bytes:
    return _piece(v.to_bytes(8, "big"))


def _enc_map(m: Mapping[str, str]) -> bytes:
    items = sorted(m.items())
    body = len(items).to_bytes(4, "big")
    for k, v in items:
        body += _enc_str(k) + _enc_str(v)
    return _piece(body)


def cert_content_bytes(id_rp: RpId, endpoint: str, supplementary: Mapping[str, str]) -> bytes:
    return _enc_str(TAG_CERT) + _piece(id_rp.point.data) + _enc_str(endpoint) + _enc_map(supplementary)


def registration_content_bytes(status: str, pid_rp: RpPseudoId, nonce: bytes, validity: int) -> bytes:
    return (
        _enc_str(TAG_REGISTRATION)
        + _enc_str(status)
        + _piece(pid_rp.point.data)
        + _piece(nonce)
        + _enc_int(validity)
    )


def token_content_bytes(
    pid_rp: RpPseudoId,
    pid_u: UserPseudoId,
    issuer: str,
    validity: int,
    attributes: Mapping[str, str],
) -> bytes:
    return (
        _enc_str(TAG_TOKEN)
        + _piece(pid_rp.point.data)
        + _piece(pid_u.point.data)
        + _enc_str(issuer)
        + _enc_int(validity)
        + _enc_map(attributes)
    )


def canonical_bytes(artifact) -> bytes:
    """Deterministic, injective encoding of a signed artifact's content."""
    if isinstance(artifact, RpCertificate):
        return cert_content_bytes(artifact.id_rp, artifact.endpoint, artifact.supplementary)
    if isinstance(artifact, PidRegistrationResult):
        return registration_content_bytes(
            artifact.status, artifact.pid_rp, artifact.nonce, artifact.validity
        )
    if isinstance(artifact, IdentityToken):
        return token_content_bytes(
            artifact.pid_rp, artifact.pid_u, artifact.issuer, artifact.validity, artifact.attributes
        )
    raise TypeError(f"no canonical encoding for {type(artifact).__name__}")


# ---------------------------------------------------------------------------
# Issue / verify
# ---------------------------------------------------------------------------


def issue_cert(
    id_rp: RpId,
    endpoint: str,
    supplementary: Mapping[str, str],
    kp: SigningKeyPair,
) -> RpCertificate:
    parsed = urlparse(endpoint)
    if not parsed.scheme or not parsed.netloc:
        raise MalformedEndpoint(f"endpoint must be an absolute URL: {endpoint!r}")
    supplementary = dict(supplementary)
    sig = kp.sign(cert_content_bytes(id_rp, endpoint, supplementary))
    return RpCertificate(id_rp, endpoint, supplementary, sig)


def verify_cert(cert: RpCertificate, pk: RSAPublicKey, params: GroupParams) -> bool:
    """True iff the signature holds and the bound id is a real group member."""
    try:
        params.element_from_bytes(cert.id_rp.point.data)
    except InvalidElement:
        return False
    return verify(canonical_bytes(cert), cert.sig, pk)


def issue_registration_result(
    req: PidRegistrationRequest,
    ok: bool,
    now: int,
    validity_cfg: Validity,
    kp: SigningKeyPair,
) -> PidRegistrationResult:
    status = STATUS_OK if ok else STATUS_FAIL
    validity = now + validity_cfg.duration if ok else 0
    sig = kp.sign(registration_content_bytes(status, req.pid_rp, req.nonce, validity))
    return PidRegistrationResult(status, req.pid_rp, req.nonce, validity, sig)


def verify_registration_result(result: PidRegistrationResult, pk: RSAPublicKey) -> bool:
    return verify(canonical_bytes(result), result.sig, pk)


def issue_token(
    pid_rp: RpPseudoId,
    pid_u: UserPseudoId,
    issuer: str,
    attributes: Mapping[str, str],
    now: int,
    validity_cfg: Validity,
    kp: SigningKeyPair,
) -> IdentityToken:
    attributes = dict(attributes)
    validity = now + validity_cfg.duration
    sig = kp.sign(token_content_bytes(pid_rp, pid_u, issuer, validity, attributes))
    return IdentityToken(pid_rp, pid_u, issuer, validity, attributes, sig)


def verify_token(token: IdentityToken, pk: RSAPublicKey, now: int) -> IdentityToken:
    """Return the token iff its signature holds and it has not expired.

    Raises SignatureInvalid or Expired so the caller can log which
    violation class occurred; anything structurally off raises
    MalformedToken at parse time instead.
    """
    if not verify(canonical_bytes(token), token.sig, pk):
        raise SignatureInvalid("identity token signature does not verify")
    if now > token.validity:
        raise Expired(f"token expired at {token.validity}, now {now}")
    return token


# ---------------------------------------------------------------------------
# JSON wire form
# ---------------------------------------------------------------------------


def _wire(content: dict, sig: bytes) -> dict:
    return {"content": content, "sig": base64.b64encode(sig).decode("ascii")}


def cert_to_wire(cert: RpCertificate) -> dict:
    return _wire(
        {
            "id_rp": cert.id_rp.point.wire(),
            "endpoint": cert.endpoint,
            "supplementary": dict(cert.supplementary),
        },
        cert.sig,
    )


def registration_result_to_wire(result: PidRegistrationResult) -> dict:
    return _wire(
        {
            "status": result.status,
            "pid_rp": result.pid_rp.point.wire(),
            "nonce": result.nonce.hex(),
            "validity": result.validity,
        },
        result.sig,
    )


def token_to_wire(token: IdentityToken) -> dict:
    return _wire(
        {
            "pid_rp": token.pid_rp.point.wire(),
            "pid_u": token.pid_u.point.wire(),
            "issuer": token.issuer,
            "validity": token.validity,
            "attributes": dict(token.attributes),
        },
        token.sig,
    )


def _wire_parts(data: Any, fields: list[str]) -> tuple[dict, bytes]:
    if not isinstance(data, dict):
        raise MalformedToken("wire artifact must be a JSON object")
    content = data.get("content")
    sig_b64 = data.get("sig")
    if not isinstance(content, dict) or not isinstance(sig_b64, str):
        raise MalformedToken("wire artifact needs 'content' object and 'sig' string")
    missing = [f for f in fields if f not in content]
    if missing:
        raise MalformedToken(f"missing fields: {missing}")
    try:
        sig = base64.b64decode(sig_b64, validate=True)
    except Exception as exc:
        raise MalformedToken(f"bad signature base64: {exc}") from exc
    return content, sig


def _point(params: GroupParams, s: Any) -> Any:
    if not isinstance(s, str):
        raise MalformedToken(f"expected encoded group element, got {type(s).__name__}")
    try:
        return params.element_from_wire(s)
    except InvalidElement as exc:
        raise MalformedToken(str(exc)) from exc


def _nonce(s: Any) -> bytes:
    if not isinstance(s, str):
        raise MalformedToken("nonce must be a hex string")
    try:
        raw = bytes.fromhex(s)
    except ValueError as exc:
        raise MalformedToken("nonce is not hex") from exc
    if len(raw) != DIGEST_LEN:
        raise MalformedToken(f"nonce must be {DIGEST_LEN} bytes")
    return raw


def _validity(v: Any) -> int:
    if not isinstance(v, int) or isinstance(v, bool) or v < 0:
        raise MalformedToken("validity must be a non-negative integer")
    return v


def _attr_map(m: Any) -> dict:
    if not isinstance(m, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in m.items()
    ):
        raise MalformedToken("attribute map must be string->string")
    return m


def cert_from_wire(data: Any, params: GroupParams) -> RpCertificate:
    content, sig = _wire_parts(data, ["id_rp", "endpoint", "supplementary"])
    try:
        id_rp = RpId(_point(params, content["id_rp"]))
    except Exception as exc:
        raise MalformedToken(f"bad id_rp: {exc}") from exc
    if not isinstance(content["endpoint"], str):
        raise MalformedToken("endpoint must be a string")
    return RpCertificate(id_rp, content["endpoint"], _attr_map(content["supplementary"]), sig)


def registration_result_from_wire(data: Any, params: GroupParams) -> PidRegistrationResult:
    content, sig = _wire_parts(data, ["status", "pid_rp", "nonce", "validity"])
    if content["status"] not in (STATUS_OK, STATUS_FAIL):
        raise MalformedToken(f"bad status {content['status']!r}")
    try:
        pid_rp = RpPseudoId(_point(params, content["pid_rp"]))
    except Exception as exc:
        raise MalformedToken(f"bad pid_rp: {exc}") from exc
    return PidRegistrationResult(
        content["status"], pid_rp, _nonce(content["nonce"]), _validity(content["validity"]), sig
    )


def token_from_wire(data: Any, params: GroupParams) -> IdentityToken:
    content, sig = _wire_parts(data, ["pid_rp", "pid_u", "issuer", "validity", "attributes"])
    try:
        pid_rp = RpPseudoId(_point(params, content["pid_rp"]))
        pid_u = UserPseudoId(_point(params, content["pid_u"]))
    except MalformedToken:
        raise
    except Exception as exc:
        raise MalformedToken(f"bad pseudo-identity: {exc}") from exc
    if not isinstance(content["issuer"], str):
        raise MalformedToken("issuer must be a string")
    return IdentityToken(
        pid_rp,
        pid_u,
        content["issuer"],
        _validity(content["validity"]),
        _attr_map(content["attributes"]),
        sig,
    )
