"""Generate the fixture file the frontend tests validate against.

Produces signed artifacts, canonical-encoding hex, group vectors and
expected derived values straight from the service implementation, so the
browser code is checked byte-for-byte against what the services sign and
parse. Run from the frontend directory:

    python3 scripts/gen_fixtures.py fixtures/fixtures.json
"""

import json
import sys
from pathlib import Path

from blindsso.group import DeterministicRng, p256_group, toy_group
from blindsso.signing import SigningKeyPair, hash_bytes
from blindsso.tokens import (
    PidRegistrationRequest,
    Validity,
    canonical_bytes,
    cert_to_wire,
    issue_cert,
    issue_registration_result,
    issue_token,
    registration_result_to_wire,
    token_to_wire,
)
from blindsso.transform import (
    RpId,
    Trapdoor,
    UserId,
    derive_account,
    derive_pid_rp,
    derive_pid_u,
)


def toy_section(kp: SigningKeyPair) -> dict:
    toy = toy_group()
    r, u, t = 7, 5, 3
    now = 1_700_000_000
    endpoint = "http://127.0.0.1:8700/uploadToken"
    id_rp = RpId(toy.scalar_mul(toy.generator, r))
    cert = issue_cert(id_rp, endpoint, {"cn": "demo rp"}, kp)
    trapdoor = Trapdoor(t)
    pid_rp = derive_pid_rp(id_rp, trapdoor, toy)
    nonce = hash_bytes(str(t).encode())
    request = PidRegistrationRequest(pid_rp, "penpt-fixture", nonce)
    result = issue_registration_result(request, True, now, Validity(180), kp)
    pid_u = derive_pid_u(UserId(u), pid_rp, toy)
    token = issue_token(pid_rp, pid_u, "https://idp.example", {"tier": "standard"},
                        now, Validity(180), kp)
    account = derive_account(pid_u, trapdoor, toy)
    token_request = {
        "PID_RP": pid_rp.point.wire(),
        "Enpt": endpoint,
        "Nonce": "9e2f6c1b55aa330144cc77dd88ee00ff",
    }
    return {
        "trapdoor": t,
        "user_id": u,
        "rp_exponent": r,
        "now": now,
        "endpoint": endpoint,
        "id_rp": id_rp.point.wire(),
        "pid_rp": pid_rp.point.wire(),
        "pid_u": pid_u.point.wire(),
        "account": account.point.wire(),
        "nonce_of_trapdoor": nonce.hex(),
        "cert": cert_to_wire(cert),
        "cert_canonical_hex": canonical_bytes(cert).hex(),
        "registration_result": registration_result_to_wire(result),
        "registration_result_canonical_hex": canonical_bytes(result).hex(),
        "token": token_to_wire(token),
        "token_canonical_hex": canonical_bytes(token).hex(),
        "token_request": token_request,
    }


def p256_section(kp: SigningKeyPair) -> dict:
    p256 = p256_group()
    rng = DeterministicRng(2024)
    vectors = []
    base = p256.generator
    for _ in range(6):
        k = p256.random_scalar(1, rng)
        result = p256.scalar_mul(base, k)
        vectors.append({"base": base.wire(), "scalar": str(k), "result": result.wire()})
        base = result
    id_rp = RpId(p256.scalar_mul(p256.generator, 0xA1B2C3))
    cert = issue_cert(id_rp, "https://rp.example/token", {"cn": "p256 rp"}, kp)
    inv_pairs = [
        {"k": str(k), "inverse": str(p256.scalar_inverse(k))}
        for k in (2, 3, 12345, p256.order - 1)
    ]
    return {
        "generator": p256.generator.wire(),
        "order": str(p256.order),
        "mul_vectors": vectors,
        "inverse_vectors": inv_pairs,
        "cert": cert_to_wire(cert),
        "cert_canonical_hex": canonical_bytes(cert).hex(),
    }


def main() -> None:
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "fixtures/fixtures.json")
    kp = SigningKeyPair.generate()
    fixtures = {
        "issuer_public_key_pem": kp.public_pem().decode(),
        "toy": toy_section(kp),
        "p256": p256_section(kp),
    }
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(fixtures, indent=1))
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
