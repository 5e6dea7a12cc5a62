"""Replay the browser-recorded request bodies through the service-side
verification code. Skipped when the frontend has not been built/tested.
"""

import json
from pathlib import Path

import pytest

from blindsso.group import toy_group
from blindsso.signing import hash_bytes, public_key_from_pem, verify
from blindsso.tokens import (
    canonical_bytes,
    cert_from_wire,
    registration_result_from_wire,
    token_from_wire,
    verify_cert,
    verify_registration_result,
    verify_token,
)
from blindsso.transform import RpId, Trapdoor, UserId, derive_account, derive_pid_rp, derive_pid_u

FRONTEND = Path(__file__).parent.parent / "frontend" / "fixtures"
FIXTURES = FRONTEND / "fixtures.json"
RECORDED = FRONTEND / "recorded_browser_bodies.json"

pytestmark = pytest.mark.skipif(
    not (FIXTURES.is_file() and RECORDED.is_file()),
    reason="frontend fixtures not generated (run the frontend build + tests)",
)


@pytest.fixture(scope="module")
def fixtures():
    return json.loads(FIXTURES.read_text())


@pytest.fixture(scope="module")
def recorded():
    return json.loads(RECORDED.read_text())


@pytest.fixture(scope="module")
def requests_by_path(recorded):
    return {(r["service"], r["path"]): r for r in recorded["requests"]}


class TestRecordedBodiesReplay:
    def test_flow_shape(self, recorded):
        paths = [(r["service"], r["path"]) for r in recorded["requests"]]
        assert paths == [
            ("rp", "/startNegotiation"),
            ("idp", "/dynamicRegistration"),
            ("rp", "/registrationResult"),
            ("idp", "/loginInfo"),
            ("idp", "/login"),
            ("idp", "/authorize"),
            ("rp", "/uploadToken"),
        ]

    def test_negotiation_carries_fixture_trapdoor(self, fixtures, requests_by_path):
        # the browser sends the trapdoor as a decimal string so 256-bit
        # values survive JSON; the service accepts both forms
        body = requests_by_path[("rp", "/startNegotiation")]["body"]
        assert int(body["t"]) == fixtures["toy"]["trapdoor"]

    def test_registration_body_matches_service_derivation(self, fixtures, recorded, requests_by_path):
        toy = toy_group()
        f = fixtures["toy"]
        body = requests_by_path[("idp", "/dynamicRegistration")]["body"]
        # browser group math agrees with the service group math
        id_rp = RpId(toy.element_from_wire(f["id_rp"]))
        expected_pid = derive_pid_rp(id_rp, Trapdoor(f["trapdoor"]), toy)
        assert body["PID_RP"] == expected_pid.point.wire() == f["pid_rp"]
        # browser hashing agrees with the service hashing
        assert body["Nonce"] == hash_bytes(str(f["trapdoor"]).encode()).hex()
        assert body["Enpt"] == recorded["pseudo_endpoint"]
        assert body["Enpt"].startswith("penpt-")

    def test_registration_result_passes_through_verbatim(self, fixtures, requests_by_path):
        body = requests_by_path[("rp", "/registrationResult")]["body"]
        assert body == {"registration_result": fixtures["toy"]["registration_result"]}

    def test_authorize_params_substitute_pseudo_endpoint(self, fixtures, recorded, requests_by_path):
        f = fixtures["toy"]
        params = requests_by_path[("idp", "/authorize")]["params"]
        assert params["PID_RP"] == f["pid_rp"]
        assert params["Enpt"] == recorded["pseudo_endpoint"]
        assert params["Enpt"] != f["endpoint"]  # certified endpoint never reaches the issuer
        assert params["Nonce"] == f["token_request"]["Nonce"]

    def test_uploaded_token_verifies_and_derives_fixture_account(self, fixtures, requests_by_path):
        toy = toy_group()
        f = fixtures["toy"]
        pk = public_key_from_pem(fixtures["issuer_public_key_pem"].encode())
        body = requests_by_path[("rp", "/uploadToken")]["body"]
        token = token_from_wire(body["token"], toy)
        verify_token(token, pk, now=f["now"])
        account = derive_account(token.pid_u, Trapdoor(f["trapdoor"]), toy)
        assert account.point.wire() == f["account"]
        # and the token matches what the issuer would compute for this user
        pid_u = derive_pid_u(UserId(f["user_id"]), token.pid_rp, toy)
        assert token.pid_u == pid_u


class TestFixtureArtifactsVerify:
    def test_all_signed_artifacts_verify(self, fixtures):
        toy = toy_group()
        pk = public_key_from_pem(fixtures["issuer_public_key_pem"].encode())
        f = fixtures["toy"]
        cert = cert_from_wire(f["cert"], toy)
        assert verify_cert(cert, pk, toy)
        result = registration_result_from_wire(f["registration_result"], toy)
        assert verify_registration_result(result, pk)
        token = token_from_wire(f["token"], toy)
        assert verify(canonical_bytes(token), token.sig, pk)

    def test_fixture_canonical_hexes_match(self, fixtures):
        toy = toy_group()
        f = fixtures["toy"]
        cert = cert_from_wire(f["cert"], toy)
        assert canonical_bytes(cert).hex() == f["cert_canonical_hex"]
        result = registration_result_from_wire(f["registration_result"], toy)
        assert canonical_bytes(result).hex() == f["registration_result_canonical_hex"]
        token = token_from_wire(f["token"], toy)
        assert canonical_bytes(token).hex() == f["token_canonical_hex"]
