import threading
from concurrent.futures import ThreadPoolExecutor

import pytest
import requests

from blindsso.group import DeterministicRng
from blindsso.idp import (
    Duplicate,
    IdpConfig,
    IdpHttp,
    IdpService,
    LOGGED,
    LOGIN_FAILURE,
    LOGIN_SUCCESS,
    UNLOGGED,
    Unauthenticated,
    UnknownPid,
)
from blindsso.signing import hash_bytes
from blindsso.tokens import (
    PidRegistrationRequest,
    canonical_bytes,
    token_from_wire,
    verify_cert,
    verify_registration_result,
)
from blindsso.transform import RpPseudoId
from blindsso.signing import verify

from oracles import toy_power


@pytest.fixture
def idp(toy, keypair, clock, rng):
    return IdpService(toy, keypair, IdpConfig(validity_secs=180), clock=clock, rng=rng)


def pid_of(toy, exponent):
    return RpPseudoId(toy.scalar_mul(toy.generator, exponent))


def registration(toy, exponent=21, penpt="penpt-1", t=3):
    return PidRegistrationRequest(pid_of(toy, exponent), penpt, hash_bytes(str(t).encode()))


class TestLogin:
    def test_happy_path_binds_session(self, idp):
        idp.register_user("alice", "pw1")
        session, outcome = idp.handle_login(None, {"username": "alice", "password": "pw1"})
        assert outcome == LOGIN_SUCCESS
        assert session.uid is not None

    def test_wrong_password(self, idp):
        idp.register_user("alice", "pw1")
        session, outcome = idp.handle_login(None, {"username": "alice", "password": "nope"})
        assert outcome == LOGIN_FAILURE
        assert session.uid is None

    def test_unknown_user_indistinguishable_from_wrong_password(self, idp):
        idp.register_user("alice", "pw1")
        _, unknown = idp.handle_login(None, {"username": "bob", "password": "pw1"})
        _, wrong = idp.handle_login(None, {"username": "alice", "password": "x"})
        assert unknown == wrong == LOGIN_FAILURE

    def test_login_twice_idempotent(self, idp):
        idp.register_user("alice", "pw1")
        s1, _ = idp.handle_login(None, {"username": "alice", "password": "pw1"})
        uid = s1.uid
        s2, outcome = idp.handle_login(s1.cookie, {"username": "alice", "password": "pw1"})
        assert outcome == LOGIN_SUCCESS and s2 is s1 and s1.uid == uid

    def test_login_info_transitions(self, idp):
        session, state = idp.handle_login_info(None)
        assert state == UNLOGGED
        idp.register_user("alice", "pw1")
        idp.handle_login(session.cookie, {"username": "alice", "password": "pw1"})
        _, state = idp.handle_login_info(session.cookie)
        assert state == LOGGED
        # purge the session: a fresh cookie is unlogged again
        del idp.sessions[session.cookie]
        _, state = idp.handle_login_info(session.cookie)
        assert state == UNLOGGED


class TestRegistration:
    def test_fresh_pid_ok_with_validity(self, idp, toy, clock):
        res = idp.handle_dynamic_registration(registration(toy))
        assert res.ok and res.validity == clock.now + 180
        assert verify_registration_result(res, idp.keypair.public_key)

    def test_duplicate_unexpired_pid_fails_signed(self, idp, toy):
        first = idp.handle_dynamic_registration(registration(toy))
        assert first.ok
        second = idp.handle_dynamic_registration(registration(toy, penpt="penpt-2", t=5))
        assert not second.ok
        assert verify_registration_result(second, idp.keypair.public_key)
        # the losing request's nonce is echoed verbatim
        assert second.nonce == hash_bytes(b"5")

    def test_same_pid_after_expiry_ok(self, idp, toy, clock):
        assert idp.handle_dynamic_registration(registration(toy)).ok
        clock.advance(181)
        assert idp.prune_expired() == 1
        assert idp.handle_dynamic_registration(registration(toy)).ok

    def test_prune_boundary_is_strict(self, idp, toy, clock):
        idp.handle_dynamic_registration(registration(toy))
        clock.advance(180)  # validity == now: still live
        assert idp.prune_expired() == 0
        clock.advance(1)
        assert idp.prune_expired() == 1
        assert idp.prune_expired() == 0  # empty registry removes nothing

    def test_no_duplicate_unexpired_entries_invariant(self, idp, toy, rng):
        for i in range(50):
            exp = toy.random_scalar(1, rng)
            idp.handle_dynamic_registration(registration(toy, exponent=exp, t=exp))
        live = [e.pid_rp for e in idp.pid_registry]
        assert len(set(live)) == len(live)


class TestAuthorize:
    def _login(self, idp, username="alice", password="pw"):
        uid = idp.register_user(username, password)
        session, outcome = idp.handle_login(None, {"username": username, "password": password})
        assert outcome == LOGIN_SUCCESS
        return uid, session

    def test_token_carries_blinded_user_identity(self, idp, toy):
        # authenticated u on registered pid g^21 yields pid_u = [u]g^21
        uid, session = self._login(idp)
        idp.handle_dynamic_registration(registration(toy))
        envelope = idp.handle_authorize(session.cookie, pid_of(toy, 21).point.wire(), "penpt-1", "n0")
        token = token_from_wire(envelope["token"], toy)
        expected = toy_power(21 * uid.value)
        assert int(token.pid_u.point.data) == expected
        assert envelope["nonce"] == "n0"

    def test_unauthenticated_cookie_fails(self, idp, toy):
        idp.handle_dynamic_registration(registration(toy))
        with pytest.raises(Unauthenticated):
            idp.handle_authorize(None, pid_of(toy, 21).point.wire(), "penpt-1", "n")

    def test_endpoint_mismatch_fails(self, idp, toy):
        _, session = self._login(idp)
        idp.handle_dynamic_registration(registration(toy))
        with pytest.raises(UnknownPid):
            idp.handle_authorize(session.cookie, pid_of(toy, 21).point.wire(), "other-penpt", "n")

    def test_unregistered_pid_fails(self, idp, toy):
        _, session = self._login(idp)
        with pytest.raises(UnknownPid):
            idp.handle_authorize(session.cookie, pid_of(toy, 22).point.wire(), "penpt-1", "n")

    def test_expired_pid_fails(self, idp, toy, clock):
        _, session = self._login(idp)
        idp.handle_dynamic_registration(registration(toy))
        clock.advance(181)
        with pytest.raises(UnknownPid):
            idp.handle_authorize(session.cookie, pid_of(toy, 21).point.wire(), "penpt-1", "n")

    def test_token_log_verifies_under_own_key(self, idp, toy):
        _, session = self._login(idp)
        idp.handle_dynamic_registration(registration(toy))
        idp.handle_authorize(session.cookie, pid_of(toy, 21).point.wire(), "penpt-1", "n")
        assert idp.token_log
        for token in idp.token_log:
            assert verify(canonical_bytes(token), token.sig, idp.keypair.public_key)


class TestUserRpRegistration:
    def test_two_rps_distinct_ids(self, idp):
        c1 = idp.register_rp("https://rp1.example/token")
        c2 = idp.register_rp("https://rp2.example/token")
        assert c1.id_rp != c2.id_rp

    def test_duplicate_username_rejected(self, idp):
        idp.register_user("alice", "pw")
        with pytest.raises(Duplicate):
            idp.register_user("alice", "pw2")

    def test_duplicate_endpoint_rejected(self, idp):
        idp.register_rp("https://rp1.example/token")
        with pytest.raises(Duplicate):
            idp.register_rp("https://rp1.example/token")

    def test_issued_cert_verifies(self, idp, toy):
        cert = idp.register_rp("https://rp1.example/token", {"cn": "RP One"})
        assert verify_cert(cert, idp.keypair.public_key, toy)

    def test_registry_snapshot_round_trip(self, idp, toy, keypair, clock, rng, tmp_path):
        idp.register_user("alice", "pw", {"tier": "standard"})
        idp.register_rp("https://rp1.example/token")
        path = tmp_path / "registry.json"
        idp.save_registry(path)
        fresh = IdpService(toy, keypair, IdpConfig(), clock=clock, rng=rng)
        fresh.load_registry(path)
        _, outcome = fresh.handle_login(None, {"username": "alice", "password": "pw"})
        assert outcome == LOGIN_SUCCESS
        assert "https://rp1.example/token" in fresh.rp_certs
        with pytest.raises(Duplicate):
            fresh.register_rp("https://rp1.example/token")


class TestAtomicRegistration:
    def test_concurrent_same_pid_single_ok(self, toy, keypair, clock):
        rng = DeterministicRng(77)
        for rep in range(25):
            idp = IdpService(toy, keypair, IdpConfig(), clock=clock, rng=rng)
            req = registration(toy, exponent=500 + rep, t=rep + 2)
            with ThreadPoolExecutor(max_workers=64) as pool:
                results = list(pool.map(
                    lambda _: idp.handle_dynamic_registration(req), range(64)
                ))
            assert sum(1 for r in results if r.ok) == 1


class TestPrivacyOfReceiveLog:
    def test_login_flow_receives_no_permanent_rp_identity(self, idp, toy):
        # drive the protocol paths directly and scan everything received
        cert = idp.register_rp("https://rp9.example/token")
        idp.receive_log.clear()
        idp.register_user("alice", "pw")
        session, _ = idp.handle_login(None, {"username": "alice", "password": "pw"})
        t = 3
        pid = RpPseudoId(toy.scalar_mul(cert.id_rp.point, t))
        req = PidRegistrationRequest(pid, "penpt-x", hash_bytes(str(t).encode()))
        idp.handle_dynamic_registration(req)
        idp.handle_authorize(session.cookie, pid.point.wire(), "penpt-x", "n")
        id_rp_wire = cert.id_rp.point.wire()
        for entry in idp.receive_log:
            assert id_rp_wire not in entry.values()


class TestIdpHttp:
    def test_full_http_surface(self, toy, keypair, clock, rng):
        idp = IdpService(toy, keypair, IdpConfig(), clock=clock, rng=rng)
        idp.register_user("alice", "pw")
        http = IdpHttp(idp).start()
        try:
            base = http.url
            s = requests.Session()
            assert s.get(f"{base}/loginInfo").json()["result"] == UNLOGGED
            r = s.post(f"{base}/login", json={"credential": {"username": "alice", "password": "pw"}})
            assert r.json()["result"] == LOGIN_SUCCESS
            assert s.get(f"{base}/loginInfo").json()["result"] == LOGGED

            pid = toy.scalar_mul(toy.generator, 21).wire()
            reg = s.post(f"{base}/dynamicRegistration", json={
                "PID_RP": pid, "Enpt": "penpt-h", "Nonce": hash_bytes(b"3").hex()})
            body = reg.json()["registration_result"]
            assert body["content"]["status"] == "OK"

            auth = s.get(f"{base}/authorize", params={"PID_RP": pid, "Enpt": "penpt-h", "Nonce": "z"})
            data = auth.json()
            assert data["result"] == "OK"
            token = token_from_wire(data["token"], toy)
            assert token.pid_rp.point.wire() == pid

            # malformed registration is a 400, not a signed Fail
            bad = s.post(f"{base}/dynamicRegistration", json={"PID_RP": pid})
            assert bad.status_code == 400
            # public key and script are served
            assert b"BEGIN PUBLIC KEY" in s.get(f"{base}/pk").content
            assert s.get(f"{base}/script").status_code == 200
        finally:
            http.stop()
