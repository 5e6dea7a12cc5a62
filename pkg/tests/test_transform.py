import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blindsso.group import DeterministicRng, InvalidElement
from blindsso.transform import (
    Account,
    DegenerateIdentity,
    IdRegistry,
    RegistryExhausted,
    RpId,
    RpPseudoId,
    Trapdoor,
    TrapdoorOutOfRange,
    UserId,
    UserPseudoId,
    derive_account,
    derive_pid_rp,
    derive_pid_u,
)

from oracles import toy_dlog, toy_power


def elem(toy, exponent):
    return toy.scalar_mul(toy.generator, exponent)


class TestBlindRpIdentity:
    def test_blinding_matches_exponent_oracle(self, toy):
        pid = derive_pid_rp(RpId(elem(toy, 7)), Trapdoor(3), toy)
        assert int(pid.point.data) == toy_power(21)

    def test_trapdoor_boundaries_rejected(self, toy):
        rp = RpId(elem(toy, 7))
        for bad in (0, 1, toy.order, toy.order + 5, -2):
            with pytest.raises(TrapdoorOutOfRange):
                derive_pid_rp(rp, Trapdoor(bad), toy)

    def test_max_trapdoor_inverts_point(self, toy):
        # t = n-1 sends g^7 to g^-7 = g^1012
        pid = derive_pid_rp(RpId(elem(toy, 7)), Trapdoor(toy.order - 1), toy)
        assert int(pid.point.data) == toy_power(-7) == toy_power(1012)


class TestBlindUserIdentity:
    def test_matches_exponent_oracle(self, toy):
        pid_u = derive_pid_u(UserId(5), RpPseudoId(elem(toy, 21)), toy)
        assert int(pid_u.point.data) == toy_power(105)

    def test_identity_point_rejected_at_construction(self, toy):
        with pytest.raises(DegenerateIdentity):
            RpPseudoId(toy.identity)
        with pytest.raises(DegenerateIdentity):
            RpId(toy.identity)
        with pytest.raises(DegenerateIdentity):
            Account(toy.identity)

    def test_distinct_users_distinct_pseudo_ids(self, toy):
        pid_rp = RpPseudoId(elem(toy, 21))
        outs = {derive_pid_u(UserId(u), pid_rp, toy).point for u in range(2, 64)}
        assert len(outs) == 62

    def test_user_id_range_checked(self, toy):
        with pytest.raises(InvalidElement):
            derive_pid_u(UserId(1), RpPseudoId(elem(toy, 21)), toy)
        with pytest.raises(InvalidElement):
            derive_pid_u(UserId(toy.order), RpPseudoId(elem(toy, 21)), toy)


class TestRecoverAccount:
    def test_matches_exponent_oracle(self, toy):
        acct = derive_account(UserPseudoId(elem(toy, 105)), Trapdoor(3), toy)
        assert int(acct.point.data) == toy_power(35) == toy_power(5 * 7)

    def test_round_trip_over_random_triples(self, toy):
        rng = DeterministicRng(11)
        for _ in range(1000):
            u, r, t = (toy.random_scalar(1, rng) for _ in range(3))
            id_rp = RpId(elem(toy, r))
            pid_rp = derive_pid_rp(id_rp, Trapdoor(t), toy)
            pid_u = derive_pid_u(UserId(u), pid_rp, toy)
            acct = derive_account(pid_u, Trapdoor(t), toy)
            assert acct.point == toy.scalar_mul(id_rp.point, u)
            # brute-force discrete log confirms the exponent is u*r
            assert toy_dlog(int(acct.point.data)) == u * r % toy.order

    def test_deterministic_under_reencoding(self, toy):
        pid_u = UserPseudoId(elem(toy, 105))
        re_decoded = UserPseudoId(toy.element_from_bytes(pid_u.point.data))
        a1 = derive_account(pid_u, Trapdoor(3), toy)
        a2 = derive_account(re_decoded, Trapdoor(3), toy)
        assert a1 == a2


class TestAccountAlgebra:
    def test_stability_across_trapdoors(self, toy):
        # 500 random (u, r, t, t') cases: both trapdoors land on one account
        rng = DeterministicRng(23)
        for _ in range(500):
            u, r = toy.random_scalar(1, rng), toy.random_scalar(1, rng)
            t1, t2 = toy.random_scalar(1, rng), toy.random_scalar(1, rng)
            id_rp = RpId(elem(toy, r))
            accounts = {
                derive_account(
                    derive_pid_u(UserId(u), derive_pid_rp(id_rp, Trapdoor(t), toy), toy),
                    Trapdoor(t),
                    toy,
                ).point
                for t in (t1, t2)
            }
            assert len(accounts) == 1

    def test_uniqueness_across_users_exhaustive(self, toy):
        id_rp = RpId(elem(toy, 7))
        accounts = {toy.scalar_mul(id_rp.point, u) for u in range(2, 64)}
        assert len(accounts) == 62

    def test_distinct_across_rps_exhaustive(self, toy):
        u = 5
        accounts = {toy.scalar_mul(elem(toy, r), u) for r in range(2, 64)}
        assert len(accounts) == 62

    def test_trapdoor_blinding_is_injective_exhaustive(self, toy):
        # for fixed ID_RP the map t -> [t]ID_RP over (1, n) never collides
        id_rp = RpId(elem(toy, 7))
        images = {
            derive_pid_rp(id_rp, Trapdoor(t), toy).point for t in range(2, toy.order)
        }
        assert len(images) == toy.order - 2


class TestIdIssuance:
    def test_issued_ids_distinct(self, toy, rng):
        reg = IdRegistry(toy)
        a = reg.new_user_id(rng)
        b = reg.new_user_id(rng)
        assert a != b
        r1 = reg.new_rp_id(rng)
        r2 = reg.new_rp_id(rng)
        assert r1 != r2

    def test_rp_id_is_group_member(self, toy, rng):
        reg = IdRegistry(toy)
        point = reg.new_rp_id(rng).point
        assert toy.element_from_bytes(point.data) == point

    def test_exhaustion_in_toy_group(self, toy, rng):
        reg = IdRegistry(toy)
        for _ in range(toy.order - 2):
            reg.new_user_id(rng)
        with pytest.raises(RegistryExhausted):
            reg.new_user_id(rng)

    def test_user_ids_within_range(self, toy, rng):
        reg = IdRegistry(toy)
        for _ in range(200):
            uid = reg.new_user_id(rng)
            assert 1 < uid.value < toy.order

    def test_concurrent_issuance_unique(self, toy):
        from concurrent.futures import ThreadPoolExecutor

        reg = IdRegistry(toy)
        with ThreadPoolExecutor(max_workers=16) as pool:
            ids = list(pool.map(lambda _: reg.new_user_id(), range(200)))
        assert len({i.value for i in ids}) == 200


class TestP256Path:
    def test_same_protocol_code_runs_on_p256(self, p256, rng):
        reg = IdRegistry(p256)
        id_rp = reg.new_rp_id(rng)
        u = reg.new_user_id(rng)
        t = Trapdoor(p256.random_scalar(1, rng))
        pid_rp = derive_pid_rp(id_rp, t, p256)
        pid_u = derive_pid_u(u, pid_rp, p256)
        acct = derive_account(pid_u, t, p256)
        assert acct.point == p256.scalar_mul(id_rp.point, u.value)
