import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blindsso.group import (
    DeterministicRng,
    GroupElement,
    GroupId,
    InvalidElement,
    NonInvertible,
    TOY_MODULUS,
    TOY_ORDER,
    get_group,
)

from oracles import (
    egcd_inverse,
    p256_compress,
    p256_decompress,
    p256_scalar_mul,
    P256_GX,
    P256_GY,
    toy_element_power,
    toy_power,
)


class TestScalarMul:
    def test_zero_scalar_gives_identity(self, toy, p256):
        assert toy.scalar_mul(toy.generator, 0) == toy.identity
        assert p256.scalar_mul(p256.generator, 0) == p256.identity

    def test_one_is_identity_map(self, toy, p256):
        assert toy.scalar_mul(toy.generator, 1) == toy.generator
        assert p256.scalar_mul(p256.generator, 1) == p256.generator

    def test_toy_repeated_mult_matches_exponent_oracle(self, toy):
        # (g, 3) then again by 7 -> g^21
        step = toy.scalar_mul(toy.generator, 3)
        result = toy.scalar_mul(step, 7)
        assert int(result.data) == toy_power(21) == 1060

    def test_rejects_non_member(self, toy):
        # 7 is a quadratic non-residue mod 2039: order 2038, outside the subgroup
        with pytest.raises(InvalidElement):
            toy.element_from_bytes(b"7")

    def test_rejects_out_of_range_scalar(self, toy):
        with pytest.raises(ValueError):
            toy.scalar_mul(toy.generator, toy.order)
        with pytest.raises(ValueError):
            toy.scalar_mul(toy.generator, -1)

    def test_p256_against_pure_python_oracle(self, p256, rng):
        g_affine = (P256_GX, P256_GY)
        for _ in range(20):
            k = p256.random_scalar(0, rng)
            ours = p256.scalar_mul(p256.generator, k)
            assert ours.data == p256_compress(p256_scalar_mul(g_affine, k))

    def test_p256_arbitrary_point_against_oracle(self, p256, rng):
        base = p256.scalar_mul(p256.generator, 0xDEADBEEF)
        base_affine = p256_decompress(base.data)
        for k in (2, 3, 1 << 200, p256.order - 1):
            assert p256.scalar_mul(base, k).data == p256_compress(
                p256_scalar_mul(base_affine, k)
            )


class TestGroupLaws:
    def test_toy_composition_exhaustive(self, toy):
        # [a]([b]P) == [ab mod n]P for all a, b < 64
        base = toy.scalar_mul(toy.generator, 7)
        for a in range(64):
            inner = toy.scalar_mul(base, a)
            for b in range(64):
                lhs = toy.scalar_mul(inner, b)
                rhs = toy.scalar_mul(base, (a * b) % toy.order)
                assert lhs == rhs, (a, b)

    def test_generator_order(self, toy, p256):
        assert toy.scalar_mul(toy.generator, toy.order - 1) != toy.identity
        # order n means [n-1]G + G = identity; with scalars only: [n-1]([k]G) cycles
        assert toy.scalar_mul(toy.scalar_mul(toy.generator, 2), (toy.order + 1) // 2) == toy.generator

    def test_encode_decode_round_trip(self, toy, p256, rng):
        for params in (toy, p256):
            for _ in range(1000):
                k = params.random_scalar(0, rng)
                e = params.scalar_mul(params.generator, k)
                assert params.element_from_bytes(e.data) == e

    def test_membership_rejects_wrong_order_toy(self, toy):
        # elements of Z_2039^* outside the order-1019 subgroup
        rejected = 0
        for v in range(2, TOY_MODULUS):
            if pow(v, TOY_ORDER, TOY_MODULUS) != 1:
                with pytest.raises(InvalidElement):
                    toy.element_from_bytes(str(v).encode())
                rejected += 1
        assert rejected == TOY_ORDER  # half of the 2038 nonzero residues, plus none missed

    def test_membership_rejects_garbage(self, toy, p256):
        for bad in (b"", b"abc", b"0", b"2039", b"-5"):
            with pytest.raises(InvalidElement):
                toy.element_from_bytes(bad)
        for bad in (b"", b"\x05" + b"\x01" * 32, b"\x02" + b"\x01" * 10):
            with pytest.raises(InvalidElement):
                p256.element_from_bytes(bad)


class TestScalarInverse:
    def test_one_is_self_inverse(self, toy):
        assert toy.scalar_inverse(1) == 1

    def test_toy_inverse_of_three(self, toy):
        assert toy.scalar_inverse(3) == egcd_inverse(3, toy.order) == 340
        assert 3 * 340 % toy.order == 1

    def test_minus_one_is_self_inverse(self, toy, p256):
        for params in (toy, p256):
            assert params.scalar_inverse(params.order - 1) == params.order - 1

    def test_zero_not_invertible(self, toy):
        with pytest.raises(NonInvertible):
            toy.scalar_inverse(0)

    @given(k=st.integers(min_value=1, max_value=TOY_ORDER - 1))
    def test_inverse_property(self, k):
        params = get_group("toy")
        assert (k * params.scalar_inverse(k)) % params.order == 1


class TestRandomScalar:
    def test_range_contract_toy(self, toy, rng):
        draws = [toy.random_scalar(1, rng) for _ in range(10_000)]
        assert all(1 < d < toy.order for d in draws)

    def test_successive_draws_differ(self, p256):
        a = p256.random_scalar(1)
        b = p256.random_scalar(1)
        assert a != b
        assert a < p256.order and b < p256.order

    def test_chi_square_uniformity(self, toy):
        from scipy.stats import chisquare

        rng = DeterministicRng(7)
        n_draws = 100_000
        counts = [0] * toy.order
        for _ in range(n_draws):
            counts[toy.random_scalar(0, rng)] += 1
        _, p_value = chisquare(counts)
        assert p_value > 0.001

    def test_deterministic_rng_reproduces(self, toy):
        a = [toy.random_scalar(1, DeterministicRng(42)) for _ in range(50)]
        b = [toy.random_scalar(1, DeterministicRng(42)) for _ in range(50)]
        assert a == b
        assert DeterministicRng(42).child("x").randbelow(1 << 30) == DeterministicRng(
            42
        ).child("x").randbelow(1 << 30)


class TestWireFormat:
    def test_toy_wire_is_decimal(self, toy):
        e = toy.scalar_mul(toy.generator, 21)
        assert e.wire() == "1060"
        assert toy.element_from_wire("1060") == e

    def test_p256_wire_is_compressed_hex(self, p256):
        w = p256.generator.wire()
        assert len(w) == 66 and w.startswith(("02", "03"))
        assert p256.element_from_wire(w) == p256.generator

    def test_identity_flags(self, toy, p256):
        assert toy.identity.is_identity
        assert p256.identity.is_identity
        assert not toy.generator.is_identity

    def test_cross_group_mixup_rejected(self, toy, p256):
        with pytest.raises(InvalidElement):
            p256.scalar_mul(toy.generator, 2)
