import pytest
from hypothesis import given
from hypothesis import strategies as st

from blindsso.signing import (
    MalformedKey,
    SIGNATURE_LEN,
    SigningKeyPair,
    hash_bytes,
    public_key_from_pem,
    public_key_pem,
    verify,
)

from oracles import reference_sha256


class TestHash:
    def test_deterministic(self):
        assert hash_bytes(b"abc") == hash_bytes(b"abc")

    def test_length(self):
        assert len(hash_bytes(b"")) == 32

    def test_matches_independent_sha256(self):
        # canonical encoding of trapdoor t=3 is its decimal ASCII form
        for msg in (b"3", b"", b"abc", bytes(range(200))):
            assert hash_bytes(msg) == reference_sha256(msg)

    def test_no_collisions_over_toy_draws(self, toy, rng):
        digests = {}
        for _ in range(100_000):
            t = toy.random_scalar(1, rng)
            digests[t] = hash_bytes(str(t).encode())
        # distinct inputs never hashed alike
        assert len(set(digests.values())) == len(digests)


class TestSignatures:
    def test_round_trip_empty_message(self, keypair):
        sig = keypair.sign(b"")
        assert verify(b"", sig, keypair.public_key)

    def test_fixed_signature_length(self, keypair):
        assert len(keypair.sign(b"m")) == SIGNATURE_LEN

    def test_message_bit_flip_rejected(self, keypair):
        msg = b"the quick brown fox"
        sig = keypair.sign(msg)
        tampered = bytes([msg[0] ^ 0x01]) + msg[1:]
        assert not verify(tampered, sig, keypair.public_key)

    def test_wrong_public_key_rejected(self, keypair, other_keypair):
        sig = keypair.sign(b"m")
        assert not verify(b"m", sig, other_keypair.public_key)

    @given(flip=st.integers(min_value=0, max_value=SIGNATURE_LEN * 8 - 1))
    def test_signature_bit_flip_rejected(self, keypair, flip):
        sig = bytearray(keypair.sign(b"payload"))
        sig[flip // 8] ^= 1 << (flip % 8)
        assert not verify(b"payload", bytes(sig), keypair.public_key)

    def test_pem_round_trip(self, keypair):
        kp2 = SigningKeyPair.from_pem(keypair.private_pem())
        assert verify(b"x", kp2.sign(b"x"), keypair.public_key)
        pk = public_key_from_pem(public_key_pem(keypair.public_key))
        assert verify(b"x", keypair.sign(b"x"), pk)

    def test_malformed_key_raises(self):
        with pytest.raises(MalformedKey):
            SigningKeyPair.from_pem(b"not a pem")
        with pytest.raises(MalformedKey):
            public_key_from_pem(b"garbage")
