"""Hashing and the issuer signature scheme (RSA-2048 with SHA-256).

The signature payload is always a canonical byte string produced by the
token layer, never an in-memory structure, so signatures stay stable
across components and languages.
"""

from __future__ import annotations

import hashlib

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa
from cryptography.hazmat.primitives.asymmetric.rsa import RSAPrivateKey, RSAPublicKey

DIGEST_LEN = 32
RSA_BITS = 2048
SIGNATURE_LEN = RSA_BITS // 8


class MalformedKey(Exception):
    """Key material failed to parse."""


class MalformedSignature(Exception):
    """Signature is structurally unusable (e.g. wrong type)."""


def hash_bytes(data: bytes) -> bytes:
    """SHA-256 digest; 32 bytes, deterministic."""
    return hashlib.sha256(data).digest()


class SigningKeyPair:
    """The issuer's RSA key pair for tokens, certificates and results."""

    def __init__(self, private_key: RSAPrivateKey):
        self._sk = private_key
        self.public_key: RSAPublicKey = private_key.public_key()

    @classmethod
    def generate(cls) -> "SigningKeyPair":
        return cls(rsa.generate_private_key(public_exponent=65537, key_size=RSA_BITS))

    @classmethod
    def from_pem(cls, pem: bytes) -> "SigningKeyPair":
        try:
            key = serialization.load_pem_private_key(pem, password=None)
        except (ValueError, TypeError) as exc:
            raise MalformedKey(str(exc)) from exc
        if not isinstance(key, RSAPrivateKey):
            raise MalformedKey("not an RSA private key")
        return cls(key)

    def private_pem(self) -> bytes:
        return self._sk.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        )

    def public_pem(self) -> bytes:
        return public_key_pem(self.public_key)

    def sign(self, msg: bytes) -> bytes:
        """PKCS#1 v1.5 signature over SHA-256(msg); fixed 256-byte output."""
        return self._sk.sign(msg, padding.PKCS1v15(), hashes.SHA256())


def public_key_pem(pk: RSAPublicKey) -> bytes:
    return pk.public_bytes(
        serialization.Encoding.PEM,
        serialization.PublicFormat.SubjectPublicKeyInfo,
    )


def public_key_from_pem(pem: bytes) -> RSAPublicKey:
    try:
        key = serialization.load_pem_public_key(pem)
    except (ValueError, TypeError) as exc:
        raise MalformedKey(str(exc)) from exc
    if not isinstance(key, RSAPublicKey):
        raise MalformedKey("not an RSA public key")
    return key


def verify(msg: bytes, sig: bytes, pk: RSAPublicKey) -> bool:
    """True iff sig is a valid signature of msg under pk.

    Any mutation of msg or sig yields False rather than an exception; a
    non-bytes signature is a caller bug and raises MalformedSignature.
    """
    if not isinstance(sig, (bytes, bytearray)):
        raise MalformedSignature(f"signature must be bytes, got {type(sig).__name__}")
    try:
        pk.verify(bytes(sig), msg, padding.PKCS1v15(), hashes.SHA256())
        return True
    except InvalidSignature:
        return False
