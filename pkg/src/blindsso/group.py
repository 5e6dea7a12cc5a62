"""Prime-order group abstraction used by the identity-blinding protocol.

Two interchangeable groups sit behind one interface:

* ``p256`` -- the NIST P-256 curve, driven through the system OpenSSL via
  ctypes.  Elements are 33-byte compressed SEC1 encodings (identity is the
  single byte ``0x00``).  This is the production group.
* ``toy`` -- the order-1019 subgroup of the multiplicative group mod 2039
  (both primes, 2039 = 2*1019 + 1).  Written multiplicatively, [k]P means
  P**k mod 2039.  Elements encode as ASCII decimal.  Discrete logs are
  brute-forceable, which makes every protocol property checkable by
  exhaustive enumeration in tests.

Scalars are plain Python ints in [0, n).  All operations here are pure and
safe for concurrent use; the only shared mutable resource is an injected
RNG, which callers provide per flow or leave as the OS CSPRNG.
"""

from __future__ import annotations

import ctypes
import ctypes.util
import secrets
import hashlib
import random as _random
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class GroupError(Exception):
    """Base class for group arithmetic failures."""


class InvalidElement(GroupError):
    """Encoding does not decode to a member of the group."""


class NonInvertible(GroupError):
    """Scalar has no multiplicative inverse mod the group order."""


class GroupId(str, Enum):
    P256 = "p256"
    TOY = "toy"


@dataclass(frozen=True)
class GroupElement:
    """Opaque group element, identified by its canonical byte encoding.

    Equality and hashing go through the encoding, which is unique per
    element in both groups.
    """

    data: bytes
    group_id: GroupId

    def wire(self) -> str:
        """String form used in JSON: hex for p256, decimal for toy."""
        if self.group_id is GroupId.P256:
            return self.data.hex()
        return self.data.decode("ascii")

    @property
    def is_identity(self) -> bool:
        if self.group_id is GroupId.P256:
            return self.data == b"\x00"
        return self.data == b"1"

    def __repr__(self) -> str:  # keep logs readable
        return f"GroupElement({self.group_id.value}:{self.wire()})"


# ---------------------------------------------------------------------------
# RNG interface
# ---------------------------------------------------------------------------


class Rng:
    """Source of randomness; the default uses the OS CSPRNG.

    Tests and the scenario runner inject :class:`DeterministicRng` behind
    the same interface.
    """

    def randbelow(self, bound: int) -> int:
        return secrets.randbelow(bound)

    def randbytes(self, k: int) -> bytes:
        return secrets.token_bytes(k)

    def child(self, tag: str) -> "Rng":
        """Derive an independent stream; the system RNG is its own child."""
        return self


class DeterministicRng(Rng):
    """Seeded RNG for reproducible scenarios. Not cryptographic."""

    def __init__(self, seed: int):
        self.seed = seed
        self._r = _random.Random(seed)

    def randbelow(self, bound: int) -> int:
        return self._r.randrange(bound)

    def randbytes(self, k: int) -> bytes:
        return self._r.randbytes(k)

    def child(self, tag: str) -> "DeterministicRng":
        material = f"{self.seed}/{tag}".encode()
        sub = int.from_bytes(hashlib.sha256(material).digest()[:8], "big")
        return DeterministicRng(sub)


SYSTEM_RNG = Rng()


# ---------------------------------------------------------------------------
# OpenSSL bindings for P-256
# ---------------------------------------------------------------------------

_NID_P256 = 415  # X9.62 prime256v1
_COMPRESSED = 2  # POINT_CONVERSION_COMPRESSED

P256_ORDER = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551


class _OpenSslP256:
    """Thin ctypes wrapper around libcrypto's EC primitives.

    Only const usage of the shared EC_GROUP handle; every call allocates
    its own points and BN_CTX, so concurrent use from service threads is
    safe without locking.
    """

    def __init__(self) -> None:
        path = ctypes.util.find_library("crypto")
        if path is None:
            raise GroupError("libcrypto not found; the p256 group needs OpenSSL")
        lib = ctypes.CDLL(path)
        p = ctypes.c_void_p

        def sig(name: str, restype, argtypes) -> None:
            fn = getattr(lib, name)
            fn.restype = restype
            fn.argtypes = argtypes

        sig("EC_GROUP_new_by_curve_name", p, [ctypes.c_int])
        sig("EC_GROUP_get0_generator", p, [p])
        sig("EC_POINT_new", p, [p])
        sig("EC_POINT_free", None, [p])
        sig("EC_POINT_mul", ctypes.c_int, [p, p, p, p, p, p])
        sig("EC_POINT_oct2point", ctypes.c_int, [p, p, ctypes.c_char_p, ctypes.c_size_t, p])
        sig(
            "EC_POINT_point2oct",
            ctypes.c_size_t,
            [p, p, ctypes.c_int, ctypes.c_char_p, ctypes.c_size_t, p],
        )
        sig("EC_POINT_is_at_infinity", ctypes.c_int, [p, p])
        sig("BN_bin2bn", p, [ctypes.c_char_p, ctypes.c_int, p])
        sig("BN_free", None, [p])
        sig("BN_CTX_new", p, [])
        sig("BN_CTX_free", None, [p])

        self._lib = lib
        self._group = lib.EC_GROUP_new_by_curve_name(_NID_P256)
        if not self._group:
            raise GroupError("EC_GROUP_new_by_curve_name failed")

    def generator_bytes(self) -> bytes:
        gen = self._lib.EC_GROUP_get0_generator(self._group)
        ctx = self._lib.BN_CTX_new()
        try:
            return self._point_to_bytes(gen, ctx)
        finally:
            self._lib.BN_CTX_free(ctx)

    def _point_to_bytes(self, pt, ctx) -> bytes:
        buf = ctypes.create_string_buffer(33)
        ln = self._lib.EC_POINT_point2oct(self._group, pt, _COMPRESSED, buf, 33, ctx)
        if ln == 0:
            raise GroupError("point encoding failed")
        return buf.raw[:ln]

    def is_member(self, data: bytes) -> bool:
        ctx = self._lib.BN_CTX_new()
        pt = self._lib.EC_POINT_new(self._group)
        try:
            return self._lib.EC_POINT_oct2point(self._group, pt, data, len(data), ctx) == 1
        finally:
            self._lib.EC_POINT_free(pt)
            self._lib.BN_CTX_free(ctx)

    def scalar_mul(self, data: bytes, k: int) -> bytes:
        ctx = self._lib.BN_CTX_new()
        pt = self._lib.EC_POINT_new(self._group)
        out = self._lib.EC_POINT_new(self._group)
        bn = None
        try:
            if self._lib.EC_POINT_oct2point(self._group, pt, data, len(data), ctx) != 1:
                raise InvalidElement(f"not a p256 point: {data.hex()}")
            bn = self._lib.BN_bin2bn(k.to_bytes(32, "big"), 32, None)
            if self._lib.EC_POINT_mul(self._group, out, None, pt, bn, ctx) != 1:
                raise GroupError("EC_POINT_mul failed")
            return self._point_to_bytes(out, ctx)
        finally:
            if bn:
                self._lib.BN_free(bn)
            self._lib.EC_POINT_free(out)
            self._lib.EC_POINT_free(pt)
            self._lib.BN_CTX_free(ctx)


_p256_backend: Optional[_OpenSslP256] = None


def _p256() -> _OpenSslP256:
    global _p256_backend
    if _p256_backend is None:
        _p256_backend = _OpenSslP256()
    return _p256_backend


# ---------------------------------------------------------------------------
# Group parameters
# ---------------------------------------------------------------------------

TOY_MODULUS = 2039
TOY_ORDER = 1019
TOY_GENERATOR = 2  # quadratic residue mod 2039, hence order 1019


@dataclass(frozen=True)
class GroupParams:
    """A prime-order group: generator G of prime order n plus arithmetic.

    The same protocol code runs unchanged over both groups; only the
    parameters object differs.
    """

    group_id: GroupId
    generator: GroupElement = field(compare=False)
    order: int = field(compare=False)

    # -- element codec -----------------------------------------------------

    def element_from_bytes(self, data: bytes) -> GroupElement:
        """Decode and membership-check an encoded element."""
        if self.group_id is GroupId.TOY:
            try:
                v = int(data.decode("ascii"))
            except (UnicodeDecodeError, ValueError):
                raise InvalidElement(f"not a toy element encoding: {data!r}") from None
            if not 1 <= v < TOY_MODULUS or pow(v, TOY_ORDER, TOY_MODULUS) != 1:
                raise InvalidElement(f"{v} is not in the order-{TOY_ORDER} subgroup")
            return GroupElement(str(v).encode("ascii"), self.group_id)
        if len(data) not in (1, 33) or not _p256().is_member(data):
            raise InvalidElement(f"not a p256 point encoding: {data.hex()}")
        return GroupElement(data, self.group_id)

    def element_from_wire(self, s: str) -> GroupElement:
        """Decode the JSON string form (hex for p256, decimal for toy)."""
        if self.group_id is GroupId.TOY:
            return self.element_from_bytes(s.encode("ascii"))
        try:
            raw = bytes.fromhex(s)
        except ValueError:
            raise InvalidElement(f"bad hex: {s!r}") from None
        return self.element_from_bytes(raw)

    @property
    def identity(self) -> GroupElement:
        if self.group_id is GroupId.TOY:
            return GroupElement(b"1", self.group_id)
        return GroupElement(b"\x00", self.group_id)

    # -- arithmetic ---------------------------------------------------------

    def scalar_mul(self, p: GroupElement, k: int) -> GroupElement:
        """[k]p for 0 <= k < n. [0]p is the identity, [1]p is p."""
        if p.group_id is not self.group_id:
            raise InvalidElement(f"element of {p.group_id} used in {self.group_id}")
        if not 0 <= k < self.order:
            raise ValueError(f"scalar {k} out of [0, {self.order})")
        if self.group_id is GroupId.TOY:
            v = int(p.data.decode("ascii"))
            if pow(v, TOY_ORDER, TOY_MODULUS) != 1:
                raise InvalidElement(f"{v} is not in the toy subgroup")
            return GroupElement(str(pow(v, k, TOY_MODULUS)).encode("ascii"), self.group_id)
        return GroupElement(_p256().scalar_mul(p.data, k), self.group_id)

    def scalar_inverse(self, k: int) -> int:
        """k^-1 mod n; the order is prime so every nonzero k is invertible."""
        if k % self.order == 0:
            raise NonInvertible("0 has no inverse mod the group order")
        return pow(k, -1, self.order)

    def random_scalar(self, lo_exclusive: int = 0, rng: Rng = SYSTEM_RNG) -> int:
        """Uniform scalar in (lo_exclusive, n)."""
        span = self.order - lo_exclusive - 1
        if span <= 0:
            raise ValueError("empty scalar range")
        return lo_exclusive + 1 + rng.randbelow(span)


def toy_group() -> GroupParams:
    gen = GroupElement(str(TOY_GENERATOR).encode("ascii"), GroupId.TOY)
    return GroupParams(GroupId.TOY, gen, TOY_ORDER)


def p256_group() -> GroupParams:
    gen = GroupElement(_p256().generator_bytes(), GroupId.P256)
    return GroupParams(GroupId.P256, gen, P256_ORDER)


def get_group(group_id: GroupId | str) -> GroupParams:
    gid = GroupId(group_id)
    return toy_group() if gid is GroupId.TOY else p256_group()
