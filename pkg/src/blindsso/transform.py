"""Identity blinding and account recovery.

The whole privacy construction is three scalar multiplications over one
prime-order group:

* blind the RP identity with a per-login trapdoor:  PID_RP = [t]ID_RP
* fold in the user identity at the issuer:          PID_U  = [u]PID_RP
* strip the trapdoor at the RP:                     Acct   = [t^-1]PID_U

Since [t^-1][u][t]ID_RP = [u]ID_RP, the account is stable across logins
for a fixed (user, RP) pair while both pseudo-identities stay ephemeral.
Identity issuance lives here too: user ids are random scalars u with
1 < u < n, RP ids are points [r]G whose discrete log r is dropped right
after issuance.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from .group import GroupElement, GroupParams, InvalidElement, NonInvertible, Rng, SYSTEM_RNG


class TrapdoorOutOfRange(Exception):
    """Trapdoor must satisfy 1 < t < n."""


class RegistryExhausted(Exception):
    """No unissued identities remain (toy group only, by pigeonhole)."""


class DegenerateIdentity(Exception):
    """The group identity element would collapse all pseudo-identities."""


def _require_point(e: GroupElement) -> GroupElement:
    if e.is_identity:
        raise DegenerateIdentity("identity element rejected")
    return e


@dataclass(frozen=True)
class UserId:
    """Permanent user identity at the issuer: a scalar u, 1 < u < n."""

    value: int


@dataclass(frozen=True)
class RpId:
    """Permanent RP identity: the point [r]G. Nobody retains r."""

    point: GroupElement

    def __post_init__(self):
        _require_point(self.point)


@dataclass(frozen=True)
class Trapdoor:
    """Per-login random scalar t; its inverse de-blinds the user pseudo-id."""

    value: int

    def inverse(self, params: GroupParams) -> int:
        return params.scalar_inverse(self.value)


@dataclass(frozen=True)
class RpPseudoId:
    """Ephemeral RP pseudo-identity [t]ID_RP."""

    point: GroupElement

    def __post_init__(self):
        _require_point(self.point)


@dataclass(frozen=True)
class UserPseudoId:
    """Ephemeral user pseudo-identity [u]PID_RP."""

    point: GroupElement

    def __post_init__(self):
        _require_point(self.point)


@dataclass(frozen=True)
class Account:
    """Permanent account at one RP: [u]ID_RP, recovered via the trapdoor."""

    point: GroupElement

    def __post_init__(self):
        _require_point(self.point)


def check_trapdoor_range(t: int, params: GroupParams) -> None:
    if not 1 < t < params.order:
        raise TrapdoorOutOfRange(f"trapdoor {t} not in (1, {params.order})")


def derive_pid_rp(id_rp: RpId, t: Trapdoor, params: GroupParams) -> RpPseudoId:
    """Blind the RP identity: [t]ID_RP."""
    check_trapdoor_range(t.value, params)
    return RpPseudoId(params.scalar_mul(id_rp.point, t.value))


def derive_pid_u(id_u: UserId, pid_rp: RpPseudoId, params: GroupParams) -> UserPseudoId:
    """Fold the user identity into the blinded RP point: [u]PID_RP."""
    if not 1 < id_u.value < params.order:
        raise InvalidElement(f"user id {id_u.value} not in (1, {params.order})")
    return UserPseudoId(params.scalar_mul(pid_rp.point, id_u.value))


def derive_account(pid_u: UserPseudoId, t: Trapdoor, params: GroupParams) -> Account:
    """Strip the trapdoor: [t^-1]PID_U, equal to [u]ID_RP for honest inputs."""
    t_inv = t.inverse(params)  # raises NonInvertible for t = 0
    return Account(params.scalar_mul(pid_u.point, t_inv))


class IdRegistry:
    """Tracks issued user and RP identities so both stay unique.

    Issuance is atomic: the scan-and-insert runs under one lock, so two
    concurrent calls can never hand out the same identity.
    """

    def __init__(self, params: GroupParams):
        self._params = params
        self._user_ids: set[int] = set()
        self._rp_points: set[GroupElement] = set()
        self._lock = threading.Lock()

    @property
    def capacity(self) -> int:
        # scalars strictly between 1 and n
        return self._params.order - 2

    def new_user_id(self, rng: Rng = SYSTEM_RNG) -> UserId:
        """Fresh uniform u in (1, n), unique against everything issued."""
        with self._lock:
            if len(self._user_ids) >= self.capacity:
                raise RegistryExhausted("all user ids issued")
            while True:
                u = self._params.random_scalar(1, rng)
                if u not in self._user_ids:
                    self._user_ids.add(u)
                    return UserId(u)

    def new_rp_id(self, rng: Rng = SYSTEM_RNG) -> RpId:
        """Fresh [r]G, unique among issued RP ids; r is discarded here."""
        with self._lock:
            if len(self._rp_points) >= self.capacity:
                raise RegistryExhausted("all rp ids issued")
            while True:
                r = self._params.random_scalar(1, rng)
                point = self._params.scalar_mul(self._params.generator, r)
                del r  # the registry never persists the discrete log
                if point not in self._rp_points:
                    self._rp_points.add(point)
                    return RpId(point)
