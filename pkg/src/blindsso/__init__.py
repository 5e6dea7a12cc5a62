"""Privacy-preserving single sign-on testbed.

Blinded RP and user identities keep the issuer from learning which site a
user visits and keep colluding sites from linking one user across them,
while each site still recovers a stable local account.
"""

from .group import (
    DeterministicRng,
    GroupElement,
    GroupId,
    GroupParams,
    InvalidElement,
    NonInvertible,
    Rng,
    SYSTEM_RNG,
    get_group,
    p256_group,
    toy_group,
)
from .transform import (
    Account,
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

__all__ = [
    "Account",
    "DeterministicRng",
    "GroupElement",
    "GroupId",
    "GroupParams",
    "IdRegistry",
    "InvalidElement",
    "NonInvertible",
    "RegistryExhausted",
    "Rng",
    "RpId",
    "RpPseudoId",
    "SYSTEM_RNG",
    "Trapdoor",
    "TrapdoorOutOfRange",
    "UserId",
    "UserPseudoId",
    "derive_account",
    "derive_pid_rp",
    "derive_pid_u",
    "get_group",
    "p256_group",
    "toy_group",
]
