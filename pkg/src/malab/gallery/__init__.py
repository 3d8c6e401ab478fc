"""Explicit model constructions with numerically verified identities."""

from .profiles import (PARABOLOID, SLAB, ProfileSolution, integrate_profile,
                       step_halving_ratio, verify_paraboloid_identity,
                       verify_slab_identity)

__all__ = [
    "PARABOLOID",
    "SLAB",
    "ProfileSolution",
    "integrate_profile",
    "step_halving_ratio",
    "verify_paraboloid_identity",
    "verify_slab_identity",
]
