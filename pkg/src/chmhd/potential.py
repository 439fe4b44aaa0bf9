"""Model parameters and the interfacial double-well potential.

Two wells are provided:

  * the quartic well F(u) = (u^2 - 1)^2 / (4 eps), used by the
    auxiliary-variable scheme (its square root must exist globally), and
  * the extended well, which keeps the quartic core on [-1, 1] and
    continues with matching quadratics outside so that |F''| <= 2/eps
    everywhere; the linearly stabilized scheme needs that global bound.

Both are C^1 and share values and slopes on [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelParams",
    "free_energy",
    "dwell",
    "dwell_bound",
    "ieq_slope",
    "ieq_aux",
    "poly_aux",
    "conductivity_blend",
]


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the two-phase conducting-fluid model.

    sigma may be a single conductivity or a (sigma_plus, sigma_minus) pair
    blended linearly in the phase variable; mu is magnetic permeability,
    lam the surface-energy scale, mobility the phase-diffusion rate.
    """

    epsilon: float = 1.0
    lam: float = 1.0
    mobility: float = 1.0
    nu: float = 1.0
    rho0: float = 1.0
    mu: float = 1.0
    sigma: float | tuple = 1.0

    def __post_init__(self):
        for name in ("epsilon", "lam", "mobility", "nu", "rho0", "mu"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        s = self.sigma
        vals = s if isinstance(s, tuple) else (s,)
        if any(v <= 0 for v in vals):
            raise ValueError("conductivity must be positive")

    def conductivity(self, phi: np.ndarray | float):
        """Pointwise conductivity; phase values are clamped to [-1, 1]."""
        if not isinstance(self.sigma, tuple):
            return self.sigma if np.isscalar(phi) else np.full_like(phi, self.sigma)
        s_plus, s_minus = self.sigma
        c = np.clip(phi, -1.0, 1.0)
        return s_plus * (1.0 + c) / 2.0 + s_minus * (1.0 - c) / 2.0


def free_energy(phi: np.ndarray, epsilon: float, extended: bool = True) -> np.ndarray:
    """Well density F(phi); quadratic tails outside [-1, 1] when extended."""
    phi = np.asarray(phi, dtype=float)
    core = (phi**2 - 1.0) ** 2 / (4.0 * epsilon)
    if not extended:
        return core
    hi = (phi - 1.0) ** 2 / epsilon
    lo = (phi + 1.0) ** 2 / epsilon
    return np.where(phi > 1.0, hi, np.where(phi < -1.0, lo, core))


def dwell(phi: np.ndarray, epsilon: float, extended: bool = True) -> np.ndarray:
    """F'(phi): cubic on the core, linear on the tails."""
    phi = np.asarray(phi, dtype=float)
    core = phi * (phi**2 - 1.0) / epsilon
    if not extended:
        return core
    hi = 2.0 * (phi - 1.0) / epsilon
    lo = 2.0 * (phi + 1.0) / epsilon
    return np.where(phi > 1.0, hi, np.where(phi < -1.0, lo, core))


def dwell_bound(epsilon: float) -> float:
    """Global bound on |F''| of the extended well; the stabilization floor."""
    return 2.0 / epsilon


def ieq_aux(phi: np.ndarray, epsilon: float, c0: float = 1.0) -> np.ndarray:
    """Auxiliary variable sqrt(F_quartic + c0) (strictly positive)."""
    return np.sqrt(free_energy(phi, epsilon, extended=False) + c0)


def ieq_slope(phi: np.ndarray, epsilon: float, c0: float = 1.0) -> np.ndarray:
    """F'/sqrt(F + c0) for the quartic well: chain-rule factor of ieq_aux."""
    return dwell(phi, epsilon, extended=False) / ieq_aux(phi, epsilon, c0)


def poly_aux(phi: np.ndarray) -> np.ndarray:
    """Polynomial auxiliary phi^2 - 1 (the relaxed-variable scheme tracks it)."""
    return np.asarray(phi, dtype=float) ** 2 - 1.0


def conductivity_blend(phi: np.ndarray, s_plus: float, s_minus: float) -> np.ndarray:
    c = np.clip(phi, -1.0, 1.0)
    return s_plus * (1.0 + c) / 2.0 + s_minus * (1.0 - c) / 2.0
