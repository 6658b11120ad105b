"""Shifted double-well potential, discrete energies, and noise coefficient.

The potential is F(s) = (s^2 - 1)^2 / 4 + gamma with gamma > 0, so F stays
strictly positive and the square root of the lumped potential energy is well
defined.  The interface parameter epsilon scales the energy landscape: the
gradient flow uses eps * stiffness for the quadratic part and F / eps for the
potential part, and the lumped potential energy below carries the 1/eps
factor.  With eps = 1 the plain double-well dynamics are recovered.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .fem import LumpedMass, h1_seminorm_sq, lumped_inner

RHO_KINDS = ("indicator", "smooth")


@dataclass(frozen=True)
class PotentialParams:
    """Potential shift gamma, interface parameter epsilon, noise coefficient kind."""

    gamma: float
    epsilon: float
    rho_kind: str = "indicator"

    def __post_init__(self):
        violations = []
        if not self.gamma > 0.0:
            violations.append(
                f"gamma must be > 0 so the energy lower bound "
                f"E_h >= gamma/eps keeps sqrt(E_h) well defined, "
                f"got {self.gamma!r}"
            )
        if not self.epsilon > 0.0:
            violations.append(f"epsilon must be > 0, got {self.epsilon!r}")
        if self.rho_kind not in RHO_KINDS:
            violations.append(
                f"rho_kind must be one of {RHO_KINDS}, got {self.rho_kind!r}"
            )
        if violations:
            raise ConfigError(violations)


def double_well(s, params: PotentialParams):
    """F(s) = (s^2 - 1)^2 / 4 + gamma."""
    s = np.asarray(s, dtype=float)
    return 0.25 * (s * s - 1.0) ** 2 + params.gamma


def double_well_prime(s):
    """F'(s) = s^3 - s."""
    s = np.asarray(s, dtype=float)
    return s * s * s - s


def double_well_second(s):
    """F''(s) = 3 s^2 - 1."""
    s = np.asarray(s, dtype=float)
    return 3.0 * s * s - 1.0


def lumped_energy(phi: np.ndarray, mass: LumpedMass,
                  params: PotentialParams) -> float:
    """Lumped potential energy (1/eps) * sum_i m_i F(phi_i).

    Always at least gamma / eps because the mass weights sum to the domain
    measure 1; its square root seeds and is tracked by the auxiliary scalar.
    """
    values = double_well(phi, params)
    return lumped_inner(values, np.ones_like(values), mass) / params.epsilon


def sav_energy(phi: np.ndarray, r: float, stiff,
               params: PotentialParams) -> float:
    """Modified total energy (eps/2) phi^T K phi + r^2.

    For the exact auxiliary value r = sqrt(lumped_energy) this is the usual
    discrete free energy; the scheme dissipates this form in the
    deterministic case.
    """
    return 0.5 * params.epsilon * h1_seminorm_sq(phi, stiff) + float(r) ** 2


def noise_coefficient(s, params: PotentialParams):
    """Multiplicative noise coefficient rho(s).

    ``indicator``: (2 sqrt(eps))^-1 * max(1 - s^2, 0), supported on the
    interfacial region only.  ``smooth``: (2 sqrt(eps))^-1 / (1 + s^2), a
    globally smooth alternative with the same peak value.
    """
    s = np.asarray(s, dtype=float)
    scale = 0.5 / np.sqrt(params.epsilon)
    if params.rho_kind == "indicator":
        return scale * np.maximum(1.0 - s * s, 0.0)
    return scale / (1.0 + s * s)
