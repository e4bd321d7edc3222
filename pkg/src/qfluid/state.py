"""The fluid state at one instant."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .discretization import ScalarField, VectorField, reconstruct


@dataclass(frozen=True, eq=False)
class FluidState:
    """Density, momentum ``J = rho u`` and cached total energy.

    ``velocity_coeffs`` are coordinates of ``u`` in ``basis`` when the state
    comes from the Galerkin solver; both are ``None`` for raw data.
    """

    time: float
    rho: ScalarField
    momentum: VectorField
    energy: float
    velocity_coeffs: np.ndarray = None
    basis: object = None

    @property
    def domain(self):
        return self.rho.domain

    @property
    def velocity(self):
        if self.velocity_coeffs is not None and self.basis is not None:
            return reconstruct(self.velocity_coeffs, self.basis)
        return self.momentum / self.rho

    def at_time(self, time):
        return replace(self, time=float(time))

    def same_fields(self, other):
        """Bitwise equality of density, momentum and energy."""
        return (
            np.array_equal(self.rho.values, other.rho.values)
            and np.array_equal(self.momentum.values, other.momentum.values)
            and self.energy == other.energy
        )
