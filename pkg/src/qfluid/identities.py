"""Operator identities of the constitutive relations, checked on smooth densities."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import discretization as disc
from . import energy as en
from . import physics

IDENTITY_DENSITY_AMPLITUDE = 0.95
REFINEMENT_LADDER = (64, 128, 256)


@dataclass
class IdentityCheck:
    name: str
    value: float
    tol: float
    passed: bool
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "value": self.value, "tol": self.tol,
                "passed": self.passed, "detail": self.detail}


def test_density(resolution, amplitude=IDENTITY_DENSITY_AMPLITUDE):
    """rho = 1 + amplitude cos x on the periodic interval of length 2 pi."""
    d = disc.make_domain(1, [2 * np.pi], [resolution])
    return disc.scalar(d, lambda x: 1.0 + amplitude * np.cos(x))


def identity_suite(resolution=256, params=None):
    """Run every identity; returns a list of :class:`IdentityCheck`."""
    params = params or physics.FluidParams()
    rho = test_density(resolution)
    checks = []

    worst = max(physics.pressure_potential_residual(rho, physics.FluidParams(gamma=g))
                for g in (1.4, 5.0 / 3.0, 2.0, 3.0))
    checks.append(IdentityCheck("pressure-potential", worst, 1e-12, worst <= 1e-12,
                                "max relative |rho P' - P - p| over gamma in {1.4, 5/3, 2, 3}"))

    ladder = sorted(set(REFINEMENT_LADDER) | {resolution})
    ladder = [n for n in ladder if n <= resolution][-3:]
    res = [physics.korteweg_divergence_residual(test_density(n), params) for n in ladder]
    ratios = [res[i] / res[i + 1] for i in range(len(res) - 1)]
    ok = res[-1] <= 1e-5 and all(r >= 10 for r in ratios)
    checks.append(IdentityCheck("korteweg-divergence", res[-1], 1e-5, ok,
                                f"residuals {['%.2e' % r for r in res]} at N={ladder}"))

    lh = en.log_hessian_identity_residual(rho)
    checks.append(IdentityCheck("log-hessian", lh, 1e-6, lh <= 1e-6))

    tr = physics.korteweg_trace_residual(rho, params)
    checks.append(IdentityCheck("korteweg-trace", tr, 1e-10, tr <= 1e-10))

    K1 = physics.korteweg_tensor(rho, params)
    K2 = physics.korteweg_tensor_drift(rho, params)
    gap = (K1 - K2).max_abs() / K1.max_abs()
    checks.append(IdentityCheck("korteweg-drift-form", gap, 1e-8, gap <= 1e-8))
    return checks
