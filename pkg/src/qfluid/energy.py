"""Energy functionals, dissipation integrals and the energy-inequality audit."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import discretization as disc
from . import physics
from .discretization import ScalarField
from .errors import AuditFailed

NAVIER_STOKES = "navier_stokes"
EULER = "euler"


@dataclass(frozen=True)
class EnergyComponents:
    kinetic: float
    potential: float
    quantum: float

    @property
    def total(self):
        return self.kinetic + self.potential + self.quantum

    def __float__(self):
        return self.total


def kinetic_energy(rho, momentum=None, coeffs=None, basis=None):
    """(1/2) int rho |u|^2 from Galerkin coefficients, else (1/2) int |J|^2 / rho."""
    if coeffs is not None and basis is not None:
        u = disc.reconstruct(coeffs, basis)
        return 0.5 * disc.integrate(rho * u.dot(u))
    return 0.5 * disc.integrate(momentum.dot(momentum) / rho)


def quantum_energy(rho, params):
    g = physics.sqrt_gradient(rho)
    return 0.5 * params.hbar * disc.integrate(g.dot(g))


def energy_components(rho, momentum, params, coeffs=None, basis=None):
    physics.require_positive(rho)
    return EnergyComponents(
        kinetic_energy(rho, momentum, coeffs, basis),
        disc.integrate(physics.pressure_potential(rho, params)),
        quantum_energy(rho, params),
    )


def total_energy(state, params, system=NAVIER_STOKES):
    """Energy components of a state.

    The Navier-Stokes form uses the velocity coefficients when present; the
    Euler form always works from the momentum.
    """
    if system == EULER:
        return energy_components(state.rho, state.momentum, params)
    return energy_components(state.rho, state.momentum, params,
                             state.velocity_coeffs, state.basis)


def dissipation_rate(u, params, basis=None):
    """int S(grad u) : grad u.  ``u`` is a VectorField, or coefficients with ``basis``."""
    if basis is not None:
        d = basis.domain
        grad_u = disc.TensorField(d, np.tensordot(np.asarray(u, dtype=float), basis.gradW, axes=1))
    else:
        grad_u = disc.grad_vec(u)
    S = physics.viscous_stress(grad_u, params)
    return disc.integrate(S.ddot(grad_u))


def epsilon_dissipation_rate(rho, params, epsilon):
    """epsilon int (P''(rho) |grad rho|^2 + (hbar/4) rho |Hess log rho|^2)."""
    physics.require_positive(rho)
    if epsilon == 0.0:
        return 0.0
    grad = disc.gradient(rho)
    H = disc.hessian(ScalarField(rho.domain, np.log(rho.values)))
    integrand = (physics.pressure_potential_second(rho, params) * grad.dot(grad)
                 + 0.25 * params.hbar * rho * H.ddot(H))
    return epsilon * disc.integrate(integrand)


def log_hessian_identity_residual(rho):
    """Relative gap in int (Lap rho/rho - |grad rho|^2/(2 rho^2)) Lap rho = int rho |Hess log rho|^2."""
    physics.require_positive(rho)
    lap = disc.laplacian(rho)
    grad = disc.gradient(rho)
    lhs = disc.integrate((lap / rho - grad.dot(grad) / (rho * rho * 2.0)) * lap)
    H = disc.hessian(ScalarField(rho.domain, np.log(rho.values)))
    rhs = disc.integrate(rho * H.ddot(H))
    return abs(lhs - rhs) / max(1.0, abs(rhs))


def lambda_defect(dim, gamma):
    return max(dim * (gamma - 1.0), 2.0)


# ---------------------------------------------------------------------------
# audit over a trajectory
# ---------------------------------------------------------------------------
@dataclass
class EnergyReport:
    times: np.ndarray
    energy: np.ndarray
    kinetic: np.ndarray
    potential: np.ndarray
    quantum: np.ndarray
    dissipation_integral: np.ndarray
    epsilon_dissipation: np.ndarray
    inequality_slack: np.ndarray
    defect_proxy: np.ndarray
    tol_budget: np.ndarray
    lambda_defect: float
    e0: float
    jumps: list = field(default_factory=list)

    @property
    def passed(self):
        return bool(np.all(self.inequality_slack >= -self.tol_budget))

    @property
    def first_violation(self):
        bad = np.nonzero(self.inequality_slack < -self.tol_budget)[0]
        return None if not len(bad) else float(self.times[bad[0]])

    def check(self):
        if not self.passed:
            t = self.first_violation
            raise AuditFailed(f"energy budget violated first at t={t}", time=t)
        return self

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "E", "E_kin", "E_pot", "E_quantum", "diss_cum", "eps_diss_cum",
                    "slack", "defect_proxy"])
        cols = (self.times, self.energy, self.kinetic, self.potential, self.quantum,
                self.dissipation_integral, self.epsilon_dissipation, self.inequality_slack,
                self.defect_proxy)
        for row in zip(*cols):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    def summary(self):
        return {
            "passed": self.passed,
            "first_violation": self.first_violation,
            "e0": self.e0,
            "energy_final": float(self.energy[-1]),
            "max_defect_proxy": float(self.defect_proxy.max()),
            "min_slack_margin": float(np.min(self.inequality_slack + self.tol_budget)),
            "lambda_defect": self.lambda_defect,
            "jumps": self.jumps[:10],
            "n_jumps": len(self.jumps),
        }


def _cumulative_trapezoid(t, y):
    out = np.zeros_like(t, dtype=float)
    if len(t) > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def energy_report(traj, params, config=None, c_tol=None, system=None, strict=False):
    """Audit E(t) + dissipation(t) + eps-dissipation(t) <= E(0-) + tol_budget(t).

    Cumulative dissipation integrals are taken from the solver diagnostics
    when the trajectory carries them, else by trapezoidal quadrature of the
    sampled rates.  ``tol_budget = c_tol dt^2 t`` with ``c_tol = 10 E(0)``
    by default, plus a round-off floor of ``1e-12 E(0)``.
    """
    meta = traj.metadata
    system = system or meta.get("system", NAVIER_STOKES)
    dt = config.dt if config is not None else meta.get("dt", traj.tick)
    epsilon = config.epsilon if config is not None else meta.get("epsilon", 0.0)
    times = traj.times.astype(float)
    comps = [total_energy(s, params, system) for s in traj.states]
    kin = np.array([c.kinetic for c in comps])
    pot = np.array([c.potential for c in comps])
    qua = np.array([c.quantum for c in comps])
    E = kin + pot + qua

    if "dissipation" in traj.diagnostics:
        diss = np.asarray(traj.diagnostics["dissipation"], dtype=float)
    else:
        rates = np.array([dissipation_rate(s.velocity, params) for s in traj.states])
        diss = _cumulative_trapezoid(times, rates)
    if "eps_dissipation" in traj.diagnostics:
        epsd = np.asarray(traj.diagnostics["eps_dissipation"], dtype=float)
    else:
        rates = np.array([epsilon_dissipation_rate(s.rho, params, epsilon) for s in traj.states])
        epsd = _cumulative_trapezoid(times, rates)

    e0 = float(traj.e0)
    if c_tol is None:
        c_tol = 10.0 * abs(E[0])
    tol = c_tol * dt ** 2 * times + 1e-12 * abs(E[0])
    slack = e0 - (E + diss + epsd)
    jumps = [float(times[i + 1]) for i in np.nonzero(np.diff(E + diss + epsd) > tol[1:])[0]]
    report = EnergyReport(times, E, kin, pot, qua, diss, epsd, slack, np.maximum(slack, 0.0),
                          tol, lambda_defect(params.dim, params.gamma), e0, jumps)
    if strict:
        report.check()
    return report


@dataclass
class DefectCheck:
    passed: bool
    lambda_defect: float
    margins: np.ndarray


def defect_trace_bound_check(report, params, energy_gap=None):
    """Check defect_proxy / lambda <= energy gap at every sample.

    The default energy gap is the audited slack plus its tolerance, i.e. the
    energy inequality with the energy defect replaced by defect / lambda.
    """
    lam = lambda_defect(params.dim, params.gamma)
    if energy_gap is None:
        energy_gap = report.inequality_slack + report.tol_budget
    margins = np.asarray(energy_gap, dtype=float) - report.defect_proxy / lam
    return DefectCheck(bool(np.all(margins >= 0.0)), lam, margins)
