"""Relative energy between a computed state and a smooth reference solution.

E(rho, u, v | r, U, V) = int 1/2 rho |u - U|^2
                       + P(rho) - P'(r)(rho - r) - P(r)
                       + hbar/2 rho |v - V|^2

with drift velocities ``v = grad sqrt(rho)/sqrt(rho)``.  Each part is a
nonnegative form, so the total vanishes only when the states agree.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import discretization as disc
from . import physics
from .discretization import ScalarField, VectorField
from .errors import DomainMismatch, UnsupportedKind, WindowEmpty

CONSTANT = "constant"
ISOTHERMAL_DRIFT = "isothermal-drift"
REFERENCE_KINDS = (CONSTANT, ISOTHERMAL_DRIFT)


@dataclass(frozen=True)
class RelativeEnergy:
    kinetic: float
    pressure: float
    quantum: float

    @property
    def total(self):
        return self.kinetic + self.pressure + self.quantum

    def __float__(self):
        return self.total


def _drift(rho):
    return physics.sqrt_gradient(rho) / ScalarField(rho.domain, np.sqrt(rho.values))


def bregman_pressure(rho, ref_rho, params):
    """Pointwise P(rho) - P'(r)(rho - r) - P(r)."""
    P = physics.pressure_potential(rho, params)
    Pr = physics.pressure_potential(ref_rho, params)
    dPr = physics.pressure_potential_prime(ref_rho, params)
    return P - dPr * (rho - ref_rho) - Pr


def relative_energy_fields(rho, u, ref_rho, ref_u, params):
    physics.require_positive(rho)
    physics.require_positive(ref_rho)
    rho.domain.check_same(u, ref_rho, ref_u)
    du = u - ref_u
    dv = _drift(rho) - _drift(ref_rho)
    return RelativeEnergy(
        0.5 * disc.integrate(rho * du.dot(du)),
        disc.integrate(bregman_pressure(rho, ref_rho, params)),
        0.5 * params.hbar * disc.integrate(rho * dv.dot(dv)),
    )


def relative_energy(state, ref_rho, ref_u, params):
    """Relative energy of ``state`` with respect to ``(ref_rho, ref_u)``."""
    return relative_energy_fields(state.rho, state.velocity, ref_rho, ref_u, params)


def quantum_gap_gradient_form(rho, ref_rho, params):
    """(hbar/2) int |grad sqrt(rho) - sqrt(rho/r) grad sqrt(r)|^2.

    Equal to the quantum part of :func:`relative_energy_fields`; kept as an
    independent evaluation.
    """
    g = physics.sqrt_gradient(rho)
    gr = physics.sqrt_gradient(ref_rho)
    diff = g - gr * ScalarField(rho.domain, np.sqrt(rho.values / ref_rho.values))
    return 0.5 * params.hbar * disc.integrate(diff.dot(diff))


# ---------------------------------------------------------------------------
# manufactured references
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class StrongSolution:
    """Spatially constant exact solution ``(rho_bar, U)``, evaluable at any time."""

    kind: str
    domain: disc.Domain
    rho_bar: float
    velocity: tuple

    def rho(self, t=0.0):
        return ScalarField(self.domain, np.full(self.domain.grid_shape, self.rho_bar))

    def u(self, t=0.0):
        vals = np.empty((self.domain.dim,) + self.domain.grid_shape)
        for i, c in enumerate(self.velocity):
            vals[i] = c
        return VectorField(self.domain, vals)

    def at(self, t):
        return self.rho(t), self.u(t)

    def momentum(self, t=0.0):
        return self.u(t) * self.rho(t)


def manufactured_strong_solution(kind, params, domain, rho_bar=1.0, velocity=None):
    """Exact smooth solutions of both systems.

    ``constant``: ``rho = rho_bar``, ``u = 0``.  ``isothermal-drift``:
    ``rho = rho_bar``, ``u = U`` constant; periodic domains only, where it is
    the Galilean boost of the constant state.
    """
    if not rho_bar > 0:
        raise ValueError("rho_bar must be positive")
    if kind == CONSTANT:
        return StrongSolution(kind, domain, float(rho_bar), (0.0,) * domain.dim)
    if kind == ISOTHERMAL_DRIFT:
        if not domain.periodic:
            raise UnsupportedKind("isothermal drift needs a periodic domain")
        if velocity is None:
            velocity = (1.0,) + (0.0,) * (domain.dim - 1)
        velocity = tuple(float(c) for c in np.broadcast_to(velocity, (domain.dim,)))
        return StrongSolution(kind, domain, float(rho_bar), velocity)
    raise UnsupportedKind(f"unknown reference kind {kind!r}; expected one of {REFERENCE_KINDS}")


# ---------------------------------------------------------------------------
# weak-strong comparison
# ---------------------------------------------------------------------------
@dataclass
class RelativeEnergyReport:
    times: np.ndarray
    rel_energy: np.ndarray
    kinetic: np.ndarray
    pressure: np.ndarray
    quantum: np.ndarray
    gronwall_C: float
    gronwall_L: float
    fitted_L: float
    atol: float
    passed: bool

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "rel_energy", "kinetic", "pressure", "quantum"])
        for row in zip(self.times, self.rel_energy, self.kinetic, self.pressure, self.quantum):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    def summary(self):
        return {"C": self.gronwall_C, "L": self.gronwall_L, "fitted_L": self.fitted_L,
                "rel_energy_0": float(self.rel_energy[0]),
                "rel_energy_max": float(self.rel_energy.max()), "passed": self.passed}


def gronwall_envelope(times, values, atol):
    """Smallest L >= 0 with values(t) <= (values(0) + atol) e^{L t}."""
    base = values[0] + atol
    t = times[1:]
    ratio = values[1:] / base
    mask = (t > 0) & (ratio > 1.0)
    if not np.any(mask):
        return 0.0
    return float(np.max(np.log(ratio[mask]) / t[mask]))


def gronwall_fit(times, values, atol):
    """Least-squares fit of log values = log C + L t on samples above 10 atol.

    Returns ``(C, L)``; ``(0.0, 0.0)`` when fewer than two samples qualify.
    """
    keep = values > 10.0 * atol
    if keep.sum() < 2:
        return 0.0, 0.0
    L, logC = np.polyfit(times[keep], np.log(values[keep]), 1)
    return float(np.exp(logC)), float(L)


def weak_strong_compare(traj, reference, params, fit_window=None, atol=1e-10, L_max=1.0):
    """Relative energy of every sample of ``traj`` against ``reference``.

    ``fit_window = (t0, t1)`` restricts the Gronwall fit.  ``passed`` requires
    a finite envelope exponent and, when the initial relative energy is below
    ``atol``, ``rel_energy(t) <= atol e^{L_max t}`` throughout.
    """
    if reference.domain != traj.domain:
        raise DomainMismatch("trajectory and reference live on different domains")
    times = traj.times.astype(float)
    parts = [relative_energy(s, *reference.at(t), params) for t, s in zip(times, traj.states)]
    kin = np.array([p.kinetic for p in parts])
    pre = np.array([p.pressure for p in parts])
    qua = np.array([p.quantum for p in parts])
    rel = kin + pre + qua

    sel = np.ones(len(times), dtype=bool)
    if fit_window is not None:
        sel = (times >= fit_window[0]) & (times <= fit_window[1])
    if not np.any(sel):
        raise WindowEmpty(f"no samples in fit window {fit_window}")
    tw, rw = times[sel] - times[sel][0], rel[sel]
    L_env = gronwall_envelope(tw, rw, atol)
    C, L_fit = gronwall_fit(tw, rw, atol)
    if C == 0.0:
        C = float(rw[0] + atol)

    passed = bool(np.isfinite(L_env)) and bool(np.all(rel >= -1e-12))
    if rel[0] <= atol:
        passed = passed and bool(np.all(rel <= atol * np.exp(L_max * times)))
    return RelativeEnergyReport(times, rel, kin, pre, qua, C, L_env, L_fit, atol, passed)
