"""Two-level Faedo-Galerkin scheme for the quantum Navier-Stokes/Euler systems.

The density is resolved on the full grid and obeys the regularized continuity
equation ``rho_t + div(rho u) = eps Lap rho``.  The velocity lives in the
span of a :class:`~qfluid.discretization.GalerkinBasis` and is determined by
the projected momentum balance ``d/dt M[rho] c = N[rho, u]``.  One time step
solves both by the fixed-point iteration

    rho_k = continuity(rho_n, u_{k-1}),
    M[rho_k] c_k = M[rho_n] c_n + dt N[rho_*, u_*],

where ``*`` is the right endpoint (``time_quadrature="right"``) or the
midpoint (``"midpoint"``, default) of the step.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, gmres

from . import discretization as disc
from . import energy as en
from . import physics
from .discretization import ScalarField, VectorField
from .errors import CFLViolation, FixedPointDiverged, PositivityLost, SolverError, BoundViolated
from .state import FluidState
from .trajectory import Trajectory, config_hash

log = logging.getLogger(__name__)

SEMI_IMPLICIT = "semi-implicit"
IMPLICIT = "implicit"
MIDPOINT = "midpoint"
RIGHT = "right"


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-3
    epsilon: float = 0.0
    n_modes: int = 8
    fixed_point_tol: float = 1e-11
    fixed_point_max_iter: int = 50
    continuity_scheme: str = SEMI_IMPLICIT
    rho_floor: float = 1e-8
    courant: float = 0.5
    time_quadrature: str = MIDPOINT

    def __post_init__(self):
        problems = []
        if not self.dt > 0:
            problems.append("dt must be > 0")
        if not self.epsilon >= 0:
            problems.append("epsilon must be >= 0")
        if not self.fixed_point_tol > 0:
            problems.append("fixed_point_tol must be > 0")
        if not self.rho_floor > 0:
            problems.append("rho_floor must be > 0")
        if self.continuity_scheme not in (SEMI_IMPLICIT, IMPLICIT):
            problems.append(f"unknown continuity scheme {self.continuity_scheme!r}")
        if self.time_quadrature not in (MIDPOINT, RIGHT):
            problems.append(f"unknown time quadrature {self.time_quadrature!r}")
        if problems:
            raise ValueError("; ".join(problems))

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# continuity equation
# ---------------------------------------------------------------------------
def _transport_divergence(rho_vals, u, domain):
    flux = disc.dealias(VectorField(domain, rho_vals * u.values))
    return disc.divergence(flux).values


def continuity_step(rho, u, epsilon, dt, scheme=SEMI_IMPLICIT, rho_floor=1e-8, courant=0.5,
                    theta=1.0, rho_flux=None, time=None):
    """One step of ``rho_t + div(rho u) = eps Lap rho``.

    ``semi-implicit``: transport explicit with density ``rho_flux`` (default
    ``rho``), diffusion by the theta-method, diagonal in spectral space.
    ``implicit``: transport and diffusion both by the theta-method, solved
    with GMRES preconditioned by the diffusion diagonal.
    """
    physics.require_positive(rho)
    d = rho.domain
    d.check_same(u)
    h = min(d.spacing)
    umax = u.max_abs()
    if dt * umax / h > courant:
        raise CFLViolation(f"Courant number {dt * umax / h:.3f} exceeds {courant}", time)

    diff = epsilon * dt * d.k2
    if scheme == SEMI_IMPLICIT:
        src = rho if rho_flux is None else rho_flux
        rhs = rho.coeffs * (1.0 - (1.0 - theta) * diff)
        rhs = rhs - dt * d.forward(_transport_divergence(src.values, u, d), (1,) * d.dim)
        new = d.backward(rhs / (1.0 + theta * diff), (1,) * d.dim)
    elif scheme == IMPLICIT:
        new = _implicit_continuity(rho, u, epsilon, dt, theta)
    else:
        raise ValueError(f"unknown continuity scheme {scheme!r}")

    out = ScalarField(d, new)
    if out.min() <= rho_floor:
        raise PositivityLost(f"density minimum {out.min():.3e} fell to the floor {rho_floor:.1e}", time)
    return out


def _implicit_continuity(rho, u, epsilon, dt, theta):
    d = rho.domain
    shape = d.grid_shape
    even = (1,) * d.dim

    def lap(vals):
        return d.backward(-d.k2 * d.forward(vals, even), even)

    def explicit_part(vals):
        return dt * _transport_divergence(vals, u, d) - epsilon * dt * lap(vals)

    b = rho.values - (1.0 - theta) * explicit_part(rho.values)
    A = LinearOperator((rho.values.size,) * 2, dtype=float,
                       matvec=lambda x: (x.reshape(shape) + theta * explicit_part(x.reshape(shape))).ravel())
    pre_diag = 1.0 / (1.0 + theta * epsilon * dt * d.k2)
    P = LinearOperator((rho.values.size,) * 2, dtype=float,
                       matvec=lambda x: d.backward(d.forward(x.reshape(shape), even) * pre_diag, even).ravel())
    x, info = gmres(A, b.ravel(), x0=rho.values.ravel(), M=P, rtol=1e-14, atol=0.0, restart=60, maxiter=200)
    if info != 0:
        raise SolverError(f"implicit continuity solve did not converge (info={info})")
    return x.reshape(shape)


# ---------------------------------------------------------------------------
# momentum balance
# ---------------------------------------------------------------------------
def _mass_matrix(rho_vals, basis):
    r = np.tile(rho_vals.ravel(), basis.domain.dim)
    M = (basis._Ww * r) @ basis._Wflat.T
    return 0.5 * (M + M.T)


def mass_operator(rho, basis):
    """M_ij = int rho w_i . w_j."""
    physics.require_positive(rho)
    basis.check(rho)
    return _mass_matrix(rho.values, basis)


def _velocity_gradient(c, basis):
    return np.tensordot(c, basis.gradW, axes=1)


def _momentum_rhs(rho, c, basis, params, epsilon):
    d = basis.domain
    dim = d.dim
    u = np.tensordot(c, basis.W, axes=1)
    gu = _velocity_gradient(c, basis)
    sq_grad = physics.sqrt_gradient(rho).values
    A = rho.values * np.einsum("a...,b...->ab...", u, u)
    A += params.hbar * np.einsum("a...,b...->ab...", sq_grad, sq_grad)
    if params.mu or params.lambda_bulk:
        A -= physics.viscous_stress(disc.TensorField(d, gu), params).values
    p = physics.pressure(rho, params).values
    grad_rho = disc.gradient(rho).values
    out = basis._gradWw @ A.ravel() + basis._divWw @ p.ravel()
    out += basis._graddivWw @ (0.25 * params.hbar * grad_rho).ravel()
    if epsilon:
        C = -epsilon * np.einsum("ij...,j...->i...", gu, grad_rho)
        out += basis._Ww @ C.ravel()
    del dim
    return out


def momentum_rhs(state, basis, params, epsilon=0.0):
    """Coordinates of the forcing functional N[rho, u] on the basis modes."""
    physics.require_positive(state.rho)
    basis.check(state.rho)
    c = state.velocity_coeffs
    if c is None:
        c = _project_velocity(state.rho, state.momentum, basis)
    return _momentum_rhs(state.rho, np.asarray(c, dtype=float), basis, params, epsilon)


def _project_velocity(rho, momentum, basis):
    M = _mass_matrix(rho.values, basis)
    return scipy.linalg.solve(M, disc.project(momentum, basis), assume_a="pos")


def projection_gap(rho, momentum, basis):
    """L2 distance between J and rho * u with u the Galerkin velocity of J."""
    u = disc.reconstruct(_project_velocity(rho, momentum, basis), basis)
    return disc.l2_norm(momentum - u * rho)


def make_state(rho, momentum, basis, params, time=0.0, system=en.NAVIER_STOKES):
    """Galerkin state from density and momentum data.

    ``u`` solves ``M[rho] c = (int J . w_i)_i``; the stored momentum is
    ``rho u``.  ``momentum=None`` means ``J = 0``.
    """
    physics.require_positive(rho)
    if momentum is None:
        momentum = VectorField(rho.domain, np.zeros((rho.domain.dim,) + rho.domain.grid_shape))
    c = _project_velocity(rho, momentum, basis)
    return state_from_coeffs(rho, c, basis, params, time, system)


def state_from_coeffs(rho, c, basis, params, time=0.0, system=en.NAVIER_STOKES):
    u = disc.reconstruct(c, basis)
    mom = u * rho
    comps = en.energy_components(rho, mom, params, None if system == en.EULER else c, basis)
    return FluidState(float(time), rho, mom, comps.total, np.asarray(c, dtype=float), basis)


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------
@dataclass
class StepInfo:
    iterations: int
    residuals: list
    converged: bool
    dissipation: float = 0.0
    eps_dissipation: float = 0.0


def fixed_point_step(state, config, params, basis, system=en.NAVIER_STOKES):
    """Advance one step; returns ``(new_state, StepInfo)``."""
    dt = config.dt
    rho0 = state.rho
    c0 = np.asarray(state.velocity_coeffs, dtype=float)
    M0c0 = _mass_matrix(rho0.values, basis) @ c0
    mid = config.time_quadrature == MIDPOINT
    theta = 0.5 if mid else 1.0

    c_prev = c0
    rho_prev = rho0
    residuals = []
    converged = False
    rho_k = rho0
    c_k = c0
    for _ in range(config.fixed_point_max_iter):
        c_tr = 0.5 * (c0 + c_prev) if mid else c_prev
        u_tr = disc.reconstruct(c_tr, basis)
        rho_flux = ScalarField(rho0.domain, 0.5 * (rho0.values + rho_prev.values)) if mid else rho0
        rho_k = continuity_step(rho0, u_tr, config.epsilon, dt, config.continuity_scheme,
                                config.rho_floor, config.courant, theta=theta,
                                rho_flux=rho_flux, time=state.time)
        if mid:
            rho_q = ScalarField(rho0.domain, 0.5 * (rho0.values + rho_k.values))
        else:
            rho_q = rho_k
        N = _momentum_rhs(rho_q, c_tr, basis, params, config.epsilon)
        Mk = _mass_matrix(rho_k.values, basis)
        c_k = scipy.linalg.solve(Mk, M0c0 + dt * N, assume_a="pos")
        res = float(np.linalg.norm(c_k - c_prev))
        residuals.append(res)
        if not np.isfinite(res):
            raise FixedPointDiverged("fixed-point residual is not finite", state.time)
        if res <= config.fixed_point_tol:
            converged = True
            break
        if len(residuals) >= 4 and all(residuals[-i] > residuals[-i - 1] for i in (1, 2, 3)):
            raise FixedPointDiverged(
                f"fixed-point residual grew three times in a row ({res:.2e})", state.time)
        c_prev, rho_prev = c_k, rho_k
    if not converged:
        if residuals[-1] > residuals[0]:
            raise FixedPointDiverged(
                f"no convergence in {len(residuals)} iterations; residual grew to {residuals[-1]:.2e}",
                state.time)
        log.warning("fixed point stopped at residual %.2e after %d iterations",
                    residuals[-1], len(residuals))

    c_q = 0.5 * (c0 + c_k) if mid else c_k
    rho_q = ScalarField(rho0.domain, 0.5 * (rho0.values + rho_k.values)) if mid else rho_k
    diss = dt * en.dissipation_rate(c_q, params, basis) if (params.mu or params.lambda_bulk) else 0.0
    epsd = dt * en.epsilon_dissipation_rate(rho_q, params, config.epsilon) if config.epsilon else 0.0
    new = state_from_coeffs(rho_k, c_k, basis, params, state.time + dt, system)
    return new, StepInfo(len(residuals), residuals, converged, diss, epsd)


def advance(state, config, params, basis, system=en.NAVIER_STOKES):
    """One time step of length ``config.dt``."""
    return fixed_point_step(state, config, params, basis, system)[0]


def run_simulation(init, config, params, basis, t_final, snapshot_every=1, system=en.NAVIER_STOKES,
                   e0=None, label=None):
    """March from ``init`` to ``t_final`` in steps of ``config.dt``.

    Snapshots are kept every ``snapshot_every`` steps and at the final step.
    Solver failures end the run early: the partial trajectory is returned with
    ``error`` set.
    """
    span = t_final - init.time
    if span < 0:
        raise ValueError("t_final precedes the initial time")
    n_steps = int(round(span / config.dt))
    if abs(n_steps * config.dt - span) > 1e-9 * max(1.0, abs(t_final)):
        raise ValueError(f"t_final - t0 = {span} is not a multiple of dt = {config.dt}")
    snapshot_every = max(1, int(snapshot_every))
    if init.velocity_coeffs is None or init.basis is not basis:
        init = make_state(init.rho, init.momentum, basis, params, init.time, system)

    meta = {
        "system": system,
        "dt": config.dt,
        "epsilon": config.epsilon,
        "n_modes": basis.n,
        "params": params.to_dict(),
        "config": config.to_dict(),
        "domain": basis.domain.spec(),
        "snapshot_every": snapshot_every,
        "config_hash": config_hash(params.to_dict(), config.to_dict(), basis.domain.spec(),
                                   system, snapshot_every, label),
    }
    if label is not None:
        meta["label"] = label

    ticks, states = [0], [init]
    diss, epsd, iters = [0.0], [0.0], [0]
    cum_d = cum_e = 0.0
    max_it = 0
    state = init
    error = None
    for k in range(1, n_steps + 1):
        try:
            state, info = fixed_point_step(state, config, params, basis, system)
        except SolverError as exc:
            error = f"{type(exc).__name__}: {exc}"
            log.warning("run stopped at t=%s: %s", exc.time, error)
            break
        state = state.at_time(init.time + k * config.dt)
        cum_d += info.dissipation
        cum_e += info.eps_dissipation
        max_it = max(max_it, info.iterations)
        if k % snapshot_every == 0 or k == n_steps:
            ticks.append(k)
            states.append(state)
            diss.append(cum_d)
            epsd.append(cum_e)
            iters.append(max_it)
            max_it = 0

    return Trajectory(ticks, config.dt, states, init.energy if e0 is None else float(e0), meta,
                      {"dissipation": diss, "eps_dissipation": epsd, "iterations": iters}, error)


# ---------------------------------------------------------------------------
# density bounds
# ---------------------------------------------------------------------------
@dataclass
class DensityBoundsReport:
    passed: bool
    div_sup: float
    times: np.ndarray
    rho_min: np.ndarray
    rho_max: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    slack: float = 1.05
    first_violation: int = None
    notes: list = field(default_factory=list)


def _div_sup(state):
    if state.velocity_coeffs is not None and state.basis is not None:
        div = np.tensordot(state.velocity_coeffs, state.basis.divW, axes=1)
    else:
        div = disc.divergence(state.velocity).values
    return float(np.max(np.abs(div)))


def check_density_bounds(traj, u_inf_bound=None, slack=1.05, strict=True):
    """Audit rho_min(0) e^{-tD}/slack <= rho(t) <= rho_max(0) e^{tD} slack.

    ``D`` is the sup of ``|div u|`` over the samples, raised to
    ``u_inf_bound`` when an a-priori bound is supplied.
    """
    D = max(_div_sup(s) for s in traj.states)
    if u_inf_bound is not None:
        D = max(D, float(u_inf_bound))
    t = traj.times.astype(float)
    rmin = np.array([s.rho.min() for s in traj.states])
    rmax = np.array([s.rho.max() for s in traj.states])
    lower = rmin[0] * np.exp(-t * D) / slack
    upper = rmax[0] * np.exp(t * D) * slack
    bad = np.nonzero((rmin < lower) | (rmax > upper))[0]
    first = int(bad[0]) if len(bad) else None
    report = DensityBoundsReport(first is None, D, t, rmin, rmax, lower, upper, slack, first)
    if traj.metadata.get("epsilon", 0.0) == 0.0:
        report.notes.append("trajectory has epsilon = 0")
    if strict and first is not None:
        raise BoundViolated(f"density bound violated at sample {first} (t={t[first]})",
                            index=first, time=float(t[first]))
    return report
