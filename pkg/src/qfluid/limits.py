"""Parameter ladders for the eps -> 0, n -> infinity and delta -> 0 limits.

Each ladder entry is an independent simulation; the sweep then measures how
the runs approach one another in the trajectory metric

    dist = max over t of ||rho_1 - rho_2||_{-k} + ||J_1 - J_2||_{-k} + |E_1 - E_2|.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import discretization as disc
from . import energy as en
from . import galerkin_solver as gs
from . import physics
from .discretization import ScalarField
from .errors import GridUncovered, QFluidError, SolverError
from .trajectory import SCHEMA_VERSION, config_hash, save_trajectory, write_json

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# trajectory metric
# ---------------------------------------------------------------------------
def state_distance(s1, s2, k):
    return (disc.negative_sobolev_norm(s1.rho - s2.rho, k)
            + disc.negative_sobolev_norm(s1.momentum - s2.momentum, k)
            + abs(s1.energy - s2.energy))


def _times_index(traj, rtol=1e-9):
    return {round(float(t) / rtol): i for i, t in enumerate(traj.times)}


def trajectory_distance(t1, t2, k=None, time_grid=None):
    """Sup over ``time_grid`` (default: common sample times) of the state distance."""
    t1.domain.check_same(t2.states[0].rho)
    if k is None:
        k = disc.default_sobolev_index(t1.domain.dim)
    i1, i2 = _times_index(t1), _times_index(t2)
    if time_grid is None:
        keys = sorted(set(i1) & set(i2))
        if not keys:
            raise GridUncovered("trajectories share no sample time")
    else:
        keys = [round(float(t) / 1e-9) for t in time_grid]
        missing = [t for t, key in zip(time_grid, keys) if key not in i1 or key not in i2]
        if missing:
            raise GridUncovered(f"time grid not covered by both trajectories: {missing[:5]}")
    return max(state_distance(t1.states[i1[key]], t2.states[i2[key]], k) for key in keys)


def terminal_distance(t1, t2, k=None):
    T = min(t1.horizon, t2.horizon)
    return trajectory_distance(t1, t2, k, [T])


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------
@dataclass
class SweepResult:
    parameter: str
    ladder: list
    trajectories: list
    errors: list
    pairwise_distances: np.ndarray
    cauchy_ratio: list
    observables: dict = field(default_factory=dict)
    audits: list = field(default_factory=list)
    reference: object = None
    reference_distances: list = field(default_factory=list)
    findings: list = field(default_factory=list)

    def manifest(self):
        def clean(x):
            return None if x is None or not np.isfinite(x) else float(x)
        return {
            "schema_version": SCHEMA_VERSION,
            "config_hash": config_hash(self.parameter, self.ladder,
                                       [t.config_hash if t is not None else None for t in self.trajectories]),
            "parameter": self.parameter,
            "ladder": [float(v) for v in self.ladder],
            "errors": self.errors,
            "distances": [[clean(x) for x in row] for row in self.pairwise_distances],
            "ratios": [clean(r) for r in self.cauchy_ratio],
            "observables": {k: [clean(x) for x in v] for k, v in self.observables.items()},
            "audits": self.audits,
            "reference_distances": [clean(x) for x in self.reference_distances],
            "findings": self.findings,
            "entries": [None if t is None else f"entry_{i:02d}" for i, t in enumerate(self.trajectories)],
        }

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        for i, t in enumerate(self.trajectories):
            if t is not None:
                save_trajectory(t, os.path.join(directory, f"entry_{i:02d}"))
        if self.reference is not None:
            save_trajectory(self.reference, os.path.join(directory, "reference"))
        write_json(os.path.join(directory, "sweep.json"), self.manifest())


def worker_count(jobs):
    cap = os.environ.get("QFLUID_THREADS")
    jobs = max(1, int(jobs))
    if cap:
        jobs = min(jobs, max(1, int(cap)))
    return jobs


def _run_entry(task):
    init, config, params, n_modes, t_final, snapshot_every, system, label = task
    try:
        basis = disc.galerkin_basis(init.domain, n_modes)
        if init.basis is basis and init.velocity_coeffs is not None:
            start = gs.state_from_coeffs(init.rho, init.velocity_coeffs, basis, params, init.time, system)
        else:
            start = gs.make_state(init.rho, init.momentum, basis, params, init.time, system)
        traj = gs.run_simulation(start, config, params, basis, t_final, snapshot_every, system, label=label)
        return traj, traj.error
    except (SolverError, QFluidError, ValueError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _run_all(tasks, jobs):
    jobs = worker_count(jobs)
    if jobs == 1 or len(tasks) == 1:
        return [_run_entry(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(_run_entry, tasks))


def _distance_matrix(trajs, k):
    m = len(trajs)
    D = np.full((m, m), np.nan)
    for i in range(m):
        if trajs[i] is not None:
            D[i, i] = 0.0
        for j in range(i + 1, m):
            if trajs[i] is not None and trajs[j] is not None:
                D[i, j] = D[j, i] = trajectory_distance(trajs[i], trajs[j], k)
    return D


def _cauchy(D):
    gaps = [D[i, i + 1] for i in range(len(D) - 1)]
    return [gaps[i + 1] / gaps[i] if gaps[i] > 0 else np.nan for i in range(len(gaps) - 1)]


def _audit(traj, params, config):
    if traj is None:
        return None
    rep = en.energy_report(traj, params, config)
    return {"passed": rep.passed, "first_violation": rep.first_violation}


def _check_ladder(ladder, descending=True):
    vals = [float(v) for v in ladder]
    if not vals:
        raise ValueError("empty ladder")
    diffs = np.diff(vals)
    if descending and (np.any(diffs >= 0) or vals[-1] < 0 or np.any(np.array(vals[:-1]) <= 0)):
        raise ValueError(f"ladder must be strictly decreasing and positive (last entry may be 0): {vals}")
    if not descending and (np.any(diffs <= 0) or vals[0] <= 0):
        raise ValueError(f"ladder must be strictly increasing and positive: {vals}")
    return vals


def _monotone_decreasing(values):
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.isfinite(v)) and np.all(np.diff(v) < 0))


def viscosity_sweep(init, params, ladder, config, t_final, snapshot_every=1, n_modes=None,
                    jobs=1, k=None, euler_reference=True):
    """Runs with ``mu, lambda_bulk`` scaled by each delta, plus a delta = 0 Euler run."""
    ladder = _check_ladder(ladder)
    n = n_modes if n_modes is not None else config.n_modes
    plist = [params.scaled_viscosity(dl) for dl in ladder]
    systems = [en.EULER if dl == 0 else en.NAVIER_STOKES for dl in ladder]
    tasks = [(init, config, p, n, t_final, snapshot_every, s, f"delta={dl!r}")
             for p, s, dl in zip(plist, systems, ladder)]
    if euler_reference:
        tasks.append((init, config, params.scaled_viscosity(0.0), n, t_final, snapshot_every, en.EULER,
                      "delta=0"))
    out = _run_all(tasks, jobs)
    ref = out.pop()[0] if euler_reference else None
    trajs = [o[0] for o in out]
    errors = [o[1] for o in out]

    work = [float(t.diagnostics["dissipation"][-1]) if t is not None else np.nan for t in trajs]
    D = _distance_matrix(trajs, k)
    res = SweepResult("delta", ladder, trajs, errors, D, _cauchy(D),
                      {"viscous_work": work},
                      [_audit(t, p, config) for t, p in zip(trajs, plist)], ref)
    if ref is not None:
        res.reference_distances = [terminal_distance(t, ref, k) if t is not None else np.nan for t in trajs]
        if not _monotone_decreasing(res.reference_distances):
            res.findings.append("terminal distance to the delta=0 run is not monotone in delta")
    if not _monotone_decreasing(work):
        res.findings.append("delta-scaled viscous work is not decreasing along the ladder")
    if any(r >= 1 for r in res.cauchy_ratio if np.isfinite(r)):
        res.findings.append("ladder is not Cauchy (some ratio >= 1)")
    return res


def _eps_integrals(traj, params, epsilon):
    """eps int int P''|grad rho|^2 and eps (hbar/4) int int rho |Hess log rho|^2 by trapezoid."""
    t = traj.times.astype(float)
    a, b = [], []
    for s in traj.states:
        rho = s.rho
        g = disc.gradient(rho)
        H = disc.hessian(ScalarField(rho.domain, np.log(rho.values)))
        a.append(disc.integrate(physics.pressure_potential_second(rho, params) * g.dot(g)))
        b.append(0.25 * params.hbar * disc.integrate(rho * H.ddot(H)))
    return epsilon * float(np.trapezoid(a, t)), epsilon * float(np.trapezoid(b, t))


def epsilon_sweep(init, params, ladder, config, t_final, snapshot_every=1, n_modes=None, jobs=1, k=None):
    """Runs with artificial viscosity eps taken from ``ladder`` at fixed mu."""
    ladder = _check_ladder(ladder)
    n = n_modes if n_modes is not None else config.n_modes
    system = en.NAVIER_STOKES if (params.mu or params.lambda_bulk) else en.EULER
    configs = [replace(config, epsilon=e) for e in ladder]
    tasks = [(init, c, params, n, t_final, snapshot_every, system, f"epsilon={e!r}")
             for c, e in zip(configs, ladder)]
    out = _run_all(tasks, jobs)
    trajs = [o[0] for o in out]
    errors = [o[1] for o in out]
    pres, quant, total = [], [], []
    for t, e in zip(trajs, ladder):
        if t is None:
            pres.append(np.nan), quant.append(np.nan), total.append(np.nan)
            continue
        a, b = _eps_integrals(t, params, e)
        pres.append(a)
        quant.append(b)
        total.append(float(t.diagnostics["eps_dissipation"][-1]))
    D = _distance_matrix(trajs, k)
    res = SweepResult("epsilon", ladder, trajs, errors, D, _cauchy(D),
                      {"eps_dissipation": total, "eps_pressure": pres, "eps_quantum": quant},
                      [_audit(t, params, c) for t, c in zip(trajs, configs)])
    for name in ("eps_pressure", "eps_quantum"):
        if len(ladder) > 1 and not _monotone_decreasing(res.observables[name]):
            res.findings.append(f"{name} does not decrease along the ladder")
    return res


def mode_sweep(init, params, ladder, config, t_final, snapshot_every=1, jobs=1, k=None):
    """Runs with Galerkin dimension n taken from an increasing ``ladder``."""
    ladder = [int(v) for v in _check_ladder(ladder, descending=False)]
    system = en.NAVIER_STOKES if (params.mu or params.lambda_bulk) else en.EULER
    tasks = [(init, config, params, n, t_final, snapshot_every, system, f"n={n}") for n in ladder]
    out = _run_all(tasks, jobs)
    trajs = [o[0] for o in out]
    errors = [o[1] for o in out]
    D = _distance_matrix(trajs, k)
    res = SweepResult("modes", ladder, trajs, errors, D, _cauchy(D), {},
                      [_audit(t, params, config) for t in trajs])
    gaps = [D[i, i + 1] for i in range(len(ladder) - 1)]
    if len(gaps) > 1 and not np.all(np.diff(gaps) <= 0):
        res.findings.append("distances between consecutive n-runs are not decreasing")
    return res
