"""Shift and continuation of sampled trajectories, and semiflow selection.

The selection picks one trajectory from a finite candidate set by
lexicographic minimisation of discounted functionals

    I(Phi) = int_0^h e^{-lambda t} F(Phi(t)) dt,

then breaks remaining ties by config hash.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import discretization as disc
from .errors import EmptyCandidates, HorizonExceeded, MixedInitialData, SeamMismatch
from .limits import trajectory_distance
from .trajectory import SCHEMA_VERSION, Trajectory, config_hash, load_trajectory, save_trajectory, write_json

CUMULATIVE_DIAGNOSTICS = ("dissipation", "eps_dissipation")


def _retime(states, ticks, tick):
    return [s.at_time(int(k) * tick) for s, k in zip(states, ticks)]


def shift(traj, T):
    """S_T Phi: the samples at t >= T, moved to start at 0.

    The initial energy budget of the result is the source energy at T, which
    is the left value (the sample at T belongs to the left piece).
    """
    if T < 0:
        raise HorizonExceeded("shift time must be nonnegative")
    i = traj.index_at(T)
    if i == 0:
        return traj
    k0 = traj.ticks[i]
    ticks = traj.ticks[i:] - k0
    diag = {}
    for key, v in traj.diagnostics.items():
        v = v[i:]
        diag[key] = v - v[0] if key in CUMULATIVE_DIAGNOSTICS else v
    meta = dict(traj.metadata)
    meta["tick_offset"] = int(meta.get("tick_offset", 0)) + int(k0)
    return Trajectory(ticks, traj.tick, _retime(traj.states[i:], ticks, traj.tick),
                      float(traj.states[i].energy), meta, diag, traj.error)


def seam_gap(s1, s2, k=None):
    """Density plus momentum distance; energy jumps are allowed at a seam."""
    if k is None:
        k = disc.default_sobolev_index(s1.domain.dim)
    return (disc.negative_sobolev_norm(s1.rho - s2.rho, k)
            + disc.negative_sobolev_norm(s1.momentum - s2.momentum, k))


def concatenate(t1, t2, T, tol=1e-9):
    """Phi_1 on [0, T] followed by Phi_2 moved to start at T."""
    if T == 0:
        return t2
    if t1.tick != t2.tick:
        raise ValueError(f"sampling ticks differ ({t1.tick} vs {t2.tick})")
    i = t1.index_at(T)
    left = t1.states[i]
    gap = seam_gap(left, t2.states[0])
    if gap > tol:
        raise SeamMismatch(f"states differ by {gap:.3e} at the seam", gap=gap)
    budget = t1.states[i].energy
    if t2.e0 > budget + tol:
        raise SeamMismatch(f"second piece starts with energy budget {t2.e0} above E(T-)={budget}",
                           gap=float(t2.e0 - budget))
    k0 = t1.ticks[i]
    ticks = np.concatenate([t1.ticks[:i + 1], t2.ticks[1:] + k0])
    states = list(t1.states[:i + 1]) + _retime(t2.states[1:], t2.ticks[1:] + k0, t1.tick)
    diag = {}
    for key in sorted(set(t1.diagnostics) & set(t2.diagnostics)):
        a, b = t1.diagnostics[key][:i + 1], t2.diagnostics[key][1:]
        if key in CUMULATIVE_DIAGNOSTICS:
            b = b + a[-1]
        diag[key] = np.concatenate([a, b])
    meta = dict(t1.metadata)
    meta["glued"] = list(t1.metadata.get("glued", [])) + [[int(k0), t2.config_hash]]
    error = t2.error or t1.error
    return Trajectory(ticks, t1.tick, states, t1.e0, meta, diag, error)


# ---------------------------------------------------------------------------
# selection
# ---------------------------------------------------------------------------
def _mass_weighted_energy(state):
    return state.energy / disc.integrate(state.rho)


def _momentum_norm(state):
    return disc.l2_norm(state.momentum)


OBSERVABLES = {
    "energy": lambda s: float(s.energy),
    "mass-weighted-energy": _mass_weighted_energy,
    "momentum-norm": _momentum_norm,
}


@dataclass(frozen=True)
class SelectionFunctional:
    observable: str
    rate: float = 1.0

    def __post_init__(self):
        if self.observable not in OBSERVABLES:
            raise ValueError(f"unknown observable {self.observable!r}; expected one of {sorted(OBSERVABLES)}")
        if not self.rate > 0:
            raise ValueError("discount rate must be > 0")

    def name(self):
        return f"{self.observable}@{self.rate!r}"


def evaluate_functional(traj, f, horizon=None):
    """Trapezoidal int_0^horizon e^{-rate t} F(Phi(t)) dt on the sample grid."""
    i = len(traj) - 1 if horizon is None else traj.index_at(horizon)
    t = traj.times[:i + 1].astype(float)
    obs = OBSERVABLES[f.observable]
    vals = np.array([obs(s) for s in traj.states[:i + 1]]) * np.exp(-f.rate * t)
    if i == 0:
        return 0.0
    return float(np.trapezoid(vals, t))


@dataclass
class SelectionReport:
    functionals: list
    survivors: list
    winner: str
    values: dict = field(default_factory=dict)
    semigroup_distances: list = field(default_factory=list)

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "config_hash": config_hash(self.functionals, self.winner),
            "functionals": self.functionals,
            "survivors_per_round": self.survivors,
            "winner": self.winner,
            "values": self.values,
            "semigroup_distances": self.semigroup_distances,
        }


def select_with_report(candidates, functionals, horizon=None, tie_rtol=1e-10, init_tol=1e-9):
    cands = list(candidates)
    if not cands:
        raise EmptyCandidates("no candidate trajectories")
    first = cands[0]
    for c in cands[1:]:
        gap = trajectory_distance(first, c, time_grid=[0.0])
        if gap > init_tol:
            raise MixedInitialData(f"candidates start from different data (distance {gap:.3e})")
    # set semantics: one representative per config hash, in a fixed order
    uniq = {}
    for c in sorted(cands, key=lambda c: c.config_hash):
        uniq.setdefault(c.config_hash or id(c), c)
    alive = list(uniq.values())
    if horizon is None:
        horizon = min(c.horizon for c in alive)
    survivors, values = [], {}
    for f in functionals:
        vals = [evaluate_functional(c, f, horizon) for c in alive]
        values[f.name()] = {c.config_hash: v for c, v in zip(alive, vals)}
        best = min(vals)
        tol = tie_rtol * max(abs(best), 1e-300)
        alive = [c for c, v in zip(alive, vals) if v - best <= tol]
        survivors.append([c.config_hash for c in alive])
    winner = alive[0]
    report = SelectionReport([f.name() for f in functionals], survivors, winner.config_hash, values)
    return winner, report


def select(candidates, functionals, horizon=None, tie_rtol=1e-10, init_tol=1e-9):
    """The lexicographic minimiser; always one of ``candidates``."""
    return select_with_report(candidates, functionals, horizon, tie_rtol, init_tol)[0]


@dataclass
class SemigroupReport:
    t1: float
    t2: float
    distance: float
    tol: float

    @property
    def passed(self):
        return bool(self.distance <= self.tol)


def check_semigroup(selector, initial, t1, t2, generator, tol=1e-8):
    """Compare U[x](t1 + t2) with U[U[x](t1)](t2).

    ``generator(state, horizon)`` returns the candidate set started at
    ``state`` and ``selector(candidates)`` picks one of them.
    """
    whole = selector(generator(initial, t1 + t2))
    restart_state = whole.state_at(t1).at_time(0.0)
    restarted = selector(generator(restart_state, t2))
    dist = trajectory_distance(shift(whole, t1), restarted, time_grid=[t2])
    return SemigroupReport(float(t1), float(t2), float(dist), tol)


# ---------------------------------------------------------------------------
# candidate manifests
# ---------------------------------------------------------------------------
def save_manifest(candidates, directory):
    os.makedirs(directory, exist_ok=True)
    names = []
    for i, c in enumerate(candidates):
        name = f"candidate_{i:02d}"
        save_trajectory(c, os.path.join(directory, name))
        names.append(name)
    write_json(os.path.join(directory, "manifest.json"), {
        "schema_version": SCHEMA_VERSION,
        "config_hash": config_hash([c.config_hash for c in candidates]),
        "candidates": names,
    })


def load_manifest(directory):
    path = os.path.join(directory, "manifest.json")
    if os.path.exists(path):
        with open(path) as fh:
            names = json.load(fh)["candidates"]
    else:
        names = sorted(n for n in os.listdir(directory)
                       if os.path.exists(os.path.join(directory, n, "trajectory.json")))
    return [load_trajectory(os.path.join(directory, n)) for n in names]
