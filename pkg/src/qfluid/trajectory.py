"""Sampled trajectories ``t -> [rho, J, E]`` and their on-disk form.

Sample times live on an integer lattice ``ticks * tick`` so that shifting and
gluing trajectories is exact arithmetic on the tick counts.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import discretization as disc
from .errors import HorizonExceeded
from .state import FluidState

SCHEMA_VERSION = 1


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def config_hash(*parts):
    """Short stable hash of JSON-able configuration objects."""
    return hashlib.sha256(canonical_json(list(parts)).encode()).hexdigest()[:16]


@dataclass(eq=False)
class Trajectory:
    ticks: np.ndarray
    tick: float
    states: list
    e0: float
    metadata: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    error: str = None

    def __post_init__(self):
        self.ticks = np.asarray(self.ticks, dtype=np.int64)
        if self.ticks.ndim != 1 or len(self.ticks) != len(self.states) or not len(self.states):
            raise ValueError("need one tick per state and at least one sample")
        if self.ticks[0] != 0 or np.any(np.diff(self.ticks) <= 0):
            raise ValueError("sample ticks must start at 0 and increase strictly")
        if not self.tick > 0:
            raise ValueError("tick must be positive")
        self.diagnostics = {k: np.asarray(v) for k, v in self.diagnostics.items()}

    def __len__(self):
        return len(self.states)

    @property
    def times(self):
        return self.ticks * self.tick

    @property
    def horizon(self):
        return float(self.ticks[-1] * self.tick)

    @property
    def energies(self):
        return np.array([s.energy for s in self.states])

    @property
    def domain(self):
        return self.states[0].domain

    @property
    def config_hash(self):
        return self.metadata.get("config_hash", "")

    def tick_of(self, T, rtol=1e-9):
        """Integer tick count equal to time ``T``."""
        k = int(round(T / self.tick))
        if abs(k * self.tick - T) > rtol * max(1.0, abs(T)):
            raise HorizonExceeded(f"time {T} is not a multiple of the sampling tick {self.tick}")
        return k

    def index_at(self, T):
        k = self.tick_of(T)
        if k < 0 or k > self.ticks[-1]:
            raise HorizonExceeded(f"time {T} outside the sampled horizon [0, {self.horizon}]")
        i = int(np.searchsorted(self.ticks, k))
        if i >= len(self.ticks) or self.ticks[i] != k:
            raise HorizonExceeded(f"time {T} is not a sample time")
        return i

    def state_at(self, T):
        return self.states[self.index_at(T)]


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------
def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(json.dumps(obj, sort_keys=True, indent=1, default=_json_default))
        fh.write("\n")


def save_state(state, directory, extra=None):
    """Checkpoint: two snapshot files plus a JSON sidecar."""
    os.makedirs(directory, exist_ok=True)
    disc.write_snapshot(os.path.join(directory, "rho.snap"), state.rho)
    disc.write_snapshot(os.path.join(directory, "momentum.snap"), state.momentum)
    side = {
        "schema_version": SCHEMA_VERSION,
        "time": state.time,
        "energy": state.energy,
        "velocity_coeffs": None if state.velocity_coeffs is None else [float(c) for c in state.velocity_coeffs],
        "n_modes": None if state.basis is None else state.basis.n,
    }
    side.update(extra or {})
    write_json(os.path.join(directory, "state.json"), side)


def load_state(directory):
    rho = disc.read_snapshot(os.path.join(directory, "rho.snap"))
    mom = disc.read_snapshot(os.path.join(directory, "momentum.snap"))
    with open(os.path.join(directory, "state.json")) as fh:
        side = json.load(fh)
    coeffs = side.get("velocity_coeffs")
    basis = None
    if coeffs is not None:
        coeffs = np.array(coeffs, dtype=float)
        basis = disc.galerkin_basis(rho.domain, side["n_modes"])
    return FluidState(side["time"], rho, mom, side["energy"], coeffs, basis), side


def save_trajectory(traj, directory):
    os.makedirs(directory, exist_ok=True)
    names = []
    for tk, st in zip(traj.ticks, traj.states):
        name = f"snap_{int(tk):09d}"
        save_state(st, os.path.join(directory, name),
                   extra={"config_hash": traj.config_hash, "params": traj.metadata.get("params")})
        names.append(name)
    write_json(os.path.join(directory, "trajectory.json"), {
        "schema_version": SCHEMA_VERSION,
        "config_hash": traj.config_hash,
        "ticks": [int(t) for t in traj.ticks],
        "tick": traj.tick,
        "e0": traj.e0,
        "snapshots": names,
        "metadata": traj.metadata,
        "diagnostics": {k: v.tolist() for k, v in traj.diagnostics.items()},
        "error": traj.error,
    })


def load_trajectory(directory):
    with open(os.path.join(directory, "trajectory.json")) as fh:
        head = json.load(fh)
    states = [load_state(os.path.join(directory, n))[0] for n in head["snapshots"]]
    return Trajectory(head["ticks"], head["tick"], states, head["e0"], head["metadata"],
                      head["diagnostics"], head["error"])
