import json

import numpy as np
import pytest

from qfluid import discretization as disc
from qfluid import galerkin_solver as gs
from qfluid import limits
from qfluid.errors import GridUncovered
from qfluid.physics import FluidParams
from qfluid.trajectory import Trajectory

from conftest import sine_state

CFG = gs.SolverConfig(dt=2e-3)


@pytest.fixture
def start(line64, params1d):
    return sine_state(line64, disc.galerkin_basis(line64, 8), params1d, amp=0.2, vamp=0.2)


def _with_energy_offset(traj, c):
    states = [type(s)(s.time, s.rho, s.momentum, s.energy + c, s.velocity_coeffs, s.basis)
              for s in traj.states]
    return Trajectory(traj.ticks, traj.tick, states, traj.e0 + c, traj.metadata)


def test_distance_identity_and_energy_offset(start, params1d):
    tr = gs.run_simulation(start, CFG, params1d, start.basis, 0.02, 2)
    assert limits.trajectory_distance(tr, tr) == 0.0
    assert limits.trajectory_distance(tr, _with_energy_offset(tr, 0.25)) == pytest.approx(0.25, abs=1e-14)


def test_distance_is_symmetric(start, params1d):
    a = gs.run_simulation(start, CFG, params1d, start.basis, 0.02, 2)
    b = gs.run_simulation(start, gs.SolverConfig(dt=1e-3), params1d, start.basis, 0.02, 4)
    assert limits.trajectory_distance(a, b) == limits.trajectory_distance(b, a)


def test_distance_between_time_step_refinements(start, params1d):
    # dt-pair distance shrinks with the step like the scheme's error
    runs = [gs.run_simulation(start, gs.SolverConfig(dt=dt), params1d, start.basis, 0.04, int(4e-3 / dt))
            for dt in (4e-3, 2e-3, 1e-3)]
    d1 = limits.trajectory_distance(runs[0], runs[1])
    d2 = limits.trajectory_distance(runs[1], runs[2])
    assert d1 < 1e-4 and d2 < d1 / 2


def test_uncovered_grid(start, params1d):
    tr = gs.run_simulation(start, CFG, params1d, start.basis, 0.02, 5)
    with pytest.raises(GridUncovered):
        limits.trajectory_distance(tr, tr, time_grid=[0.004])


def test_ladder_validation(start, params1d):
    with pytest.raises(ValueError):
        limits.viscosity_sweep(start, params1d, [1e-2, 1e-1], CFG, 0.01)
    with pytest.raises(ValueError):
        limits.mode_sweep(start, params1d, [8, 4], CFG, 0.01)


def test_single_entry_sweeps(start, params1d):
    res = limits.epsilon_sweep(start, params1d, [0.0], CFG, 0.02, 5)
    assert len(res.trajectories) == 1 and res.cauchy_ratio == []
    plain = gs.run_simulation(start, CFG, params1d, start.basis, 0.02, 5)
    assert res.trajectories[0].states[-1].same_fields(plain.states[-1])
    res = limits.mode_sweep(start, params1d, [8], CFG, 0.02, 5)
    assert res.pairwise_distances.shape == (1, 1)


def test_viscosity_sweep_contracts(start):
    p = FluidParams(lambda_bulk=1.0)
    res = limits.viscosity_sweep(start, p, [1e-1, 3e-2, 1e-2, 3e-3], CFG, 0.1, 10)
    work = res.observables["viscous_work"]
    assert all(np.diff(work) < 0)
    assert all(np.diff(res.reference_distances) < 0)
    assert all(r < 1 for r in res.cauchy_ratio)
    D = res.pairwise_distances
    assert np.allclose(D, D.T) and np.all(np.diag(D) == 0)
    assert all(a["passed"] for a in res.audits)
    assert res.findings == []


def test_epsilon_sweep_vanishing_terms(start, params1d):
    res = limits.epsilon_sweep(start, params1d, [1e-2, 1e-3, 1e-4], CFG, 0.1, 10)
    tot = res.observables["eps_dissipation"]
    for a, b in zip(tot, tot[1:]):
        assert 5 <= a / b <= 20
    assert all(np.diff(res.observables["eps_pressure"]) < 0)
    assert all(np.diff(res.observables["eps_quantum"]) < 0)
    assert res.cauchy_ratio[0] < 1


def test_mode_sweep_distances_decrease(start, params1d):
    res = limits.mode_sweep(start, params1d, [4, 8, 16], CFG, 0.1, 10)
    D = res.pairwise_distances
    assert D[0, 1] >= D[1, 2]


def test_mode_sweep_equilibrium(line64, params1d):
    b = disc.galerkin_basis(line64, 4)
    s = gs.make_state(disc.scalar(line64, lambda x: 1 + 0 * x), None, b, params1d)
    res = limits.mode_sweep(s, params1d, [4, 8, 16], CFG, 0.05, 5)
    assert np.nanmax(res.pairwise_distances) <= 1e-9


def test_mode_sweep_reports_too_many_modes(start, params1d):
    res = limits.mode_sweep(start, params1d, [8, 64], CFG, 0.01, 5)
    assert res.trajectories[1] is None and res.errors[1].startswith("TooManyModes")


def test_sweep_manifest_and_determinism(tmp_path, start, params1d):
    a = limits.epsilon_sweep(start, params1d, [1e-2, 1e-3], CFG, 0.02, 5)
    b = limits.epsilon_sweep(start, params1d, [1e-2, 1e-3], CFG, 0.02, 5, jobs=2)
    assert np.array_equal(a.pairwise_distances, b.pairwise_distances)
    a.save(tmp_path / "a")
    b.save(tmp_path / "b")
    ja = (tmp_path / "a" / "sweep.json").read_bytes()
    assert ja == (tmp_path / "b" / "sweep.json").read_bytes()
    man = json.loads(ja)
    assert man["schema_version"] == 1 and man["config_hash"]
    assert (tmp_path / "a" / "entry_01" / "trajectory.json").exists()


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("QFLUID_THREADS", "2")
    assert limits.worker_count(8) == 2
    monkeypatch.delenv("QFLUID_THREADS")
    assert limits.worker_count(3) == 3
