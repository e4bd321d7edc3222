import numpy as np
import pytest
import sympy as sp
from scipy.integrate import quad

from qfluid import discretization as disc
from qfluid import energy as en
from qfluid import galerkin_solver as gs
from qfluid.discretization import TensorField, VectorField
from qfluid.errors import AuditFailed
from qfluid.physics import FluidParams
from qfluid.trajectory import Trajectory

from conftest import sine_state

TWO_PI = 2 * np.pi
X = sp.symbols("x", real=True)


def test_constant_state_energy_is_pressure_potential(line64):
    p = FluidParams(a=2.0, gamma=1.5)
    b = disc.galerkin_basis(line64, 4)
    s = gs.make_state(disc.scalar(line64, lambda x: 1.7 + 0 * x), None, b, p)
    comps = en.total_energy(s, p)
    assert comps.kinetic == 0.0 and comps.quantum == 0.0
    assert comps.total == pytest.approx(2.0 / 0.5 * 1.7 ** 1.5 * TWO_PI, rel=1e-13)


def test_kinetic_energy_closed_form(line64):
    # (1/2) int (1 + 0.3 cos x) A^2 sin^2 x = A^2 pi / 2
    A = 0.4
    b = disc.galerkin_basis(line64, 4)
    rho = disc.scalar(line64, lambda x: 1 + 0.3 * np.cos(x))
    c = np.array([0.0, A * np.sqrt(np.pi), 0.0, 0.0])
    mom = disc.reconstruct(c, b) * rho
    assert en.kinetic_energy(rho, mom, c, b) == pytest.approx(A ** 2 * np.pi / 2, rel=1e-13)
    assert en.kinetic_energy(rho, mom) == pytest.approx(A ** 2 * np.pi / 2, rel=1e-13)


def test_quantum_energy_quadrature_oracle(line64):
    p = FluidParams(hbar=0.3)
    r = 1 + sp.Rational(1, 2) * sp.cos(X)
    integrand = sp.lambdify(X, p.hbar / 2 * sp.diff(sp.sqrt(r), X) ** 2)
    rho = disc.scalar(line64, sp.lambdify(X, r))
    assert en.quantum_energy(rho, p) == pytest.approx(quad(integrand, 0, TWO_PI, limit=200)[0], rel=1e-10)


def test_dissipation_rate_shear_flow():
    # u = (sin y, 0): S : grad u = mu cos^2 y, integral 2 pi^2 mu
    d = disc.make_domain(2, [TWO_PI, TWO_PI], [16, 16])
    x, y = d.coords
    u = VectorField(d, np.stack([np.sin(y) + 0 * x, 0 * x]))
    p = FluidParams(mu=1.5, lambda_bulk=3.0, dim=2)
    assert en.dissipation_rate(u, p) == pytest.approx(2 * np.pi ** 2 * 1.5, rel=1e-12)


def test_dissipation_rate_coefficient_and_field_forms_agree():
    d = disc.make_domain(2, [TWO_PI, TWO_PI], [16, 16])
    b = disc.galerkin_basis(d, 8)
    c = np.random.default_rng(0).normal(size=8)
    p = FluidParams(mu=1.0, lambda_bulk=0.7, dim=2)
    a = en.dissipation_rate(c, p, b)
    assert a == pytest.approx(en.dissipation_rate(disc.reconstruct(c, b), p), rel=1e-12)
    assert a > 0


def test_epsilon_dissipation_quadrature_oracle(line64):
    p = FluidParams(a=1.0, gamma=2.0, hbar=0.2)
    eps = 0.01
    r = 1 + sp.Rational(2, 5) * sp.cos(X)
    integrand = (p.a * p.gamma * r ** (p.gamma - 2) * sp.diff(r, X) ** 2
                 + p.hbar / 4 * r * sp.diff(sp.log(r), X, 2) ** 2)
    ref = eps * quad(sp.lambdify(X, integrand), 0, TWO_PI, limit=200)[0]
    rho = disc.scalar(line64, sp.lambdify(X, r))
    assert en.epsilon_dissipation_rate(rho, p, eps) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("amp", [0.3, 0.9])
def test_log_hessian_identity(amp):
    d = disc.make_domain(1, [TWO_PI], [256])
    assert en.log_hessian_identity_residual(disc.scalar(d, lambda x: 1 + amp * np.cos(x))) <= 1e-6


def test_log_hessian_identity_2d():
    d = disc.make_domain(2, [TWO_PI, TWO_PI], [64, 64])
    rho = disc.scalar(d, lambda x, y: 1 + 0.4 * np.cos(x) * np.cos(y))
    assert en.log_hessian_identity_residual(rho) <= 1e-8


def test_lambda_defect():
    assert en.lambda_defect(1, 2.0) == 2.0
    assert en.lambda_defect(3, 2.0) == 3.0


def test_equilibrium_report_is_flat(line64, params1d):
    b = disc.galerkin_basis(line64, 8)
    s = gs.make_state(disc.scalar(line64, lambda x: 1 + 0 * x), None, b, params1d)
    tr = gs.run_simulation(s, gs.SolverConfig(dt=1e-2), params1d, b, 0.5, 10)
    rep = en.energy_report(tr, params1d, strict=True)
    assert np.ptp(rep.energy) < 1e-12 * rep.energy[0]
    assert rep.passed and rep.jumps == []


def test_navier_stokes_run_passes_audit():
    d = disc.make_domain(2, [TWO_PI, TWO_PI], [32, 32])
    b = disc.galerkin_basis(d, 12)
    p = FluidParams(mu=1.0, dim=2)
    s = sine_state(d, b, p, amp=0.2, vamp=0.3)
    tr = gs.run_simulation(s, gs.SolverConfig(dt=1e-3), p, b, 0.1, 10)
    rep = en.energy_report(tr, p)
    assert rep.passed
    assert rep.dissipation_integral[-1] > 0
    assert np.all(np.diff(rep.dissipation_integral) >= 0)
    assert en.defect_trace_bound_check(rep, p).passed


def test_audit_detects_energy_gain(line64, params1d):
    b = disc.galerkin_basis(line64, 4)
    s0 = gs.make_state(disc.scalar(line64, lambda x: 1 + 0 * x), None, b, params1d)
    s1 = gs.state_from_coeffs(s0.rho, np.array([0.5, 0, 0, 0]), b, params1d, 1e-3)
    tr = Trajectory([0, 1], 1e-3, [s0, s1], s0.energy, {"dt": 1e-3})
    rep = en.energy_report(tr, params1d)
    assert not rep.passed and rep.first_violation == pytest.approx(1e-3)
    with pytest.raises(AuditFailed):
        rep.check()


def test_epsilon_run_reports_regularization_dissipation(line64, params1d):
    b = disc.galerkin_basis(line64, 8)
    s = sine_state(line64, b, params1d)
    tr = gs.run_simulation(s, gs.SolverConfig(dt=1e-3, epsilon=1e-2), params1d, b, 0.1, 10)
    rep = en.energy_report(tr, params1d)
    assert rep.passed
    assert rep.epsilon_dissipation[-1] > 0


def test_recorded_and_reconstructed_dissipation_agree(line64, params1d):
    b = disc.galerkin_basis(line64, 8)
    s = sine_state(line64, b, params1d, vamp=0.3)
    tr = gs.run_simulation(s, gs.SolverConfig(dt=1e-3), params1d, b, 0.1, 1)
    rec = en.energy_report(tr, params1d).dissipation_integral[-1]
    tr.diagnostics = {}
    quadr = en.energy_report(tr, params1d).dissipation_integral[-1]
    assert quadr == pytest.approx(rec, rel=1e-5)


def test_euler_energy_drift_is_second_order(line64):
    p = FluidParams(hbar=0.1)
    b = disc.galerkin_basis(line64, 8)
    s = sine_state(line64, b, p, amp=0.2, vamp=0.2, system=en.EULER)
    drift = []
    for dt in (4e-3, 2e-3):
        tr = gs.run_simulation(s, gs.SolverConfig(dt=dt), p, b, 0.2, 10, system=en.EULER)
        E = tr.energies
        drift.append(np.max(np.abs(E - E[0])))
    assert drift[0] / drift[1] == pytest.approx(4.0, rel=0.15)


def test_report_csv_columns(line64, params1d):
    b = disc.galerkin_basis(line64, 4)
    s = sine_state(line64, b, params1d)
    tr = gs.run_simulation(s, gs.SolverConfig(dt=1e-3), params1d, b, 0.005)
    lines = en.energy_report(tr, params1d).to_csv().splitlines()
    assert lines[0] == "t,E,E_kin,E_pot,E_quantum,diss_cum,eps_diss_cum,slack,defect_proxy"
    assert len(lines) == 1 + len(tr)
