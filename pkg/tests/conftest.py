import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qfluid import discretization as disc
from qfluid import galerkin_solver as gs
from qfluid.discretization import VectorField
from qfluid.physics import FluidParams

settings.register_profile("qfluid", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("qfluid")

TWO_PI = 2 * np.pi


@pytest.fixture
def line64():
    return disc.make_domain(1, [TWO_PI], [64])


@pytest.fixture
def params1d():
    # shear viscosity does nothing in one dimension; bulk viscosity dissipates
    return FluidParams(a=1.0, gamma=2.0, mu=0.0, lambda_bulk=0.5, hbar=0.1)


def sine_state(domain, basis, params, amp=0.2, vamp=0.1, system="navier_stokes"):
    rho = disc.scalar(domain, lambda *x: 1.0 + amp * np.cos(x[0]))
    u = np.zeros((domain.dim,) + domain.grid_shape)
    u[0] = vamp * np.sin(domain.coords[-1])
    return gs.make_state(rho, VectorField(domain, u) * rho, basis, params, 0.0, system)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
