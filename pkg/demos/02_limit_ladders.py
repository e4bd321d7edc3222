# %% [markdown]
# # Limit ladders
#
# Runs along decreasing artificial viscosity eps and decreasing physical
# viscosity delta; each rung should sit closer to its neighbour than the last.

# %%
import numpy as np

from qfluid import discretization as disc
from qfluid import galerkin_solver as gs
from qfluid import limits
from qfluid.discretization import VectorField
from qfluid.physics import FluidParams

domain = disc.make_domain(1, [2 * np.pi], [64])
params = FluidParams(lambda_bulk=1.0, hbar=0.1)
basis = disc.galerkin_basis(domain, 8)
rho = disc.scalar(domain, lambda x: 1 + 0.2 * np.cos(x))
J = VectorField(domain, 0.2 * np.sin(domain.coords[0])[None])
init = gs.make_state(rho, J, basis, params)
config = gs.SolverConfig(dt=2e-3)

# %%
eps = limits.epsilon_sweep(init, params, [1e-2, 1e-3, 1e-4], config, 0.2, 10)
print("eps dissipation", np.round(eps.observables["eps_dissipation"], 10))
print("cauchy ratios  ", np.round(eps.cauchy_ratio, 4))

# %%
visc = limits.viscosity_sweep(init, params, [1e-1, 3e-2, 1e-2, 3e-3], config, 0.2, 10)
print("viscous work        ", np.round(visc.observables["viscous_work"], 8))
print("distance to delta=0 ", ["%.2e" % d for d in visc.reference_distances])
print("findings", visc.findings or "none")

# %%
modes = limits.mode_sweep(init, params, [4, 8, 16], config, 0.2, 10)
print("consecutive n distances", [f"{modes.pairwise_distances[i, i + 1]:.2e}" for i in range(2)])
