"""Constitutive relations of the quantum Navier-Stokes / Euler systems.

Every function takes fields and returns fields; derivatives come from the
field's own domain, so nothing here knows about grids or boundary modes.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import discretization as disc
from .discretization import ScalarField, TensorField, VectorField
from .errors import DimensionMismatch, GammaOne, NonPositiveDensity, UnresolvedField

DEFAULT_TAIL_TOL = 1e-8


@dataclass(frozen=True)
class FluidParams:
    """Physical constants.  ``lambda_bulk`` is the bulk viscosity."""

    a: float = 1.0
    gamma: float = 2.0
    mu: float = 0.0
    lambda_bulk: float = 0.0
    hbar: float = 0.1
    dim: int = 1

    def __post_init__(self):
        problems = []
        if not self.a > 0:
            problems.append(f"a must be > 0 (got {self.a})")
        if not self.hbar > 0:
            problems.append(f"hbar must be > 0 (got {self.hbar})")
        if not self.mu >= 0:
            problems.append(f"mu must be >= 0 (got {self.mu})")
        if not self.lambda_bulk >= 0:
            problems.append(f"lambda_bulk must be >= 0 (got {self.lambda_bulk})")
        if self.dim not in (1, 2, 3):
            problems.append(f"dim must be 1, 2 or 3 (got {self.dim})")
        if problems:
            raise ValueError("; ".join(problems))
        if not self.gamma > self.dim / 2:
            warnings.warn(f"gamma={self.gamma} <= d/2={self.dim / 2}", stacklevel=3)

    def scaled_viscosity(self, factor):
        return replace(self, mu=self.mu * factor, lambda_bulk=self.lambda_bulk * factor)

    def to_dict(self):
        return asdict(self)


def require_positive(rho):
    m = rho.min()
    if not m > 0:
        raise NonPositiveDensity(f"density minimum {m:.3e} is not positive")


def pressure(rho, params):
    require_positive(rho)
    return ScalarField(rho.domain, params.a * rho.values ** params.gamma)


def _check_gamma(params):
    if abs(params.gamma - 1.0) < 1e-12:
        raise GammaOne("pressure potential a/(gamma-1) rho^gamma is undefined for gamma = 1")


def pressure_potential(rho, params):
    require_positive(rho)
    _check_gamma(params)
    g = params.gamma
    return ScalarField(rho.domain, params.a / (g - 1.0) * rho.values ** g)


def pressure_potential_prime(rho, params):
    _check_gamma(params)
    g = params.gamma
    return ScalarField(rho.domain, params.a * g / (g - 1.0) * rho.values ** (g - 1.0))


def pressure_potential_second(rho, params):
    g = params.gamma
    return ScalarField(rho.domain, params.a * g * rho.values ** (g - 2.0))


def pressure_potential_residual(rho, params):
    """max |rho P'(rho) - P(rho) - p(rho)| / max |p(rho)|."""
    p = pressure(rho, params).values
    P = pressure_potential(rho, params).values
    dP = pressure_potential_prime(rho, params).values
    return float(np.max(np.abs(rho.values * dP - P - p)) / np.max(np.abs(p)))


def viscous_stress(grad_u, params):
    if not isinstance(grad_u, TensorField) or grad_u.domain.dim != params.dim:
        raise DimensionMismatch(f"velocity gradient must be a {params.dim}x{params.dim} tensor field")
    d = params.dim
    div_u = grad_u.trace().values
    eye = disc.identity_tensor(grad_u.domain).values
    g = grad_u.values
    vals = params.mu * (g + np.swapaxes(g, 0, 1) - (2.0 / d) * div_u * eye)
    vals = vals + params.lambda_bulk * div_u * eye
    return TensorField(grad_u.domain, vals)


def bohm_potential(rho, params, tail_tol=DEFAULT_TAIL_TOL):
    """Q = (hbar/2) Lap(sqrt rho) / sqrt rho."""
    require_positive(rho)
    tail = disc.spectral_tail(rho)
    if tail > tail_tol:
        raise UnresolvedField(f"density spectral tail {tail:.2e} exceeds {tail_tol:.0e}")
    sq = ScalarField(rho.domain, np.sqrt(rho.values))
    return ScalarField(rho.domain, 0.5 * params.hbar * disc.laplacian(sq).values / sq.values)


def sqrt_gradient(rho):
    return disc.gradient(ScalarField(rho.domain, np.sqrt(rho.values)))


def korteweg_tensor(rho, params):
    """K = (hbar/4) (Hess rho - 4 grad sqrt(rho) (x) grad sqrt(rho))."""
    require_positive(rho)
    g = sqrt_gradient(rho)
    return (0.25 * params.hbar) * (disc.hessian(rho) - 4.0 * g.outer(g))


def korteweg_tensor_drift(rho, params):
    """The same tensor written as (hbar/2) rho grad v with the drift velocity v."""
    v = drift_velocity(rho, params, check=False)
    return (0.5 * params.hbar) * (disc.grad_vec(v) * rho)


def drift_velocity(rho, params=None, check=True, rtol=1e-10):
    """v = grad sqrt(rho) / sqrt(rho) = (1/2) grad log rho.

    The log form is returned; with ``check`` the quotient form is evaluated as
    well and the two must agree to ``rtol`` relative to max |v| (or 1).
    """
    require_positive(rho)
    v = 0.5 * disc.gradient(ScalarField(rho.domain, np.log(rho.values)))
    if check:
        sq = np.sqrt(rho.values)
        alt = sqrt_gradient(rho).values / sq
        gap = float(np.max(np.abs(alt - v.values)))
        if gap > rtol * max(1.0, v.max_abs()):
            raise UnresolvedField(f"drift velocity forms disagree by {gap:.2e}")
    return v


def korteweg_trace_residual(rho, params):
    """Pointwise trace(K) - (hbar/4)(Lap rho - 4 |grad sqrt rho|^2), relative."""
    K = korteweg_tensor(rho, params)
    g = sqrt_gradient(rho)
    expected = 0.25 * params.hbar * (disc.laplacian(rho).values - 4.0 * g.dot(g).values)
    scale = max(float(np.max(np.abs(expected))), np.finfo(float).tiny)
    return float(np.max(np.abs(K.trace().values - expected))) / scale


def korteweg_divergence_residual(rho, params):
    """||div K - rho grad Q||_2 / ||rho grad Q||_2."""
    K = korteweg_tensor(rho, params)
    Q = bohm_potential(rho, params, tail_tol=np.inf)
    rhs = disc.gradient(Q) * rho
    lhs = disc.divergence(K)
    denom = disc.l2_norm(rhs)
    if denom == 0.0:
        return disc.l2_norm(lhs)
    return disc.l2_norm(lhs - rhs) / denom
