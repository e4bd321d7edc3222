import numpy as np
import pytest
from hypothesis import given, strategies as st

from qfluid import discretization as disc
from qfluid.discretization import ScalarField, VectorField
from qfluid.errors import BadResolution, DomainMismatch, TooManyModes

TWO_PI = 2 * np.pi


def test_periodic_derivatives_match_closed_forms(line64):
    f = disc.scalar(line64, np.sin)
    x = line64.coords[0]
    assert np.allclose(disc.gradient(f).values[0], np.cos(x), atol=1e-12)
    assert np.allclose(disc.laplacian(f).values, -np.sin(x), atol=1e-12)


def test_integral_is_exact_for_trig_polynomials(line64):
    f = disc.scalar(line64, lambda x: np.sin(x) ** 2)
    assert disc.integrate(f) == pytest.approx(np.pi, abs=1e-13)


def test_wall_domain_quadrature_and_derivative():
    d = disc.make_domain(1, [np.pi], [32], "wall")
    f = disc.scalar(d, lambda x: np.cos(x) ** 2)
    assert disc.integrate(f) == pytest.approx(np.pi / 2, abs=1e-13)
    g = disc.scalar(d, np.cos)
    assert np.allclose(disc.laplacian(g).values, -np.cos(d.coords[0]), atol=1e-12)


def test_2d_divergence_of_gradient_is_laplacian():
    d = disc.make_domain(2, [TWO_PI, TWO_PI], [32, 32])
    f = disc.scalar(d, lambda x, y: np.exp(np.sin(x)) * np.cos(2 * y))
    gap = disc.divergence(disc.gradient(f)) - disc.laplacian(f)
    assert gap.max_abs() < 1e-9


def test_hessian_symmetric():
    d = disc.make_domain(2, [TWO_PI, TWO_PI], [32, 32])
    f = disc.scalar(d, lambda x, y: np.sin(x) * np.cos(y) + np.cos(x + 2 * y))
    assert disc.hessian(f).asymmetry() < 1e-12


@pytest.mark.parametrize("m,k", [(1, 1), (2, 3), (3, 2)])
def test_negative_sobolev_norm_of_single_mode(line64, m, k):
    # ||cos(m x)||^2 = pi and the weight is (1 + m^2)^(-k)
    f = disc.scalar(line64, lambda x: np.cos(m * x))
    assert disc.negative_sobolev_norm(f, k) == pytest.approx(np.sqrt(np.pi / (1 + m * m) ** k), rel=1e-12)


def test_negative_sobolev_norm_of_constant_is_l2(line64):
    f = disc.scalar(line64, lambda x: np.ones_like(x))
    assert disc.negative_sobolev_norm(f, 3) == pytest.approx(np.sqrt(TWO_PI), rel=1e-12)


def test_negative_sobolev_norm_on_wall_domain():
    d = disc.make_domain(1, [np.pi], [32], "wall")
    f = disc.scalar(d, lambda x: np.cos(2 * x))
    assert disc.negative_sobolev_norm(f, 2) == pytest.approx(np.sqrt(np.pi / 2 / 25), rel=1e-12)


def test_spectral_tail_detects_unresolved_data():
    d = disc.make_domain(1, [TWO_PI], [16])
    smooth = disc.scalar(d, lambda x: 1 + 0.1 * np.cos(x))
    sharp = disc.scalar(d, lambda x: 1 + np.exp(-((x - np.pi) / 0.1) ** 2))
    assert disc.spectral_tail(smooth) < 1e-15
    assert disc.spectral_tail(sharp) > 1e-3


@pytest.mark.parametrize("spec", [
    (1, [TWO_PI], [64], "periodic"),
    (1, [np.pi], [32], "wall"),
    (2, [TWO_PI, TWO_PI], [16, 16], "periodic"),
    (2, [np.pi, 2.0], [16, 32], "wall"),
])
def test_basis_is_orthonormal(spec):
    d = disc.make_domain(*spec)
    b = disc.galerkin_basis(d, 5)
    assert np.allclose(b.gram(), np.eye(5), atol=1e-12)


def test_periodic_basis_is_the_fourier_basis(line64):
    b = disc.galerkin_basis(line64, 4)
    x = line64.coords[0]
    expected = [np.cos(x), np.sin(x), np.cos(2 * x), np.sin(2 * x)]
    for w, e in zip(b.W, expected):
        assert np.allclose(w[0], e / np.sqrt(np.pi), atol=1e-13)


def test_wall_basis_normal_component_vanishes():
    d = disc.make_domain(2, [np.pi, np.pi], [16, 16], "wall")
    b = disc.galerkin_basis(d, 6)
    assert np.all(b.W[:, 0, [0, -1], :] == 0.0)
    assert np.all(b.W[:, 1, :, [0, -1]] == 0.0)


def test_too_many_modes(line64):
    with pytest.raises(TooManyModes):
        disc.galerkin_basis(line64, 33)


def test_bad_resolution():
    with pytest.raises(BadResolution):
        disc.make_domain(1, [1.0], [3])


def test_domain_mismatch():
    a = disc.scalar(disc.make_domain(1, [TWO_PI], [16]), np.sin)
    b = disc.scalar(disc.make_domain(1, [TWO_PI], [32]), np.sin)
    with pytest.raises(DomainMismatch):
        a + b


@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_project_reconstruct_roundtrip(coeffs):
    d = disc.make_domain(1, [TWO_PI], [32])
    b = disc.galerkin_basis(d, 4)
    c = np.array(coeffs)
    assert np.allclose(disc.project(disc.reconstruct(c, b), b), c, atol=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_integral_is_linear(alpha, beta):
    d = disc.make_domain(1, [TWO_PI], [32])
    f = disc.scalar(d, lambda x: np.exp(np.cos(x)))
    g = disc.scalar(d, lambda x: np.sin(3 * x) + x * 0 + 2)
    lhs = disc.integrate(alpha * f + beta * g)
    assert lhs == pytest.approx(alpha * disc.integrate(f) + beta * disc.integrate(g), abs=1e-11)


@given(st.integers(1, 4), st.floats(0.1, 3.0))
def test_dealias_removes_only_high_modes(m, amp):
    d = disc.make_domain(1, [TWO_PI], [32])
    low = disc.scalar(d, lambda x: amp * np.cos(m * x))
    high = disc.scalar(d, lambda x: amp * np.cos(14 * x))
    assert np.allclose(disc.dealias(low).values, low.values, atol=1e-13)
    assert disc.dealias(high).max_abs() < 1e-13


def test_snapshot_roundtrip(tmp_path):
    d = disc.make_domain(2, [np.pi, 1.0], [8, 16], "wall")
    v = VectorField(d, np.random.default_rng(0).normal(size=(2, 9, 17)))
    path = tmp_path / "v.snap"
    disc.write_snapshot(path, v)
    back = disc.read_snapshot(path)
    assert back.domain == d
    assert np.array_equal(back.values, v.values)
    assert disc.snapshot_bytes(back) == path.read_bytes()


def test_snapshot_is_little_endian_after_json_header(tmp_path, line64):
    f = disc.scalar(line64, np.cos)
    raw = disc.snapshot_bytes(f)
    head, _, payload = raw.partition(b"\n")
    assert b'"field_kind": "scalar"' in head
    assert np.array_equal(np.frombuffer(payload, "<f8"), f.values)


def test_field_kinds_check_shape(line64):
    with pytest.raises(ValueError):
        ScalarField(line64, np.zeros(63))
    with pytest.raises(ValueError):
        disc.make_domain(1, [1.0], [12])
