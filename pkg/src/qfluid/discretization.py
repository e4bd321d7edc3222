"""Box domains, sampled fields, spectral operators and the Galerkin velocity basis.

Two boundary modes are supported on a box ``[0, L_1] x ... x [0, L_d]``:

``periodic``
    ``N`` equispaced nodes per axis, Fourier differentiation.
``wall``
    ``N + 1`` nodes per axis including both walls.  Fields are extended to a
    ``2L``-periodic grid before transforming: scalars evenly (cosine series,
    homogeneous Neumann), vector component ``i`` oddly along axis ``i`` and
    evenly along the others (sine series, vanishing normal component), and
    tensor component ``(i, j)`` with both rules applied.  The parity of every
    component therefore follows from the rank of the field, and all the
    operators used by the solver map these parity classes onto each other.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import product

import numpy as np

from .errors import (
    BadResolution,
    DimensionMismatch,
    DomainMismatch,
    TooManyModes,
)

PERIODIC = "periodic"
WALL = "wall"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class Domain:
    dim: int
    lengths: tuple
    resolution: tuple
    bc: str = PERIODIC

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(float(x) for x in self.lengths))
        object.__setattr__(self, "resolution", tuple(int(x) for x in self.resolution))
        if self.dim not in (1, 2):
            raise BadResolution(f"dim must be 1 or 2, got {self.dim}")
        if len(self.lengths) != self.dim or len(self.resolution) != self.dim:
            raise BadResolution("lengths and resolution need one entry per axis")
        if any(not np.isfinite(L) or L <= 0 for L in self.lengths):
            raise BadResolution(f"lengths must be positive, got {self.lengths}")
        for n in self.resolution:
            if n < 8 or n & (n - 1):
                raise BadResolution(f"resolution {n} is not a power of two >= 8")
        if self.bc not in (PERIODIC, WALL):
            raise BadResolution(f"unknown boundary mode {self.bc!r}")

    # -- grid -------------------------------------------------------------
    @property
    def periodic(self):
        return self.bc == PERIODIC

    @property
    def grid_shape(self):
        if self.periodic:
            return self.resolution
        return tuple(n + 1 for n in self.resolution)

    @property
    def npoints(self):
        return int(np.prod(self.grid_shape))

    @property
    def spacing(self):
        return tuple(L / n for L, n in zip(self.lengths, self.resolution))

    @property
    def volume(self):
        return float(np.prod(self.lengths))

    @cached_property
    def axes(self):
        """1-D node coordinates per axis."""
        return tuple(
            np.arange(m) * h for m, h in zip(self.grid_shape, self.spacing)
        )

    @cached_property
    def coords(self):
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def weights(self):
        """Quadrature weights: trapezoidal (spectrally exact on the torus)."""
        w1 = []
        for m, h in zip(self.grid_shape, self.spacing):
            w = np.full(m, h)
            if not self.periodic:
                w[0] = w[-1] = 0.5 * h
            w1.append(w)
        out = w1[0]
        for w in w1[1:]:
            out = np.multiply.outer(out, w)
        return out

    def spec(self):
        return {
            "dim": self.dim,
            "lengths": list(self.lengths),
            "resolution": list(self.resolution),
            "bc": self.bc,
        }

    # -- transform machinery ---------------------------------------------
    @property
    def _ext_shape(self):
        if self.periodic:
            return self.resolution
        return tuple(2 * n for n in self.resolution)

    @property
    def _ext_lengths(self):
        if self.periodic:
            return self.lengths
        return tuple(2 * L for L in self.lengths)

    @cached_property
    def _freq(self):
        """Integer frequencies per axis in rfftn layout, broadcastable."""
        out = []
        for a, n in enumerate(self._ext_shape):
            m = np.fft.rfftfreq(n, 1.0 / n) if a == self.dim - 1 else np.fft.fftfreq(n, 1.0 / n)
            shape = [1] * self.dim
            shape[a] = m.size
            out.append(m.reshape(shape))
        return tuple(out)

    @cached_property
    def wavenumbers(self):
        return tuple(
            2 * np.pi / L * m for L, m in zip(self._ext_lengths, self._freq)
        )

    @cached_property
    def k2(self):
        return sum(k ** 2 for k in self.wavenumbers)

    @cached_property
    def _ddx(self):
        out = []
        for a, (k, m) in enumerate(zip(self.wavenumbers, self._freq)):
            n = self._ext_shape[a]
            out.append(1j * k * (np.abs(m) != n // 2))
        return tuple(out)

    @cached_property
    def dealias_mask(self):
        """2/3-rule mask in rfftn layout."""
        mask = np.ones((), dtype=bool)
        for a, m in enumerate(self._freq):
            mask = mask & (np.abs(m) < self._ext_shape[a] / 3.0)
        return mask

    def _extend(self, arr, parity):
        if self.periodic:
            return arr
        for a, s in enumerate(parity):
            ax = arr.ndim - self.dim + a
            inner = np.flip(np.take(arr, np.arange(1, arr.shape[ax] - 1), axis=ax), axis=ax)
            arr = np.concatenate([arr, s * inner], axis=ax)
        return arr

    def _restrict(self, arr, parity):
        if self.periodic:
            return arr
        sl = [slice(None)] * (arr.ndim - self.dim) + [slice(0, n + 1) for n in self.resolution]
        arr = np.array(arr[tuple(sl)])
        for a, s in enumerate(parity):
            if s < 0:
                ax = arr.ndim - self.dim + a
                idx = [slice(None)] * arr.ndim
                idx[ax] = [0, arr.shape[ax] - 1]
                arr[tuple(idx)] = 0.0
        return arr

    def _axes_fft(self, arr):
        return tuple(range(arr.ndim - self.dim, arr.ndim))

    def forward(self, arr, parity):
        ext = self._extend(np.asarray(arr, dtype=float), parity)
        return np.fft.rfftn(ext, axes=self._axes_fft(ext))

    def backward(self, coef, parity):
        out = np.fft.irfftn(coef, s=self._ext_shape, axes=self._axes_fft(coef))
        return self._restrict(out, parity)

    def apply_multiplier(self, arr, parity, mult, out_parity=None):
        """Spectral multiplier on one grid-shaped component."""
        if out_parity is None:
            out_parity = parity
        return self.backward(self.forward(arr, parity) * mult, out_parity)

    def check_same(self, *fields):
        for f in fields:
            if f.domain != self:
                raise DomainMismatch("fields live on different domains")


def parity(dim, index):
    """Parity (+1 even / -1 odd) along each axis of one tensor component."""
    return tuple(-1 if sum(1 for i in index if i == a) % 2 else 1 for a in range(dim))


def make_domain(dim, lengths, resolution, bc=PERIODIC):
    return Domain(int(dim), tuple(lengths), tuple(resolution), bc)


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------
class Field:
    """Nodal samples of a rank-``r`` tensor field on a domain.

    ``values`` has shape ``(dim,) * rank + domain.grid_shape``.
    """

    rank = 0
    kind = "scalar"

    def __init__(self, domain, values):
        values = np.asarray(values, dtype=float)
        expected = (domain.dim,) * self.rank + domain.grid_shape
        if values.shape != expected:
            if values.size == int(np.prod(expected)):
                values = values.reshape(expected)
            else:
                raise DimensionMismatch(
                    f"{type(self).__name__} needs shape {expected}, got {values.shape}"
                )
        self.domain = domain
        self.values = values

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.values.shape}, bc={self.domain.bc!r})"

    @property
    def components(self):
        return list(product(range(self.domain.dim), repeat=self.rank))

    @cached_property
    def coeffs(self):
        """Spectral coefficients (rfftn layout) of every component."""
        d = self.domain
        out = np.empty(self.values.shape[: self.rank] + d.dealias_mask.shape, dtype=complex)
        for idx in self.components:
            out[idx] = d.forward(self.values[idx], parity(d.dim, idx))
        return out

    def _like(self, values):
        return type(self)(self.domain, values)

    def __add__(self, other):
        if isinstance(other, Field):
            self.domain.check_same(other)
            return self._like(self.values + other.values)
        return self._like(self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Field):
            self.domain.check_same(other)
            return self._like(self.values - other.values)
        return self._like(self.values - other)

    def __neg__(self):
        return self._like(-self.values)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            self.domain.check_same(other)
            return self._like(self.values * other.values)
        if isinstance(other, Field):
            return NotImplemented
        return self._like(self.values * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, ScalarField):
            self.domain.check_same(other)
            return self._like(self.values / other.values)
        return self._like(self.values / other)

    def max_abs(self):
        return float(np.max(np.abs(self.values)))


class ScalarField(Field):
    rank = 0
    kind = "scalar"

    def min(self):
        return float(self.values.min())

    def max(self):
        return float(self.values.max())


class VectorField(Field):
    rank = 1
    kind = "vector"

    def dot(self, other):
        self.domain.check_same(other)
        return ScalarField(self.domain, np.sum(self.values * other.values, axis=0))

    def outer(self, other):
        self.domain.check_same(other)
        return TensorField(self.domain, np.einsum("i...,j...->ij...", self.values, other.values))


class TensorField(Field):
    rank = 2
    kind = "tensor"

    def transpose(self):
        return TensorField(self.domain, np.swapaxes(self.values, 0, 1))

    def trace(self):
        return ScalarField(self.domain, np.trace(self.values, axis1=0, axis2=1))

    def ddot(self, other):
        self.domain.check_same(other)
        return ScalarField(self.domain, np.einsum("ij...,ij...->...", self.values, other.values))

    def asymmetry(self):
        """max |T_ij - T_ji| relative to max |T|."""
        scale = self.max_abs()
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(self.values - np.swapaxes(self.values, 0, 1)))) / scale


FIELD_KINDS = {"scalar": ScalarField, "vector": VectorField, "tensor": TensorField}


def scalar(domain, fn):
    """Sample ``fn(*coords)`` into a ScalarField."""
    return ScalarField(domain, np.broadcast_to(fn(*domain.coords), domain.grid_shape))


def identity_tensor(domain):
    eye = np.eye(domain.dim).reshape((domain.dim, domain.dim) + (1,) * domain.dim)
    return TensorField(domain, np.broadcast_to(eye, (domain.dim,) * 2 + domain.grid_shape))


# ---------------------------------------------------------------------------
# Differential operators
# ---------------------------------------------------------------------------
def _expect(f, cls):
    if not isinstance(f, cls):
        raise DimensionMismatch(f"expected {cls.__name__}, got {type(f).__name__}")


def _partial(f, idx, axis):
    d = f.domain
    return d.backward(f.coeffs[idx] * d._ddx[axis], parity(d.dim, idx + (axis,)))


def gradient(f):
    _expect(f, ScalarField)
    d = f.domain
    return VectorField(d, np.stack([_partial(f, (), a) for a in range(d.dim)]))


def divergence(v):
    """Divergence of a vector field (ScalarField) or row-wise of a tensor field."""
    d = v.domain
    if isinstance(v, VectorField):
        return ScalarField(d, sum(_partial(v, (a,), a) for a in range(d.dim)))
    if isinstance(v, TensorField):
        rows = [sum(_partial(v, (i, j), j) for j in range(d.dim)) for i in range(d.dim)]
        return VectorField(d, np.stack(rows))
    raise DimensionMismatch(f"cannot take divergence of {type(v).__name__}")


def laplacian(f):
    d = f.domain
    out = np.empty_like(f.values)
    for idx in f.components:
        out[idx] = d.backward(-d.k2 * f.coeffs[idx], parity(d.dim, idx))
    return f._like(out)


def hessian(f):
    _expect(f, ScalarField)
    d = f.domain
    out = np.empty((d.dim, d.dim) + d.grid_shape)
    for i in range(d.dim):
        for j in range(i, d.dim):
            if i == j:
                mult = -d.wavenumbers[i] ** 2
            else:
                mult = d._ddx[i] * d._ddx[j]
            out[i, j] = d.backward(f.coeffs * mult, parity(d.dim, (i, j)))
            out[j, i] = out[i, j]
    return TensorField(d, out)


def grad_vec(v):
    """(grad v)_ij = d v_i / d x_j."""
    _expect(v, VectorField)
    d = v.domain
    out = np.empty((d.dim, d.dim) + d.grid_shape)
    for i in range(d.dim):
        for j in range(d.dim):
            out[i, j] = _partial(v, (i,), j)
    return TensorField(d, out)


def dealias(f):
    """Apply the 2/3 truncation to every component."""
    d = f.domain
    out = np.empty_like(f.values)
    for idx in f.components:
        out[idx] = d.backward(f.coeffs[idx] * d.dealias_mask, parity(d.dim, idx))
    return f._like(out)


def integrate(f):
    """Trapezoidal quadrature of a scalar field (per component otherwise)."""
    w = f.domain.weights
    if f.rank == 0:
        return float(np.sum(w * f.values))
    return np.sum(w * f.values, axis=tuple(range(f.rank, f.values.ndim)))


def l2_norm(f):
    sq = f.values ** 2
    if f.rank:
        sq = sq.reshape((-1,) + f.domain.grid_shape).sum(axis=0)
    return float(np.sqrt(np.sum(f.domain.weights * sq)))


def spectral_tail(f, fraction=1.0 / 3.0):
    """Share of coefficient mass (sum of moduli) in the top ``fraction`` of modes."""
    d = f.domain
    high = np.zeros(d.dealias_mask.shape, dtype=bool)
    for a, m in enumerate(d._freq):
        high = high | (np.abs(m) >= d._ext_shape[a] * 0.5 * (1.0 - fraction))
    c = np.abs(f.coeffs)
    total = float(c.sum())
    if total == 0.0:
        return 0.0
    return float(c[..., high].sum()) / total


def negative_sobolev_norm(f, k):
    """Norm of ``f`` in ``W^{-k,2}``: weights ``(1 + |kappa|^2)^(-k)`` on L2-normalized modes."""
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    d = f.domain
    n_ext = int(np.prod(d._ext_shape))
    vol_ext = float(np.prod(d._ext_lengths))
    weight = (1.0 + d.k2) ** (-int(k))
    # rfft layout: interior columns of the last axis stand for two modes
    mult = np.full(weight.shape[-1], 2.0)
    mult[0] = 1.0
    if d._ext_shape[-1] % 2 == 0:
        mult[-1] = 1.0
    total = 0.0
    for idx in f.components:
        c = f.coeffs[idx] * (np.sqrt(vol_ext) / n_ext)
        total += float(np.sum(mult * weight * np.abs(c) ** 2))
    if not d.periodic:
        total /= 2 ** d.dim
    return float(np.sqrt(total))


def default_sobolev_index(dim):
    return int(np.ceil(dim / 2)) + 2


# ---------------------------------------------------------------------------
# Galerkin velocity basis
# ---------------------------------------------------------------------------
def _mode_list(domain, n):
    """Lowest-frequency mode descriptors ``(component, m, trig)``."""
    dim = domain.dim
    reach = int(np.ceil(n ** (1.0 / dim))) + 2
    modes = []
    if domain.periodic:
        for m in product(range(-reach, reach + 1), repeat=dim):
            nz = [x for x in m if x != 0]
            if not nz or nz[0] < 0:
                continue
            kk = sum((x / L) ** 2 for x, L in zip(m, domain.lengths))
            for trig in ("cos", "sin"):
                for c in range(dim):
                    modes.append((kk, m, trig, c))
    else:
        for m in product(range(0, reach + 1), repeat=dim):
            for c in range(dim):
                if m[c] == 0:
                    continue
                kk = sum((x / L) ** 2 for x, L in zip(m, domain.lengths))
                modes.append((kk, m, "wall", c))
    modes.sort(key=lambda t: (round(t[0], 12), t[1], t[2], t[3]))
    return [(c, m, trig) for _, m, trig, c in modes[:n]]


def _mode_values(domain, c, m, trig):
    x = domain.coords
    vals = np.zeros((domain.dim,) + domain.grid_shape)
    if trig in ("cos", "sin"):
        phase = sum(2 * np.pi * mi / L * xi for mi, L, xi in zip(m, domain.lengths, x))
        vals[c] = np.cos(phase) if trig == "cos" else np.sin(phase)
    else:
        prof = np.ones(domain.grid_shape)
        for a in range(domain.dim):
            arg = np.pi * m[a] / domain.lengths[a] * x[a]
            if a == c:
                s = np.sin(arg)
                idx = [slice(None)] * domain.dim
                idx[a] = [0, domain.grid_shape[a] - 1]
                s[tuple(idx)] = 0.0
                prof = prof * s
            else:
                prof = prof * np.cos(arg)
        vals[c] = prof
    return vals


class GalerkinBasis:
    """Finite-dimensional velocity space spanned by ``n`` orthonormal vector modes.

    Periodic domains use real Fourier vector modes without the constant mode;
    wall domains use the sine/cosine modes whose normal component vanishes on
    the walls.  Mode values and their derivatives are stored on the grid.
    """

    def __init__(self, domain, n):
        n = int(n)
        if n < 1:
            raise TooManyModes("need at least one mode")
        if n > min(domain.resolution) // 2:
            raise TooManyModes(f"n={n} exceeds resolution/2={min(domain.resolution) // 2}")
        self.domain = domain
        self.n = n
        self.modes = _mode_list(domain, n)
        raw = np.stack([_mode_values(domain, *mode) for mode in self.modes])
        flat = raw.reshape(n, -1)
        wrep = np.tile(domain.weights.ravel(), domain.dim)
        gram = (flat * wrep) @ flat.T
        chol = np.linalg.cholesky(gram)
        W = np.tensordot(np.linalg.inv(chol), raw, axes=1)
        for i, (c, m, trig) in enumerate(self.modes):
            if trig == "wall":
                for a in range(domain.dim):
                    W[i, a] = _restrict_zero(domain, W[i, a], a)
        self.W = W
        fields = [VectorField(domain, w) for w in W]
        self.gradW = np.stack([grad_vec(f).values for f in fields])
        self.divW = np.stack([divergence(f).values for f in fields])
        self.graddivW = np.stack([gradient(ScalarField(domain, dw)).values for dw in self.divW])
        w = domain.weights
        self._Ww = (W * w).reshape(n, -1)
        self._Wflat = W.reshape(n, -1)
        self._gradWw = (self.gradW * w).reshape(n, -1)
        self._divWw = (self.divW * w).reshape(n, -1)
        self._graddivWw = (self.graddivW * w).reshape(n, -1)

    def __repr__(self):
        return f"GalerkinBasis(n={self.n}, domain={self.domain.spec()})"

    def __reduce__(self):
        return galerkin_basis, (self.domain, self.n)

    def gram(self):
        return self._Ww @ self._Wflat.T

    def check(self, field):
        if field.domain != self.domain:
            raise DomainMismatch("field and basis live on different domains")


def _restrict_zero(domain, arr, axis):
    # component `axis` is odd along `axis`: exact zeros on those walls
    idx = [slice(None)] * domain.dim
    idx[axis] = [0, domain.grid_shape[axis] - 1]
    arr = np.array(arr)
    arr[tuple(idx)] = 0.0
    return arr


@lru_cache(maxsize=64)
def galerkin_basis(domain, n):
    """Cached constructor; bases are immutable and shared."""
    return GalerkinBasis(domain, n)


def project(v, basis):
    _expect(v, VectorField)
    basis.check(v)
    return basis._Ww @ v.values.ravel()


def reconstruct(c, basis):
    c = np.asarray(c, dtype=float)
    if c.shape != (basis.n,):
        raise DomainMismatch(f"coefficient vector of length {c.size} for basis of size {basis.n}")
    return VectorField(basis.domain, np.tensordot(c, basis.W, axes=1))


# ---------------------------------------------------------------------------
# Snapshot files
# ---------------------------------------------------------------------------
def snapshot_bytes(field):
    header = dict(field.domain.spec(), version=SNAPSHOT_VERSION, field_kind=field.kind,
                  shape=list(field.values.shape))
    head = json.dumps(header, sort_keys=True).encode() + b"\n"
    return head + np.ascontiguousarray(field.values, dtype="<f8").tobytes(order="C")


def write_snapshot(path, field):
    with open(path, "wb") as fh:
        fh.write(snapshot_bytes(field))


def read_snapshot(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    head, _, payload = raw.partition(b"\n")
    header = json.loads(head)
    if header.get("version") != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {header.get('version')}")
    domain = make_domain(header["dim"], header["lengths"], header["resolution"], header["bc"])
    values = np.frombuffer(io.BytesIO(payload).getbuffer(), dtype="<f8").astype(float)
    return FIELD_KINDS[header["field_kind"]](domain, values.reshape(header["shape"]))
