"""Grids, sampled space-time fields and pointwise differential/tensor algebra.

The flow domain is a truncated half space: tangential directions are periodic
with period ``L`` (n - 1 of them), the wall-normal direction covers ``[0, H)``
with the first node exactly on the wall ``x_n = 0``, and time covers
``[0, T)`` on a uniform grid.  Fields are immutable after construction; every
operation below is a pure function of its inputs.

Array layout: ``values[t, x_n, x', ...components]``.  Component index
``n - 1`` is the wall-normal component, indices ``0 .. n-2`` are tangential.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

__all__ = [
    "Grid",
    "SpaceTimeField",
    "SpatialField",
    "BoundaryField",
    "divergence_spatial",
    "symmetric_gradient",
    "gradient",
    "divergence",
    "tensor_divergence",
    "outer_product",
    "frobenius_norm_field",
    "fd_weights",
    "derivative_matrix",
    "write_field",
    "read_field",
    "export_slice_csv",
]


def _tanh_nodes(count: int, height: float, strength: float) -> np.ndarray:
    """Strictly increasing nodes on [0, H), clustered toward 0."""
    j = np.arange(count) / count
    return height * (1.0 + np.tanh(strength * (j - 1.0)) / np.tanh(strength))


@dataclass(frozen=True)
class Grid:
    """Discretisation of the truncated half space times a time window."""

    n: int = 2
    L: float = 2.0 * np.pi
    N_xp: int = 64
    H: float = 16.0
    N_xn: int = 48
    T: float = 1.0
    N_t: int = 64
    spacing: str = "uniform"  # normal-direction rule: "uniform" | "tanh"
    grading: float = 2.0

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError(f"n must be 2 or 3, got {self.n}")
        if self.N_xp < 4 or self.N_xp % 2:
            raise ValueError("N_xp must be even and at least 4")
        if self.N_xn < 4 or self.N_t < 4:
            raise ValueError("N_xn and N_t must be at least 4")
        if min(self.L, self.H, self.T) <= 0:
            raise ValueError("L, H, T must be positive")
        if self.spacing not in ("uniform", "tanh"):
            raise ValueError(f"unknown spacing rule {self.spacing!r}")

    # -- coordinates -------------------------------------------------------
    @property
    def x_tangential(self) -> np.ndarray:
        return self.L * np.arange(self.N_xp) / self.N_xp

    @property
    def x_normal(self) -> np.ndarray:
        if self.spacing == "uniform":
            return self.H * np.arange(self.N_xn) / self.N_xn
        return _tanh_nodes(self.N_xn, self.H, self.grading)

    @property
    def t_nodes(self) -> np.ndarray:
        return self.dt * np.arange(self.N_t)

    @property
    def dt(self) -> float:
        return self.T / self.N_t

    @property
    def dx_tangential(self) -> float:
        return self.L / self.N_xp

    @property
    def dx_normal(self) -> float:
        if self.spacing != "uniform":
            raise ValueError("graded normal grid has no single spacing")
        return self.H / self.N_xn

    # -- shapes ------------------------------------------------------------
    @property
    def tangential_shape(self) -> tuple[int, ...]:
        return (self.N_xp,) * (self.n - 1)

    def field_shape(self, rank: int) -> tuple[int, ...]:
        base = (self.N_t, self.N_xn) + self.tangential_shape
        return base + (self.n,) * rank

    def boundary_shape(self, rank: int) -> tuple[int, ...]:
        base = (self.N_t,) + self.tangential_shape
        return base + (self.n,) * rank

    def meshgrid(self):
        """Broadcastable (t, x_n, x', ...) coordinate arrays."""
        axes = [self.t_nodes, self.x_normal] + [self.x_tangential] * (self.n - 1)
        return np.meshgrid(*axes, indexing="ij")

    @property
    def cell_volume(self) -> float:
        """Nominal space-time cell measure of the half-domain lattice."""
        return self.dt * (self.H / self.N_xn) * self.dx_tangential ** (self.n - 1)

    def refined(self, space: int = 1, time: int = 1) -> "Grid":
        return replace(
            self,
            N_xp=self.N_xp * space,
            N_xn=self.N_xn * space,
            N_t=self.N_t * time,
        )


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpaceTimeField:
    """Sampled field on the half-space lattice; rank 0, 1 or 2."""

    grid: Grid
    rank: int
    values: np.ndarray
    symmetric: bool = False  # meaningful for rank 2 only

    def __post_init__(self):
        expected = self.grid.field_shape(self.rank)
        if self.values.shape != expected:
            raise ValueError(
                f"value shape {self.values.shape} does not match grid/rank {expected}"
            )
        object.__setattr__(self, "values", _freeze(self.values))
        if self.rank == 2 and self.symmetric:
            sym_gap = np.max(np.abs(self.values - np.swapaxes(self.values, -1, -2)))
            if sym_gap != 0.0:
                raise ValueError(f"tensor declared symmetric but |a_ij - a_ji| = {sym_gap}")

    @classmethod
    def zeros(cls, grid: Grid, rank: int = 0, symmetric: bool = False) -> "SpaceTimeField":
        return cls(grid, rank, np.zeros(grid.field_shape(rank)), symmetric=symmetric)

    @classmethod
    def sample(cls, grid: Grid, rank: int, fn, symmetric: bool = False) -> "SpaceTimeField":
        """Sample ``fn(t, x_n, x1[, x2]) -> scalar/vector/tensor`` on the lattice."""
        coords = grid.meshgrid()
        vals = np.asarray(fn(*coords))
        if rank > 0:
            # fn returns a tuple/list of components in the leading axis
            vals = np.moveaxis(vals, list(range(rank)), list(range(-rank, 0)))
        return cls(grid, rank, np.ascontiguousarray(vals, dtype=float), symmetric=symmetric)

    def component(self, *idx: int) -> np.ndarray:
        if len(idx) != self.rank:
            raise ValueError("component index count must equal rank")
        return self.values[(Ellipsis, *idx)]

    def __add__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        _check_same(self, other)
        return SpaceTimeField(
            self.grid, self.rank, self.values + other.values,
            symmetric=self.symmetric and other.symmetric,
        )

    def __sub__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        _check_same(self, other)
        return SpaceTimeField(
            self.grid, self.rank, self.values - other.values,
            symmetric=self.symmetric and other.symmetric,
        )

    def __mul__(self, scalar: float) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, self.rank, self.values * scalar, symmetric=self.symmetric)

    __rmul__ = __mul__

    def boundary_trace(self) -> "BoundaryField":
        """Restriction to the wall plane x_n = 0."""
        vals = self.values[:, 0]
        if self.rank == 0:
            return BoundaryField(self.grid, 0, values=vals)
        if self.rank == 1:
            return BoundaryField(
                self.grid, 1,
                tangential=vals[..., : self.grid.n - 1],
                normal=vals[..., self.grid.n - 1],
            )
        raise ValueError("boundary trace defined for rank 0 and 1 fields")

    def time_zero(self) -> "SpatialField":
        return SpatialField(self.grid, self.rank, self.values[0])

    def linf(self) -> float:
        if self.rank == 0:
            return float(np.max(np.abs(self.values)))
        axes = tuple(range(-self.rank, 0))
        return float(np.max(np.sqrt(np.sum(self.values**2, axis=axes))))


def _check_same(a: SpaceTimeField, b: SpaceTimeField) -> None:
    if a.grid != b.grid:
        raise ValueError("grid mismatch")
    if a.rank != b.rank:
        raise ValueError("rank mismatch")


@dataclass(frozen=True)
class SpatialField:
    """Time-independent field on the half-space lattice (initial data, traces)."""

    grid: Grid
    rank: int
    values: np.ndarray

    def __post_init__(self):
        expected = self.grid.field_shape(self.rank)[1:]
        if self.values.shape != expected:
            raise ValueError(f"value shape {self.values.shape}, expected {expected}")
        object.__setattr__(self, "values", _freeze(self.values))

    @classmethod
    def zeros(cls, grid: Grid, rank: int = 0) -> "SpatialField":
        return cls(grid, rank, np.zeros(grid.field_shape(rank)[1:]))

    @classmethod
    def sample(cls, grid: Grid, rank: int, fn) -> "SpatialField":
        axes = [grid.x_normal] + [grid.x_tangential] * (grid.n - 1)
        coords = np.meshgrid(*axes, indexing="ij")
        vals = np.asarray(fn(*coords))
        if rank > 0:
            vals = np.moveaxis(vals, list(range(rank)), list(range(-rank, 0)))
        return cls(grid, rank, np.ascontiguousarray(vals, dtype=float))

    def wall_values(self) -> np.ndarray:
        return self.values[0]

    def __sub__(self, other: "SpatialField") -> "SpatialField":
        if self.grid != other.grid or self.rank != other.rank:
            raise ValueError("grid/rank mismatch")
        return SpatialField(self.grid, self.rank, self.values - other.values)

    def __mul__(self, scalar: float) -> "SpatialField":
        return SpatialField(self.grid, self.rank, self.values * scalar)

    __rmul__ = __mul__

    def linf(self) -> float:
        if self.rank == 0:
            return float(np.max(np.abs(self.values)))
        axes = tuple(range(-self.rank, 0))
        return float(np.max(np.sqrt(np.sum(self.values**2, axis=axes))))


def divergence_spatial(u: SpatialField) -> SpatialField:
    """Divergence of a spatial vector field (spectral in x', FD4 in x_n)."""
    if u.rank != 1:
        raise ValueError("divergence_spatial expects a rank-1 field")
    g = u.grid
    total = np.zeros(g.field_shape(0)[1:])
    D = _normal_derivative_matrix(g)
    total += np.einsum("ij,j...->i...", D, u.values[..., g.n - 1])
    k = np.fft.fftfreq(g.N_xp, d=g.dx_tangential)
    for d in range(g.n - 1):
        axis = 1 + d
        shape = [1] * (u.values.ndim - 1)
        shape[axis] = g.N_xp
        mult = (2j * np.pi * k).reshape(shape)
        fhat = np.fft.fft(u.values[..., d], axis=axis)
        total += np.real(np.fft.ifft(mult * fhat, axis=axis))
    return SpatialField(g, 0, total)


@dataclass(frozen=True)
class BoundaryField:
    """Field sampled on the wall plane x_n = 0 times the time window.

    Rank-1 boundary data keeps the normal component separate from the
    tangential block so that wall-data diagnostics can address it alone.
    """

    grid: Grid
    rank: int
    values: np.ndarray | None = None        # rank 0
    tangential: np.ndarray | None = None    # rank 1, shape (..., n-1)
    normal: np.ndarray | None = None        # rank 1, shape (...)

    def __post_init__(self):
        base = self.grid.boundary_shape(0)
        if self.rank == 0:
            if self.values is None or self.values.shape != base:
                raise ValueError("rank-0 boundary field needs values of shape " + str(base))
            object.__setattr__(self, "values", _freeze(self.values))
        elif self.rank == 1:
            want_t = base + (self.grid.n - 1,)
            if self.tangential is None or self.tangential.shape != want_t:
                raise ValueError(f"tangential block must have shape {want_t}")
            if self.normal is None or self.normal.shape != base:
                raise ValueError(f"normal component must have shape {base}")
            object.__setattr__(self, "tangential", _freeze(self.tangential))
            object.__setattr__(self, "normal", _freeze(self.normal))
        else:
            raise ValueError("boundary fields have rank 0 or 1")

    @classmethod
    def zeros(cls, grid: Grid, rank: int = 0) -> "BoundaryField":
        base = grid.boundary_shape(0)
        if rank == 0:
            return cls(grid, 0, values=np.zeros(base))
        return cls(grid, 1, tangential=np.zeros(base + (grid.n - 1,)), normal=np.zeros(base))

    def normal_scalar(self) -> "BoundaryField":
        if self.rank != 1:
            raise ValueError("normal_scalar applies to rank-1 boundary data")
        return BoundaryField(self.grid, 0, values=self.normal)

    def component(self, i: int) -> np.ndarray:
        if self.rank != 1:
            raise ValueError("component applies to rank-1 boundary data")
        if i == self.grid.n - 1:
            return self.normal
        return self.tangential[..., i]

    def stacked(self) -> np.ndarray:
        """All n components in one array, normal last."""
        return np.concatenate([self.tangential, self.normal[..., None]], axis=-1)

    def __sub__(self, other: "BoundaryField") -> "BoundaryField":
        if self.grid != other.grid or self.rank != other.rank:
            raise ValueError("grid/rank mismatch")
        if self.rank == 0:
            return BoundaryField(self.grid, 0, values=self.values - other.values)
        return BoundaryField(
            self.grid, 1,
            tangential=self.tangential - other.tangential,
            normal=self.normal - other.normal,
        )

    def linf(self) -> float:
        if self.rank == 0:
            return float(np.max(np.abs(self.values)))
        return float(max(np.max(np.abs(self.tangential)), np.max(np.abs(self.normal))))


# ---------------------------------------------------------------------------
# finite-difference machinery for the wall-normal axis
# ---------------------------------------------------------------------------

def fd_weights(nodes: np.ndarray, x0: float, order: int) -> np.ndarray:
    """Fornberg weights for the ``order``-th derivative at ``x0``."""
    nodes = np.asarray(nodes, dtype=float)
    m = len(nodes)
    c = np.zeros((m, order + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = nodes[0] - x0
    for i in range(1, m):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            for k in range(mn, 0, -1):
                c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
            c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def derivative_matrix(nodes: np.ndarray, order: int = 1, stencil: int = 5) -> np.ndarray:
    """Dense banded derivative matrix, one-sided stencils at both ends.

    A 5-point stencil gives 4th-order first derivatives on uniform grids and
    degrades gracefully on graded grids (Fornberg weights are exact for the
    local polynomial degree either way).
    """
    m = len(nodes)
    if m < stencil:
        raise ValueError("grid too coarse for the requested stencil")
    D = np.zeros((m, m))
    half = stencil // 2
    for i in range(m):
        lo = min(max(i - half, 0), m - stencil)
        sl = slice(lo, lo + stencil)
        D[i, sl] = fd_weights(nodes[sl], nodes[i], order)
    return D


_DMAT_CACHE: dict[tuple, np.ndarray] = {}


def _normal_derivative_matrix(grid: Grid) -> np.ndarray:
    key = ("xn", grid.N_xn, grid.H, grid.spacing, grid.grading)
    if key not in _DMAT_CACHE:
        _DMAT_CACHE[key] = derivative_matrix(grid.x_normal)
    return _DMAT_CACHE[key]


def _time_derivative_matrix(grid: Grid) -> np.ndarray:
    key = ("t", grid.N_t, grid.T)
    if key not in _DMAT_CACHE:
        _DMAT_CACHE[key] = derivative_matrix(grid.t_nodes)
    return _DMAT_CACHE[key]


def normal_derivative(grid: Grid, values: np.ndarray) -> np.ndarray:
    """d/dx_n along axis 1 (4th-order, one-sided at the wall)."""
    D = _normal_derivative_matrix(grid)
    return np.einsum("ij,tj...->ti...", D, values)


def time_derivative(grid: Grid, values: np.ndarray) -> np.ndarray:
    """d/dt along axis 0 (4th-order, one-sided at both ends)."""
    D = _time_derivative_matrix(grid)
    return np.einsum("ij,j...->i...", D, values)


def tangential_derivative(grid: Grid, values: np.ndarray, d: int) -> np.ndarray:
    """Spectral d/dx_d along tangential axis d (0-based among tangential axes)."""
    axis = 2 + d
    k = np.fft.fftfreq(grid.N_xp, d=grid.dx_tangential)
    shape = [1] * values.ndim
    shape[axis] = grid.N_xp
    mult = (2j * np.pi * k).reshape(shape)
    fhat = np.fft.fft(values, axis=axis)
    return np.real(np.fft.ifft(mult * fhat, axis=axis))


def spatial_derivative(grid: Grid, values: np.ndarray, d: int) -> np.ndarray:
    """d/dx_d with d in 0..n-1; d = n-1 is the wall-normal direction."""
    if d == grid.n - 1:
        return normal_derivative(grid, values)
    return tangential_derivative(grid, values, d)


# ---------------------------------------------------------------------------
# differential / tensor operations
# ---------------------------------------------------------------------------

def gradient(u: SpaceTimeField) -> SpaceTimeField:
    """Full gradient (grad u)_ij = du_i/dx_j of a vector field."""
    if u.rank != 1:
        raise ValueError("gradient expects a rank-1 field")
    n = u.grid.n
    shape = u.grid.field_shape(2)
    out = np.empty(shape)
    for j in range(n):
        out[..., :, j] = spatial_derivative(u.grid, u.values, j)
    return SpaceTimeField(u.grid, 2, out)


def symmetric_gradient(u: SpaceTimeField) -> SpaceTimeField:
    """Strain-rate tensor (Du)_ij = (du_i/dx_j + du_j/dx_i) / 2."""
    g = gradient(u).values
    sym = 0.5 * (g + np.swapaxes(g, -1, -2))
    return SpaceTimeField(u.grid, 2, sym, symmetric=True)


def divergence(u: SpaceTimeField) -> SpaceTimeField:
    if u.rank != 1:
        raise ValueError("divergence expects a rank-1 field")
    total = np.zeros(u.grid.field_shape(0))
    for d in range(u.grid.n):
        total += spatial_derivative(u.grid, u.values[..., d], d)
    return SpaceTimeField(u.grid, 0, total)


def tensor_divergence(F: SpaceTimeField) -> SpaceTimeField:
    """(div F)_i = sum_j dF_ij/dx_j."""
    if F.rank != 2:
        raise ValueError("tensor_divergence expects a rank-2 field")
    n = F.grid.n
    out = np.zeros(F.grid.field_shape(1))
    for j in range(n):
        out += spatial_derivative(F.grid, F.values[..., :, j], j)
    return SpaceTimeField(F.grid, 1, out)


def outer_product(u: SpaceTimeField, v: SpaceTimeField) -> SpaceTimeField:
    if u.grid != v.grid:
        raise ValueError("grid mismatch")
    if u.rank != 1 or v.rank != 1:
        raise ValueError("outer_product expects rank-1 fields")
    vals = u.values[..., :, None] * v.values[..., None, :]
    return SpaceTimeField(u.grid, 2, vals, symmetric=u is v or np.array_equal(u.values, v.values))


def frobenius_norm_field(A: SpaceTimeField) -> SpaceTimeField:
    if A.rank != 2:
        raise ValueError("frobenius_norm_field expects a rank-2 field")
    mag = np.sqrt(np.sum(A.values**2, axis=(-2, -1)))
    return SpaceTimeField(A.grid, 0, mag)


# ---------------------------------------------------------------------------
# snapshot I/O: flat binary + text sidecar, CSV slice export
# ---------------------------------------------------------------------------

_MAGIC_FIELDS = ("n", "rank", "N_t", "N_xn")


def write_field(f: SpaceTimeField, path: str | Path) -> None:
    """Header of 64-bit little-endian ints, then row-major float64 values."""
    path = Path(path)
    header = [f.grid.n, f.rank, f.grid.N_t, f.grid.N_xn] + [f.grid.N_xp] * (f.grid.n - 1)
    with open(path, "wb") as fh:
        np.asarray(header, dtype="<i8").tofile(fh)
        np.ascontiguousarray(f.values, dtype="<f8").tofile(fh)
    meta = {
        "L": f.grid.L, "H": f.grid.H, "T": f.grid.T,
        "spacing": f.grid.spacing, "grading": f.grid.grading,
        "rank": f.rank, "symmetric": int(f.symmetric),
    }
    with open(path.with_suffix(path.suffix + ".meta"), "w") as fh:
        for k, v in meta.items():
            fh.write(f"{k} = {v}\n")


def read_field(path: str | Path) -> SpaceTimeField:
    path = Path(path)
    meta: dict[str, str] = {}
    with open(path.with_suffix(path.suffix + ".meta")) as fh:
        for line in fh:
            if "=" in line:
                k, v = line.split("=", 1)
                meta[k.strip()] = v.strip()
    with open(path, "rb") as fh:
        n, rank = np.fromfile(fh, dtype="<i8", count=2)
        sizes = np.fromfile(fh, dtype="<i8", count=2 + (n - 1))
        grid = Grid(
            n=int(n), L=float(meta["L"]), N_xp=int(sizes[2]),
            H=float(meta["H"]), N_xn=int(sizes[1]),
            T=float(meta["T"]), N_t=int(sizes[0]),
            spacing=meta.get("spacing", "uniform"),
            grading=float(meta.get("grading", 2.0)),
        )
        vals = np.fromfile(fh, dtype="<f8").reshape(grid.field_shape(int(rank)))
    return SpaceTimeField(grid, int(rank), vals, symmetric=bool(int(meta.get("symmetric", 0))))


def export_slice_csv(f: SpaceTimeField, path: str | Path, t_index: int = 0,
                     component: tuple[int, ...] = ()) -> None:
    """1-D wall-normal profile at the first tangential node."""
    vals = f.values[(t_index, slice(None)) + (0,) * (f.grid.n - 1) + tuple(component)]
    xs = f.grid.x_normal
    with open(path, "w") as fh:
        fh.write("x_n,value\n")
        for x, v in zip(xs, vals):
            fh.write(f"{x!r},{v!r}\n")
