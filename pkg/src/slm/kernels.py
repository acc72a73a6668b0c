"""Dispersal and competition kernels tabulated on the periodic grid.

A kernel is stored as its values on the offset lattice of a :class:`Grid`
and is treated everywhere (simulation, quadrature, sampling) as the step
function that is constant on each offset cell.  Consequently the cached
mass ``h^d * sum(values)`` is the *exact* integral of the kernel actually
simulated, and micro- and mesoscopic levels share one object.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IncompatibleGridsError, InvalidParameterError, PreconditionError
from .grid import Grid, require_same_grid

_BALL_VOLUME = {1: lambda r: 2.0 * r, 2: lambda r: np.pi * r * r, 3: lambda r: 4.0 / 3.0 * np.pi * r**3}


@dataclass(frozen=True)
class Kernel:
    """Nonnegative even kernel tabulated on the offset lattice of ``grid``.

    ``values[j]`` is the kernel value on the offset cell centered at the
    minimum-image offset represented by index ``j`` (per axis).  ``mass``
    and ``sup`` are cached from the tabulation.
    """

    shape: str
    grid: Grid
    values: np.ndarray
    mass: float = field(init=False)
    sup: float = field(init=False)

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if v.shape != self.grid.shape:
            raise InvalidParameterError(
                f"kernel values shape {v.shape} does not match grid shape {self.grid.shape}"
            )
        if np.any(v < 0):
            raise InvalidParameterError("kernel values must be nonnegative")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "mass", float(self.grid.cell_volume * v.sum()))
        object.__setattr__(self, "sup", float(v.max()) if v.size else 0.0)

    # -- pointwise access ------------------------------------------------

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def support_radius(self) -> float:
        """Radius of the smallest ball of offset-cell centers covering supp(a)."""
        nz = self.values > 0
        if not nz.any():
            return 0.0
        return float(self.grid.offset_radii()[nz].max() + 0.5 * self.grid.spacing)

    def evaluate(self, dx: np.ndarray) -> np.ndarray:
        """Kernel value at continuous offset(s) ``dx``.

        ``dx`` has shape (..., dim) for dim > 1, or any shape for dim = 1.
        """
        dx = np.asarray(dx, dtype=float)
        if self.dim == 1:
            idx = self.grid.offset_index(dx)
            return self.values[idx]
        idx = self.grid.offset_index(dx)
        return self.values[tuple(np.moveaxis(idx, -1, 0))]

    def is_even(self, tol: float = 0.0) -> bool:
        v = self.values
        flipped = v
        for ax in range(v.ndim):
            flipped = np.flip(np.roll(flipped, -1, axis=ax), axis=ax)
        return bool(np.max(np.abs(v - flipped)) <= tol)

    # -- sampling --------------------------------------------------------

    def sample_displacement(self, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        """Draw displacements from the density a/<a> (inverse CDF over cells
        plus a uniform jitter inside the chosen cell).  Returns (size, dim).
        """
        if self.mass <= 0:
            raise InvalidParameterError("cannot sample from a kernel with zero mass")
        cdf = getattr(self, "_cdf", None)
        if cdf is None:
            cdf = np.cumsum(self.values.ravel())
            cdf /= cdf[-1]
            object.__setattr__(self, "_cdf", cdf)
        flat = np.searchsorted(cdf, rng.random(size), side="right")
        idx = np.unravel_index(np.minimum(flat, cdf.size - 1), self.grid.shape)
        offs = self.grid.axis_offsets()
        h = self.grid.spacing
        out = np.empty((size, self.dim))
        for ax in range(self.dim):
            out[:, ax] = offs[idx[ax]] + rng.uniform(-0.5 * h, 0.5 * h, size=size)
        return out

    # -- convolution helpers --------------------------------------------

    def support_cells(self):
        """(index tuples, weights) of nonzero offset cells, cached lazily."""
        cached = getattr(self, "_support", None)
        if cached is None:
            nz = np.nonzero(self.values)
            cached = (np.stack(nz, axis=-1), self.values[nz])
            object.__setattr__(self, "_support", cached)
        return cached

    def circulant(self) -> np.ndarray:
        """Matrix C[i, j] = h * a(x_i - x_j) for 1-d grids; symmetric.

        Used for the quadrature of convolution-type integrals.
        """
        if self.dim != 1:
            raise InvalidParameterError("circulant matrix is only built for 1-d grids")
        cached = getattr(self, "_circulant", None)
        if cached is None:
            m = self.grid.cells
            i = np.arange(m)
            cached = self.grid.spacing * self.values[(i[:, None] - i[None, :]) % m]
            object.__setattr__(self, "_circulant", cached)
        return cached

    def offset_matrix(self) -> np.ndarray:
        """Matrix A[i, j] = a(x_i - x_j) for 1-d grids (no quadrature weight)."""
        return self.circulant() / self.grid.spacing


# -- constructors --------------------------------------------------------


def _check_support(radius: float, grid: Grid):
    if radius >= 0.5 * grid.side:
        raise InvalidParameterError(
            f"kernel radius {radius} must be below half the torus side {grid.side / 2}"
        )


def make_indicator_kernel(height: float, radius: float, dim: int, grid: Grid) -> Kernel:
    """Uniform bump: a(x) = height for |x| <= radius, else 0."""
    if height <= 0 or radius <= 0:
        raise InvalidParameterError("indicator kernel needs positive height and radius")
    if dim != grid.dim:
        raise InvalidParameterError(f"dim {dim} does not match grid dim {grid.dim}")
    _check_support(radius, grid)
    r = grid.offset_radii()
    return Kernel("indicator-ball", grid, np.where(r <= radius, height, 0.0))


def make_gaussian_kernel(
    sigma: float, dim: int, grid: Grid, height: float | None = None, cutoff: float | None = None
) -> Kernel:
    """Truncated Gaussian bump.  ``height=None`` normalizes the untruncated
    profile to unit mass; ``cutoff`` defaults to 5 sigma.
    """
    if sigma <= 0:
        raise InvalidParameterError("sigma must be positive")
    if dim != grid.dim:
        raise InvalidParameterError(f"dim {dim} does not match grid dim {grid.dim}")
    if cutoff is None:
        cutoff = 5.0 * sigma
    _check_support(cutoff, grid)
    if height is None:
        height = (2.0 * np.pi * sigma * sigma) ** (-0.5 * dim)
    elif height <= 0:
        raise InvalidParameterError("height must be positive")
    r = grid.offset_radii()
    vals = height * np.exp(-0.5 * (r / sigma) ** 2)
    vals[r > cutoff] = 0.0
    return Kernel("gaussian-truncated", grid, vals)


def make_tabulated_kernel(offsets: np.ndarray, profile: np.ndarray, dim: int, grid: Grid) -> Kernel:
    """Kernel from a radial profile sampled at strictly increasing offsets.

    The profile is linearly interpolated onto |offset| of every grid cell
    and is zero beyond the last tabulated offset.
    """
    offsets = np.asarray(offsets, dtype=float)
    profile = np.asarray(profile, dtype=float)
    if offsets.ndim != 1 or offsets.shape != profile.shape or offsets.size < 2:
        raise InvalidParameterError("tabulated kernel needs two equal-length columns")
    if np.any(np.diff(offsets) <= 0):
        raise InvalidParameterError("tabulated offsets must be strictly increasing")
    if np.any(profile < 0):
        raise InvalidParameterError("tabulated values must be nonnegative")
    if dim != grid.dim:
        raise InvalidParameterError(f"dim {dim} does not match grid dim {grid.dim}")
    _check_support(float(offsets[-1]), grid)
    r = grid.offset_radii()
    vals = np.interp(r, offsets, profile, right=0.0)
    return Kernel("tabulated-grid", grid, vals)


def load_tabulated_kernel(path, dim: int, grid: Grid) -> Kernel:
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    if data.shape[1] != 2:
        raise InvalidParameterError(f"{path}: expected two columns (offset, value)")
    return make_tabulated_kernel(data[:, 0], data[:, 1], dim, grid)


def make_zero_kernel(grid: Grid) -> Kernel:
    """Absent interaction (e.g. the contact model's competition kernel)."""
    return Kernel("zero", grid, np.zeros(grid.shape))


def ball_volume(dim: int, radius: float) -> float:
    return _BALL_VOLUME[dim](radius)


# -- conditions on kernel pairs -----------------------------------------


def kernel_moments(kernel: Kernel) -> tuple:
    """(mass, sup) recomputed from the tabulation; matches the cached values."""
    mass = float(kernel.grid.cell_volume * kernel.values.sum())
    sup = float(kernel.values.max()) if kernel.values.size else 0.0
    return mass, sup


def domination_theta(aplus: Kernel, aminus: Kernel) -> float | None:
    """Smallest theta with a+ <= theta * a- on the grid, or None if no
    finite theta exists (a+ positive where a- vanishes).
    """
    require_same_grid(aplus.grid, aminus.grid)
    pos = aplus.values > 0
    if not pos.any():
        return 0.0
    if np.any(aminus.values[pos] == 0):
        return None
    return float(np.max(aplus.values[pos] / aminus.values[pos]))


def check_homogenization(aplus: Kernel, aminus: Kernel, m: float) -> bool:
    """Pointwise criterion for long-time flattening of the kinetic density:
    a+(x)/<a+> >= (1 - m/<a+>) * a-(x)/<a-> at every grid cell.

    Requires a positive carrying capacity q = (<a+> - m)/<a->.
    """
    require_same_grid(aplus.grid, aminus.grid)
    if aminus.mass <= 0:
        raise PreconditionError("competition kernel must have positive mass")
    q = (aplus.mass - m) / aminus.mass
    if q <= 0:
        raise PreconditionError(f"carrying capacity must be positive, got q={q:.6g}")
    lhs = aplus.values / aplus.mass
    rhs = (1.0 - m / aplus.mass) * aminus.values / aminus.mass
    # tiny relative slack absorbs round-off in the ratio fields
    tol = 1e-12 * max(float(np.max(rhs)), 1.0)
    return bool(np.all(lhs >= rhs - tol))
