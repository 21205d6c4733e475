"""Periodic 3D grids, sampled fields and the matched discrete vector calculus.

All spatial integrals in this package are midpoint sums (value sum times the
cell volume).  Derivatives are periodic central differences.  The spectral
helpers below apply the *same* operators through their exact Fourier symbols,
so construction (Poisson solve) and validation (stencil divergence) agree to
round-off by design rather than by tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GridMismatchError, ValidationFailure


@dataclass(frozen=True)
class Grid3D:
    """Uniform periodic grid: ``dims`` points, ``spacing`` in bohr per axis.

    Point ``(ix, iy, iz)`` sits at ``origin + (ix*dx, iy*dy, iz*dz)``.  Flat
    storage order is x fastest, then y, then z (Fortran raveling of the
    logical cube), matching the on-disk layout.
    """

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        if len(self.dims) != 3 or len(self.spacing) != 3 or len(self.origin) != 3:
            raise ValidationFailure("grid needs three dims, spacings and origins")
        if any(n < 1 for n in self.dims):
            raise ValidationFailure(f"grid dims must be >= 1, got {self.dims}")
        if any(h <= 0.0 for h in self.spacing):
            raise ValidationFailure(f"grid spacing must be > 0, got {self.spacing}")

    @property
    def n_points(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def cell_volume(self) -> float:
        dx, dy, dz = self.spacing
        return dx * dy * dz

    @property
    def box_volume(self) -> float:
        return self.cell_volume * self.n_points

    def axis_coordinates(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing[axis] * np.arange(self.dims[axis])

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Cartesian coordinates of every point, shape (3, n_points)."""
        ax = [self.axis_coordinates(d) for d in range(3)]
        xs, ys, zs = np.meshgrid(*ax, indexing="ij")
        return np.stack([self.flat(xs), self.flat(ys), self.flat(zs)])

    def cube(self, values: np.ndarray) -> np.ndarray:
        """View flat storage as the logical (nx, ny, nz) cube."""
        return np.reshape(values, self.dims, order="F")

    def flat(self, cube: np.ndarray) -> np.ndarray:
        return np.ravel(cube, order="F")

    @cached_property
    def derivative_symbols(self) -> list[np.ndarray]:
        """Fourier symbols s_d = sin(k_d h_d)/h_d of the central difference.

        Returned as three broadcastable cubes.  The symbol vanishes at k = 0
        and at the Nyquist mode of even axes; those modes span the null space
        of the periodic central-difference operator.
        """
        symbols = []
        for d in range(3):
            n, h = self.dims[d], self.spacing[d]
            k = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
            s = np.sin(k * h) / h
            s[self._axis_null_modes(d)] = 0.0  # pin sin(pi) round-off to exact zero
            shape = [1, 1, 1]
            shape[d] = n
            symbols.append(s.reshape(shape))
        return symbols

    def _axis_null_modes(self, d: int) -> np.ndarray:
        """Mode indices j with sin(2 pi j / n) = 0: j = 0 and Nyquist if even."""
        n = self.dims[d]
        j = np.arange(n)
        return (2 * j) % n == 0

    @cached_property
    def insolvable_mode_mask(self) -> np.ndarray:
        """Cube mask of modes where all three derivative symbols vanish.

        The discrete Laplacian is singular there; no periodic gradient field
        can carry divergence onto these modes.
        """
        masks = []
        for d in range(3):
            shape = [1, 1, 1]
            shape[d] = self.dims[d]
            masks.append(self._axis_null_modes(d).reshape(shape))
        return masks[0] & masks[1] & masks[2]

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        """Flat mask of points on the outermost shell of the box."""
        mask = np.zeros(self.dims, dtype=bool)
        for d in range(3):
            if self.dims[d] < 2:
                continue
            idx = [slice(None)] * 3
            idx[d] = 0
            mask[tuple(idx)] = True
            idx[d] = self.dims[d] - 1
            mask[tuple(idx)] = True
        return self.flat(mask)


@dataclass
class ScalarFieldG:
    """Complex scalar samples on a Grid3D, flat x-fastest storage."""

    grid: Grid3D
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.grid.n_points,):
            raise ValidationFailure(
                f"scalar field needs shape ({self.grid.n_points},), "
                f"got {self.values.shape}"
            )

    def integrate(self) -> complex:
        return complex(np.sum(self.values) * self.grid.cell_volume)


@dataclass
class VectorFieldG:
    """Complex vector samples, component-major shape (3, n_points)."""

    grid: Grid3D
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.complex128)
        if self.values.shape != (3, self.grid.n_points):
            raise ValidationFailure(
                f"vector field needs shape (3, {self.grid.n_points}), "
                f"got {self.values.shape}"
            )

    def integrate(self) -> np.ndarray:
        return np.sum(self.values, axis=1) * self.grid.cell_volume


def same_grid(a: Grid3D, b: Grid3D) -> None:
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a.dims}/{a.spacing} vs {b.dims}/{b.spacing}")


def _apply_symbol(grid: Grid3D, flat_values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
    spectrum = np.fft.fftn(grid.cube(flat_values))
    return grid.flat(np.fft.ifftn(symbol * spectrum))


def gradient(f: ScalarFieldG) -> VectorFieldG:
    """Periodic central-difference gradient, applied spectrally.

    Parameters
    ----------
    f : ScalarFieldG
        Periodic samples.

    Returns
    -------
    VectorFieldG
        Component d equals (f(r + h_d) - f(r - h_d)) / (2 h_d) with wraparound,
        evaluated through the exact symbol i*sin(k_d h_d)/h_d.
    """
    comps = [
        _apply_symbol(f.grid, f.values, 1j * s) for s in f.grid.derivative_symbols
    ]
    return VectorFieldG(f.grid, np.stack(comps))


def divergence(v: VectorFieldG) -> ScalarFieldG:
    """Central-difference divergence with periodic wrap (stencil form).

    This is the validator's convention; ``divergence_spectral`` applies the
    identical operator through its Fourier symbol.
    """
    out = np.zeros(v.grid.dims, dtype=np.complex128)
    for d in range(3):
        if v.grid.dims[d] < 2:
            continue
        cube = v.grid.cube(v.values[d])
        out += (np.roll(cube, -1, axis=d) - np.roll(cube, 1, axis=d)) / (
            2.0 * v.grid.spacing[d]
        )
    return ScalarFieldG(v.grid, v.grid.flat(out))


def divergence_spectral(v: VectorFieldG) -> ScalarFieldG:
    acc = np.zeros(v.grid.n_points, dtype=np.complex128)
    for d, s in enumerate(v.grid.derivative_symbols):
        acc += _apply_symbol(v.grid, v.values[d], 1j * s)
    return ScalarFieldG(v.grid, acc)


def remove_insolvable_modes(f: ScalarFieldG) -> tuple[ScalarFieldG, float]:
    """Drop spectral content invisible to the central-difference operator.

    Returns the projected field and the relative L2 weight removed.  The
    removed set contains the mean and, on even axes, Nyquist checkerboard
    patterns; a source with weight there admits no periodic-gradient current,
    so the projection is the minimal correction making the continuity
    construction exact.
    """
    spectrum = np.fft.fftn(f.grid.cube(f.values))
    mask = f.grid.insolvable_mode_mask
    norm = np.linalg.norm(spectrum)
    removed = np.linalg.norm(spectrum[mask])
    spectrum = np.where(mask, 0.0, spectrum)
    out = ScalarFieldG(f.grid, f.grid.flat(np.fft.ifftn(spectrum)))
    return out, float(removed / norm) if norm > 0.0 else 0.0


def solve_poisson(rhs: ScalarFieldG) -> ScalarFieldG:
    """Solve lap(chi) = rhs under periodic boundary conditions.

    The Laplacian is the symbol-matched double application of the central
    difference, -(sum_d s_d^2).  The solution is fixed by zero weight on the
    operator's null modes.

    Raises
    ------
    ValidationFailure
        If the source carries weight on a null mode above round-off, i.e. the
        problem is ill-posed (non-neutral or checkerboard-contaminated source).
    """
    g = rhs.grid
    spectrum = np.fft.fftn(g.cube(rhs.values))
    sx, sy, sz = g.derivative_symbols
    lap = -(sx**2 + sy**2 + sz**2)
    lap = np.broadcast_to(lap, g.dims)
    mask = g.insolvable_mode_mask
    scale = np.max(np.abs(spectrum))
    if scale > 0.0 and np.max(np.abs(spectrum[mask])) > 1e-10 * scale:
        raise ValidationFailure("Poisson source has weight on insolvable modes")
    out = np.zeros_like(spectrum)
    np.divide(spectrum, lap, out=out, where=~mask)
    return ScalarFieldG(g, g.flat(np.fft.ifftn(out)))
