"""Grid layout, matched symbols and the discrete vector calculus."""

import numpy as np
import pytest

from nlres.errors import GridMismatchError, ValidationFailure
from nlres.grid import (
    Grid3D,
    ScalarFieldG,
    VectorFieldG,
    divergence,
    divergence_spectral,
    gradient,
    remove_insolvable_modes,
    same_grid,
    solve_poisson,
)

RNG = np.random.default_rng(20260815)


def small_grid() -> Grid3D:
    return Grid3D(dims=(8, 6, 5), spacing=(0.5, 0.7, 0.9), origin=(-1.75, -1.75, -1.8))


def random_scalar(grid: Grid3D) -> ScalarFieldG:
    v = RNG.standard_normal(grid.n_points) + 1j * RNG.standard_normal(grid.n_points)
    return ScalarFieldG(grid, v)


def test_flat_order_is_x_fastest():
    g = Grid3D(dims=(3, 2, 2), spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0))
    xyz = g.coordinates
    # first dims[0] entries walk x with y, z frozen
    assert np.allclose(xyz[0, :3], [0.0, 1.0, 2.0])
    assert np.allclose(xyz[1, :3], 0.0)
    # entry 3 advances y by one step
    assert xyz[1, 3] == 1.0 and xyz[0, 3] == 0.0
    # last block has z = 1
    assert np.all(xyz[2, 6:] == 1.0)


def test_cube_flat_round_trip():
    g = small_grid()
    v = RNG.standard_normal(g.n_points)
    assert np.array_equal(g.flat(g.cube(v)), v)


def test_volumes():
    g = small_grid()
    assert g.n_points == 8 * 6 * 5
    assert g.cell_volume == pytest.approx(0.5 * 0.7 * 0.9)
    assert g.box_volume == pytest.approx(g.cell_volume * g.n_points)


def test_bad_construction_rejected():
    with pytest.raises(ValidationFailure):
        Grid3D(dims=(0, 4, 4), spacing=(1, 1, 1), origin=(0, 0, 0))
    with pytest.raises(ValidationFailure):
        Grid3D(dims=(4, 4, 4), spacing=(1, -1, 1), origin=(0, 0, 0))
    g = small_grid()
    with pytest.raises(ValidationFailure):
        ScalarFieldG(g, np.zeros(g.n_points - 1))
    with pytest.raises(ValidationFailure):
        VectorFieldG(g, np.zeros((2, g.n_points)))
    with pytest.raises(GridMismatchError):
        same_grid(g, Grid3D(dims=(8, 6, 4), spacing=g.spacing, origin=g.origin))


def test_gradient_matches_roll_stencil():
    """The spectral symbol is the exact DFT of the central difference."""
    g = small_grid()
    f = random_scalar(g)
    grad = gradient(f)
    cube = g.cube(f.values)
    for d in range(3):
        stencil = (np.roll(cube, -1, axis=d) - np.roll(cube, 1, axis=d)) / (
            2.0 * g.spacing[d]
        )
        assert np.max(np.abs(g.cube(grad.values[d]) - stencil)) < 1e-12


def test_divergence_routes_agree():
    g = small_grid()
    v = VectorFieldG(
        g, RNG.standard_normal((3, g.n_points)) + 1j * RNG.standard_normal((3, g.n_points))
    )
    a = divergence(v).values
    b = divergence_spectral(v).values
    assert np.max(np.abs(a - b)) < 1e-12


def test_integration_by_parts_exact():
    """sum f (div v) = -sum (grad f) . v for periodic central differences."""
    g = small_grid()
    f = random_scalar(g)
    v = VectorFieldG(
        g, RNG.standard_normal((3, g.n_points)) + 1j * RNG.standard_normal((3, g.n_points))
    )
    lhs = np.sum(f.values * divergence(v).values) * g.cell_volume
    rhs = -np.sum(gradient(f).values * v.values) * g.cell_volume
    assert abs(lhs - rhs) < 1e-11 * max(1.0, abs(lhs))


def test_poisson_inverts_laplacian():
    g = small_grid()
    raw = random_scalar(g)
    src, removed = remove_insolvable_modes(raw)
    assert removed < 1.0
    chi = solve_poisson(src)
    # apply the matched Laplacian: div(grad(chi))
    back = divergence(gradient(chi)).values
    assert np.max(np.abs(back - src.values)) < 1e-11 * np.max(np.abs(src.values))
    # solution itself has no content on null modes: mean is zero
    assert abs(np.sum(chi.values)) < 1e-10


def test_poisson_rejects_nonneutral_source():
    g = small_grid()
    bad = ScalarFieldG(g, np.ones(g.n_points))
    with pytest.raises(ValidationFailure):
        solve_poisson(bad)


def test_remove_insolvable_modes_reports_weight():
    g = Grid3D(dims=(4, 4, 4), spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0))
    # pure checkerboard along x at Nyquist: entirely insolvable
    cube = np.cos(np.pi * np.arange(4.0)).reshape(4, 1, 1) * np.ones((4, 4, 4))
    f = ScalarFieldG(g, g.flat(cube))
    out, removed = remove_insolvable_modes(f)
    assert removed == pytest.approx(1.0)
    assert np.max(np.abs(out.values)) < 1e-12


def test_gradient_of_plane_wave_uses_sine_symbol():
    """Eigenfunction check: grad e^{ikx} = i sin(kh)/h e^{ikx} per axis."""
    g = small_grid()
    kx = 2.0 * np.pi / (g.dims[0] * g.spacing[0]) * 3
    f = ScalarFieldG(g, np.exp(1j * kx * g.coordinates[0]))
    grad = gradient(f)
    expect = 1j * np.sin(kx * g.spacing[0]) / g.spacing[0] * f.values
    assert np.max(np.abs(grad.values[0] - expect)) < 1e-12
    assert np.max(np.abs(grad.values[1])) < 1e-12
    assert np.max(np.abs(grad.values[2])) < 1e-12


def test_single_point_axis_degenerates_gracefully():
    g = Grid3D(dims=(4, 1, 1), spacing=(0.5, 1.0, 1.0), origin=(0.0, 0.0, 0.0))
    f = ScalarFieldG(g, RNG.standard_normal(4) + 0j)
    grad = gradient(f)
    assert np.max(np.abs(grad.values[1])) < 1e-14
    assert np.max(np.abs(grad.values[2])) < 1e-14
