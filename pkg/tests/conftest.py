"""Shared model and field builders for the test suite."""

import numpy as np

from nlres.fields import FieldMode, GaussianEnvelope
from nlres.grid import Grid3D, ScalarFieldG, remove_insolvable_modes
from nlres.model import MolecularModel, build_model_from_charges


def make_grid(n: int = 16, h: float = 0.5) -> Grid3D:
    half = h * (n - 1) / 2.0
    return Grid3D(dims=(n, n, n), spacing=(h, h, h), origin=(-half, -half, -half))


def gaussian_diagonal(grid: Grid3D, width: float = 1.0) -> ScalarFieldG:
    r2 = np.sum(grid.coordinates**2, axis=0)
    vals = np.exp(-r2 / width)
    vals /= vals.sum() * grid.cell_volume  # integrates to exactly one electron
    return ScalarFieldG(grid, vals)


def odd_lobe(grid: Grid3D, target_mu_z: float = np.sqrt(5.0), width: float = 1.0) -> ScalarFieldG:
    # project away null-mode content first so the build keeps mu_z exact
    xyz = grid.coordinates
    raw = xyz[2] * np.exp(-np.sum(xyz**2, axis=0) / (2.0 * width))
    smooth, _ = remove_insolvable_modes(ScalarFieldG(grid, raw))
    mu_raw = np.sum(xyz[2] * smooth.values) * grid.cell_volume
    return ScalarFieldG(grid, smooth.values * (target_mu_z / mu_raw))


def gaussian_mode(
    amplitude: float,
    omega: float,
    t_center: float,
    t_width: float,
    polarization=(0.0, 0.0, 1.0),
    q=(0.0, 0.0, 0.0),
) -> FieldMode:
    return FieldMode(
        kind="plane_wave",
        amplitude=amplitude,
        omega=omega,
        envelope=GaussianEnvelope(t_center, t_width),
        polarization=np.asarray(polarization, float),
        q=np.asarray(q, float),
    )


def two_level_model(
    dephasing: float = 0.0, n: int = 16, h: float = 0.5, gap: float = 0.1
) -> MolecularModel:
    grid = make_grid(n, h)
    diag = gaussian_diagonal(grid)
    eta = dephasing * (np.ones((2, 2)) - np.eye(2))
    return build_model_from_charges(
        energies=np.array([0.0, gap]),
        populations=np.array([1.0, 0.0]),
        dephasing=eta,
        sigma_set={(0, 0): diag, (1, 1): diag, (1, 0): odd_lobe(grid)},
    )


def synthetic_model(energies, populations, dephasing) -> MolecularModel:
    """Dynamics-only model: zero densities, used where couplings are explicit."""
    grid = Grid3D(dims=(2, 2, 2), spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0))
    n = len(energies)
    return MolecularModel(
        energies=np.asarray(energies, float),
        populations=np.asarray(populations, float),
        dephasing=np.asarray(dephasing, float),
        electron_count=1,
        grid=grid,
        sigma=np.zeros((n, n, 8), complex),
        current=np.zeros((n, n, 3, 8), complex),
    )
