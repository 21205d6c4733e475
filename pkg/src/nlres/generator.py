"""Model synthesis from compact text recipes.

A recipe (``.nlgen``) gives level energies, equilibrium populations, a grid,
and one gaussian lobe per charge-density pair.  Diagonal lobes are normalized
to the electron count; dipole lobes are projected onto the solvable subspace
first and then rescaled, so the requested transition moment survives exactly.
The heavy lifting (neutrality enforcement, Poisson inversion, continuity-exact
currents) stays in the model builder; the recipe layer only shapes densities.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .configio import check_section_names, parse_sections, take_all, take_single
from .errors import ConfigError, ValidationFailure
from .grid import Grid3D, ScalarFieldG, remove_insolvable_modes
from .model import MolecularModel, build_model_from_charges
from .nlrm import write_model

_SECTIONS = ("model", "grid", "lobe")
_KINDS = ("monopole", "dipole")


@dataclass(frozen=True)
class LobeRecipe:
    pair: tuple[int, int]
    kind: str
    center: np.ndarray
    width: float
    moment: float
    axis: np.ndarray | None


@dataclass(frozen=True)
class Recipe:
    energies: np.ndarray
    populations: np.ndarray
    dephasing: np.ndarray
    electron_count: int
    grid: Grid3D
    lobes: tuple[LobeRecipe, ...]


def parse_recipe(path: str | Path) -> Recipe:
    source = str(path)
    sections = parse_sections(path)
    check_section_names(sections, _SECTIONS, source)

    msec = take_single(sections, "model", source)
    energies = msec.get_floats("energies")
    n = energies.size
    populations = msec.get_floats("populations", count=n)
    electron_count = msec.get_int("electron_count")
    dephasing = msec.get_floats("dephasing", count=n * n, default=np.zeros(n * n)).reshape(n, n)
    msec.reject_unknown()

    gsec = take_single(sections, "grid", source)
    dims = gsec.get_ints("dims", count=3)
    spacing = gsec.get_floats("spacing", count=3)
    if gsec.has("origin"):
        origin = gsec.get_floats("origin", count=3)
    else:
        # center the box on the coordinate origin
        origin = -spacing * (np.array(dims) - 1) / 2.0
    gsec.reject_unknown()
    grid = Grid3D(dims=dims, spacing=tuple(spacing), origin=tuple(origin))

    lobes = []
    seen: set[tuple[int, int]] = set()
    for sec in take_all(sections, "lobe"):
        a, b = sec.get_ints("pair", count=2)
        if not (0 <= b <= a < n):
            raise ConfigError(
                f"{source}: lobe pair ({a}, {b}) must satisfy 0 <= b <= a < {n}"
            )
        if (a, b) in seen:
            raise ConfigError(f"{source}: duplicate lobe for pair ({a}, {b})")
        seen.add((a, b))
        kind = sec.get_str("kind", choices=_KINDS)
        center = sec.get_floats("center", count=3, default=np.zeros(3))
        width = sec.get_float("width")
        if width <= 0.0:
            raise ConfigError(f"{source}: lobe ({a}, {b}) width must be positive")
        moment = sec.get_float("moment", default=1.0)
        axis = None
        if kind == "dipole":
            if a == b:
                raise ConfigError(f"{source}: diagonal lobe ({a}, {a}) must be a monopole")
            axis = sec.get_floats("axis", count=3)
            norm = float(np.linalg.norm(axis))
            if norm == 0.0:
                raise ConfigError(f"{source}: lobe ({a}, {b}) axis must be nonzero")
            axis = axis / norm
        sec.reject_unknown()
        lobes.append(LobeRecipe((a, b), kind, center, width, moment, axis))

    return Recipe(
        energies=energies,
        populations=populations,
        dephasing=dephasing,
        electron_count=electron_count,
        grid=grid,
        lobes=tuple(lobes),
    )


def realize_lobe(grid: Grid3D, lobe: LobeRecipe, electron_count: int) -> ScalarFieldG:
    rel = grid.coordinates - np.asarray(lobe.center, dtype=np.float64)[:, None]
    gauss = np.exp(-np.sum(rel**2, axis=0) / (2.0 * lobe.width**2))
    a, b = lobe.pair
    if lobe.kind == "monopole":
        total = gauss.sum() * grid.cell_volume
        target = float(electron_count) if a == b else lobe.moment
        return ScalarFieldG(grid, gauss * (target / total))
    raw = (lobe.axis @ rel) * gauss
    smooth, _ = remove_insolvable_modes(ScalarFieldG(grid, raw))
    along = float(np.real(np.sum((lobe.axis @ grid.coordinates) * smooth.values))) * grid.cell_volume
    if along == 0.0:
        raise ValidationFailure(f"dipole lobe ({a}, {b}) has no moment along its axis")
    return ScalarFieldG(grid, smooth.values * (lobe.moment / along))


def build_from_recipe(recipe: Recipe) -> MolecularModel:
    sigma_set = {
        lobe.pair: realize_lobe(recipe.grid, lobe, recipe.electron_count) for lobe in recipe.lobes
    }
    return build_model_from_charges(
        energies=recipe.energies,
        populations=recipe.populations,
        dephasing=recipe.dephasing,
        sigma_set=sigma_set,
    )


def generate_model(recipe_path: str | Path, out_dir: str | Path) -> Path:
    """Parse a recipe, build the model, persist it as an NLRM/1 directory."""
    recipe = parse_recipe(recipe_path)
    model = build_from_recipe(recipe)
    return write_model(model, out_dir)
