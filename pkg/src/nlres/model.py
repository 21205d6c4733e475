"""Few-level molecular models: transition charge and current densities on a grid.

A model couples an N-state electronic system to space through one charge
density sample per state pair.  Off-diagonal currents are not free data: the
longitudinal part is reconstructed from the discrete continuity equation
div j_ab = -i w_ab sigma_ab, so the divergence identity holds to round-off by
construction, and a uniform completion pins the current integral to
i w_ab mu_ab exactly.  Users may add divergence-free parts on top.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .constants import ELECTRON_MASS, ELEMENTARY_CHARGE, HBAR
from .errors import ValidationFailure
from .grid import (
    Grid3D,
    ScalarFieldG,
    VectorFieldG,
    divergence,
    gradient,
    remove_insolvable_modes,
    same_grid,
    solve_poisson,
)

# relative weight of boundary samples above which compact support is doubtful
BOUNDARY_DECAY_WARN = 1e-12


@dataclass
class MolecularModel:
    """N-level system with charge density sigma[a,b] and current current[a,b].

    Storage is dense: ``sigma`` has shape (n, n, n_points) and ``current``
    (n, n, 3, n_points), both with the Hermitian mirror filled in, flat
    x-fastest point order.  ``dephasing[a, b]`` damps the (a, b) coherence.
    """

    energies: np.ndarray
    populations: np.ndarray
    dephasing: np.ndarray
    electron_count: int
    grid: Grid3D
    sigma: np.ndarray = field(repr=False)
    current: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.energies = np.asarray(self.energies, dtype=np.float64)
        self.populations = np.asarray(self.populations, dtype=np.float64)
        self.dephasing = np.asarray(self.dephasing, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.complex128)
        self.current = np.asarray(self.current, dtype=np.complex128)
        n = self.energies.shape[0] if self.energies.ndim == 1 else 0
        if n < 1:
            raise ValidationFailure("model needs at least one state")
        npts = self.grid.n_points
        if self.populations.shape != (n,):
            raise ValidationFailure(f"populations must have shape ({n},)")
        if self.dephasing.shape != (n, n):
            raise ValidationFailure(f"dephasing must have shape ({n}, {n})")
        if self.sigma.shape != (n, n, npts):
            raise ValidationFailure(f"sigma must have shape ({n}, {n}, {npts})")
        if self.current.shape != (n, n, 3, npts):
            raise ValidationFailure(f"current must have shape ({n}, {n}, 3, {npts})")
        if int(self.electron_count) != self.electron_count or self.electron_count < 1:
            raise ValidationFailure("electron_count must be a positive integer")
        self.electron_count = int(self.electron_count)
        if np.any(self.populations < -1e-15):
            raise ValidationFailure("populations must be non-negative")
        if abs(self.populations.sum() - 1.0) > 1e-12:
            raise ValidationFailure("populations must sum to 1 within 1e-12")
        if np.max(np.abs(self.dephasing - self.dephasing.T)) > 1e-12:
            raise ValidationFailure("dephasing matrix must be symmetric")
        if np.any(self.dephasing < -1e-15) or np.max(np.abs(np.diag(self.dephasing))) > 1e-15:
            raise ValidationFailure("dephasing must be non-negative with zero diagonal")

    @property
    def n_states(self) -> int:
        return self.energies.shape[0]

    @cached_property
    def omega(self) -> np.ndarray:
        """Transition frequencies w[a,b] = (E_a - E_b)/hbar, shape (n, n)."""
        return (self.energies[:, None] - self.energies[None, :]) / HBAR

    @cached_property
    def mu(self) -> np.ndarray:
        """Charge-weighted position integrals, shape (n, n, 3)."""
        return np.einsum("kp,abp->abk", self.grid.coordinates, self.sigma) * self.grid.cell_volume

    @cached_property
    def u(self) -> np.ndarray:
        """Current integrals, shape (n, n, 3); equals i w mu by construction."""
        return self.current.sum(axis=-1) * self.grid.cell_volume

    def sigma_field(self, a: int, b: int) -> ScalarFieldG:
        return ScalarFieldG(self.grid, self.sigma[a, b].copy())

    def current_field(self, a: int, b: int) -> VectorFieldG:
        return VectorFieldG(self.grid, self.current[a, b].copy())


@dataclass
class ValidationReport:
    errors: list[str]
    warnings: list[str]
    metrics: dict[str, float]

    @property
    def passed(self) -> bool:
        return not self.errors

    def to_text(self) -> str:
        lines = ["model validation: " + ("PASS" if self.passed else "FAIL")]
        for key in sorted(self.metrics):
            lines.append(f"  {key} = {self.metrics[key]:.6e}")
        for w in self.warnings:
            lines.append(f"  warning: {w}")
        for e in self.errors:
            lines.append(f"  error: {e}")
        return "\n".join(lines)


# ---- construction ----------------------------------------------------------


def _canonical_pairs(
    entries: dict, n: int, kind: str
) -> dict[tuple[int, int], np.ndarray]:
    """Resolve {(a,b): field} input to lower-triangle values, checking mirrors.

    Returns a map keyed by (a, b) with a >= b.  If both orderings of a pair
    are supplied they must be complex-conjugate samples.
    """
    out: dict[tuple[int, int], np.ndarray] = {}
    mirrored: dict[tuple[int, int], np.ndarray] = {}
    for key, f in entries.items():
        a, b = int(key[0]), int(key[1])
        if not (0 <= a < n and 0 <= b < n):
            raise ValidationFailure(f"{kind} pair {key} outside 0..{n - 1}")
        if a >= b:
            tgt, vals = (a, b), f.values
        else:
            tgt, vals = (b, a), np.conj(f.values)
            mirrored[tgt] = vals
        if tgt in out:
            ref = out[tgt]
            scale = max(np.max(np.abs(ref)), 1e-300)
            if np.max(np.abs(ref - vals)) > 1e-12 * scale:
                raise ValidationFailure(
                    f"non-Hermitian input: {kind} pair {tgt} and its mirror disagree"
                )
        else:
            out[tgt] = vals
    return out


def build_model_from_charges(
    energies: np.ndarray,
    populations: np.ndarray,
    dephasing: np.ndarray,
    sigma_set: dict[tuple[int, int], ScalarFieldG],
    transverse_current_set: dict[tuple[int, int], VectorFieldG] | None = None,
) -> MolecularModel:
    """Assemble a model from charge densities alone.

    ``sigma_set`` must contain every diagonal (the electron count is read off
    their integrals) and may contain either ordering of each coherence; the
    missing mirror is filled by conjugation.  For each coherence the
    longitudinal current is obtained by solving the periodic Poisson problem
    lap chi = -i w sigma spectrally and taking j = grad chi, plus a uniform
    term fixing the k = 0 component that the gradient cannot carry.

    Off-diagonal densities must be neutral (Poisson solvability); spectral
    content on the null modes of the central-difference operator (mean and
    Nyquist checkerboards) is removed, which is the minimal adjustment under
    which the continuity identity can hold on the grid.

    Raises
    ------
    ValidationFailure
        Non-Hermitian input, a non-neutral coherence, missing diagonals, or a
        supplied transverse current that is not divergence-free.
    """
    energies = np.asarray(energies, dtype=np.float64)
    n = energies.shape[0]
    if not sigma_set:
        raise ValidationFailure("sigma_set is empty")
    grid = next(iter(sigma_set.values())).grid
    for f in sigma_set.values():
        same_grid(grid, f.grid)
    charges = _canonical_pairs(sigma_set, n, "sigma")
    for a in range(n):
        if (a, a) not in charges:
            raise ValidationFailure(f"missing diagonal density for state {a}")

    omega = (energies[:, None] - energies[None, :]) / HBAR
    npts = grid.n_points
    sigma = np.zeros((n, n, npts), dtype=np.complex128)
    current = np.zeros((n, n, 3, npts), dtype=np.complex128)

    # diagonals: real densities integrating to the electron count
    integrals = np.array([charges[(a, a)].sum() * grid.cell_volume for a in range(n)])
    count = float(np.round(np.mean(integrals.real)))
    if count < 1.0:
        raise ValidationFailure(
            f"diagonal densities integrate to {integrals.real}, expected a positive electron count"
        )
    for a in range(n):
        vals = charges[(a, a)]
        scale = np.max(np.abs(vals))
        if scale > 0.0 and np.max(np.abs(vals.imag)) > 1e-10 * scale:
            raise ValidationFailure(f"diagonal density {a} must be real")
        if abs(integrals[a] - count) > 1e-8 * count:
            raise ValidationFailure(
                f"diagonal density {a} integrates to {integrals[a]:.12g}, "
                f"expected electron count {count:g} within 1e-8 relative"
            )
        sigma[a, a] = vals.real

    # coherences: neutrality check, null-mode projection, Hermitian mirror
    for (a, b), vals in charges.items():
        if a == b:
            continue
        total = abs(np.sum(vals) * grid.cell_volume)
        if total > 1e-10 * np.max(np.abs(vals)) * grid.box_volume:
            raise ValidationFailure("non-neutral coherence")
        projected, _ = remove_insolvable_modes(ScalarFieldG(grid, vals))
        sigma[a, b] = projected.values
        sigma[b, a] = np.conj(projected.values)

    # longitudinal currents from continuity
    for a in range(n):
        for b in range(a):
            w = omega[a, b]
            if w == 0.0:
                continue
            rhs = ScalarFieldG(grid, -1j * w * sigma[a, b])
            chi = solve_poisson(rhs)
            j = gradient(chi).values
            mu_ab = (grid.coordinates * sigma[a, b]).sum(axis=1) * grid.cell_volume
            j += (1j * w * mu_ab / grid.box_volume)[:, None]
            current[a, b] = j
            current[b, a] = np.conj(j)

    # optional divergence-free parts
    if transverse_current_set:
        for f in transverse_current_set.values():
            same_grid(grid, f.grid)
        extra = _canonical_pairs(transverse_current_set, n, "current")
        for (a, b), vals in extra.items():
            vf = VectorFieldG(grid, vals)
            peak = np.max(np.abs(vals))
            if peak == 0.0:
                continue
            div = divergence(vf).values
            if np.max(np.abs(div)) * min(grid.spacing) > 1e-10 * peak:
                raise ValidationFailure(
                    f"transverse current for pair ({a}, {b}) is not divergence-free"
                )
            net = np.abs(vals.sum(axis=1) * grid.cell_volume)
            if np.max(net) > 1e-10 * peak * grid.box_volume:
                raise ValidationFailure(
                    f"transverse current for pair ({a}, {b}) carries a net integral"
                )
            current[a, b] += vals
            if a != b:
                current[b, a] += np.conj(vals)

    return MolecularModel(
        energies=energies,
        populations=np.asarray(populations, dtype=np.float64),
        dephasing=np.asarray(dephasing, dtype=np.float64),
        electron_count=int(count),
        grid=grid,
        sigma=sigma,
        current=current,
    )


# ---- validation ------------------------------------------------------------


def validate_model(model: MolecularModel) -> ValidationReport:
    """Check every model invariant numerically and report per-pair residuals.

    The continuity residual uses the periodic central-difference stencil
    directly (not the spectral route used during construction).  Never raises;
    failures are collected in the report.
    """
    errors: list[str] = []
    warnings: list[str] = []
    metrics: dict[str, float] = {}
    n = model.n_states
    g = model.grid

    pop_dev = abs(model.populations.sum() - 1.0)
    metrics["population_sum_dev"] = pop_dev
    if pop_dev > 1e-12:
        errors.append(f"populations sum deviates by {pop_dev:.3e}")
    if np.any(model.populations < -1e-15):
        errors.append("negative population")
    eta_asym = float(np.max(np.abs(model.dephasing - model.dephasing.T)))
    metrics["dephasing_asymmetry"] = eta_asym
    if eta_asym > 1e-12:
        errors.append("dephasing matrix not symmetric")
    if np.any(model.dephasing < -1e-15):
        errors.append("negative dephasing rate")
    if np.max(np.abs(np.diag(model.dephasing))) > 1e-15:
        errors.append("dephasing diagonal not zero")

    herm_s = float(np.max(np.abs(model.sigma - np.conj(np.swapaxes(model.sigma, 0, 1)))))
    herm_j = float(np.max(np.abs(model.current - np.conj(np.swapaxes(model.current, 0, 1)))))
    metrics["hermiticity_sigma"] = herm_s
    metrics["hermiticity_current"] = herm_j
    scale_s = max(float(np.max(np.abs(model.sigma))), 1e-300)
    scale_j = max(float(np.max(np.abs(model.current))), 1e-300)
    if herm_s > 1e-13 * scale_s:
        errors.append(f"sigma Hermiticity deviation {herm_s:.3e}")
    if herm_j > 1e-13 * scale_j:
        errors.append(f"current Hermiticity deviation {herm_j:.3e}")

    for a in range(n):
        integral = model.sigma[a, a].sum() * g.cell_volume
        dev = abs(integral - model.electron_count)
        metrics[f"charge_dev[{a},{a}]"] = float(dev)
        if dev > 1e-8 * model.electron_count:
            errors.append(
                f"diagonal ({a},{a}) integrates to {integral:.12g}, "
                f"expected {model.electron_count}"
            )

    for a in range(n):
        for b in range(a):
            s_ab = model.sigma[a, b]
            j_ab = model.current[a, b]
            w = model.omega[a, b]
            net = abs(np.sum(s_ab) * g.cell_volume)
            metrics[f"neutrality[{a},{b}]"] = float(net)
            peak = float(np.max(np.abs(s_ab)))
            if peak > 0.0 and net > 1e-10 * peak * g.box_volume:
                errors.append(f"coherence ({a},{b}) not neutral: integral {net:.3e}")
            div = divergence(VectorFieldG(g, j_ab)).values
            resid = np.linalg.norm(div + 1j * w * s_ab)
            denom = np.linalg.norm(w * s_ab)
            rel = resid / denom if denom > 0.0 else resid
            metrics[f"continuity_rel[{a},{b}]"] = float(rel)
            if rel > 1e-10:
                errors.append(f"continuity residual for ({a},{b}) is {rel:.3e}")

    # current integrals against i w mu
    dev_max = 0.0
    for a in range(n):
        for b in range(n):
            target = 1j * model.omega[a, b] * model.mu[a, b]
            diff = np.linalg.norm(model.u[a, b] - target)
            ref = np.linalg.norm(target)
            dev = diff / ref if ref > 0.0 else diff
            dev_max = max(dev_max, dev)
            if dev > 1e-8:
                errors.append(
                    f"current integral of ({a},{b}) deviates from i*w*mu by {dev:.3e}"
                )
    metrics["u_vs_i_omega_mu_max"] = float(dev_max)

    boundary = g.boundary_mask
    for a in range(n):
        for b in range(a + 1):
            vals = np.abs(model.sigma[a, b])
            peak = vals.max()
            if peak == 0.0:
                continue
            edge = float(vals[boundary].max() / peak)
            if edge > BOUNDARY_DECAY_WARN:
                warnings.append(
                    f"density ({a},{b}) decays only to {edge:.3e} of its peak "
                    f"at the box boundary"
                )

    frac = f_sum_fractions(model)
    for k, axis in enumerate("xyz"):
        metrics[f"f_sum_fraction_{axis}"] = float(frac[k])

    return ValidationReport(errors=errors, warnings=warnings, metrics=metrics)


# ---- derived quantities ----------------------------------------------------


def dipole_moments(model: MolecularModel) -> dict[tuple[int, int], np.ndarray]:
    """mu[a,b] = integral of r sigma_ab(r), one 3-vector per state pair."""
    n = model.n_states
    return {(a, b): model.mu[a, b].copy() for a in range(n) for b in range(n)}


def current_integrals(model: MolecularModel) -> dict[tuple[int, int], np.ndarray]:
    """u[a,b] = integral of j_ab(r); equals i w_ab mu_ab for a valid model."""
    n = model.n_states
    return {(a, b): model.u[a, b].copy() for a in range(n) for b in range(n)}


def ground_charge_density(model: MolecularModel) -> ScalarFieldG:
    """Equilibrium density: population-weighted sum of the diagonals."""
    vals = np.einsum("a,ap->p", model.populations, np.diagonal(model.sigma).T)
    return ScalarFieldG(model.grid, vals)


def dipole_velocity_commutator(model: MolecularModel) -> np.ndarray:
    """Equilibrium expectation of [mu_k, u_s], shape (3, 3).

    For a complete (sum-rule saturating) basis this equals
    i hbar (N e^2 / m) delta_ks; a truncated model reproduces it only on axes
    whose oscillator strength is fully carried by the retained states.
    """
    p, mu, u = model.populations, model.mu, model.u
    return np.einsum("a,agk,gas->ks", p, mu, u) - np.einsum("a,ags,gak->ks", p, u, mu)


def f_sum_fractions(model: MolecularModel) -> np.ndarray:
    """Per-axis oscillator-strength fraction relative to N e^2 / (2 m hbar).

    Measured from the lowest-energy state; 1.0 means the retained transitions
    saturate the sum rule along that axis.
    """
    gidx = int(np.argmin(model.energies))
    w = model.omega[:, gidx]
    weight = 2.0 * ELECTRON_MASS / (HBAR * ELEMENTARY_CHARGE**2 * model.electron_count)
    frac = weight * np.einsum("a,ak,ak->k", w, model.mu[:, gidx], np.conj(model.mu[:, gidx]))
    return frac.real
