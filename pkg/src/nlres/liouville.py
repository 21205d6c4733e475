"""Coupling-matrix reduction and nested-commutator expectation values.

Spatial integrals happen once per field profile: a current or charge density
contracted with a profile gives an N x N coupling matrix, and a separable
field series becomes a short sum of (matrix) x (time coefficient) products.
Expectation values of time-ordered nested commutators are then evaluated by
marching the perturbed-density chain

    P_i(t) = int_t0^t G(t - tau) [X_i(tau), P_{i-1}(tau)] dtau,   P_0 = rho_eq

with the free propagator G applied elementwise, G_ab(Dt) =
exp((-i w_ab - eta_ab) Dt).  Damping therefore acts per Liouville interval,
which is the only convention that composes over subintervals when eta is not
a per-state difference; the oracle integrates the same generator.  The
trapezoidal Duhamel step below telescopes exactly to the iterated cumulative
integral over the ordered simplex t >= tau_n >= ... >= tau_1.

A fully independent route through N^2-dimensional superoperators (Left/Right/
Plus/Minus actions) is kept for cross-validation and never shares propagation
code with the chain above.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .constants import HBAR
from .errors import ValidationFailure
from .fields import CompiledVectorSeries, ScalarTerm, TimeGrid
from .grid import ScalarFieldG, VectorFieldG, same_grid
from .model import MolecularModel


# ---- projections -----------------------------------------------------------


def project_current(model: MolecularModel, f: VectorFieldG) -> np.ndarray:
    """M_ab = integral of F(r) . j_ab(r) over the box; Hermitian for real F."""
    same_grid(model.grid, f.grid)
    return np.einsum("kp,abkp->ab", f.values, model.current) * model.grid.cell_volume


def project_charge(model: MolecularModel, f: ScalarFieldG) -> np.ndarray:
    """M_ab = integral of F(r) sigma_ab(r) over the box."""
    same_grid(model.grid, f.grid)
    return np.einsum("p,abp->ab", f.values, model.sigma) * model.grid.cell_volume


def equilibrium_density(model: MolecularModel) -> np.ndarray:
    return np.diag(model.populations.astype(np.complex128))


# ---- coupling series -------------------------------------------------------


@dataclass
class ProjectedCoupling:
    """Schrodinger-picture N x N coupling matrix per time step."""

    label: str
    time_grid: TimeGrid
    matrices: np.ndarray = field(repr=False)  # (n_t, N, N) complex


def _current_profile_matrices(model: MolecularModel, series: CompiledVectorSeries) -> np.ndarray:
    same_grid(model.grid, series.grid)
    mats = [
        np.einsum("kp,abkp->ab", prof, model.current) * model.grid.cell_volume
        for prof in series.profiles
    ]
    return np.array(mats) if mats else np.zeros((0, model.n_states, model.n_states))


def couple_current_series(model: MolecularModel, series: CompiledVectorSeries) -> ProjectedCoupling:
    """integral of F(r,t) . j(r) as a matrix series, F given separably."""
    mats = _current_profile_matrices(model, series)
    n = model.n_states
    out = np.zeros((series.time_grid.n_t, n, n), dtype=np.complex128)
    for m, c in zip(mats, series.coeffs):
        out += np.multiply.outer(c, m)
    return ProjectedCoupling("jA", series.time_grid, out)


def couple_square_series(model: MolecularModel, series: CompiledVectorSeries) -> ProjectedCoupling:
    """integral of |F(r,t)|^2 sigma(r) via pairwise profile products."""
    same_grid(model.grid, series.grid)
    n = model.n_states
    nprof = len(series.profiles)
    pair = np.zeros((nprof, nprof, n, n), dtype=np.complex128)
    for i, pi in enumerate(series.profiles):
        for j, pj in enumerate(series.profiles[: i + 1]):
            dot = np.sum(pi * pj, axis=0)
            m = np.einsum("p,abp->ab", dot, model.sigma) * model.grid.cell_volume
            pair[i, j] = m
            pair[j, i] = m
    out = np.zeros((series.time_grid.n_t, n, n), dtype=np.complex128)
    for i in range(nprof):
        for j in range(nprof):
            out += np.multiply.outer(series.coeffs[i] * series.coeffs[j], pair[i, j])
    return ProjectedCoupling("sigmaA2", series.time_grid, out)


def couple_product_series(
    model: MolecularModel, a: CompiledVectorSeries, b: CompiledVectorSeries
) -> ProjectedCoupling:
    """integral of (F(r,t) . G(r,t)) sigma(r) for two separable series."""
    same_grid(model.grid, a.grid)
    same_grid(model.grid, b.grid)
    if a.time_grid != b.time_grid:
        raise ValidationFailure("series time grids differ")
    n = model.n_states
    out = np.zeros((a.time_grid.n_t, n, n), dtype=np.complex128)
    for pi, ci in zip(a.profiles, a.coeffs):
        for pj, cj in zip(b.profiles, b.coeffs):
            dot = np.sum(pi * pj, axis=0)
            m = np.einsum("p,abp->ab", dot, model.sigma) * model.grid.cell_volume
            out += np.multiply.outer(ci * cj, m)
    return ProjectedCoupling("sigmaFG", a.time_grid, out)


def couple_scalar_terms(
    model: MolecularModel, time_grid: TimeGrid, terms: Sequence[ScalarTerm]
) -> ProjectedCoupling:
    """integral of A0(r,t) sigma(r) from separable scalar-potential terms."""
    n = model.n_states
    out = np.zeros((time_grid.n_t, n, n), dtype=np.complex128)
    for term in terms:
        m = np.einsum("p,abp->ab", term.p.astype(np.complex128), model.sigma)
        m = m * model.grid.cell_volume
        out += np.multiply.outer(np.asarray(term.g(time_grid.times), np.float64), m)
    return ProjectedCoupling("sigmaA0", time_grid, out)


# ---- Heisenberg dressing ---------------------------------------------------


def heisenberg_dress(
    model: MolecularModel, matrices: np.ndarray, times: np.ndarray, t_ref: float
) -> np.ndarray:
    """Apply interaction-picture phases and coherence decay about t_ref.

    Element (a, b) at time tau is multiplied by
    exp(i w_ab (tau - t_ref)) exp(-eta_ab |tau - t_ref|).
    """
    dt = np.asarray(times, dtype=np.float64) - t_ref
    phase = np.exp(
        1j * np.multiply.outer(dt, model.omega)
        - np.multiply.outer(np.abs(dt), model.dephasing)
    )
    return matrices * phase


# ---- perturbed-density chain (Hilbert route) --------------------------------


def _interval_propagator(model: MolecularModel, dt: float) -> np.ndarray:
    return np.exp((-1j * model.omega - model.dephasing) * dt)


# ---- superoperator route ----------------------------------------------------


class SuperoperatorSide(Enum):
    Left = "left"
    Right = "right"
    Plus = "plus"
    Minus = "minus"


def superoperator_action(side: SuperoperatorSide, V: np.ndarray) -> np.ndarray:
    """Matrix acting on vec(rho) (row-major flattening) for each side."""
    n = V.shape[0]
    eye = np.eye(n)
    left = np.kron(V, eye)
    right = np.kron(eye, V.T)
    if side is SuperoperatorSide.Left:
        return left
    if side is SuperoperatorSide.Right:
        return right
    if side is SuperoperatorSide.Plus:
        return 0.5 * (left + right)
    return left - right


def superoperator_nested_expectation(
    model: MolecularModel,
    observable: ProjectedCoupling,
    interactions: Sequence[ProjectedCoupling],
    order: int | None = None,
) -> np.ndarray:
    """Same contract as nested_commutator_expectation via N^2-space algebra.

    Implemented independently: Minus-superoperator kicks, a diagonal
    Liouville propagator in vec space, and the trace taken as a vec dot.
    """
    _check_order(interactions, order)
    tg = observable.time_grid
    n = model.n_states
    n_t = tg.n_t
    gvec = np.exp((-1j * model.omega - model.dephasing).reshape(-1) * tg.dt)
    rho_vec = equilibrium_density(model).reshape(-1)
    prev = np.broadcast_to(rho_vec, (n_t, n * n))
    for pc in interactions:
        if pc.time_grid != tg:
            raise ValidationFailure("interaction series time grid mismatch")
        kicks = np.empty((n_t, n * n), dtype=np.complex128)
        for j in range(n_t):
            kicks[j] = superoperator_action(
                SuperoperatorSide.Minus, pc.matrices[j]
            ) @ prev[j]
        nxt = np.zeros((n_t, n * n), dtype=np.complex128)
        half = 0.5 * tg.dt
        for j in range(n_t - 1):
            nxt[j + 1] = gvec * (nxt[j] + half * kicks[j]) + half * kicks[j + 1]
        prev = nxt
    out = np.empty(n_t, dtype=np.complex128)
    for j in range(n_t):
        obs_vec = observable.matrices[j].T.reshape(-1)
        out[j] = obs_vec @ prev[j]
    return out


# ---- nested commutator expectation (public) ---------------------------------


def _check_order(interactions: Sequence, order: int | None) -> int:
    n = len(interactions)
    if order is not None and order != n:
        raise ValidationFailure(f"order {order} does not match {n} interactions")
    if not 1 <= n <= 3:
        raise ValidationFailure("nested commutator order must be 1, 2 or 3")
    return n


def nested_commutator_expectation(
    model: MolecularModel,
    observable: ProjectedCoupling,
    interactions: Sequence[ProjectedCoupling],
    order: int | None = None,
) -> np.ndarray:
    """<[[...[O(t), V_n(tau_n)]...], V_1(tau_1)]> over the ordered simplex.

    ``interactions`` are listed earliest vertex first (V_1 before V_n); the
    result carries no -i/hbar factors, it is the bare iterated integral of
    the commutator expectation.  Causal by construction: the chain at time t
    has consumed interactions at tau <= t only.
    """
    _check_order(interactions, order)
    tg = observable.time_grid
    series = []
    for pc in interactions:
        if pc.time_grid != tg:
            raise ValidationFailure("interaction series time grid mismatch")
        series.append(pc.matrices)
    final = _march_chain(model, tg, series, scale=1.0)
    return np.einsum("tab,tba->t", observable.matrices, final)


def _march_chain(
    model: MolecularModel,
    tg: TimeGrid,
    interactions: Sequence[np.ndarray],
    scale: complex,
) -> np.ndarray:
    """Shared chain kernel: returns the final perturbed level, (n_t, N, N)."""
    n = model.n_states
    n_t = tg.n_t
    G = _interval_propagator(model, tg.dt)
    prev = np.broadcast_to(equilibrium_density(model), (n_t, n, n))
    half = 0.5 * tg.dt
    for X in interactions:
        comm = scale * (X @ prev - prev @ X)
        nxt = np.zeros((n_t, n, n), dtype=np.complex128)
        for j in range(n_t - 1):
            nxt[j + 1] = G * (nxt[j] + half * comm[j]) + half * comm[j + 1]
        prev = nxt
    return prev


def perturbed_density_chain(
    model: MolecularModel,
    tg: TimeGrid,
    interactions: Sequence[ProjectedCoupling],
) -> np.ndarray:
    """Density correction driven by the given vertex sequence, with -i/hbar
    applied per vertex: the order-len(interactions) perturbative term."""
    series = []
    for pc in interactions:
        if pc.time_grid != tg:
            raise ValidationFailure("interaction series time grid mismatch")
        series.append(pc.matrices)
    return _march_chain(model, tg, series, scale=-1j / HBAR)
