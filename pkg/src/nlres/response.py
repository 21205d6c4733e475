"""Induced current densities at perturbative orders one to three.

Everything is driven by the time-integrated electric field B(r,t) (the
gauge-invariant vector potential), so gauge invariance of each order holds by
construction.  The order-n current splits into one delta-free family, the
iterated-commutator average of current operators, and a fixed set of contact
families in which spatial and temporal delta factors were integrated out
analytically during assembly; no discrete delta ever touches the grid.

    J(n)_k(r, t) = Tr[ rho(n)(t) j_k(r) ]
                 + DIAMAG * B_k(r,t) * Tr[ rho(n-1)(t) sigma(r) ]

where rho(n) collects the vertex sequences of the perturbed-density chain:
current vertices V(tau) = integral B . j and, from order two on, the
square vertex Q(tau) = A2_VERTEX * integral B^2 sigma.  The contact weight
DIAMAG = 2 * A2_VERTEX keeps the volume-integrated current equal to the time
derivative of the induced dipole whenever the dipole-velocity sum rule is
saturated.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Sequence

import numpy as np

from .constants import A2_VERTEX, DIAMAG, HBAR
from .errors import ValidationFailure
from .fields import CompiledVectorSeries, DrivingField, TimeGrid, compute_A_inv
from .grid import VectorFieldG
from .liouville import (
    ProjectedCoupling,
    couple_current_series,
    couple_product_series,
    couple_square_series,
    equilibrium_density,
    perturbed_density_chain,
)
from .model import MolecularModel

_VERTEX_SCALE = -1j / HBAR


# ---- family bookkeeping -----------------------------------------------------


@dataclass(frozen=True)
class ResponseFamily:
    """One additive family of the order-n response kernel.

    ``prefactor`` multiplies the family's reduced correlation function after
    the delta factors in ``collapses`` have been integrated out.  The single
    delta-free family per order has an empty ``collapses``.
    """

    label: str
    prefactor: complex
    collapses: tuple[str, ...]
    correlation: str

    @property
    def regular(self) -> bool:
        return not self.collapses


def response_families(order: int) -> tuple[ResponseFamily, ...]:
    """Full family table at the given order; the delta-free entry comes first."""
    s = _VERTEX_SCALE
    if order == 1:
        return (
            ResponseFamily(
                "current-chain", s, (), "<[j_k(r,t), j(r1,tau1)]>"
            ),
            ResponseFamily(
                "observation-contact",
                DIAMAG,
                ("k=k1", "r=r1", "t=tau1"),
                "equilibrium charge density at r",
            ),
        )
    if order == 2:
        return (
            ResponseFamily(
                "current-chain", s**2, (), "<[[j_k(r,t), j(r2,tau2)], j(r1,tau1)]>"
            ),
            ResponseFamily(
                "square-vertex",
                s * A2_VERTEX,
                ("r2=r1", "tau2=tau1"),
                "<[j_k(r,t), sigma(r1,tau1)]>",
            ),
            ResponseFamily(
                "observation-contact",
                DIAMAG * s,
                ("k=k2", "r=r2", "t=tau2"),
                "<[sigma(r,t), j(r1,tau1)]>",
            ),
        )
    if order == 3:
        return (
            ResponseFamily(
                "current-chain",
                s**3,
                (),
                "<[[[j_k(r,t), j(r3,tau3)], j(r2,tau2)], j(r1,tau1)]>",
            ),
            ResponseFamily(
                "square-vertex-late",
                s**2 * A2_VERTEX,
                ("r3=r2", "tau3=tau2"),
                "<[[j_k(r,t), sigma(r2,tau2)], j(r1,tau1)]>",
            ),
            ResponseFamily(
                "square-vertex-early",
                s**2 * A2_VERTEX,
                ("r2=r1", "tau2=tau1"),
                "<[[j_k(r,t), j(r2,tau2)], sigma(r1,tau1)]>",
            ),
            ResponseFamily(
                "observation-contact",
                DIAMAG * s**2,
                ("k=k3", "r=r3", "t=tau3"),
                "<[[sigma(r,t), j(r2,tau2)], j(r1,tau1)]>",
            ),
            ResponseFamily(
                "double-contact",
                DIAMAG * A2_VERTEX * s,
                ("k=k3", "r=r3", "t=tau3", "r2=r1", "tau2=tau1"),
                "<[sigma(r,t), sigma(r1,tau1)]>",
            ),
        )
    raise ValidationFailure("response order must be 1, 2 or 3")


# ---- pointwise kernel probe --------------------------------------------------


def zeta_kernel_regular(
    model: MolecularModel,
    order: int,
    observation: tuple[int, int, float],
    interactions: Sequence[tuple[int, int, float]],
) -> tuple[complex, tuple[ResponseFamily, ...]]:
    """Delta-free kernel value at sampled points, plus the family table.

    ``observation`` and every interaction are (axis, flat grid index, time)
    triples; interactions are listed earliest first.  The value carries one
    -i/hbar per interaction and the simplex ordering factor: it is zero
    unless tau_1 <= ... <= tau_n <= t.  Coherence decay acts per interval,
    matching the marched chain.
    """
    families = response_families(order)
    if len(interactions) != order:
        raise ValidationFailure(
            f"order {order} needs {order} interaction points, got {len(interactions)}"
        )
    k_obs, p_obs, t_obs = observation
    for axis, _, _ in (observation, *interactions):
        if not 0 <= axis <= 2:
            raise ValidationFailure("axis index must be 0, 1 or 2")
    times = [tau for _, _, tau in interactions]
    if any(b < a for a, b in zip(times, times[1:])) or times[-1] > t_obs:
        return 0.0 + 0.0j, families

    gen = -1j * model.omega - model.dephasing
    state = equilibrium_density(model)
    prev_time = times[0]
    for (axis, p, tau) in interactions:
        state = state * np.exp(gen * (tau - prev_time))
        v = model.current[:, :, axis, p]
        state = v @ state - state @ v
        prev_time = tau
    state = state * np.exp(gen * (t_obs - prev_time))
    obs = model.current[:, :, k_obs, p_obs]
    value = _VERTEX_SCALE**order * np.einsum("ab,ba->", obs, state)
    return complex(value), families


# ---- assembled induced currents ----------------------------------------------


@dataclass(frozen=True)
class InducedCurrent:
    """Order-n induced current, stored as density-chain corrections.

    Spatial values are assembled lazily per time step; the real part is the
    physical current for real driving.  ``rho`` is the order-n correction,
    ``rho_below`` the order-(n-1) one feeding the charge-weighted contact
    term (the equilibrium density at order one).
    """

    order: int
    time_grid: TimeGrid
    model: MolecularModel
    rho: np.ndarray = dataclass_field(repr=False)  # (n_t, N, N)
    rho_below: np.ndarray = dataclass_field(repr=False)  # (n_t, N, N)
    integrated_field: CompiledVectorSeries = dataclass_field(repr=False)

    def at(self, step: int) -> VectorFieldG:
        """J(n)(r, t_step) over the grid."""
        m = self.model
        para = np.einsum("ab,bakp->kp", self.rho[step], m.current)
        b = self.integrated_field.at(step).values
        contact = DIAMAG * b * np.einsum("ab,bap->p", self.rho_below[step], m.sigma)
        return VectorFieldG(m.grid, para + contact)

    def volume_integral(self) -> np.ndarray:
        """integral of J(n) over the box at every step, shape (n_t, 3)."""
        m = self.model
        out = np.einsum("tab,bak->tk", self.rho, m.u)
        dv = m.grid.cell_volume
        for prof, c in zip(self.integrated_field.profiles, self.integrated_field.coeffs):
            w = np.einsum("kp,abp->kab", prof, m.sigma) * dv
            out += DIAMAG * np.einsum("t,tab,kba->tk", c, self.rho_below, w)
        return out

    def overlap_with(self, series: CompiledVectorSeries) -> np.ndarray:
        """integral of F(r,t) . J(n)(r,t) over the box, shape (n_t,)."""
        jmat = couple_current_series(self.model, series).matrices
        smat = couple_product_series(self.model, series, self.integrated_field).matrices
        return np.einsum("tab,tba->t", self.rho, jmat) + DIAMAG * np.einsum(
            "tab,tba->t", self.rho_below, smat
        )


def _square_vertex(model: MolecularModel, b: CompiledVectorSeries) -> ProjectedCoupling:
    pc = couple_square_series(model, b)
    return ProjectedCoupling(pc.label, pc.time_grid, A2_VERTEX * pc.matrices)


def _corrections_from_series(
    model: MolecularModel, b: CompiledVectorSeries, max_order: int
) -> list[np.ndarray]:
    if not 1 <= max_order <= 3:
        raise ValidationFailure("response order must be 1, 2 or 3")
    tg = b.time_grid
    n = model.n_states
    out = [np.broadcast_to(equilibrium_density(model), (tg.n_t, n, n))]
    v = couple_current_series(model, b)
    out.append(perturbed_density_chain(model, tg, [v]))
    if max_order >= 2:
        q = _square_vertex(model, b)
        out.append(
            perturbed_density_chain(model, tg, [v, v])
            + perturbed_density_chain(model, tg, [q])
        )
    if max_order >= 3:
        out.append(
            perturbed_density_chain(model, tg, [v, v, v])
            + perturbed_density_chain(model, tg, [v, q])
            + perturbed_density_chain(model, tg, [q, v])
        )
    return out


def density_corrections(
    model: MolecularModel, field_: DrivingField, max_order: int
) -> list[np.ndarray]:
    """[rho(0), ..., rho(max_order)] as (n_t, N, N) blocks.

    rho(0) is the equilibrium density broadcast in time; rho(2) sums the
    two-current and square-vertex sequences, rho(3) the three-current and
    both mixed sequences.
    """
    return _corrections_from_series(model, compute_A_inv(field_, model.grid), max_order)


def _assemble(model: MolecularModel, field_: DrivingField, order: int) -> InducedCurrent:
    b = compute_A_inv(field_, model.grid)
    rho = _corrections_from_series(model, b, order)
    return InducedCurrent(order, b.time_grid, model, rho[order], rho[order - 1], b)


def induced_currents_up_to(
    model: MolecularModel, field_: DrivingField, max_order: int
) -> tuple[InducedCurrent, ...]:
    """InducedCurrent at orders 1..max_order sharing one chain stack."""
    b = compute_A_inv(field_, model.grid)
    rho = _corrections_from_series(model, b, max_order)
    return tuple(
        InducedCurrent(n, b.time_grid, model, rho[n], rho[n - 1], b)
        for n in range(1, max_order + 1)
    )


def induced_current_order1(model: MolecularModel, field_: DrivingField) -> InducedCurrent:
    """Linear induced current: one current vertex plus the B-weighted contact."""
    return _assemble(model, field_, 1)


def induced_current_order2(model: MolecularModel, field_: DrivingField) -> InducedCurrent:
    return _assemble(model, field_, 2)


def induced_current_order3(model: MolecularModel, field_: DrivingField) -> InducedCurrent:
    return _assemble(model, field_, 3)
