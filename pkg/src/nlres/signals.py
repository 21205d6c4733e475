"""Observable signals: energy-exchange traces, dipole comparators, spectra
and heterodyne detection.

Two deliberately separate routes exist for linear absorption.  The non-local
route contracts the driving electric field with the assembled induced current
on the grid; the dipole route works entirely from volume-integrated moments,
with the sum-rule defect term R = (N e^2/m) 1 - T carried explicitly so both
routes agree even when the model truncation does not saturate the
dipole-velocity sum rule.  Frequency-domain spectra are sum-over-states
Lorentzians; a numeric-transform path of the same time-domain response is
kept only as a cross-check and shares nothing but the overall prefactor.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Sequence

import numpy as np

from .constants import ELECTRON_MASS, ELEMENTARY_CHARGE, HBAR, SPEED_OF_LIGHT
from .errors import ValidationFailure
from .fields import (
    CompiledVectorSeries,
    DrivingField,
    Envelope,
    compile_E_series,
    compute_A_inv,
    cumulative_trapezoid,
)
from .model import MolecularModel, dipole_velocity_commutator
from .response import induced_currents_up_to

TRACE_KINDS = ("energy_exchange", "heterodyne", "spectrum_dipole", "spectrum_naive_mc")


# ---- trace container ---------------------------------------------------------


@dataclass(frozen=True)
class SignalTrace:
    """One observable trace on a monotone time or frequency axis.

    ``order`` 0 marks a total (order-summed) trace.  Values stay complex;
    for physical energy-exchange traces the imaginary part is a residue.
    """

    kind: str
    order: int
    axis: np.ndarray
    values: np.ndarray = dataclass_field(repr=False)
    axis_unit: str
    value_unit: str

    def __post_init__(self) -> None:
        if self.kind not in TRACE_KINDS:
            raise ValidationFailure(f"unknown trace kind {self.kind!r}")
        if self.order not in (0, 1, 2, 3):
            raise ValidationFailure("trace order must be 0 (total), 1, 2 or 3")
        axis = np.asarray(self.axis, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.complex128)
        if axis.ndim != 1 or axis.shape != values.shape:
            raise ValidationFailure("trace axis/values must be matching 1-D arrays")
        if axis.size > 1 and np.any(np.diff(axis) <= 0.0):
            raise ValidationFailure("trace axis must increase strictly")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "values", values)

    def to_csv(self) -> str:
        lines = [f"# {self.kind}, {self.order}, {self.axis_unit}, {self.value_unit}"]
        for x, v in zip(self.axis, self.values):
            lines.append(f"{x:.17g},{v.real:.17g},{v.imag:.17g}")
        return "\n".join(lines) + "\n"


# ---- order-resolved energy exchange ------------------------------------------


def energy_exchange(model: MolecularModel, field_: DrivingField, order: int) -> SignalTrace:
    """-(integral of E . J(order)) over the box at every time step."""
    if order not in (1, 2, 3):
        raise ValidationFailure("energy-exchange order must be 1, 2 or 3")
    ic = induced_currents_up_to(model, field_, order)[-1]
    e_series = compile_E_series(field_, model.grid)
    values = -ic.overlap_with(e_series)
    return SignalTrace(
        "energy_exchange", order, ic.time_grid.times, values,
        "time_au", "hartree_per_time_au",
    )


# ---- dipole-limit comparator ------------------------------------------------


def _require_uniform(series: CompiledVectorSeries) -> None:
    steps = np.unique(np.linspace(0, series.time_grid.n_t - 1, 9).astype(int))
    scale = 0.0
    worst = 0.0
    for k in steps:
        vals = series.at(int(k)).values
        scale = max(scale, float(np.max(np.abs(vals))))
        dev = vals - vals.mean(axis=1, keepdims=True)
        worst = max(worst, float(np.max(np.abs(dev))))
    if scale > 0.0 and worst > 1e-10 * scale:
        raise ValidationFailure(
            f"dipole route needs a spatially uniform field (variation {worst / scale:.2e})"
        )


def dipole_response_kernel_rate(model: MolecularModel, s: np.ndarray) -> np.ndarray:
    """d/ds of the dipole-dipole linear response kernel, shape (3, 3, len(s)).

    The kernel itself is (i/hbar) <[mu_k(s), mu_m(0)]> for s >= 0 with
    per-pair phase and coherence decay; differentiating analytically brings
    down one z_ab = i w_ab - eta_ab per exponential.
    """
    s = np.asarray(s, dtype=np.float64)
    p, mu = model.populations, model.mu
    z = 1j * model.omega - model.dephasing
    ez = z[:, :, None] * np.exp(np.multiply.outer(z, s))  # (N, N, n_s)
    w1 = np.einsum("a,abk,bam->abkm", p, mu, mu)
    w2 = np.einsum("a,abm,bak->abkm", p, mu, mu)
    out = np.einsum("abkm,abt->kmt", w1, ez) - np.einsum(
        "abkm,bat->kmt", w2, ez
    )
    return (1j / HBAR) * out


def _chi_zero(model: MolecularModel) -> np.ndarray:
    comm = np.einsum(
        "a,abk,bas->ks", model.populations, model.mu, model.mu
    ) - np.einsum("a,abs,bak->ks", model.populations, model.mu, model.mu)
    return (1j / HBAR) * comm


def _sum_rule_defect(model: MolecularModel) -> np.ndarray:
    """R_ks = (N e^2 / m) delta_ks - (i/hbar) <[u_k, mu_s]>."""
    c = dipole_velocity_commutator(model)  # <[mu_k, u_s]>
    t_ks = -(1j / HBAR) * c.T
    n_e = model.electron_count * ELEMENTARY_CHARGE**2 / ELECTRON_MASS
    return n_e * np.eye(3) - t_ks


def _trapezoid_convolution(kernel: np.ndarray, drive: np.ndarray, dt: float) -> np.ndarray:
    full = np.convolve(kernel, drive)[: drive.size]
    full -= 0.5 * kernel[0] * drive
    full -= 0.5 * kernel[: drive.size] * drive[0]
    return dt * full


def dipole_linear_exchange(model: MolecularModel, field_: DrivingField) -> SignalTrace:
    """Linear energy exchange from volume-integrated moments only.

    -(sum_ks) E_k(t) [ R_ks B_s(t) + chi_ks(0) E_s(t) + (dchi_ks/ds * E_s)(t) ]
    for a spatially uniform driving field; R carries the sum-rule defect so
    the square-field contact of the non-local route is reproduced exactly.
    """
    grid = model.grid
    e_series = compile_E_series(field_, grid)
    _require_uniform(e_series)
    tg = e_series.time_grid
    box = grid.box_volume
    e_vec = e_series.volume_integral().T / box  # (3, n_t)
    b_vec = compute_A_inv(field_, grid).volume_integral().T / box

    s = tg.times - tg.t0
    rate = dipole_response_kernel_rate(model, s)
    chi0 = _chi_zero(model)
    defect = _sum_rule_defect(model)

    total = np.zeros(tg.n_t, dtype=np.complex128)
    for k in range(3):
        if not np.any(e_vec[k]):
            continue
        for m in range(3):
            conv = _trapezoid_convolution(rate[k, m], e_vec[m], tg.dt)
            total += e_vec[k] * (defect[k, m] * b_vec[m] + chi0[k, m] * e_vec[m] + conv)
    return SignalTrace(
        "energy_exchange", 1, tg.times, -total, "time_au", "hartree_per_time_au"
    )


# ---- frequency-domain spectra -------------------------------------------------


def _coupled_pairs(model: MolecularModel, e_hat: np.ndarray):
    g = int(np.argmin(model.energies))
    mu_g = model.mu[:, g, :] @ e_hat
    u_g = model.u[:, g, :] @ e_hat
    pairs = []
    scale = max(float(np.max(np.abs(mu_g))), 1e-300)
    for a in range(model.n_states):
        if a == g or abs(mu_g[a]) < 1e-14 * scale:
            continue
        pairs.append(
            (
                model.omega[a, g],
                model.dephasing[a, g],
                model.populations[g] - model.populations[a],
                abs(mu_g[a]) ** 2,
                abs(u_g[a]) ** 2,
            )
        )
    return pairs


def linear_spectra(
    model: MolecularModel,
    omega: np.ndarray,
    polarization: Sequence[float] = (0.0, 0.0, 1.0),
    e0: float = 1.0,
    v_q: float | None = None,
    n0: float | None = None,
    route: str = "analytic",
) -> tuple[SignalTrace, SignalTrace]:
    """Linear absorption spectra on a positive frequency grid.

    Returns the dipole-route spectrum and the comparator that couples through
    the current density but drops the square-field vertex ("naive" minimal
    coupling); for an isolated resonance at w_a their ratio is (w_a / w)^2.
    ``route='transform'`` integrates the time-domain kernel numerically
    instead of using the closed Lorentzian form (cross-check path).
    """
    omega = np.asarray(omega, dtype=np.float64)
    if omega.ndim != 1 or np.any(omega <= 0.0):
        raise ValidationFailure("spectra need a strictly positive frequency grid")
    if route not in ("analytic", "transform"):
        raise ValidationFailure(f"unknown spectra route {route!r}")
    e_hat = np.asarray(polarization, dtype=np.float64)
    norm = np.linalg.norm(e_hat)
    if norm == 0.0:
        raise ValidationFailure("polarization must be nonzero")
    e_hat = e_hat / norm
    if v_q is None:
        v_q = model.grid.box_volume
    if n0 is None:
        n0 = 1.0 / v_q

    pairs = _coupled_pairs(model, e_hat)
    for w_a, eta, _, _, _ in pairs:
        if eta <= 0.0:
            raise ValidationFailure(
                f"zero linewidth on the radiatively coupled pair at w = {w_a:g}"
            )

    if route == "analytic":
        alpha_d = np.zeros_like(omega, dtype=np.complex128)
        alpha_mc = np.zeros_like(omega, dtype=np.complex128)
        for w_a, eta, pop, d2, c2 in pairs:
            poles = 1.0 / (w_a - omega - 1j * eta) + 1.0 / (w_a + omega + 1j * eta)
            alpha_d += pop * d2 * poles / HBAR
            alpha_mc += pop * c2 * poles / (HBAR * omega**2)
    else:
        alpha_d, alpha_mc = _transform_polarizabilities(pairs, omega)

    pref = -n0 * 0.5 * abs(e0) ** 2 * omega
    s_d = SignalTrace(
        "spectrum_dipole", 1, omega, pref * alpha_d.imag,
        "frequency_au", "hartree_per_time_au",
    )
    s_mc = SignalTrace(
        "spectrum_naive_mc", 1, omega, pref * alpha_mc.imag,
        "frequency_au", "hartree_per_time_au",
    )
    return s_d, s_mc


def _transform_polarizabilities(pairs, omega: np.ndarray):
    """Numeric half-line transform of the time-domain kernels."""
    eta_min = min(eta for _, eta, _, _, _ in pairs)
    w_top = max(float(np.max(omega)), max(w for w, _, _, _, _ in pairs))
    ds = 2.0 * np.pi / w_top / 128.0
    s_max = -np.log(1e-9) / eta_min
    s = np.arange(0.0, s_max, ds)
    chi_d = np.zeros_like(s)
    chi_u = np.zeros_like(s)
    for w_a, eta, pop, d2, c2 in pairs:
        damped = np.exp(-eta * s) * np.sin(w_a * s)
        chi_d += (2.0 / HBAR) * pop * d2 * damped
        chi_u += (2.0 / HBAR) * pop * c2 * damped
    alpha_d = np.empty(omega.size, dtype=np.complex128)
    alpha_u = np.empty(omega.size, dtype=np.complex128)
    for i0 in range(0, omega.size, 64):
        w_blk = omega[i0 : i0 + 64]
        kernel = np.exp(1j * np.outer(w_blk, s))
        kernel[:, 0] *= 0.5
        kernel[:, -1] *= 0.5
        alpha_d[i0 : i0 + 64] = ds * (kernel @ chi_d)
        alpha_u[i0 : i0 + 64] = ds * (kernel @ chi_u)
    return alpha_d, alpha_u / omega**2


# ---- heterodyne detection -----------------------------------------------------


@dataclass(frozen=True)
class ComplexEnvelope:
    """Complex multiple of a smooth envelope, keeping analytic derivatives."""

    scale: complex
    base: Envelope

    def value(self, t):
        return self.scale * np.asarray(self.base.value(t), dtype=np.complex128)

    def dvalue(self, t):
        return self.scale * np.asarray(self.base.dvalue(t), dtype=np.complex128)


@dataclass(frozen=True)
class HeterodyneMode:
    """Detection mode: carrier, spatial projection and reference envelopes.

    The reference beam is (e_env +/- a_env) e^{-i w_s t}; ``sign`` picks the
    relative sign convention.  ``v_q`` is the quantization volume entering
    the mode normalization sqrt(2 pi hbar w_s / v_q); when omitted the model
    box volume is used at evaluation time.
    """

    q_s: np.ndarray
    polarization: np.ndarray
    omega_s: float
    e_envelope: Envelope | ComplexEnvelope
    a_envelope: Envelope | ComplexEnvelope
    sign: str = "+"
    v_q: float | None = None

    def __post_init__(self) -> None:
        q = np.asarray(self.q_s, dtype=np.float64)
        e = np.asarray(self.polarization, dtype=np.float64)
        object.__setattr__(self, "q_s", q)
        object.__setattr__(self, "polarization", e)
        if e.shape != (3,) or abs(np.linalg.norm(e) - 1.0) > 1e-12:
            raise ValidationFailure("detection polarization must be a unit 3-vector")
        if q.shape != (3,) or abs(np.dot(q, e)) > 1e-12 * max(1.0, np.linalg.norm(q)):
            raise ValidationFailure("detection mode must be transverse: q_s . e_s = 0")
        if self.omega_s <= 0.0:
            raise ValidationFailure("detection carrier frequency must be positive")
        if self.sign not in ("+", "-"):
            raise ValidationFailure("heterodyne sign convention must be '+' or '-'")
        if self.v_q is not None and self.v_q <= 0.0:
            raise ValidationFailure("quantization volume must be positive")


def heterodyne_signal(
    model: MolecularModel,
    field_: DrivingField,
    mode: HeterodyneMode,
    max_order: int,
) -> SignalTrace:
    """Interference of the emitted current with the reference beam.

    The current summed over orders <= max_order is projected on
    e_s exp(-i q_s . r); with F(t) = exp(i w_s t) * projection(t) the trace is

        2 Re{ (i c eps / hbar w_s) [ conj(d/dt(E +/- A)) CumInt F + conj(E +/- A) F ] }.
    """
    if max_order not in (1, 2, 3):
        raise ValidationFailure("heterodyne max_order must be 1, 2 or 3")
    currents = induced_currents_up_to(model, field_, max_order)
    tg = currents[0].time_grid
    grid = model.grid

    phase = np.exp(-1j * (mode.q_s @ grid.coordinates))
    probe = CompiledVectorSeries(
        grid,
        tg,
        (mode.polarization[:, None] * phase[None, :],),
        (np.ones(tg.n_t),),
    )
    projection = sum(ic.overlap_with(probe) for ic in currents)
    f = np.exp(1j * mode.omega_s * tg.times) * projection
    cum = cumulative_trapezoid(f, tg.dt)

    pm = 1.0 if mode.sign == "+" else -1.0
    env = np.asarray(mode.e_envelope.value(tg.times), np.complex128) + pm * np.asarray(
        mode.a_envelope.value(tg.times), np.complex128
    )
    denv = np.asarray(mode.e_envelope.dvalue(tg.times), np.complex128) + pm * np.asarray(
        mode.a_envelope.dvalue(tg.times), np.complex128
    )
    v_q = mode.v_q if mode.v_q is not None else grid.box_volume
    eps = np.sqrt(2.0 * np.pi * HBAR * mode.omega_s / v_q)
    half = (1j * SPEED_OF_LIGHT * eps / (HBAR * mode.omega_s)) * (
        np.conj(denv) * cum + np.conj(env) * f
    )
    return SignalTrace(
        "heterodyne", 0, tg.times, half + np.conj(half), "time_au", "per_time_au"
    )
