"""Space-time driving fields: vector potential modes, scalar potentials, gauges.

Every field ingredient is a separable product of a spatial profile and an
analytic time factor, and differentiation in time is always done on the
closed form.  The electric field follows

    E = -(1/a) dA/dt - grad A0,

where ``a`` is the convention constant relating A-dot to E (1 by default, c
selectable).  The gauge-invariant potential is the running time integral of E
on the run's time grid; because every term is separable, that series is kept
as per-term coefficient vectors and never materialized over the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable

import numpy as np

from .constants import ELEMENTARY_CHARGE, SPEED_OF_LIGHT
from .errors import FieldEvaluationError, ValidationFailure
from .grid import Grid3D, ScalarFieldG, VectorFieldG

MODE_KINDS = ("plane_wave", "evanescent", "gridded_profile")
GAUGE_KINDS = ("zero", "uniform", "linear", "sinusoidal")


def cumulative_trapezoid(samples: np.ndarray, dt: float) -> np.ndarray:
    """Running trapezoidal integral with the same length as the input."""
    out = np.zeros_like(samples)
    np.cumsum(0.5 * dt * (samples[1:] + samples[:-1]), out=out[1:])
    return out


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    dt: float
    n_t: int

    def __post_init__(self) -> None:
        if self.dt <= 0.0 or self.n_t < 2:
            raise ValidationFailure("time grid needs dt > 0 and n_t >= 2")

    @cached_property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_t)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.n_t - 1)

    def require_in_span(self, t: float) -> None:
        slack = 1e-9 * self.dt
        if not (self.t0 - slack <= t <= self.t_end + slack):
            raise FieldEvaluationError(
                f"t = {t:g} outside time grid span [{self.t0:g}, {self.t_end:g}]"
            )


# ---- envelopes -------------------------------------------------------------


@dataclass(frozen=True)
class GaussianEnvelope:
    """exp(-(t-t_c)^2 / 2 w^2), cut to exactly zero beyond 6 widths.

    The cut level exp(-18) is subtracted inside the window so the envelope is
    continuous; its analytic derivative is unaffected by the constant shift.
    """

    t_center: float
    t_width: float
    CUT: float = 6.0

    def __post_init__(self) -> None:
        if self.t_width <= 0.0:
            raise ValidationFailure("Gaussian envelope width must be > 0")

    def _x(self, t):
        return (np.asarray(t, dtype=np.float64) - self.t_center) / self.t_width

    def value(self, t):
        x = self._x(t)
        inside = np.abs(x) <= self.CUT
        floor = np.exp(-0.5 * self.CUT**2)
        return np.where(inside, np.exp(-0.5 * x * x) - floor, 0.0)

    def dvalue(self, t):
        x = self._x(t)
        inside = np.abs(x) <= self.CUT
        return np.where(inside, -x / self.t_width * np.exp(-0.5 * x * x), 0.0)

    def ddvalue(self, t):
        x = self._x(t)
        inside = np.abs(x) <= self.CUT
        return np.where(
            inside, (x * x - 1.0) / self.t_width**2 * np.exp(-0.5 * x * x), 0.0
        )


@dataclass(frozen=True)
class FlatTopEnvelope:
    """Unit plateau on [t_on + t_ramp, t_off] with half-cosine ramps.

    C1 everywhere: the ramp derivative vanishes at both of its ends.
    """

    t_on: float
    t_off: float
    t_ramp: float

    def __post_init__(self) -> None:
        if self.t_ramp <= 0.0 or self.t_off < self.t_on + self.t_ramp:
            raise ValidationFailure("flat-top needs t_ramp > 0 and a plateau")

    def _pieces(self, t):
        t = np.asarray(t, dtype=np.float64)
        rise = (t >= self.t_on) & (t < self.t_on + self.t_ramp)
        flat = (t >= self.t_on + self.t_ramp) & (t <= self.t_off)
        fall = (t > self.t_off) & (t <= self.t_off + self.t_ramp)
        return t, rise, flat, fall

    def value(self, t):
        t, rise, flat, fall = self._pieces(t)
        w = np.pi / self.t_ramp
        out = np.zeros_like(t)
        out = np.where(rise, 0.5 * (1.0 - np.cos(w * (t - self.t_on))), out)
        out = np.where(flat, 1.0, out)
        out = np.where(fall, 0.5 * (1.0 + np.cos(w * (t - self.t_off))), out)
        return out

    def dvalue(self, t):
        t, rise, _, fall = self._pieces(t)
        w = np.pi / self.t_ramp
        out = np.zeros_like(t)
        out = np.where(rise, 0.5 * w * np.sin(w * (t - self.t_on)), out)
        out = np.where(fall, -0.5 * w * np.sin(w * (t - self.t_off)), out)
        return out

    def ddvalue(self, t):
        t, rise, _, fall = self._pieces(t)
        w = np.pi / self.t_ramp
        out = np.zeros_like(t)
        out = np.where(rise, 0.5 * w * w * np.cos(w * (t - self.t_on)), out)
        out = np.where(fall, -0.5 * w * w * np.cos(w * (t - self.t_off)), out)
        return out


@dataclass(frozen=True)
class ConstantEnvelope:
    """Always-on unit envelope (detection windows, not pulsed driving)."""

    def value(self, t):
        return np.ones_like(np.asarray(t, dtype=np.float64))

    def dvalue(self, t):
        return np.zeros_like(np.asarray(t, dtype=np.float64))

    def ddvalue(self, t):
        return np.zeros_like(np.asarray(t, dtype=np.float64))


Envelope = GaussianEnvelope | FlatTopEnvelope | ConstantEnvelope


# ---- field ingredients -----------------------------------------------------


@dataclass(frozen=True)
class FieldMode:
    """One separable contribution to the vector potential.

    plane_wave:      A = amp * e * env(t) * cos(q.r - w t + phase)
    evanescent:      A = amp * e * env(t) * cos(w t - phase) * exp(-kappa.r)
    gridded_profile: A = amp * env(t) * cos(w t - phase) * profile(r)
    """

    kind: str
    amplitude: float
    omega: float
    envelope: Envelope
    polarization: np.ndarray | None = None
    q: np.ndarray | None = None
    kappa: np.ndarray | None = None
    profile: VectorFieldG | None = None
    phase: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in MODE_KINDS:
            raise ValidationFailure(f"unknown mode kind {self.kind!r}")
        if self.kind == "gridded_profile":
            if self.profile is None:
                raise ValidationFailure("gridded_profile mode needs a profile")
            vals = self.profile.values
            scale = np.max(np.abs(vals))
            if scale > 0.0 and np.max(np.abs(vals.imag)) > 1e-12 * scale:
                raise ValidationFailure("gridded profile must be real (A is real)")
            return
        if self.polarization is None:
            raise ValidationFailure(f"{self.kind} mode needs a polarization")
        e = np.asarray(self.polarization, dtype=np.float64)
        object.__setattr__(self, "polarization", e)
        if e.shape != (3,) or abs(np.linalg.norm(e) - 1.0) > 1e-12:
            raise ValidationFailure("polarization must be a unit 3-vector")
        if self.kind == "plane_wave":
            if self.q is None:
                raise ValidationFailure("plane_wave mode needs a wavevector q")
            q = np.asarray(self.q, dtype=np.float64)
            object.__setattr__(self, "q", q)
            if abs(np.dot(q, e)) > 1e-12 * max(1.0, np.linalg.norm(q)):
                raise ValidationFailure("plane wave must be transverse: q.e = 0")
        elif self.kappa is None:
            raise ValidationFailure("evanescent mode needs a decay vector kappa")
        else:
            object.__setattr__(self, "kappa", np.asarray(self.kappa, np.float64))

    def spatial_parts(self, grid: Grid3D) -> list[tuple[np.ndarray, str]]:
        """Real profiles paired with their carrier quadrature ('cos'/'sin')."""
        xyz = grid.coordinates
        if self.kind == "plane_wave":
            ph = np.einsum("k,kp->p", self.q, xyz)
            e = self.polarization[:, None]
            return [(e * np.cos(ph), "cos"), (e * np.sin(ph), "sin")]
        if self.kind == "evanescent":
            decay = np.exp(-np.einsum("k,kp->p", self.kappa, xyz))
            return [(self.polarization[:, None] * decay, "cos")]
        return [(self.profile.values.real, "cos")]

    def time_factor(self, quadrature: str) -> "TimeFactor":
        return TimeFactor(self.amplitude, self.omega, self.phase, self.envelope, quadrature)


@dataclass(frozen=True)
class TimeFactor:
    """amp * env(t) * cos/sin(w t - phase), with analytic derivatives."""

    amplitude: float
    omega: float
    phase: float
    envelope: Envelope
    quadrature: str = "cos"

    def _osc(self, t):
        arg = self.omega * np.asarray(t, dtype=np.float64) - self.phase
        if self.quadrature == "cos":
            return np.cos(arg), -self.omega * np.sin(arg), -self.omega**2 * np.cos(arg)
        return np.sin(arg), self.omega * np.cos(arg), -self.omega**2 * np.sin(arg)

    def __call__(self, t):
        c, _, _ = self._osc(t)
        return self.amplitude * self.envelope.value(t) * c

    def d1(self, t):
        c, dc, _ = self._osc(t)
        env, denv = self.envelope.value(t), self.envelope.dvalue(t)
        return self.amplitude * (denv * c + env * dc)

    def d2(self, t):
        c, dc, ddc = self._osc(t)
        e, de, dde = (
            self.envelope.value(t),
            self.envelope.dvalue(t),
            self.envelope.ddvalue(t),
        )
        return self.amplitude * (dde * c + 2.0 * de * dc + e * ddc)


@dataclass(frozen=True)
class SpaceTimeProduct:
    """Separable scalar function p(r) * g(t) with closed-form derivatives.

    Spatial families: uniform (p = 1), linear (p = svec.r), sinusoidal
    (p = sin(svec.r + theta_r)).  The sinusoidal gradient uses the grid's
    central-difference symbol sin(k h)/h in place of k, so discrete identities
    built on that stencil close exactly for grid-resolved wavevectors.
    Time factor: g(t) = amplitude * sin(omega_t * t + theta_t).
    """

    kind: str
    amplitude: float
    svec: tuple[float, float, float] = (0.0, 0.0, 0.0)
    theta_r: float = 0.0
    omega_t: float = 0.0
    theta_t: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in GAUGE_KINDS:
            raise ValidationFailure(f"unknown space-time product kind {self.kind!r}")
        object.__setattr__(self, "svec", tuple(float(v) for v in self.svec))

    def p_on(self, grid: Grid3D) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(grid.n_points)
        if self.kind == "uniform":
            return np.ones(grid.n_points)
        arg = np.einsum("k,kp->p", np.asarray(self.svec), grid.coordinates)
        if self.kind == "linear":
            return arg
        return np.sin(arg + self.theta_r)

    def grad_p_on(self, grid: Grid3D) -> np.ndarray:
        out = np.zeros((3, grid.n_points))
        if self.kind in ("zero", "uniform"):
            return out
        if self.kind == "linear":
            return np.broadcast_to(np.asarray(self.svec)[:, None], out.shape).copy()
        arg = np.einsum("k,kp->p", np.asarray(self.svec), grid.coordinates)
        cos = np.cos(arg + self.theta_r)
        for d in range(3):
            s_d = np.sin(self.svec[d] * grid.spacing[d]) / grid.spacing[d]
            out[d] = s_d * cos
        return out

    def g(self, t):
        return self.amplitude * np.sin(self.omega_t * np.asarray(t, np.float64) + self.theta_t)

    def gdot(self, t):
        return self.amplitude * self.omega_t * np.cos(
            self.omega_t * np.asarray(t, np.float64) + self.theta_t
        )

    def gddot(self, t):
        return -self.amplitude * self.omega_t**2 * np.sin(
            self.omega_t * np.asarray(t, np.float64) + self.theta_t
        )


GaugeFunction = SpaceTimeProduct


# ---- compiled separable terms ----------------------------------------------


@dataclass(frozen=True)
class VectorTerm:
    """profile(r) * f(t) contribution to a vector quantity."""

    profile: np.ndarray  # (3, n_points), real
    f: Callable
    fdot: Callable


@dataclass(frozen=True)
class ScalarTerm:
    """p(r) * g(t) contribution to the scalar potential."""

    p: np.ndarray  # (n_points,)
    grad_p: np.ndarray  # (3, n_points)
    g: Callable
    gdot: Callable


@dataclass(frozen=True)
class CompiledVectorSeries:
    """Separable time series sum_i profile_i(r) * coeffs_i(t_k).

    Keeps one coefficient vector per spatial profile instead of a dense
    (n_t, 3, n_points) block; single time slices, volume integrals and
    profile projections are assembled on demand.
    """

    grid: Grid3D
    time_grid: TimeGrid
    profiles: tuple[np.ndarray, ...]
    coeffs: tuple[np.ndarray, ...]

    def at(self, k: int) -> VectorFieldG:
        vals = np.zeros((3, self.grid.n_points), dtype=np.complex128)
        for prof, c in zip(self.profiles, self.coeffs):
            vals += prof * c[k]
        return VectorFieldG(self.grid, vals)

    def volume_integral(self) -> np.ndarray:
        """Integral over the box at every time, shape (n_t, 3)."""
        out = np.zeros((self.time_grid.n_t, 3))
        for prof, c in zip(self.profiles, self.coeffs):
            out += np.outer(c, prof.sum(axis=1) * self.grid.cell_volume)
        return out

    def projected(self, weight: np.ndarray) -> np.ndarray:
        """Integral of weight(r) . series(r, t) over the box, shape (n_t,)."""
        out = np.zeros(self.time_grid.n_t, dtype=np.complex128)
        for prof, c in zip(self.profiles, self.coeffs):
            out += c * (np.sum(weight * prof) * self.grid.cell_volume)
        return out


# ---- the driving field -----------------------------------------------------


@dataclass(frozen=True)
class DrivingField:
    """Immutable bundle of vector-potential modes, scalar potential and gauge.

    ``a_scale`` is the A-dot convention constant a in E = -(1/a) dA/dt - grad A0.
    """

    modes: tuple[FieldMode, ...]
    time_grid: TimeGrid
    scalar_potential: tuple[SpaceTimeProduct, ...] = ()
    gauge_fn: tuple[GaugeFunction, ...] = ()
    a_scale: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "scalar_potential", tuple(self.scalar_potential))
        object.__setattr__(self, "gauge_fn", tuple(self.gauge_fn))
        if self.a_scale <= 0.0:
            raise ValidationFailure("a_scale must be positive")

    def scaled(self, lam: float) -> "DrivingField":
        """Field with every source amplitude multiplied by lam."""
        return replace(
            self,
            modes=tuple(replace(m, amplitude=lam * m.amplitude) for m in self.modes),
            scalar_potential=tuple(
                replace(s, amplitude=lam * s.amplitude) for s in self.scalar_potential
            ),
            gauge_fn=tuple(replace(g, amplitude=lam * g.amplitude) for g in self.gauge_fn),
        )

    # -- compiled term lists --

    def a_terms(self, grid: Grid3D) -> list[VectorTerm]:
        """Vector-potential terms: modes plus gauge shifts a*(e/c)*grad(phi)*h."""
        terms = []
        for m in self.modes:
            for prof, quad in m.spatial_parts(grid):
                tf = m.time_factor(quad)
                terms.append(VectorTerm(prof, tf, tf.d1))
        lam = self.a_scale * ELEMENTARY_CHARGE / SPEED_OF_LIGHT
        for gf in self.gauge_fn:
            gp = gf.grad_p_on(grid)
            terms.append(
                VectorTerm(
                    lam * gp,
                    gf.g,
                    gf.gdot,
                )
            )
        return terms

    def a0_terms(self, grid: Grid3D) -> list[ScalarTerm]:
        """Scalar-potential terms: user A0 plus gauge shifts -(e/c)*phi*h-dot."""
        terms = [
            ScalarTerm(s.p_on(grid), s.grad_p_on(grid), s.g, s.gdot)
            for s in self.scalar_potential
        ]
        lam = -ELEMENTARY_CHARGE / SPEED_OF_LIGHT
        for gf in self.gauge_fn:
            p = gf.p_on(grid)
            gp = gf.grad_p_on(grid)
            terms.append(
                ScalarTerm(
                    lam * p,
                    lam * gp,
                    gf.gdot,
                    gf.gddot,
                )
            )
        return terms

    def e_terms(self, grid: Grid3D) -> list[VectorTerm]:
        """Electric-field terms, E = -(1/a) dA/dt - grad A0."""
        inv_a = 1.0 / self.a_scale
        terms = []
        for m in self.modes:
            for prof, quad in m.spatial_parts(grid):
                tf = m.time_factor(quad)
                terms.append(
                    VectorTerm(-inv_a * prof, tf.d1, tf.d2)
                )
        lam = ELEMENTARY_CHARGE / SPEED_OF_LIGHT
        for gf in self.gauge_fn:
            gp = gf.grad_p_on(grid)
            # -(1/a) d/dt of the A shift, and -grad of the A0 shift
            terms.append(VectorTerm(-lam * gp, gf.gdot, gf.gddot))
            terms.append(VectorTerm(lam * gp, gf.gdot, gf.gddot))
        for s in self.scalar_potential:
            terms.append(VectorTerm(-s.grad_p_on(grid), s.g, s.gdot))
        return terms


# ---- evaluation ------------------------------------------------------------


def _sum_vector_terms(grid: Grid3D, terms: list[VectorTerm], t: float) -> VectorFieldG:
    vals = np.zeros((3, grid.n_points), dtype=np.complex128)
    for term in terms:
        vals += term.profile * float(term.f(t))
    return VectorFieldG(grid, vals)


def evaluate_A(field_: DrivingField, grid: Grid3D, t: float) -> VectorFieldG:
    """Vector potential at one instant; t must lie on the time grid span."""
    field_.time_grid.require_in_span(t)
    return _sum_vector_terms(grid, field_.a_terms(grid), t)


def evaluate_E(field_: DrivingField, grid: Grid3D, t: float) -> VectorFieldG:
    """Electric field -(1/a) dA/dt - grad A0, from closed-form derivatives."""
    field_.time_grid.require_in_span(t)
    return _sum_vector_terms(grid, field_.e_terms(grid), t)


def evaluate_A0(field_: DrivingField, grid: Grid3D, t: float) -> ScalarFieldG:
    field_.time_grid.require_in_span(t)
    vals = np.zeros(grid.n_points, dtype=np.complex128)
    for term in field_.a0_terms(grid):
        vals += term.p * float(term.g(t))
    return ScalarFieldG(grid, vals)


def compute_A_inv(field_: DrivingField, grid: Grid3D) -> CompiledVectorSeries:
    """Gauge-invariant potential: running trapezoidal time integral of E.

    Built from E alone, so it is identical for any gauge image of the field.

    Raises
    ------
    ValidationFailure
        If some mode envelope is not off (<= 1e-12 of peak) at t0, which
        would leave the integration baseline undefined.
    """
    tg = field_.time_grid
    for m in field_.modes:
        if abs(float(m.envelope.value(tg.t0))) > 1e-12:
            raise ValidationFailure(
                "mode envelope not off at t0; gauge-invariant potential undefined"
            )
    profiles = []
    coeffs = []
    for term in field_.e_terms(grid):
        profiles.append(term.profile)
        coeffs.append(cumulative_trapezoid(np.asarray(term.f(tg.times), np.float64), tg.dt))
    return CompiledVectorSeries(grid, tg, tuple(profiles), tuple(coeffs))


def compile_E_series(field_: DrivingField, grid: Grid3D) -> CompiledVectorSeries:
    """E sampled on the run's time grid, in separable (lazy) form."""
    tg = field_.time_grid
    profiles = []
    coeffs = []
    for term in field_.e_terms(grid):
        profiles.append(term.profile)
        coeffs.append(np.asarray(term.f(tg.times), dtype=np.float64))
    return CompiledVectorSeries(grid, tg, tuple(profiles), tuple(coeffs))


def apply_gauge(field_: DrivingField, phi: GaugeFunction) -> DrivingField:
    """Append a gauge transformation generated by phi = p(r) h(t).

    The vector potential gains a*(e/c)*grad(p)*h and the scalar potential
    -(e/c)*p*h-dot; the two shifts cancel in E identically, term by term.
    """
    return replace(field_, gauge_fn=field_.gauge_fn + (phi,))
