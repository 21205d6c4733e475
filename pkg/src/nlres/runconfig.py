"""Run configuration files.

A run config wires a stored model to a driving field, a time grid and a set of
requested outputs.  Syntax is the shared flat ``[section]`` / ``key = value``
form; only ``[mode]``, ``[scalar_potential]``, ``[gauge]`` and ``[heterodyne]``
may repeat.  Paths are resolved relative to the config file, so a config
directory can be moved as a unit.  The raw config bytes are hashed and the
digest recorded in every run manifest, which makes output provenance checkable
without replaying the run.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .configio import Section, check_section_names, parse_sections, take_all, take_single
from .errors import ConfigError
from .fields import (
    ConstantEnvelope,
    DrivingField,
    FieldMode,
    FlatTopEnvelope,
    GaussianEnvelope,
    SpaceTimeProduct,
    TimeGrid,
)
from .signals import ComplexEnvelope, HeterodyneMode

_SECTIONS = (
    "run",
    "time",
    "mode",
    "scalar_potential",
    "gauge",
    "conventions",
    "heterodyne",
    "spectra",
    "oracle",
    "tolerances",
)
_ENVELOPES = ("gaussian", "flat_top", "constant")
_PRODUCT_KINDS = ("zero", "uniform", "linear", "sinusoidal")


@dataclass(frozen=True)
class SpectraRequest:
    omega: np.ndarray
    polarization: np.ndarray
    e0: float
    route: str
    v_q: float | None
    n0: float | None


@dataclass(frozen=True)
class OracleRequest:
    scales: tuple[float, ...] | None
    dt_sub: float | None
    tolerance: float


@dataclass(frozen=True)
class HeterodyneRequest:
    mode: HeterodyneMode
    max_order: int


@dataclass(frozen=True)
class RunConfig:
    config_path: Path
    config_digest: str
    model_dir: Path
    output_dir: Path
    orders: tuple[int, ...]
    time_grid: TimeGrid
    field: DrivingField
    heterodynes: tuple[HeterodyneRequest, ...]
    spectra: SpectraRequest | None
    oracle: OracleRequest | None
    conventions: dict[str, str]
    tolerances: dict[str, str]


def _unit(vec: np.ndarray, where: str) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ConfigError(f"{where}: polarization must be nonzero")
    return vec / norm


def _envelope(sec: Section):
    name = sec.get_str("envelope", choices=_ENVELOPES)
    if name == "gaussian":
        return GaussianEnvelope(sec.get_float("t_center"), sec.get_float("t_width"))
    if name == "flat_top":
        return FlatTopEnvelope(
            sec.get_float("t_on"), sec.get_float("t_off"), sec.get_float("t_ramp")
        )
    return ConstantEnvelope()


def _field_mode(sec: Section) -> FieldMode:
    kind = sec.get_str("kind", choices=("plane_wave", "evanescent"))
    envelope = _envelope(sec)
    polarization = _unit(sec.get_floats("polarization", count=3), sec.locate())
    common = dict(
        kind=kind,
        amplitude=sec.get_float("amplitude"),
        omega=sec.get_float("omega"),
        envelope=envelope,
        polarization=polarization,
        phase=sec.get_float("phase", default=0.0),
    )
    if kind == "plane_wave":
        mode = FieldMode(q=sec.get_floats("q", count=3, default=np.zeros(3)), **common)
    else:
        mode = FieldMode(kappa=sec.get_floats("kappa", count=3), **common)
    sec.reject_unknown()
    return mode


def _space_time_product(sec: Section, sign: float) -> SpaceTimeProduct:
    kind = sec.get_str("kind", choices=_PRODUCT_KINDS)
    product = SpaceTimeProduct(
        kind=kind,
        amplitude=sign * sec.get_float("amplitude"),
        svec=tuple(sec.get_floats("svec", count=3, default=np.zeros(3))),
        theta_r=sec.get_float("theta_r", default=0.0),
        omega_t=sec.get_float("omega_t", default=0.0),
        theta_t=sec.get_float("theta_t", default=0.0),
    )
    sec.reject_unknown()
    return product


def _heterodyne(sec: Section, default_sign: str) -> HeterodyneRequest:
    polarization = _unit(sec.get_floats("polarization", count=3), sec.locate())
    e_env = GaussianEnvelope(sec.get_float("e_center"), sec.get_float("e_width"))
    a_scale = complex(
        sec.get_float("a_scale_re", default=0.0), sec.get_float("a_scale_im", default=0.0)
    )
    if sec.has("a_center"):
        a_base = GaussianEnvelope(sec.get_float("a_center"), sec.get_float("a_width"))
    else:
        a_base = ConstantEnvelope()
    v_q = sec.get_float("v_q", default=None)
    max_order = sec.get_int("max_order", default=3)
    if max_order not in (1, 2, 3):
        raise ConfigError(f"{sec.locate()}: max_order must be 1, 2 or 3")
    mode = HeterodyneMode(
        q_s=sec.get_floats("q_s", count=3, default=np.zeros(3)),
        polarization=polarization,
        omega_s=sec.get_float("omega_s"),
        e_envelope=e_env,
        a_envelope=ComplexEnvelope(a_scale, a_base),
        sign=sec.get_str("sign", default=default_sign, choices=("+", "-")),
        v_q=v_q,
    )
    sec.reject_unknown()
    return HeterodyneRequest(mode, max_order)


def parse_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    source = str(path)
    sections = parse_sections(path)
    check_section_names(sections, _SECTIONS, source)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()

    run = take_single(sections, "run", source)
    model_dir = (path.parent / run.get_str("model")).resolve()
    output_dir = (path.parent / run.get_str("output")).resolve()
    orders = run.get_ints("orders", default=(1, 2, 3))
    for n in orders:
        if n not in (1, 2, 3):
            raise ConfigError(
                f"{source}: requested order {n}; the response series stops at 3"
            )
    if len(set(orders)) != len(orders) or not orders:
        raise ConfigError(f"{source}: orders must be a non-empty set drawn from 1 2 3")
    run.reject_unknown()

    tsec = take_single(sections, "time", source)
    time_grid = TimeGrid(
        tsec.get_float("t0", default=0.0), tsec.get_float("dt"), tsec.get_int("n_t")
    )
    tsec.reject_unknown()

    conv = take_single(sections, "conventions", source, required=False)
    a_scale = 1.0
    a0_sign = "+"
    het_sign = "+"
    if conv is not None:
        a_scale = conv.get_float("a_dot", default=1.0)
        a0_sign = conv.get_str("a0_sign", default="+", choices=("+", "-"))
        het_sign = conv.get_str("heterodyne_sign", default="+", choices=("+", "-"))
        conv.reject_unknown()
    pot_sign = 1.0 if a0_sign == "+" else -1.0

    modes = tuple(_field_mode(sec) for sec in take_all(sections, "mode"))
    if not modes:
        raise ConfigError(f"{source}: at least one [mode] block is required")
    potentials = tuple(
        _space_time_product(sec, pot_sign) for sec in take_all(sections, "scalar_potential")
    )
    gauges = tuple(_space_time_product(sec, 1.0) for sec in take_all(sections, "gauge"))
    field_ = DrivingField(
        modes=modes,
        time_grid=time_grid,
        scalar_potential=potentials,
        gauge_fn=gauges,
        a_scale=a_scale,
    )

    heterodynes = tuple(_heterodyne(sec, het_sign) for sec in take_all(sections, "heterodyne"))

    spectra = None
    ssec = take_single(sections, "spectra", source, required=False)
    if ssec is not None:
        lo = ssec.get_float("omega_min")
        hi = ssec.get_float("omega_max")
        n_omega = ssec.get_int("n_omega")
        if not (0.0 < lo < hi) or n_omega < 2:
            raise ConfigError(
                f"{source}: [spectra] needs 0 < omega_min < omega_max and n_omega >= 2"
            )
        spectra = SpectraRequest(
            omega=np.linspace(lo, hi, n_omega),
            polarization=_unit(
                ssec.get_floats("polarization", count=3, default=np.array([0.0, 0.0, 1.0])),
                ssec.locate(),
            ),
            e0=ssec.get_float("e0", default=1.0),
            route=ssec.get_str("route", default="analytic", choices=("analytic", "transform")),
            v_q=ssec.get_float("v_q", default=None),
            n0=ssec.get_float("n0", default=None),
        )
        ssec.reject_unknown()

    oracle = None
    osec = take_single(sections, "oracle", source, required=False)
    if osec is not None:
        scales = None
        if osec.has("scales"):
            scales = tuple(float(v) for v in osec.get_floats("scales"))
        oracle = OracleRequest(
            scales=scales,
            dt_sub=osec.get_float("dt_sub", default=None),
            tolerance=osec.get_float("tolerance", default=1e-2),
        )
        osec.reject_unknown()

    tolerances: dict[str, str] = {}
    tol = take_single(sections, "tolerances", source, required=False)
    if tol is not None:
        # free-form record, written into the run manifest verbatim
        for key in sorted(tol.entries):
            tolerances[key] = f"{tol.get_float(key):.17g}"

    conventions = {
        "a_dot": f"{a_scale:.17g}",
        "a0_sign": a0_sign,
        "heterodyne_sign": het_sign,
    }
    return RunConfig(
        config_path=path,
        config_digest=digest,
        model_dir=model_dir,
        output_dir=output_dir,
        orders=tuple(orders),
        time_grid=time_grid,
        field=field_,
        heterodynes=heterodynes,
        spectra=spectra,
        oracle=oracle,
        conventions=conventions,
        tolerances=tolerances,
    )
