"""Nonperturbative propagator and order-extraction checks."""

import numpy as np
import pytest
from dataclasses import replace

from conftest import gaussian_mode, two_level_model
from nlres.constants import DIAMAG, HBAR
from nlres.errors import NumericalError, ValidationFailure
from nlres.fields import (
    ConstantEnvelope,
    DrivingField,
    FieldMode,
    SpaceTimeProduct,
    TimeGrid,
    apply_gauge,
    compile_E_series,
)
from nlres.liouville import equilibrium_density
from nlres.model import ground_charge_density
from nlres.oracle import (
    DensityTrajectory,
    extract_orders,
    oracle_current,
    oracle_energy_exchange,
    propagate,
)
from nlres.response import induced_currents_up_to
from nlres.signals import energy_exchange


def pulsed_field(tg, amplitude, omega=0.12, t_center=45.0, t_width=7.0, **kw):
    return DrivingField(
        modes=(gaussian_mode(amplitude, omega, t_center, t_width, **kw),),
        time_grid=tg,
    )


def rel_l2(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_zero_field_trajectory_is_stationary():
    model = two_level_model(n=8, dephasing=0.01)
    tg = TimeGrid(0.0, 0.5, 41)
    traj = propagate(model, DrivingField(modes=(), time_grid=tg))
    eq = equilibrium_density(model)
    assert np.array_equal(traj.rho, np.broadcast_to(eq, traj.rho.shape))
    assert traj.trace_drift == 0.0
    assert traj.hermiticity_defect == 0.0
    assert traj.spot_check_positivity() >= 0.0
    vol = oracle_current(model, traj).volume_integral()
    assert np.array_equal(vol, np.zeros_like(vol))


def test_explicit_substep_must_divide_field_step():
    model = two_level_model(n=8)
    field_ = pulsed_field(TimeGrid(0.0, 0.5, 41), 1e-3)
    with pytest.raises(ValidationFailure, match="divide"):
        propagate(model, field_, dt_sub=0.3)
    with pytest.raises(ValidationFailure, match="positive"):
        propagate(model, field_, dt_sub=-0.5)


def test_substep_certification_gives_up_loudly():
    # one huge step over a violent always-on drive never reaches 1e-8
    model = two_level_model(n=8, gap=3.0)
    tg = TimeGrid(0.0, 1.0, 2)
    mode = FieldMode(
        kind="plane_wave",
        amplitude=3.0,
        omega=3.0,
        envelope=ConstantEnvelope(),
        polarization=(0.0, 0.0, 1.0),
        q=(0.0, 0.0, 0.0),
    )
    with pytest.raises(NumericalError, match="dt/256"):
        propagate(model, DrivingField(modes=(mode,), time_grid=tg))


def test_resonant_flat_drive_rabi_flops_to_half_population():
    """Quarter-period population after removing the driving-frame micromotion.

    A resonant uniform drive A = amp sin(w0 t) z couples the pair through
    (H_int)_10 = -i g sin(w0 t) with g = amp w0 mu_z.  In the frame rotating
    with the bare gap the static half of the coupling is |V_10| = g/2, so
    P1(t) = sin^2(g t / 2 hbar) and the quarter Rabi period t_q = pi hbar/(2g)
    leaves P1 = 1/2.  The counter-rotating half produces micromotion that the
    bare populations inherit at O(g/w0); undoing its first-order kick,

        rho_avg = e^{i L} e^{i H0 t/hbar} rho e^{-i H0 t/hbar} e^{-i L},
        L_10(t) = -(g / 2 hbar) (e^{2 i w0 t} - 1) / (2 i w0),

    cancels that layer and leaves only second-order (Bloch-Siegert class)
    residue, measured at 6e-7 for g = 1.4e-3.
    """
    w0 = 1.0
    g = 1.4e-3
    model = two_level_model(n=8, gap=w0)
    mu_z = np.abs(model.mu[1, 0, 2])
    t_q = 0.5 * np.pi * HBAR / g
    n_t = 4489
    dt = t_q / (n_t - 1)
    tg = TimeGrid(0.0, dt, n_t)
    mode = FieldMode(
        kind="plane_wave",
        amplitude=g / (w0 * mu_z),
        omega=w0,
        envelope=ConstantEnvelope(),
        polarization=(0.0, 0.0, 1.0),
        q=(0.0, 0.0, 0.0),
        phase=0.5 * np.pi,  # sin carrier, so A(0) = 0
    )
    traj = propagate(model, DrivingField(modes=(mode,), time_grid=tg), dt_sub=dt / 12.0)

    t = tg.t_end
    phases = np.exp(1j * model.energies * t / HBAR)
    rho_rot = np.diag(phases) @ traj.rho[-1] @ np.diag(phases.conj())
    lam10 = -(0.5 * g / HBAR) * (np.exp(2j * w0 * t) - 1.0) / (2j * w0)
    lam = np.array([[0.0, np.conj(lam10)], [lam10, 0.0]])
    vals, vecs = np.linalg.eigh(lam)
    kick = (vecs * np.exp(1j * vals)) @ vecs.conj().T
    p1 = (kick @ rho_rot @ kick.conj().T)[1, 1].real

    assert abs(traj.rho[-1][1, 1].real - 0.5) > 1e-4  # micromotion is visible
    assert abs(p1 - 0.5) < 1e-6
    assert traj.trace_drift < 1e-10
    assert traj.spot_check_positivity() > -1e-10


def test_gauge_images_share_one_trajectory():
    model = two_level_model(n=8, h=1.0)
    tg = TimeGrid(0.0, 0.25, 280)
    base = pulsed_field(
        tg, 4e-3, omega=0.1, t_center=30.0, t_width=4.0, q=(0.5, 0.0, 0.0)
    )
    images = {
        "linear": SpaceTimeProduct(
            kind="linear", amplitude=0.2, svec=(0.3, 0.0, 0.1), omega_t=0.09, theta_t=0.5
        ),
        "sinusoidal": SpaceTimeProduct(
            kind="sinusoidal",
            amplitude=0.3,
            svec=(2.0 * np.pi / 8.0, 0.0, 0.0),
            theta_r=0.4,
            omega_t=0.07,
            theta_t=0.2,
        ),
    }
    traj0 = propagate(model, base)
    w0 = oracle_energy_exchange(model, base, trajectory=traj0).values
    for phi in images.values():
        gauged = apply_gauge(base, phi)
        traj = propagate(model, gauged, dt_sub=traj0.dt_sub)
        assert np.max(np.abs(traj.rho - traj0.rho)) < 1e-10
        w = oracle_energy_exchange(model, gauged, trajectory=traj).values
        assert np.max(np.abs(w - w0)) < 1e-8 * np.max(np.abs(w0))


def test_frozen_equilibrium_density_leaves_pure_contact_current():
    model = two_level_model(n=8)
    tg = TimeGrid(0.0, 0.05, 1601)
    field_ = pulsed_field(tg, 3e-3, t_center=30.0, t_width=5.0)
    frozen = replace(
        propagate(model, field_),
        rho=np.broadcast_to(equilibrium_density(model), (tg.n_t, 2, 2)),
    )
    current = oracle_current(model, frozen)
    charge = ground_charge_density(model).values.real

    step = 700
    b_vals = frozen.integrated_field.at(step).values.real
    expected = DIAMAG * b_vals * charge
    assert np.max(np.abs(current.at(step).values - expected)) < 1e-14

    # energy trace against a direct pointwise quadrature of -E.J
    e_series = compile_E_series(field_, model.grid)
    trace = oracle_energy_exchange(model, field_, trajectory=frozen)
    dv = model.grid.cell_volume
    for k in (300, 700, 1100):
        e_vals = e_series.at(k).values.real
        b_vals = frozen.integrated_field.at(k).values.real
        direct = -DIAMAG * np.sum(np.sum(e_vals * b_vals, axis=0) * charge) * dv
        assert abs(trace.values[k] - direct) < 1e-10 * max(1.0, abs(direct))
    assert np.max(np.abs(trace.values.imag)) < 1e-12


def test_weak_drive_reduces_to_first_order_current():
    # the order-1 current already carries the equilibrium contact piece
    # (its driving factor B is first order), so the comparison is direct
    model = two_level_model(n=8)
    tg = TimeGrid(0.0, 0.05, 1601)
    field_ = pulsed_field(tg, 1e-3, t_center=30.0, t_width=5.0)
    traj = propagate(model, field_)
    full = oracle_current(model, traj).volume_integral()
    first = induced_currents_up_to(model, field_, 1)[0].volume_integral()
    assert rel_l2(full, first) < 1e-3


def test_extract_orders_matches_perturbative_traces():
    model = two_level_model(n=8)
    tg = TimeGrid(0.0, 0.05, 2048)
    field_ = pulsed_field(tg, 6e-3)
    o1, o2, o3 = extract_orders(model, field_)
    assert [t.order for t in (o1, o2, o3)] == [1, 2, 3]
    w1 = energy_exchange(model, field_, 1).values
    w3 = energy_exchange(model, field_, 3).values
    assert rel_l2(o1.values, w1) < 1e-2
    # inversion-symmetric pair: the even-order trace is extraction noise
    assert np.max(np.abs(o2.values)) < 1e-4 * np.max(np.abs(o1.values))
    assert rel_l2(o3.values, w3) < 1e-2


def test_extract_orders_rejects_population_transfer():
    model = two_level_model(n=8)
    tg = TimeGrid(0.0, 0.05, 1024)
    field_ = pulsed_field(tg, 0.5, omega=0.1)
    with pytest.raises(ValidationFailure, match="perturbative"):
        extract_orders(model, field_)


def test_extract_orders_scale_set_guards():
    model = two_level_model(n=8)
    field_ = pulsed_field(TimeGrid(0.0, 0.05, 1024), 2e-3)
    with pytest.raises(ValidationFailure, match="five distinct"):
        extract_orders(model, field_, scales=(0.2, 0.4, 0.6, 0.8))
    with pytest.raises(ValidationFailure, match="five distinct"):
        extract_orders(model, field_, scales=(-0.2, 0.2, 0.4, 0.6, 0.8, 1.0))
    clustered = (1.0, 1.0 + 1e-9, 1.0 + 2e-9, 1.0 + 3e-9, 1.0 + 4e-9)
    with pytest.raises(NumericalError, match="cond"):
        extract_orders(model, field_, scales=clustered)


def test_undamped_absorption_balances_level_populations():
    # closed system: the energy pulled from the field must land in Tr(rho H0)
    model = two_level_model(n=8)
    tg = TimeGrid(0.0, 0.0125, 8001)
    field_ = pulsed_field(tg, 0.04, omega=0.1)
    traj = propagate(model, field_)
    trace = oracle_energy_exchange(model, field_, trajectory=traj)
    gained = float(
        np.real(np.sum(model.energies * (np.diag(traj.rho[-1]) - model.populations)))
    )
    supplied = -np.trapezoid(trace.values.real, dx=tg.dt)
    assert gained > 1e-4  # the resonant pulse really moved population
    assert abs(gained - supplied) < 1e-6 * abs(gained)


def test_trajectory_construction_validates_density_matrices():
    model = two_level_model(n=8)
    tg = TimeGrid(0.0, 0.05, 401)
    traj = propagate(model, pulsed_field(tg, 2e-3, t_center=10.0, t_width=1.5))

    broken = traj.rho.copy()
    broken[5, 0, 1] += 1e-6
    with pytest.raises(ValidationFailure, match="Hermiticity"):
        DensityTrajectory(tg, broken, traj.integrated_field, traj.dt_sub)

    leaky = traj.rho * (1.0 + 1e-6)
    with pytest.raises(ValidationFailure, match="trace"):
        DensityTrajectory(tg, leaky, traj.integrated_field, traj.dt_sub)

    indefinite = np.broadcast_to(
        np.diag([1.0 + 1e-6, -1e-6]).astype(complex), traj.rho.shape
    )
    bad = DensityTrajectory(tg, indefinite, traj.integrated_field, traj.dt_sub)
    with pytest.raises(ValidationFailure, match="indefinite"):
        bad.spot_check_positivity()


def test_oracle_trace_is_a_total_order_trace():
    model = two_level_model(n=8)
    tg = TimeGrid(0.0, 0.1, 501)
    field_ = pulsed_field(tg, 2e-3, t_center=15.0, t_width=2.0)
    trace = oracle_energy_exchange(model, field_)
    assert trace.kind == "energy_exchange"
    assert trace.order == 0
    assert trace.axis.shape == (tg.n_t,)
