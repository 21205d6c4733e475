"""Induced-current assembly: closed forms, scaling, gauge and route checks."""

import numpy as np
import pytest
from conftest import gaussian_mode, two_level_model

from nlres.constants import A2_VERTEX
from nlres.errors import ValidationFailure
from nlres.fields import DrivingField, SpaceTimeProduct, TimeGrid, apply_gauge, compile_E_series
from nlres.liouville import (
    ProjectedCoupling,
    couple_current_series,
    couple_square_series,
    superoperator_nested_expectation,
)
from nlres.response import (
    InducedCurrent,
    density_corrections,
    induced_current_order1,
    induced_current_order2,
    induced_current_order3,
    response_families,
    zeta_kernel_regular,
)


def pulse_field(tg: TimeGrid, amplitude: float, **mode_kw) -> DrivingField:
    mode = gaussian_mode(amplitude, mode_kw.pop("omega", 0.1), **mode_kw)
    return DrivingField(modes=(mode,), time_grid=tg)


def test_zero_field_zero_current():
    model = two_level_model(n=8, h=1.0)
    tg = TimeGrid(0.0, 0.5, 40)
    field = DrivingField(modes=(), time_grid=tg)
    for build in (induced_current_order1, induced_current_order2, induced_current_order3):
        ic = build(model, field)
        assert np.all(ic.volume_integral() == 0.0)
        assert np.all(ic.at(tg.n_t - 1).values == 0.0)


def test_order1_uniform_matches_hand_formula():
    # resonant uniform drive; the chain's trapezoid telescopes to the same
    # dressed cumulative sum the hand evaluation below uses
    model = two_level_model()
    tg = TimeGrid(0.0, 0.05, 1601)
    amp, w = 1e-3, 0.1
    field = pulse_field(tg, amp, omega=w, t_center=40.0, t_width=6.0)
    vol = induced_current_order1(model, field).volume_integral()[:, 2]

    env = field.modes[0].envelope
    t = tg.times
    e_z = -amp * env.dvalue(t) * np.cos(w * t) + amp * env.value(t) * w * np.sin(w * t)
    b_z = np.zeros_like(e_z)
    b_z[1:] = np.cumsum(0.5 * tg.dt * (e_z[1:] + e_z[:-1]))

    u01 = model.u[0, 1, 2]
    w10 = model.omega[1, 0]
    # rho01(t) = i u01 exp(i w10 t) * cumtrapz(exp(-i w10 tau) B(tau))
    integrand = np.exp(-1j * w10 * t) * b_z
    acc = np.zeros_like(integrand)
    acc[1:] = np.cumsum(0.5 * tg.dt * (integrand[1:] + integrand[:-1]))
    rho01 = 1j * u01 * np.exp(1j * w10 * t) * acc
    hand = 2.0 * np.real(rho01 * model.u[1, 0, 2]) + model.electron_count * b_z

    scale = np.max(np.abs(hand))
    assert np.max(np.abs(vol - hand)) < 1e-10 * scale


def test_order1_volume_integral_is_dipole_derivative():
    # integral of J(1) equals d<mu>(1)/dt when the dipole-velocity sum rule
    # is saturated; five-point stencil keeps the differentiation error tiny
    model = two_level_model()

    def deviation(dt: float, n_t: int) -> tuple[float, float]:
        tg = TimeGrid(0.0, dt, n_t)
        field = pulse_field(tg, 2e-3, omega=0.1, t_center=40.0, t_width=6.0)
        ic = induced_current_order1(model, field)
        vol_z = ic.volume_integral()[:, 2].real
        mu_t = np.einsum("tab,ba->t", ic.rho, model.mu[:, :, 2]).real
        d = np.zeros_like(mu_t)
        d[2:-2] = (-mu_t[4:] + 8 * mu_t[3:-1] - 8 * mu_t[1:-3] + mu_t[:-4]) / (12 * dt)
        return np.max(np.abs(vol_z[2:-2] - d[2:-2])), np.max(np.abs(vol_z))

    err, scale = deviation(0.0125, 6401)
    assert err < 1e-6 * scale
    coarse, _ = deviation(0.05, 1601)
    assert 10.0 < coarse / err < 22.0  # second order in dt


def test_power_of_two_scaling_is_exact():
    model = two_level_model(n=8, h=1.0)
    tg = TimeGrid(0.0, 0.25, 240)
    kw = dict(omega=0.1, t_center=25.0, t_width=4.0, polarization=(1.0, 0.0, 0.0), q=(0.0, 0.0, 0.4))
    base = pulse_field(tg, 1e-3, **kw)
    doubled = base.scaled(2.0)
    for order, build in enumerate(
        (induced_current_order1, induced_current_order2, induced_current_order3), start=1
    ):
        v1 = build(model, base).volume_integral()
        v2 = build(model, doubled).volume_integral()
        assert np.array_equal(v2, 2.0**order * v1)


def test_causality_exact_zeros():
    model = two_level_model(n=8, h=1.0)
    tg = TimeGrid(0.0, 0.5, 120)
    field = pulse_field(tg, 1e-2, omega=0.1, t_center=40.0, t_width=5.0)
    onset = 40.0 - 6.0 * 5.0
    quiet = tg.times < onset - 1e-9
    assert np.count_nonzero(quiet) > 5
    for build in (induced_current_order1, induced_current_order2, induced_current_order3):
        ic = build(model, field)
        assert np.all(ic.volume_integral()[quiet] == 0.0)
        assert np.all(ic.at(int(np.max(np.nonzero(quiet)))).values == 0.0)


def test_real_driving_gives_real_current():
    model = two_level_model(n=8, h=1.0)
    tg = TimeGrid(0.0, 0.25, 300)
    field = pulse_field(
        tg, 5e-3, omega=0.12, t_center=30.0, t_width=4.0,
        polarization=(1.0, 0.0, 0.0), q=(0.0, 0.0, 0.4),
    )
    for build in (induced_current_order1, induced_current_order2, induced_current_order3):
        ic = build(model, field)
        vol = ic.volume_integral()
        assert np.max(np.abs(vol.imag)) < 1e-10 * np.max(np.abs(vol))
        snap = ic.at(200).values
        assert np.max(np.abs(snap.imag)) < 1e-10 * np.max(np.abs(snap))


def test_uniform_drive_kills_second_order_integral():
    model = two_level_model(n=8, h=1.0)
    tg = TimeGrid(0.0, 0.25, 300)
    field = pulse_field(tg, 1.0, omega=0.1, t_center=30.0, t_width=4.0)
    v1 = induced_current_order1(model, field).volume_integral()
    v2 = induced_current_order2(model, field).volume_integral()
    assert np.max(np.abs(v2)) < 1e-12 * np.max(np.abs(v1))


def test_gauge_invariance_every_order():
    model = two_level_model(n=8, h=1.0)
    tg = TimeGrid(0.0, 0.25, 280)
    field = pulse_field(
        tg, 4e-3, omega=0.1, t_center=30.0, t_width=4.0,
        polarization=(0.0, 0.0, 1.0), q=(0.5, 0.0, 0.0),
    )
    phi = SpaceTimeProduct(
        kind="sinusoidal",
        amplitude=0.3,
        svec=np.array([2.0 * np.pi / 8.0, 0.0, 0.0]),
        theta_r=0.4,
        omega_t=0.07,
        theta_t=0.2,
    )
    gauged = apply_gauge(field, phi)
    for build in (induced_current_order1, induced_current_order2, induced_current_order3):
        va = build(model, field).volume_integral()
        vb = build(model, gauged).volume_integral()
        assert np.max(np.abs(va - vb)) < 1e-9 * np.max(np.abs(va))
        sa = build(model, field).at(150).values
        sb = build(model, gauged).at(150).values
        assert np.max(np.abs(sa - sb)) < 1e-9 * np.max(np.abs(sa))


def test_overlap_matches_pointwise_contraction():
    model = two_level_model(n=8, h=1.0)
    tg = TimeGrid(0.0, 0.25, 200)
    field = pulse_field(
        tg, 5e-3, omega=0.1, t_center=22.0, t_width=3.5,
        polarization=(0.0, 0.0, 1.0), q=(0.5, 0.0, 0.0),
    )
    e_series = compile_E_series(field, model.grid)
    ic = induced_current_order2(model, field)
    ov = ic.overlap_with(e_series)
    for step in (120, 150, 190):
        direct = np.sum(e_series.at(step).values * ic.at(step).values) * model.grid.cell_volume
        assert abs(ov[step] - direct) < 1e-12 * max(1.0, abs(direct))


def test_hilbert_and_superoperator_routes_agree():
    model = two_level_model(dephasing=0.003, n=8, h=1.0)
    tg = TimeGrid(0.0, 0.25, 160)
    field = pulse_field(
        tg, 6e-3, omega=0.1, t_center=18.0, t_width=3.0,
        polarization=(0.0, 0.0, 1.0), q=(0.5, 0.0, 0.0),
    )
    from nlres.fields import compute_A_inv

    b = compute_A_inv(field, model.grid)
    v = couple_current_series(model, b)
    raw_q = couple_square_series(model, b)
    q = ProjectedCoupling(raw_q.label, tg, A2_VERTEX * raw_q.matrices)
    u_z = np.broadcast_to(model.u[:, :, 2], (tg.n_t, 2, 2))
    obs = ProjectedCoupling("u_z", tg, u_z)
    s = -1j

    sup = {
        1: s * superoperator_nested_expectation(model, obs, [v]),
        2: s**2 * superoperator_nested_expectation(model, obs, [v, v])
        + s * superoperator_nested_expectation(model, obs, [q]),
        3: s**3 * superoperator_nested_expectation(model, obs, [v, v, v])
        + s**2 * superoperator_nested_expectation(model, obs, [v, q])
        + s**2 * superoperator_nested_expectation(model, obs, [q, v]),
    }
    rho = density_corrections(model, field, 3)
    for order in (1, 2, 3):
        para = np.einsum("tab,ba->t", rho[order], model.u[:, :, 2])
        scale = np.max(np.abs(para))
        assert np.max(np.abs(para - sup[order])) < 1e-12 * scale


# ---- kernel probe ------------------------------------------------------------


def test_family_tables_are_frozen():
    one = response_families(1)
    two = response_families(2)
    three = response_families(3)
    assert [len(one), len(two), len(three)] == [2, 3, 5]
    for fams in (one, two, three):
        assert fams[0].regular and not any(f.regular for f in fams[1:])
    assert one[0].prefactor == -1j and one[1].prefactor == 1.0
    assert sorted((f.prefactor for f in two), key=lambda z: (z.real, z.imag)) == [
        -1.0,
        -1j,
        -0.5j,
    ]
    assert sorted((f.prefactor for f in three), key=lambda z: (z.real, z.imag)) == [
        -1.0,
        -0.5,
        -0.5,
        -0.5j,
        1j,
    ]
    assert len(one[1].collapses) == 3
    assert len(three[-1].collapses) == 5


def test_kernel_equal_point_antisymmetry():
    model = two_level_model(n=8, h=1.0)
    p = int(np.argmax(np.abs(model.current[0, 1, 2])))
    value, fams = zeta_kernel_regular(model, 1, (2, p, 3.0), [(2, p, 3.0)])
    assert abs(value) < 1e-13 * np.linalg.norm(model.current[:, :, 2, p]) ** 2
    assert len(fams) == 2


def test_kernel_simplex_ordering():
    model = two_level_model(n=8, h=1.0)
    p = int(np.argmax(np.abs(model.current[0, 1, 2])))
    late, _ = zeta_kernel_regular(model, 1, (2, p, 1.0), [(2, p, 2.0)])
    assert late == 0.0
    swapped, _ = zeta_kernel_regular(model, 2, (2, p, 5.0), [(2, p, 3.0), (2, p, 1.0)])
    assert swapped == 0.0
    ok, _ = zeta_kernel_regular(model, 2, (2, p, 5.0), [(0, p, 1.0), (2, p, 3.0)])
    assert isinstance(ok, complex)


def test_kernel_integrates_to_chain_current():
    model = two_level_model(n=6, h=1.0)
    tg = TimeGrid(0.0, 0.5, 61)
    field = pulse_field(tg, 2e-2, omega=0.1, t_center=18.0, t_width=3.0)
    ic = induced_current_order1(model, field)

    env = field.modes[0].envelope
    t = tg.times
    w, amp = 0.1, 2e-2
    e_z = -amp * env.dvalue(t) * np.cos(w * t) + amp * env.value(t) * w * np.sin(w * t)
    b_z = np.zeros_like(e_z)
    b_z[1:] = np.cumsum(0.5 * tg.dt * (e_z[1:] + e_z[:-1]))

    p_obs = int(np.argmax(np.abs(model.current[0, 1, 2])))
    dv = model.grid.cell_volume
    step = 55
    t_obs = t[step]
    acc = 0.0 + 0.0j
    for j in range(step + 1):
        weight = tg.dt if 0 < j < step else 0.5 * tg.dt
        row = sum(
            zeta_kernel_regular(model, 1, (2, p_obs, t_obs), [(2, p1, t[j])])[0]
            for p1 in range(model.grid.n_points)
        )
        acc += weight * b_z[j] * row * dv
    para = np.einsum("ab,bap->p", ic.rho[step], model.current[:, :, 2, :])[p_obs]
    assert abs(acc - para) < 1e-10 * abs(para)


def test_kernel_and_order_validation():
    model = two_level_model(n=8, h=1.0)
    with pytest.raises(ValidationFailure):
        response_families(4)
    with pytest.raises(ValidationFailure):
        zeta_kernel_regular(model, 2, (2, 0, 1.0), [(2, 0, 0.5)])
    with pytest.raises(ValidationFailure):
        zeta_kernel_regular(model, 1, (5, 0, 1.0), [(2, 0, 0.5)])
    with pytest.raises(ValidationFailure):
        density_corrections(model, DrivingField(modes=(), time_grid=TimeGrid(0.0, 0.5, 4)), 4)
