import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nskw.constitutive import PressureLaw, StressModel
from nskw.dynamics import InitialCondition, SimConfig, State, run
from nskw.entropy import (CSV_COLUMNS, DiagnosticsRecord, ReferencePair, b_app_integrands,
                          b_integrands, diagnostics, energy, error_b, gronwall_check,
                          gronwall_constant, gronwall_rhs, read_csv, reference_from_state,
                          references_from_snapshots, relative_entropy, residual_A1, residual_A2,
                          residual_A3, steady_reference, write_csv)
from nskw.fields import TWO_PI, make_grid
from nskw.lemmas import pressure_bound_constant

LAW2 = PressureLaw(1.0, 2.0, 1.0)


def sine_state(grid, amp=0.3, u_amp=0.2, t=0.0):
    x = grid.x[0]
    rho = 1 + amp * np.sin(TWO_PI * x)
    u = np.stack([u_amp * np.sin(TWO_PI * grid.x[j]) for j in range(grid.d)])
    return State(grid, rho, rho * u, t)


# -- energy --------------------------------------------------------------------------

def test_energy_at_rest_reference_density_is_zero():
    g = make_grid(2, 16)
    s = State(g, np.ones(g.shape), np.zeros((2,) + g.shape))
    assert energy(s, 1.0, LAW2) == 0.0


def test_energy_closed_form_kinetic_and_pressure():
    g = make_grid(1, 32)
    x = g.x[0]
    s = State(g, np.full(32, 2.0), 2.0 * np.sin(TWO_PI * x)[None])
    # kinetic 1/2 * 2 * 1/2, H(2) = 2 (2 - 1) for gamma = 2
    assert energy(s, 1.0, LAW2) == pytest.approx(0.5 + 2.0, abs=1e-13)


def test_energy_capillary_closed_form():
    g = make_grid(1, 64)
    x = g.x[0]
    # sqrt(rho) = 1 + a sin: 2 kappa int |d sqrt rho|^2 = kappa a^2 (2 pi)^2
    a = 0.2
    s = State(g, (1 + a * np.sin(TWO_PI * x)) ** 2, np.zeros((1, 64)))
    base = energy(s, 0.0, LAW2)
    assert energy(s, 1.0, LAW2) - base == pytest.approx(a**2 * TWO_PI**2, rel=1e-10)


def test_diagnostics_dissipations():
    g = make_grid(1, 64)
    cfg = SimConfig(kappa=0.5, eps=0.1, nu=0.2, stress=StressModel(mu=1.0))
    s = State(g, np.ones(64), np.sin(TWO_PI * g.x[0])[None])
    rec = diagnostics(s, cfg)
    # D = 2 pi cos, int D^2 = 2 pi^2, int D^4 = 3/8 (2 pi)^4
    assert rec.diss_S == pytest.approx(0.5 * TWO_PI**2, rel=1e-12)
    assert rec.diss_nu == pytest.approx(0.2 * 3 / 8 * TWO_PI**4, rel=1e-12)
    assert rec.diss_kw == 0 and rec.diss_p == 0
    assert rec.mass == pytest.approx(1.0) and rec.min_rho == 1.0
    assert rec.divu_inf == pytest.approx(TWO_PI)


# -- relative entropy --------------------------------------------------------------

@pytest.mark.parametrize("d", [1, 2])
def test_relative_entropy_zero_for_identical(d):
    g = make_grid(d, 32)
    s = sine_state(g)
    ref = ReferencePair(g, s.rho, s.velocity())
    assert abs(relative_entropy(s, ref, 0.7, PressureLaw(1.0, 1.4))) < 1e-15


def test_relative_entropy_gamma_two_closed_form():
    g = make_grid(1, 32)
    x = g.x[0]
    ref = ReferencePair(g, np.ones(32), np.zeros((1, 32)))
    s = State(g, np.full(32, 1.5), 1.5 * np.cos(TWO_PI * x)[None])
    # 1/2 * 1.5 * 1/2 + (0.5)^2
    assert relative_entropy(s, ref, 3.0, LAW2) == pytest.approx(0.375 + 0.25, abs=1e-14)


def test_relative_entropy_scales_quadratically():
    g = make_grid(2, 32)
    s = sine_state(g)
    ref = ReferencePair(g, s.rho, s.velocity())
    w = np.cos(TWO_PI * g.x[0])
    vals = []
    for delta in (1e-2, 5e-3):
        rho = s.rho + delta * w
        vals.append(relative_entropy(State(g, rho, rho * (s.velocity() + delta)), ref, 0.1,
                                     PressureLaw(1.0, 1.4)))
    assert np.log2(vals[0] / vals[1]) == pytest.approx(2.0, abs=0.01)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.1, 3.0), st.floats(0, 2))
def test_relative_entropy_nonnegative(seed, gamma, kappa):
    g = make_grid(1, 32)
    a = SimConfig(n=32, ic=InitialCondition("random", seed=seed)).initial_state()
    b = SimConfig(n=32, ic=InitialCondition("random", seed=seed + 1)).initial_state()
    ref = ReferencePair(g, b.rho, b.velocity())
    assert relative_entropy(a, ref, kappa, PressureLaw(1.0, gamma)) >= 0


# -- residuals -------------------------------------------------------------------

def test_residuals_vanish_on_constant_reference():
    g = make_grid(2, 16)
    ref = steady_reference(g, np.full(g.shape, 1.4), np.full((2,) + g.shape, 0.3),
                           StressModel(mu=1.0))
    assert np.max(np.abs(residual_A1(ref, LAW2, 1.0))) < 1e-13
    assert np.max(np.abs(residual_A2(ref))) < 1e-13
    assert np.max(np.abs(residual_A3(ref, LAW2))) < 1e-13


def test_residual_A1_steady_density_balances_pressure_and_korteweg():
    g = make_grid(1, 64)
    r = 1 + 0.3 * np.sin(TWO_PI * g.x[0])
    ref = steady_reference(g, r)
    from nskw.korteweg import korteweg_div_form_a
    expected = (g.gradient(LAW2.p(r)) - 0.5 * korteweg_div_form_a(g, r)) / r
    assert np.max(np.abs(residual_A1(ref, LAW2, 0.5) - expected)) < 1e-10


def test_residuals_require_derivatives():
    g = make_grid(1, 16)
    ref = ReferencePair(g, np.ones(16), np.zeros((1, 16)))
    for f in (lambda: residual_A1(ref, LAW2, 0.0), lambda: residual_A2(ref),
              lambda: residual_A3(ref, LAW2)):
        with pytest.raises(ValueError, match="time derivatives"):
            f()


def test_reference_from_solution_has_small_residuals():
    # an exact semi-discrete solution with eps = nu = 0 makes A1, A3 vanish
    cfg = SimConfig(n=64, kappa=0.1, stress=StressModel(mu=0.05), dealias=False)
    ref = reference_from_state(sine_state(cfg.grid), cfg)
    assert np.max(np.abs(residual_A1(ref, cfg.pressure, cfg.kappa))) < 1e-8
    assert np.max(np.abs(residual_A3(ref, cfg.pressure))) < 1e-8
    assert np.max(np.abs(residual_A2(ref))) < 1e-8


def test_reference_pair_rejects_nonpositive_density():
    g = make_grid(1, 16)
    with pytest.raises(ValueError):
        ReferencePair(g, np.zeros(16), np.zeros((1, 16)))


def test_references_from_snapshots_validation():
    g = make_grid(1, 16)
    s = sine_state(g)
    with pytest.raises(ValueError, match="three"):
        references_from_snapshots([s, s])
    with pytest.raises(ValueError, match="increasing"):
        references_from_snapshots([s, s, s])


def test_references_from_snapshots_linear_in_time():
    g = make_grid(1, 16)
    snaps = [State(g, np.full(16, 1 + t), np.zeros((1, 16)), t) for t in (0.0, 0.1, 0.3)]
    refs = references_from_snapshots(snaps)
    assert all(np.allclose(r.dr_dt, 1.0) for r in refs)


# -- b and b_app ---------------------------------------------------------------------

def test_b_sign_flips_with_perturbation():
    g = make_grid(1, 32)
    ref = steady_reference(g, 1 + 0.3 * np.sin(TWO_PI * g.x[0]))
    w = 0.01 * np.cos(TWO_PI * g.x[0])
    plus = b_integrands(State(g, ref.r, ref.r * w[None]), ref, 0.0, LAW2)
    minus = b_integrands(State(g, ref.r, -ref.r * w[None]), ref, 0.0, LAW2)
    assert abs(plus[0]) > 1e-4
    assert plus[0] == pytest.approx(-minus[0], rel=1e-12)
    # a steady reference at rest has A3 = 0
    assert plus[2] == 0 and minus[2] == 0


def test_error_b_zero_for_exact_pair():
    g = make_grid(1, 16)
    snaps = [State(g, np.ones(16), np.zeros((1, 16)), t) for t in (0.0, 0.1, 0.2)]
    refs = [steady_reference(g, np.ones(16)) for _ in snaps]
    for k, r in enumerate(refs):
        object.__setattr__(r, "t", snaps[k].t)
    assert np.all(error_b(snaps, refs, 1.0, LAW2) == 0)


def test_error_b_rejects_misaligned_times():
    g = make_grid(1, 16)
    snaps = [State(g, np.ones(16), np.zeros((1, 16)), t) for t in (0.0, 0.1)]
    refs = [steady_reference(g, np.ones(16)) for _ in snaps]
    with pytest.raises(ValueError, match="misaligned"):
        error_b(snaps, refs, 0.0, LAW2)


def test_b_app_exact_zero_without_regularization():
    g = make_grid(1, 16)
    s = sine_state(g)
    ref = ReferencePair(g, s.rho, s.velocity())
    assert np.all(b_app_integrands(s, ref, 0.0, 0.0, 1.0, 4.0) == 0)


def test_b_app_viscous_term_closed_form():
    g = make_grid(1, 64)
    u = np.sin(TWO_PI * g.x[0])[None]
    s = State(g, np.ones(64), u)
    ref = ReferencePair(g, np.ones(64), u)
    out = b_app_integrands(s, ref, 0.2, 0.0, 0.0, 4.0)
    assert out[0] == pytest.approx(0.2 * 3 / 8 * TWO_PI**4, rel=1e-12)
    assert np.all(out[1:] == 0)


def test_b_app_requires_pressure_with_eps():
    g = make_grid(1, 16)
    s = sine_state(g)
    with pytest.raises(ValueError, match="pressure"):
        b_app_integrands(s, ReferencePair(g, s.rho, s.velocity()), 0.0, 0.1, 0.0, 4.0)


# -- Gronwall ---------------------------------------------------------------------------

def test_gronwall_constant_zero_for_rest():
    g = make_grid(2, 16)
    assert gronwall_constant(steady_reference(g, np.ones(g.shape)), LAW2) == 0.0


def test_gronwall_constant_components():
    g = make_grid(1, 64)
    x = g.x[0]
    r = 1 + 0.2 * np.sin(TWO_PI * x)
    ref = ReferencePair(g, r, 0.1 * np.sin(TWO_PI * x)[None], stress=StressModel(mu=2.0))
    cp = pressure_bound_constant(LAW2, ref.r_min, ref.r_max)
    assert cp == pytest.approx(1.0)
    grad = 0.1 * TWO_PI
    assert gronwall_constant(ref, LAW2) == pytest.approx(0.5 * 2 * grad + grad + cp * grad, rel=1e-10)


def test_gronwall_constant_scales_with_velocity():
    g = make_grid(1, 32)
    r = np.ones(32)
    v = np.sin(TWO_PI * g.x[0])[None]
    c1 = gronwall_constant(ReferencePair(g, r, v), LAW2)
    c3 = gronwall_constant(ReferencePair(g, r, 3 * v), LAW2)
    assert c3 == pytest.approx(3 * c1)


def test_gronwall_rhs_pure_exponential():
    t = np.linspace(0, 1, 11)
    rhs = gronwall_rhs(t, 2.0, np.zeros(11), 0.5)
    assert np.allclose(rhs, 2.0 * np.exp(0.5 * t))


def test_gronwall_rhs_constant_b():
    # b = 1: 1 + C int_0^t e^{C(t-s)} ds = e^{Ct}
    t = np.linspace(0, 1, 2001)
    rhs = gronwall_rhs(t, 0.0, np.ones_like(t), 1.0)
    assert np.max(np.abs(rhs - np.exp(t))) < 1e-6


def test_gronwall_check_pass_and_fail():
    t = np.linspace(0, 1, 11)
    E = np.exp(0.3 * t)
    ok = gronwall_check(t, E, np.zeros(11), C=0.5)
    assert ok.passed and ok.min_margin == 0.0 and ok.C_min == pytest.approx(0.3, abs=1e-5)
    bad = gronwall_check(t, E, np.zeros(11), C=0.1)
    assert not bad.passed and bad.min_margin < 0


def test_gronwall_check_unattainable():
    t = np.linspace(0, 1, 11)
    E = np.where(t > 0, 1.0, 0.0)
    rep = gronwall_check(t, E, np.zeros(11), C=1.0)
    assert not rep.passed and math.isnan(rep.C_min)


# -- CSV -------------------------------------------------------------------------------

def test_csv_round_trip(tmp_path):
    cfg = SimConfig(n=16, kappa=0.1, eps=0.01, nu=0.01, t_end=0.001, dt=1e-4,
                    ic=InitialCondition("sine", rho_amp=0.2, u_amp=0.1))
    traj = run(cfg)
    path = tmp_path / "d.csv"
    write_csv(path, traj.records)
    assert path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    back = read_csv(path)
    np.testing.assert_array_equal([r.row() for r in back], [r.row() for r in traj.records])


def test_csv_bad_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        read_csv(p)


def test_record_dissipation_sum():
    rec = DiagnosticsRecord(0.0, 1.0, 1.0, 1.0, 2.0, 3.0, 4.0)
    assert rec.dissipation == 10.0 and math.isnan(rec.margin)
