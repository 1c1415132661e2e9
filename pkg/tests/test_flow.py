import numpy as np
import pytest

from maflow.errors import PositivityViolation, StepFailure, TailAlarm
from maflow.flow import StepControl, cfl_timestep, flow_rhs, make_state, run, step
from maflow.grid import (
    MetricField,
    ScalarField,
    TorusGrid,
    integrate_values,
    volume_weights,
)
from maflow.monitors import HolderConfig, MonitorSuite
from maflow.presets import ForcingPreset, MetricPreset, build_forcing, build_metric

from conftest import field_from


def small_suite(**kw):
    kw.setdefault("holder", HolderConfig(rng_seed=5, sample_pairs=2000))
    return MonitorSuite(**kw)


def test_flow_rhs_zero_phi(grid1, nonkahler1):
    F = field_from(grid1, lambda c: np.cos(c[0]))
    rhs, gprime = flow_rhs(np.zeros(grid1.shape), nonkahler1, F.values)
    assert np.max(np.abs(rhs + F.values)) == 0.0
    assert np.max(np.abs(gprime - nonkahler1.mats)) == 0.0


def test_flow_rhs_constant_in_time(grid1, nonkahler1):
    # spatially constant phi has zero Hessian: rhs = -F for any constant
    F = ScalarField(grid1, np.full(grid1.shape, 0.3))
    for const in (0.0, -0.9, 2.5):
        rhs, _ = flow_rhs(np.full(grid1.shape, const), nonkahler1, F.values)
        assert np.max(np.abs(rhs + 0.3)) <= 1e-14


def test_flow_rhs_manufactured_zero(grid1, nonkahler1):
    F, exact = build_forcing(grid1, nonkahler1,
                             ForcingPreset("manufactured", amplitude=0.04,
                                           psi_kind="peaked"))
    rhs, _ = flow_rhs(exact.psi.values, nonkahler1, F.values)
    assert np.max(np.abs(rhs - exact.b)) <= 1e-13


def test_flow_rhs_positivity_error_carries_index(grid1):
    g = build_metric(grid1, MetricPreset("flat"))
    # Hess(5 cos x) dips to -1.25, deep enough to leave the cone g = 1
    phi = field_from(grid1, lambda c: 5.0 * np.cos(c[0])).values
    with pytest.raises(PositivityViolation) as exc:
        flow_rhs(phi, g, np.zeros(grid1.shape))
    assert exc.value.index is not None


def test_step_constant_forcing_exact(grid1, nonkahler1):
    w = volume_weights(nonkahler1)
    F = ScalarField(grid1, np.full(grid1.shape, 0.7))
    ctrl = StepControl()
    state = make_state(nonkahler1, F, w)
    for _ in range(20):
        state = step(state, ctrl, nonkahler1, F, w)
    assert np.max(np.abs(state.phi.values + 0.7 * state.t)) <= 1e-12
    assert np.max(np.abs(state.phi_tilde.values)) <= 1e-12
    assert state.step_count == 20


def test_step_halving_on_near_degenerate_metric():
    # metric floor at 2 eps_pd: a strong forcing Hessian trips the guard,
    # dt halvings are recorded, and the step still completes
    grid = TorusGrid(1, 16)
    eps_pd = 1e-6
    mats = np.full(grid.shape + (1, 1), 2 * eps_pd, dtype=complex)
    g = MetricField(grid, mats, lambda_floor=1e-7)
    w = volume_weights(g)
    F = field_from(grid, lambda c: 1e4 * np.cos(c[0]))
    ctrl = StepControl(eps_pd=eps_pd, retry_limit=40)
    state = make_state(g, F, w, eps_pd=0.0)
    stats = {}
    new = step(state, ctrl, g, F, w, stats=stats)
    assert stats.get("halvings", 0) >= 1
    assert new.t > state.t


def test_step_failure_after_retry_limit():
    grid = TorusGrid(1, 16)
    eps_pd = 1e-6
    mats = np.full(grid.shape + (1, 1), 2 * eps_pd, dtype=complex)
    g = MetricField(grid, mats, lambda_floor=1e-7)
    w = volume_weights(g)
    F = field_from(grid, lambda c: 1e4 * np.cos(c[0]))
    # dt_min too large to allow rescue halvings
    ctrl = StepControl(eps_pd=eps_pd, retry_limit=3, dt_min=1e-8, dt_max=1e-4,
                       cfl_factor=1.0)
    state = make_state(g, F, w, eps_pd=0.0)
    with pytest.raises(StepFailure):
        step(state, ctrl, g, F, w)


def test_cfl_respects_dt_max(grid1, flat1):
    w = volume_weights(flat1)
    F = ScalarField(grid1, np.zeros(grid1.shape))
    state = make_state(flat1, F, w)
    assert cfl_timestep(state, StepControl(dt_max=1e-3)) == pytest.approx(1e-3)
    dt = cfl_timestep(state, StepControl(dt_max=10.0, cfl_factor=0.2))
    assert dt == pytest.approx(0.2 * grid1.spacing ** 2 / 1.0, rel=1e-12)


def test_run_zero_forcing_stationary(grid1, nonkahler1):
    F = ScalarField(grid1, np.zeros(grid1.shape))
    res = run(nonkahler1, F, horizon=1.0, ctrl=StepControl(), monitors=small_suite())
    assert np.max(np.abs(res.final.phi.values)) == 0.0
    recs = res.series.records
    assert all(r.sup_dphidt == 0.0 for r in recs)
    assert all(abs(r.trace_max - 1.0) <= 1e-12 for r in recs)
    assert all(abs(r.eig_min - 1.0) <= 1e-12 for r in recs)
    # Q = log n + 1 everywhere for phi == 0
    assert all(abs(r.Q_max - (np.log(1.0) + 1.0)) <= 1e-12 for r in recs)


def test_run_emission_clock_and_cache_coherence(grid1, nonkahler1):
    F, _ = build_forcing(grid1, nonkahler1,
                         ForcingPreset("modes", amplitude=0.05, max_mode=2, seed=4))
    res = run(nonkahler1, F, horizon=1.0, ctrl=StepControl(cfl_factor=0.4),
              monitors=small_suite())
    ts = [r.t for r in res.series.records]
    assert ts == pytest.approx(list(np.arange(0, 1.05, 0.1)), abs=1e-12)
    final = res.final
    rhs, gprime = flow_rhs(final.phi.values, nonkahler1, F.values)
    assert np.max(np.abs(final.dphi_dt.values - rhs)) <= 1e-12
    assert np.max(np.abs(final.gprime - gprime)) <= 1e-12
    w = volume_weights(nonkahler1)
    assert abs(integrate_values(final.phi_tilde.values, w)) <= 1e-12


def test_run_semigroup_restart(grid1, nonkahler1):
    F, _ = build_forcing(grid1, nonkahler1,
                         ForcingPreset("modes", amplitude=0.05, max_mode=2, seed=4))
    ctrl = StepControl(cfl_factor=0.4)
    direct = run(nonkahler1, F, horizon=2.0, ctrl=ctrl, monitors=small_suite())
    first = run(nonkahler1, F, horizon=1.0, ctrl=ctrl, monitors=small_suite())
    resumed = run(nonkahler1, F, horizon=2.0, ctrl=ctrl, monitors=small_suite(),
                  initial_state=first.final)
    gap = np.max(np.abs(resumed.final.phi.values - direct.final.phi.values))
    assert gap <= 1e-9


def test_run_comparison_principle(grid1, nonkahler1):
    # F1 <= F2 pointwise implies phi1 >= phi2 at matched times
    w = volume_weights(nonkahler1)
    F1 = field_from(grid1, lambda c: 0.05 * np.cos(c[0]))
    F2 = ScalarField(grid1, F1.values + 0.05 * (1.0 + np.cos(grid1.axis_coordinates()[1])))
    ctrl = StepControl(cfl_factor=1.0, dt_max=2e-3)  # dt_max binds: equal step sequences
    r1 = run(nonkahler1, F1, horizon=1.0, ctrl=ctrl, monitors=small_suite())
    r2 = run(nonkahler1, F2, horizon=1.0, ctrl=ctrl, monitors=small_suite())
    assert np.min(r1.final.phi.values - r2.final.phi.values) >= -1e-8


def test_run_max_principle_and_oscillation_decay(grid1, nonkahler1):
    F, _ = build_forcing(grid1, nonkahler1,
                         ForcingPreset("modes", amplitude=0.08, max_mode=2, seed=12))
    res = run(nonkahler1, F, horizon=3.0, ctrl=StepControl(cfl_factor=0.4),
              monitors=small_suite())
    recs = res.series.records
    sup_f = float(np.max(np.abs(F.values)))
    assert recs[0].sup_dphidt == pytest.approx(sup_f, abs=1e-14)
    assert all(r.sup_dphidt <= sup_f + 1e-8 for r in recs)
    osc = [r.osc_u for r in recs]
    assert all(osc[i + 1] <= osc[i] + 1e-8 for i in range(len(osc) - 1))


def test_run_manufactured_convergence_small():
    # N = 16 genuinely under-resolves the log-det harmonics of this forcing
    # (the tail alarm fires there); N = 32 resolves them
    grid = TorusGrid(1, 32)
    g = build_metric(grid, MetricPreset("hermitian_nonkahler", eps=0.3, scale=0.4))
    F, exact = build_forcing(grid, g,
                             ForcingPreset("manufactured", amplitude=0.04,
                                           psi_kind="peaked"))
    res = run(g, F, horizon=12.0, ctrl=StepControl(cfl_factor=0.4),
              monitors=small_suite())
    err = np.max(np.abs(res.final.phi_tilde.values - exact.psi_tilde.values))
    assert err <= 1e-5
    osc = [r.osc_u for r in res.series.records]
    assert osc[-1] < 1e-4 * osc[0]


def test_run_tail_alarm():
    # an aliased forcing mode (beyond Nyquist resolution needs) keeps phi rough
    grid = TorusGrid(1, 8)
    g = build_metric(grid, MetricPreset("flat"))
    coords = grid.axis_coordinates()
    F = ScalarField(grid, np.broadcast_to(
        0.5 * np.cos(4 * coords[0]), grid.shape).copy())  # Nyquist mode at N=8
    with pytest.raises(TailAlarm):
        run(g, F, horizon=0.5, ctrl=StepControl(), monitors=small_suite())


def test_initial_condition_is_zero(grid1, nonkahler1):
    F, _ = build_forcing(grid1, nonkahler1, ForcingPreset("const", value=1.0))
    res = run(nonkahler1, F, horizon=0.2, ctrl=StepControl(), monitors=small_suite())
    first = res.series.records[0]
    assert first.t == 0.0
    assert first.sup_dphidt == pytest.approx(1.0, abs=1e-14)
