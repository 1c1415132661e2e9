import numpy as np
import pytest

from maflow.elliptic import linearization_check, solve
from maflow.flow import StepControl, run
from maflow.grid import ScalarField, TorusGrid, integrate, volume_weights
from maflow.monitors import HolderConfig, MonitorSuite
from maflow.presets import (
    ForcingPreset,
    MetricPreset,
    build_forcing,
    build_metric,
    random_band_limited,
)

from conftest import field_from


def test_constant_forcing_gives_minus_c(grid1, nonkahler1):
    F = ScalarField(grid1, np.full(grid1.shape, 0.8))
    sol = solve(nonkahler1, F, tol=1e-12)
    # log-ratio = F + b with phi = 0 forces b = -c
    assert sol.b == pytest.approx(-0.8, abs=1e-12)
    assert np.max(np.abs(sol.phi_tilde_inf.values)) <= 1e-12
    assert sol.newton_iters == 0


def test_manufactured_solution(grid1, nonkahler1):
    F, exact = build_forcing(grid1, nonkahler1,
                             ForcingPreset("manufactured", amplitude=0.04,
                                           psi_kind="peaked"))
    sol = solve(nonkahler1, F, tol=1e-11)
    assert sol.residual_sup <= 1e-11
    assert np.max(np.abs(sol.phi_tilde_inf.values - exact.psi_tilde.values)) <= 1e-9
    assert sol.b == pytest.approx(exact.b, abs=1e-10)
    w = volume_weights(nonkahler1)
    assert abs(integrate(sol.phi_tilde_inf, w)) <= 1e-12


def test_solver_n2_self_certifies(grid2, nonkahler2):
    F = random_band_limited(grid2, 0.1, 1, seed=42)
    sol = solve(nonkahler2, F, tol=1e-10)
    assert sol.residual_sup <= 1e-10
    assert sol.newton_iters <= 15
    # cone membership of the solution
    from maflow.spectral import complex_hessian_values
    from maflow.grid import min_eig_field
    hess = complex_hessian_values(sol.phi_tilde_inf.values, grid2)
    assert float(np.min(min_eig_field(nonkahler2.mats + hess))) > 0


def test_b_identity_post_check(grid1, nonkahler1):
    from maflow.hermitian import log_det_ratio
    from maflow.spectral import complex_hessian_values
    from maflow.grid import integrate_values

    F = random_band_limited(grid1, 0.1, 2, seed=5)
    sol = solve(nonkahler1, F, tol=1e-11)
    w = volume_weights(nonkahler1)
    hess = complex_hessian_values(sol.phi_tilde_inf.values, grid1)
    ratio = log_det_ratio(nonkahler1.mats + hess, nonkahler1.mats)
    b_identity = integrate_values(ratio - F.values, w)
    assert abs(b_identity - sol.b) <= 1e-12


def test_uniqueness_two_initial_guesses(grid1, nonkahler1):
    tol = 1e-11
    F, _ = build_forcing(grid1, nonkahler1,
                         ForcingPreset("modes", amplitude=0.08, max_mode=2, seed=3))
    sol_zero = solve(nonkahler1, F, tol=tol)
    # second guess: flow output at mid-run
    suite = MonitorSuite(holder=HolderConfig(rng_seed=1, sample_pairs=2000))
    mid = run(nonkahler1, F, horizon=2.0, ctrl=StepControl(cfl_factor=0.4),
              monitors=suite)
    sol_flow = solve(nonkahler1, F, tol=tol, initial=mid.final.phi_tilde)
    assert np.max(np.abs(sol_zero.phi_tilde_inf.values
                         - sol_flow.phi_tilde_inf.values)) <= 10 * tol
    assert abs(sol_zero.b - sol_flow.b) <= 10 * tol


def test_linearization_check_constant_metric(grid1, flat1):
    phi = ScalarField(grid1, np.zeros(grid1.shape))
    direction = field_from(grid1, lambda c: np.cos(c[0]))
    err = linearization_check(flat1, phi, direction, h_fd=1e-5)
    assert err <= 1e-6


def test_linearization_check_constant_direction(grid1, nonkahler1):
    phi = ScalarField(grid1, np.zeros(grid1.shape))
    direction = ScalarField(grid1, np.full(grid1.shape, 2.0))
    err = linearization_check(nonkahler1, phi, direction, h_fd=1e-5)
    assert err <= 1e-12  # both sides vanish on constants


def test_linearization_check_random(grid2, nonkahler2):
    rng = np.random.default_rng(8)
    for _ in range(3):
        phi = random_band_limited(grid2, 0.08, 1, seed=int(rng.integers(1 << 30)))
        direction = random_band_limited(grid2, 1.0, 1, seed=int(rng.integers(1 << 30)))
        err = linearization_check(nonkahler2, phi, direction, h_fd=1e-5)
        assert err <= 1e-5


def test_flow_newton_agreement_small(grid1, nonkahler1):
    # miniature version of the oracle agreement: n=1, short horizon
    g = build_metric(TorusGrid(1, 32), MetricPreset("hermitian_nonkahler",
                                                    eps=0.2, scale=0.4))
    F, _ = build_forcing(g.grid, g, ForcingPreset("modes", amplitude=0.05,
                                                  max_mode=2, seed=9))
    suite = MonitorSuite(holder=HolderConfig(rng_seed=1, sample_pairs=2000))
    flow_res = run(g, F, horizon=16.0, ctrl=StepControl(cfl_factor=0.4), monitors=suite)
    newton = solve(g, F, tol=1e-11)
    gap = np.max(np.abs(flow_res.final.phi_tilde.values
                        - newton.phi_tilde_inf.values))
    assert gap <= 1e-5
