"""Acceptance criteria as executable checks.

Each criterion runs at its stated tolerance and reports measured values;
``run_criteria`` drives any subset and is shared by the CLI ``verify`` mode
and the acceptance test module.  The two reference runs are frozen here:

  run 1: n=1, N=64, Hermitian non-Kaehler metric, manufactured forcing from
         a band-limited potential, horizon 30.
  run 2: n=2, N=16, hermitian_nonkahler(0.3), seeded random band-limited
         forcing, horizon 20, compared against the Newton oracle.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .config import config_from_kv
from .elliptic import linearization_check
from .errors import NonPositiveU
from .grid import integrate_values, volume_weights
from .hermitian import frame_decompose, inverse_stack, normal_frame
from .monitors import (
    contraction_and_decay,
    envelope_fit_inverse_time,
    harnack_check,
    liyau_quantity,
    xi_surrogate,
)
from .runner import (
    execute_flow,
    execute_elliptic,
    fd_normal_frame_residual,
    random_normal_frame_instance,
)
from .spectral import laplacian_values

RUN1_KV = {
    "mode": "flow",
    "rng_seed": "11",
    "grid.n": "1",
    "grid.N": "64",
    "metric.preset": "hermitian_nonkahler",
    "metric.eps": "0.2",
    "metric.scale": "0.4",
    "forcing.kind": "manufactured",
    "forcing.amplitude": "0.04",
    "forcing.psi_kind": "peaked",
    "flow.horizon": "30",
    "step.cfl_factor": "0.4",
    "monitors.emit_dt": "0.05",
    "monitors.field_interval": "0.25",
}

RUN2_KV = {
    "mode": "flow",
    "rng_seed": "21",
    "grid.n": "2",
    "grid.N": "16",
    "metric.preset": "hermitian_nonkahler",
    "metric.eps": "0.3",
    "metric.scale": "0.35",
    "forcing.kind": "modes",
    "forcing.amplitude": "0.05",
    "forcing.max_mode": "2",
    "forcing.seed": "1",
    "flow.horizon": "20",
    "step.cfl_factor": "0.4",
    "monitors.field_interval": "0.5",
}


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: Dict[str, object] = field(default_factory=dict)
    runtime: float = 0.0

    def as_dict(self):
        return {
            "number": self.number,
            "name": self.name,
            "passed": self.passed,
            "measured": {k: _plain(v) for k, v in self.measured.items()},
            "runtime_s": self.runtime,
        }


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


class VerificationContext:
    """Caches the expensive shared runs across criteria."""

    def __init__(self):
        self._run1 = None
        self._run2 = None
        self._run2_newton = None

    def run1(self):
        if self._run1 is None:
            self._run1 = execute_flow(config_from_kv(dict(RUN1_KV)))
        return self._run1

    def run2(self):
        if self._run2 is None:
            self._run2 = execute_flow(config_from_kv(dict(RUN2_KV)))
        return self._run2

    def run2_newton(self):
        if self._run2_newton is None:
            kv = dict(RUN2_KV)
            kv["mode"] = "solve-elliptic"
            self._run2_newton = execute_elliptic(config_from_kv(kv))
        return self._run2_newton


def criterion_1(ctx) -> CriterionResult:
    """Manufactured-solution convergence of the flow."""
    art = ctx.run1()
    w = volume_weights(art.g)
    final = art.result.final
    err = float(np.max(np.abs(final.phi_tilde.values - art.exact.psi_tilde.values)))
    b_meas = integrate_values(final.dphi_dt.values, w)
    b_err = abs(b_meas - art.exact.b)
    passed = err <= 1e-6 and b_err <= 1e-8 and art.wall_time <= 60.0
    return CriterionResult(1, "manufactured-solution convergence", passed, {
        "phi_tilde_sup_error": err, "tolerance": 1e-6,
        "b_error": b_err, "b_tolerance": 1e-8,
        "flow_wall_time_s": art.wall_time, "runtime_budget_s": 60.0,
    })


def criterion_2(ctx) -> CriterionResult:
    """Flow-Newton oracle agreement."""
    art = ctx.run2()
    newton = ctx.run2_newton()
    w = volume_weights(art.g)
    final = art.result.final
    err = float(np.max(np.abs(final.phi_tilde.values
                              - newton.solution.phi_tilde_inf.values)))
    b_flow = integrate_values(final.dphi_dt.values, w)
    b_err = abs(b_flow - newton.solution.b)
    total = art.wall_time + newton.wall_time
    passed = err <= 1e-5 and b_err <= 1e-6 and total <= 600.0
    return CriterionResult(2, "flow-Newton oracle agreement", passed, {
        "phi_tilde_gap": err, "tolerance": 1e-5,
        "b_gap": b_err, "b_tolerance": 1e-6,
        "newton_iters": newton.solution.newton_iters,
        "newton_residual": newton.solution.residual_sup,
        "wall_time_s": total, "runtime_budget_s": 600.0,
    })


def criterion_3(ctx) -> CriterionResult:
    """Exponential decay and unit-time contraction in run 1."""
    art = ctx.run1()
    delta, fit = contraction_and_decay(art.result.series.records)
    passed = (fit.eta > 0) and (fit.r_squared >= 0.99) and (0 <= delta < 1) \
        and not fit.degenerate
    return CriterionResult(3, "exponential decay and contraction", passed, {
        "eta": fit.eta, "r_squared": fit.r_squared, "delta": delta,
        "fit_window": list(fit.window), "fit_samples": fit.n_samples,
    })


def criterion_4(ctx) -> CriterionResult:
    """Maximum principle and normalization at every snapshot of both runs."""
    measured = {}
    passed = True
    for tag, art in (("run1", ctx.run1()), ("run2", ctx.run2())):
        sup_f = float(np.max(np.abs(art.forcing.values)))
        recs = art.result.series.records
        worst_mp = max(r.sup_dphidt for r in recs) - sup_f
        worst_mean = max(abs(r.mean_phitilde) for r in recs)
        measured[f"{tag}_max_principle_slack"] = worst_mp
        measured[f"{tag}_mean_phitilde_max"] = worst_mean
        passed = passed and worst_mp <= 1e-8 and worst_mean <= 1e-12
    measured["mp_tolerance"] = 1e-8
    measured["mean_tolerance"] = 1e-12
    return CriterionResult(4, "maximum principle / normalization", passed, measured)


def criterion_5(ctx) -> CriterionResult:
    """Uniform parabolicity witnesses and the trace identity."""
    measured = {}
    passed = True
    for tag, art in (("run1", ctx.run1()), ("run2", ctx.run2())):
        series = art.result.series
        recs = series.records
        eig_min = min(r.eig_min for r in recs)
        t_att = series.running_max_time("trace_max")
        horizon = art.config.horizon
        final = art.result.final
        g_inv = inverse_stack(art.g.mats)
        lap = laplacian_values(final.phi_tilde.values, art.g.grid, g_inv)
        n = art.g.grid.complex_dim
        ident = abs((recs[-1].trace_max - n) - float(np.max(lap)))
        measured[f"{tag}_eig_min"] = eig_min
        measured[f"{tag}_trace_attained_t"] = t_att
        measured[f"{tag}_trace_identity_residual"] = ident
        passed = passed and eig_min >= 0.01 and t_att <= horizon / 2 \
            and np.isfinite(recs[-1].trace_max) and ident <= 1e-10
    return CriterionResult(5, "uniform parabolicity witnesses", passed, measured)


def criterion_6(ctx) -> CriterionResult:
    """Hoelder boundedness witness on run 2."""
    art = ctx.run2()
    recs = art.result.series.records
    times = np.array([r.t for r in recs])
    hol = np.array([r.holder_seminorm for r in recs])
    horizon = art.config.horizon
    at_half = float(hol[int(np.argmin(np.abs(times - horizon / 2)))])
    at_end = float(hol[-1])
    growth = (at_end - at_half) / at_half if at_half > 0 else np.inf
    passed = at_half > 0 and growth <= 0.05
    return CriterionResult(6, "Hoelder seminorm boundedness", passed, {
        "estimate_at_half_horizon": at_half,
        "estimate_at_horizon": at_end,
        "relative_growth": growth, "growth_tolerance": 0.05,
        "alpha": art.config.monitors.holder.alpha,
        "epsilon": art.config.monitors.holder.epsilon,
    })


def criterion_7(ctx) -> CriterionResult:
    """Rank-one frame decomposition on 1000 seeded random PD matrices."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(2027)
    lo, hi = 0.2, 5.0
    worst_recon = 0.0
    min_beta = np.inf
    min_diag_beta = np.inf
    frames_ok = True
    for _ in range(1000):
        evs = rng.uniform(lo, hi, size=2)
        q, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
        a = (q * evs) @ q.conj().T
        a = 0.5 * (a + a.conj().T)
        fd = frame_decompose(a, (lo, hi))
        worst_recon = max(worst_recon, float(np.max(np.abs(fd.reconstruct() - a))))
        min_beta = min(min_beta, float(np.min(fd.betas)))
        min_diag_beta = min(min_diag_beta, float(fd.betas[0]), float(fd.betas[1]))
        e1_ok = np.allclose(fd.frame[0], [1, 0]) and np.allclose(fd.frame[1], [0, 1])
        frames_ok = frames_ok and e1_ok
    elapsed = time.perf_counter() - t0
    # positivity floor: delta = reserve fraction of lambda (0.1 * 0.2), margin 5e-3
    floor = 0.1 * lo * 5e-3
    passed = (worst_recon <= 1e-12 and min_beta >= floor and frames_ok
              and elapsed <= 5.0)
    return CriterionResult(7, "rank-one frame decomposition", passed, {
        "matrices": 1000, "worst_reconstruction": worst_recon,
        "reconstruction_tolerance": 1e-12,
        "min_beta": min_beta, "beta_floor": floor,
        "min_standard_basis_beta": min_diag_beta,
        "frame_contains_basis": frames_ok,
        "runtime_s": elapsed, "runtime_budget_s": 5.0,
    })


def criterion_8(ctx) -> CriterionResult:
    """Normal-frame construction on 100 seeded random instances."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(509)
    worst_identity = 0.0
    worst_offdiag = 0.0
    worst_fd = 0.0
    for _ in range(100):
        g0, dg0, hess0 = random_normal_frame_instance(rng)
        nf = normal_frame(g0, dg0, hess0)
        lin = nf.linear_map
        gm = lin.T @ g0 @ np.conj(lin)
        worst_identity = max(worst_identity, float(np.max(np.abs(gm - np.eye(2)))))
        h1 = lin.T @ hess0 @ np.conj(lin)
        worst_offdiag = max(worst_offdiag, abs(h1[0, 1]))
        worst_fd = max(worst_fd, fd_normal_frame_residual(g0, dg0, nf, h=1e-3))
    elapsed = time.perf_counter() - t0
    passed = (worst_identity <= 1e-10 and worst_offdiag <= 1e-10
              and worst_fd <= 1e-6 and elapsed <= 10.0)
    return CriterionResult(8, "holomorphic normal frame", passed, {
        "instances": 100,
        "worst_metric_identity": worst_identity,
        "worst_hessian_offdiag": worst_offdiag,
        "worst_fd_diag_derivative": worst_fd,
        "fd_tolerance": 1e-6, "h_fd": 1e-3,
        "runtime_s": elapsed, "runtime_budget_s": 10.0,
    })


def criterion_9(ctx) -> CriterionResult:
    """Newton linearization against central differences, 20 seeded instances."""
    from .presets import MetricPreset, build_metric, random_band_limited
    from .grid import TorusGrid

    rng = np.random.default_rng(93)
    worst = 0.0
    for k in range(20):
        n = 1 if k % 2 == 0 else 2
        grid = TorusGrid(n, 16 if n == 1 else 8)
        preset = MetricPreset("hermitian_nonkahler", eps=0.25, scale=1.0)
        g = build_metric(grid, preset)
        phi = random_band_limited(grid, 0.08, 2, int(rng.integers(1 << 30)))
        direction = random_band_limited(grid, 1.0, 2, int(rng.integers(1 << 30)))
        err = linearization_check(g, phi, direction, h_fd=1e-5)
        worst = max(worst, err)
    passed = worst <= 1e-5
    return CriterionResult(9, "Newton linearization check", passed, {
        "instances": 20, "worst_relative_error": worst, "tolerance": 1e-5,
    })


def criterion_10(ctx) -> CriterionResult:
    """Li-Yau envelope and Harnack inequality on run 1's unit-window surrogates."""
    art = ctx.run1()
    series = art.result.series
    snaps = series.field_snaps
    recs = art.result.series.records
    times_all = np.array([r.t for r in recs])
    osc_all = np.array([r.osc_u for r in recs])

    windows = []
    horizon = art.config.horizon
    for m in range(1, int(horizon)):
        osc_at_base = float(np.interp(m - 1, times_all, osc_all))
        if osc_at_base >= 1e-10:
            windows.append(m)
    nonpositive = 0
    env_t, env_v = [], []
    harnack_ok = True
    harnack_consts = []
    for m in windows:
        rel_t, fields = xi_surrogate(snaps, m)
        gpinvs = [inverse_stack(series.gprime_at(_find_snap(snaps, m - 1 + rt)))
                  for rt in rel_t]
        try:
            t_int, vals = liyau_quantity(
                [float(r) for r in rel_t], fields, gpinvs, art.g.grid,
                alpha_ly=art.config.monitors.alpha_ly, t_origin=0.0)
            env_t.extend(t_int.tolist())
            env_v.extend(vals.tolist())
            hr = harnack_check([float(r) for r in rel_t], fields, 0.5, 1.0)
            if not (hr.verifiable and hr.constants is not None
                    and all(np.isfinite(hr.constants))):
                harnack_ok = False
            else:
                harnack_consts.append(hr.constants)
        except NonPositiveU:
            nonpositive += 1
    c1 = c2 = float("nan")
    envelope_holds = False
    if env_t:
        c1, c2 = envelope_fit_inverse_time(np.array(env_t), np.array(env_v))
        envelope_holds = bool(np.all(
            np.array(env_v) <= c1 + c2 / np.array(env_t) + 1e-12))
    passed = (nonpositive == 0 and len(windows) >= 3 and envelope_holds
              and np.isfinite(c1) and np.isfinite(c2) and harnack_ok)
    return CriterionResult(10, "Li-Yau / Harnack diagnostics", passed, {
        "windows": len(windows), "nonpositive_triggers": nonpositive,
        "envelope_C1": c1, "envelope_C2": c2, "envelope_holds": envelope_holds,
        "harnack_windows_verified": len(harnack_consts),
        "harnack_C_first": list(harnack_consts[0]) if harnack_consts else None,
    })


def _find_snap(snaps, t):
    for s in snaps:
        if abs(s.t - t) <= 1e-9:
            return s
    raise KeyError(f"no field snapshot at t = {t}")


def criterion_11(ctx) -> CriterionResult:
    """Byte-identical CSV and JSON on repeating run 2."""
    from .io import _json_default
    import json

    art = ctx.run2()
    repeat = execute_flow(config_from_kv(dict(RUN2_KV)))
    csv_same = art.csv_text == repeat.csv_text
    json_a = json.dumps(art.summary, indent=2, default=_json_default)
    json_b = json.dumps(repeat.summary, indent=2, default=_json_default)
    # wall-clock independent payloads only
    passed = csv_same and json_a == json_b
    return CriterionResult(11, "determinism (byte-identical artifacts)", passed, {
        "csv_identical": csv_same, "json_identical": json_a == json_b,
        "csv_bytes": len(art.csv_text),
    })


CRITERIA: Dict[int, Callable] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
    5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8,
    9: criterion_9, 10: criterion_10, 11: criterion_11,
}


def run_criteria(numbers: Optional[List[int]] = None,
                 ctx: Optional[VerificationContext] = None) -> List[CriterionResult]:
    ctx = ctx or VerificationContext()
    selected = sorted(numbers) if numbers else sorted(CRITERIA)
    out = []
    for k in selected:
        t0 = time.perf_counter()
        res = CRITERIA[k](ctx)
        res.runtime = time.perf_counter() - t0
        out.append(res)
    return out
