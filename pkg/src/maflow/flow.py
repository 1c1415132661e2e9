"""Time integration of the parabolic complex Monge-Ampere flow.

The evolution is

    d(phi)/dt = log det(g + Hess phi) / det g  -  F,      phi(., 0) = 0,

integrated with explicit RK4 under a CFL-style step cap tied to the largest
trace of the inverse evolving metric.  Steps that leave the positive cone
(or graze it closer than eps_pd) are retried with halved dt.  Snapshots are
emitted on a fixed time clock (multiples of emit_dt, hit exactly by clipping
the last step), which keeps monitor windows aligned and reruns bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import PositivityViolation, StepFailure, TailAlarm
from .grid import (
    MetricField,
    ScalarField,
    TorusGrid,
    VolumeWeights,
    det_field,
    integrate_values,
    min_eig_field,
    volume_weights,
)
from .hermitian import trace_inverse
from .spectral import _laplace_symbol_r, complex_hessian_values, irfftn, rfftn, spectral_tail

TAIL_THRESHOLD = 1e-6


@dataclass(frozen=True)
class StepControl:
    """Step-size policy and positivity guard."""

    cfl_factor: float = 0.2
    dt_min: float = 1e-12
    dt_max: float = 0.1
    eps_pd: float = 1e-6
    retry_limit: int = 20

    def __post_init__(self):
        if not (0 < self.cfl_factor <= 1):
            raise ValueError("cfl_factor must lie in (0, 1]")
        if not (0 < self.dt_min <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_max")


@dataclass(frozen=True)
class FlowState:
    """Snapshot of the evolution with coherent caches.

    gprime is g + Hess(phi) at phi; dphi_dt is the flow right-hand side at
    phi; phi_tilde is phi minus its omega^n mean.
    """

    t: float
    phi: ScalarField
    phi_tilde: ScalarField
    gprime: np.ndarray
    dphi_dt: ScalarField
    step_count: int = 0

    @property
    def grid(self) -> TorusGrid:
        return self.phi.grid


def flow_rhs(phi_values: np.ndarray, g: MetricField, f_values: np.ndarray,
             eps_pd: float = 0.0, t: float = 0.0):
    """Right-hand side of the flow and the assembled evolving metric.

    Raises PositivityViolation (with the offending flat grid index) if any
    sample of g + Hess(phi) has smallest eigenvalue <= eps_pd.
    """
    grid = g.grid
    n = grid.complex_dim
    if n == 1:
        # real-typed fast path: the 1x1 Hessian is (1/4) of the real Laplacian
        sym = _laplace_symbol_r(1, grid.points_per_axis, grid.period)
        h = irfftn(sym * rfftn(phi_values), grid.shape)
        g11 = g.mats[..., 0, 0].real
        gp11 = g11 + h
        gmin = gp11.min()
        if gmin <= eps_pd:
            raise PositivityViolation(
                f"evolving metric eigenvalue {gmin:.3e} <= eps_pd at t={t:.6f}",
                index=int(np.argmin(gp11)), t=t,
            )
        rhs = np.log(gp11 / g11) - f_values
        return rhs, gp11[..., None, None]
    hess = complex_hessian_values(phi_values, grid)
    gprime = g.mats + hess
    mins = min_eig_field(gprime)
    gmin = mins.min()
    if gmin <= eps_pd:
        raise PositivityViolation(
            f"evolving metric eigenvalue {gmin:.3e} <= eps_pd at t={t:.6f}",
            index=int(np.argmin(mins)), t=t,
        )
    rhs = np.log(det_field(gprime) / det_field(g.mats)) - f_values
    return rhs, gprime


def make_state(g: MetricField, f: ScalarField, w: VolumeWeights,
               phi_values: Optional[np.ndarray] = None, t: float = 0.0,
               step_count: int = 0, eps_pd: float = 0.0) -> FlowState:
    """Assemble a coherent FlowState from phi values (zero field by default)."""
    grid = g.grid
    if phi_values is None:
        phi_values = np.zeros(grid.shape)
    rhs, gprime = flow_rhs(phi_values, g, f.values, eps_pd=eps_pd, t=t)
    tilde = phi_values - integrate_values(phi_values, w)
    return FlowState(
        t=t,
        phi=ScalarField(grid, phi_values),
        phi_tilde=ScalarField(grid, tilde),
        gprime=gprime,
        dphi_dt=ScalarField(grid, rhs),
        step_count=step_count,
    )


def cfl_timestep(state: FlowState, ctrl: StepControl) -> float:
    """CFL-style cap: cfl * h^2 / max over the grid of tr(gprime^{-1})."""
    h2 = state.grid.spacing ** 2
    tr_max = float(np.max(trace_inverse(state.gprime)))
    return min(ctrl.dt_max, ctrl.cfl_factor * h2 / tr_max)


def step(state: FlowState, ctrl: StepControl, g: MetricField, f: ScalarField,
         w: VolumeWeights, t_land: Optional[float] = None,
         stats: Optional[dict] = None) -> FlowState:
    """One adaptive RK4 step; lands exactly on t_land when it is closer.

    Any PositivityViolation inside a stage halves dt and retries, up to
    ctrl.retry_limit; persistent failure raises StepFailure with the time,
    step size and offending grid index.
    """
    dt = cfl_timestep(state, ctrl)
    clipped = False
    if t_land is not None and state.t + dt >= t_land - 1e-15:
        dt = t_land - state.t
        clipped = True
    phi0 = state.phi.values
    k1 = state.dphi_dt.values  # rhs at phi0, cached
    last_err = None
    for attempt in range(ctrl.retry_limit + 1):
        if dt < ctrl.dt_min and not clipped:
            break
        try:
            k2, _ = flow_rhs(phi0 + 0.5 * dt * k1, g, f.values, ctrl.eps_pd, state.t)
            k3, _ = flow_rhs(phi0 + 0.5 * dt * k2, g, f.values, ctrl.eps_pd, state.t)
            k4, _ = flow_rhs(phi0 + dt * k3, g, f.values, ctrl.eps_pd, state.t)
            phi1 = phi0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            new_rhs, new_gprime = flow_rhs(phi1, g, f.values, ctrl.eps_pd, state.t + dt)
        except PositivityViolation as e:
            last_err = e
            if stats is not None:
                stats["halvings"] = stats.get("halvings", 0) + 1
            dt *= 0.5
            clipped = False
            continue
        tilde = phi1 - integrate_values(phi1, w)
        grid = state.grid
        return FlowState(
            t=state.t + dt,
            phi=ScalarField(grid, phi1),
            phi_tilde=ScalarField(grid, tilde),
            gprime=new_gprime,
            dphi_dt=ScalarField(grid, new_rhs),
            step_count=state.step_count + 1,
        )
    raise StepFailure(
        f"step failed after {ctrl.retry_limit} halvings at t={state.t:.6f} "
        f"(dt={dt:.3e}): {last_err}",
        t=state.t, dt=dt,
        index=getattr(last_err, "index", None),
    )


@dataclass
class RunResult:
    """Final state plus the assembled monitor series."""

    final: FlowState
    series: "MonitorSeries"


def run(g: MetricField, f: ScalarField, horizon: float, ctrl: StepControl,
        monitors: Optional["MonitorSuite"] = None,
        initial_state: Optional[FlowState] = None,
        tail_threshold: float = TAIL_THRESHOLD) -> RunResult:
    """Integrate from phi = 0 (or a restart state) to t = horizon.

    Snapshots are emitted at every multiple of the monitor emit interval;
    the spectral tail of phi is checked at each emission and raises
    TailAlarm above ``tail_threshold`` (under-resolution guard).
    """
    from .monitors import MonitorSeries, MonitorSuite  # local import, no cycle at import time

    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if monitors is None:
        monitors = MonitorSuite()
    w = volume_weights(g)
    state = initial_state if initial_state is not None else make_state(g, f, w)
    series = MonitorSeries.start(g, w, monitors)

    emit_dt = monitors.emit_dt
    k0 = int(round(state.t / emit_dt))
    if abs(k0 * emit_dt - state.t) > 1e-12:
        raise ValueError("restart time must sit on the emission clock")
    if initial_state is None:
        series.emit(state)
    total_emits = int(round((horizon - state.t) / emit_dt))
    if total_emits < 1 or abs(state.t + total_emits * emit_dt - horizon) > 1e-9:
        raise ValueError(
            f"horizon {horizon} must be a multiple of emit_dt {emit_dt} past t={state.t}"
        )
    for j in range(1, total_emits + 1):
        t_target = (k0 + j) * emit_dt
        while state.t < t_target - 1e-12:
            state = step(state, ctrl, g, f, w, t_land=t_target)
        tail = spectral_tail(state.phi.values, state.grid)
        if tail > tail_threshold:
            raise TailAlarm(
                f"spectral tail {tail:.3e} exceeds {tail_threshold:.1e} at t={state.t:.3f}"
            )
        series.emit(state)
    series.finalize()
    return RunResult(final=state, series=series)
