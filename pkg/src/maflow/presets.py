"""Shipped metric and forcing presets.

All presets are trigonometric polynomials in the real coordinates, so they
are band-limited (spectral tail identically zero at any N >= 8) and their
closed forms remain available for analytic differentiation in tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .grid import (
    LAMBDA_FLOOR,
    MetricField,
    ScalarField,
    TorusGrid,
    hermitize,
    integrate_values,
    volume_weights,
)
from .hermitian import log_det_ratio
from .spectral import complex_hessian_values, d_holo

METRIC_PRESETS = ("flat", "kahler_bump", "hermitian_nonkahler")


@dataclass(frozen=True)
class MetricPreset:
    """Named metric preset with parameters.

    ``scale`` multiplies the whole metric; it sets the time scale of the flow
    (the linearized decay rate goes like 1/scale) without changing shape.
    """

    name: str
    eps: float = 0.3
    amp: float = 0.4
    scale: float = 1.0

    def __post_init__(self):
        if self.name not in METRIC_PRESETS:
            raise ConfigError(f"unknown metric preset '{self.name}'")


def _flat_def(grid: TorusGrid, scale: float):
    n = grid.complex_dim

    def definition(coords):
        shape = np.broadcast_shapes(*(c.shape for c in coords))
        out = np.zeros(shape + (n, n), dtype=complex)
        for i in range(n):
            out[..., i, i] = scale
        return out

    return definition


def _kahler_bump_def(grid: TorusGrid, amp: float, scale: float):
    """Kaehler metric g = scale * (I + Hess(rho)), rho a trig potential.

    The closed form below is the exact complex Hessian of
    rho = amp (cos x1 + 0.5 sin x3 + 0.5 cos(x1 + x3)) for n = 2
    (resp. amp (cos x1 + 0.5 sin x2) for n = 1), so d(omega) = 0 holds
    identically.
    """
    n = grid.complex_dim

    def definition(coords):
        shape = np.broadcast_shapes(*(c.shape for c in coords))
        out = np.zeros(shape + (n, n), dtype=complex)
        if n == 1:
            h = -0.25 * amp * (np.cos(coords[0]) + 0.5 * np.sin(coords[1]))
            out[..., 0, 0] = scale * (1.0 + h)
            return out
        cross = np.cos(coords[0] + coords[2])
        out[..., 0, 0] = scale * (1.0 - 0.25 * amp * (np.cos(coords[0]) + 0.5 * cross))
        out[..., 1, 1] = scale * (1.0 - 0.25 * amp * (0.5 * np.sin(coords[2]) + 0.5 * cross))
        out[..., 0, 1] = scale * (-0.125 * amp * cross) + 0j
        out[..., 1, 0] = out[..., 0, 1]
        return out

    return definition


def _nonkahler_def(grid: TorusGrid, eps: float, scale: float):
    """Hermitian metric with d(omega) != 0 for n = 2 (conformal wiggle for n = 1)."""
    n = grid.complex_dim

    def definition(coords):
        shape = np.broadcast_shapes(*(c.shape for c in coords))
        out = np.zeros(shape + (n, n), dtype=complex)
        if n == 1:
            out[..., 0, 0] = scale * (1.0 + eps * (np.cos(coords[0]) + 0.5 * np.sin(coords[1])))
            return out
        out[..., 0, 0] = scale * (1.0 + eps * np.cos(coords[2]))
        out[..., 1, 1] = scale * (1.0 + eps * np.cos(coords[0]))
        off = scale * 0.5 * eps * (np.cos(coords[1]) + 1j * np.sin(coords[3]))
        out[..., 0, 1] = off
        out[..., 1, 0] = np.conj(off)
        return out

    return definition


def build_metric(grid: TorusGrid, preset: MetricPreset,
                 lambda_floor: float = LAMBDA_FLOOR) -> MetricField:
    """Evaluate a named preset on the grid and validate its invariants."""
    if preset.name == "flat":
        definition = _flat_def(grid, preset.scale)
    elif preset.name == "kahler_bump":
        definition = _kahler_bump_def(grid, preset.amp, preset.scale)
    else:
        definition = _nonkahler_def(grid, preset.eps, preset.scale)
    coords = grid.axis_coordinates()
    mats = np.ascontiguousarray(
        np.broadcast_to(definition(coords), grid.shape + (grid.complex_dim,) * 2)
    ).astype(complex)
    return MetricField(grid, hermitize(mats), definition=definition,
                       lambda_floor=lambda_floor)


def kahler_defect(g: MetricField) -> float:
    """Largest component of the torsion d(omega), zero iff the metric is Kaehler.

    Computes T_{k i jbar} = d_k g_{i jbar} - d_i g_{k jbar} by spectral
    differentiation of the sampled entries; meaningful for n >= 2.
    """
    grid = g.grid
    n = grid.complex_dim
    if n == 1:
        return 0.0
    worst = 0.0
    for jj in range(n):
        cols = []
        for ii in range(n):
            entry_re = ScalarField(grid, g.mats[..., ii, jj].real.copy())
            entry_im = ScalarField(grid, g.mats[..., ii, jj].imag.copy())
            col = []
            for kk in range(n):
                dre = d_holo(entry_re, kk + 1).values
                dim_ = d_holo(entry_im, kk + 1).values
                col.append(dre + 1j * dim_)
            cols.append(col)
        for kk in range(n):
            for ii in range(kk + 1, n):
                t = cols[ii][kk] - cols[kk][ii]
                worst = max(worst, float(np.max(np.abs(t))))
    return worst


FORCING_PRESETS = ("zero", "const", "modes", "manufactured")


@dataclass(frozen=True)
class ForcingPreset:
    """Forcing selection for the flow / elliptic problem.

    kind = "zero" | "const" | "modes" | "manufactured".  "modes" draws a
    seeded band-limited trigonometric polynomial; "manufactured" builds F
    from a band-limited potential psi so the elliptic solution is known
    exactly (F = log det ratio(g + Hess psi, g) - mean of that field).
    """

    kind: str
    value: float = 0.0          # const level
    amplitude: float = 0.05     # modes / manufactured psi amplitude
    max_mode: int = 2
    seed: int = 2024
    psi_kind: str = "seeded"    # "seeded" | "peaked" (fast/slow engineered mix)

    def __post_init__(self):
        if self.kind not in FORCING_PRESETS:
            raise ConfigError(f"unknown forcing preset '{self.kind}'")


def random_band_limited(grid: TorusGrid, amplitude: float, max_mode: int,
                        seed: int) -> ScalarField:
    """Seeded real trigonometric polynomial with modes up to max_mode per axis."""
    rng = np.random.default_rng(seed)
    coords = grid.axis_coordinates()
    vals = np.zeros(grid.shape)
    d = grid.real_dim
    ks = [k for k in np.ndindex(*(2 * max_mode + 1,) * d)]
    for k in ks:
        kvec = np.array(k) - max_mode
        if not np.any(kvec):
            continue
        # one representative per +-k pair
        first = kvec[np.nonzero(kvec)[0][0]]
        if first < 0:
            continue
        norm2 = float(np.sum(kvec**2))
        c = rng.normal() / (1.0 + norm2)
        s = rng.normal() / (1.0 + norm2)
        phase = sum(kvec[a] * coords[a] for a in range(d))
        vals = vals + c * np.cos(phase) + s * np.sin(phase)
    peak = float(np.max(np.abs(vals)))
    if peak > 0:
        vals = vals * (amplitude / peak)
    return ScalarField(grid, vals)


def manufactured_potential(grid: TorusGrid, preset: ForcingPreset) -> ScalarField:
    """Band-limited psi whose normalization is the exact flow limit.

    The "peaked" variant mixes a dominant fast mode with a smaller slow mode,
    phased so transient extrema overshoot their equilibrium values (gives the
    trace and Q monitors an interior running maximum).
    """
    if preset.psi_kind == "peaked":
        a = preset.amplitude
        c = grid.axis_coordinates()
        if grid.complex_dim == 1:
            # dominant fast modes with a unique peak plus a weak slow mode whose
            # phases make the transient trace/Q extrema overshoot their limits
            vals = a * (0.8 * np.cos(2.0 * c[0]) + 0.4 * np.cos(3.0 * c[0] + c[1])
                        + 0.3 * np.cos(c[0] + 2.0 * c[1])
                        + 0.08 * np.cos(c[0] - 2.0) + 0.04 * np.sin(c[1] + 3.5))
        else:
            vals = a * (0.8 * np.cos(c[0] + c[2]) + 0.4 * np.cos(c[0] - c[3])
                        + 0.3 * np.cos(c[1] + c[2])
                        + 0.08 * np.cos(c[0] - 2.0) + 0.04 * np.sin(c[2] + 3.5))
        vals = np.broadcast_to(vals, grid.shape).copy()
        return ScalarField(grid, vals)
    return random_band_limited(grid, preset.amplitude, preset.max_mode, preset.seed)


def build_forcing(grid: TorusGrid, g: MetricField, preset: ForcingPreset):
    """Materialize the forcing field; returns (F, exact) where exact is the
    manufactured-solution record (psi, psi_tilde, b) or None."""
    w = volume_weights(g)
    if preset.kind == "zero":
        return ScalarField(grid, np.zeros(grid.shape)), None
    if preset.kind == "const":
        return ScalarField(grid, np.full(grid.shape, preset.value)), None
    if preset.kind == "modes":
        return random_band_limited(grid, preset.amplitude, preset.max_mode, preset.seed), None
    psi = manufactured_potential(grid, preset)
    hess = complex_hessian_values(psi.values, grid)
    ratio = log_det_ratio(g.mats + hess, g.mats)
    c0 = integrate_values(ratio, w)
    f_vals = ratio - c0
    psi_tilde = psi.values - integrate_values(psi.values, w)
    exact = ManufacturedSolution(
        psi=psi, psi_tilde=ScalarField(grid, psi_tilde), b=c0
    )
    return ScalarField(grid, f_vals), exact


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact limit of a manufactured run: normalized potential and b."""

    psi: ScalarField
    psi_tilde: ScalarField
    b: float
