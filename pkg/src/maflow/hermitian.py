"""Pointwise Hermitian matrix kernels and the two constructive lemmas.

The kernels (Cholesky log-det, trace pairings, closed-form inverses and
generalized eigenvalues) are vectorized over grid-point stacks for n = 1, 2.

``normal_frame`` builds holomorphic coordinates centered at a point in which
the metric is the identity, the holomorphic derivatives of its diagonal
entries vanish, and a given Hermitian form is diagonal.

``frame_decompose`` writes a Hermitian positive-definite matrix as a sum of
rank-one projectors with strictly positive weights and unit vectors that
include the standard basis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import EigRangeViolation, PositivityViolation, ShiftFailure

# Fraction of the smallest eigenvalue reserved on the standard-basis weights
# by frame_decompose; also the default positivity floor certified per call.
_DIAG_RESERVE = 0.1


def cholesky_stack(mats: np.ndarray):
    """Lower Cholesky factors of a (..., n, n) Hermitian PD stack, n <= 2.

    Returns (ok, l11, l21, l22) with ok a boolean mask of pointwise success;
    for n = 1 the last two entries are None.  Closed forms keep the kernel
    vectorized and overflow-free for any PD input.
    """
    n = mats.shape[-1]
    if n == 1:
        a = mats[..., 0, 0].real
        ok = a > 0
        return ok, np.sqrt(np.maximum(a, 0.0)), None, None
    a = mats[..., 0, 0].real
    b = mats[..., 1, 0]
    d = mats[..., 1, 1].real
    ok = a > 0
    l11 = np.sqrt(np.where(ok, a, 1.0))
    l21 = b / l11
    s = d - np.abs(l21) ** 2
    ok = ok & (s > 0)
    l22 = np.sqrt(np.where(ok, s, 1.0))
    return ok, l11, l21, l22


def logdet_stack(mats: np.ndarray) -> np.ndarray:
    """log det of each Hermitian PD sample via Cholesky diagonals."""
    ok, l11, l21, l22 = cholesky_stack(mats)
    if not np.all(ok):
        raise PositivityViolation(
            "Cholesky failed: matrix left the positive-definite cone",
            index=int(np.argmin(ok)),
        )
    if l22 is None:
        return 2.0 * np.log(l11)
    return 2.0 * (np.log(l11) + np.log(l22))


def log_det_ratio(gp: np.ndarray, g: np.ndarray) -> np.ndarray:
    """log det(gp) - log det(g) for Hermitian PD stacks (or single matrices)."""
    gp = np.asarray(gp, dtype=complex)
    g = np.asarray(g, dtype=complex)
    return logdet_stack(gp) - logdet_stack(g)


def trace_pair(g_inv: np.ndarray, gp: np.ndarray, imag_tol: float = 1e-12) -> np.ndarray:
    """g^{i jbar} gp_{i jbar} = tr(Ginv @ Gp), real part after a residue check."""
    t = np.einsum("...ij,...ji->...", np.asarray(g_inv), np.asarray(gp))
    if np.iscomplexobj(t):
        resid = float(np.max(np.abs(t.imag)))
        if resid > imag_tol * max(1.0, float(np.max(np.abs(t.real)))):
            raise ValueError(f"trace pairing imaginary residue {resid:.3e}")
        t = t.real
    return t


def inverse_stack(mats: np.ndarray) -> np.ndarray:
    """Closed-form inverse of a Hermitian PD (..., n, n) stack, n <= 2."""
    n = mats.shape[-1]
    out = np.empty_like(mats, dtype=complex)
    if n == 1:
        out[..., 0, 0] = 1.0 / mats[..., 0, 0].real
        return out
    a = mats[..., 0, 0].real
    d = mats[..., 1, 1].real
    b = mats[..., 0, 1]
    det = a * d - np.abs(b) ** 2
    out[..., 0, 0] = d / det
    out[..., 1, 1] = a / det
    out[..., 0, 1] = -b / det
    out[..., 1, 0] = -np.conj(b) / det
    return out


def trace_inverse(mats: np.ndarray) -> np.ndarray:
    """tr(A^{-1}) for a Hermitian PD stack without forming the inverse."""
    n = mats.shape[-1]
    if n == 1:
        return 1.0 / mats[..., 0, 0].real
    a = mats[..., 0, 0].real
    d = mats[..., 1, 1].real
    b = mats[..., 0, 1]
    det = a * d - np.abs(b) ** 2
    return (a + d) / det


def generalized_eig_range(g: np.ndarray, gp: np.ndarray):
    """Pointwise eigenvalues of g^{-1} gp for Hermitian PD pairs, n <= 2.

    Returns (eig_min_field, eig_max_field); the pencil eigenvalues are real
    and positive whenever both inputs are PD.
    """
    n = g.shape[-1]
    if n == 1:
        r = gp[..., 0, 0].real / g[..., 0, 0].real
        return r, r
    b_mat = np.einsum("...ij,...jk->...ik", inverse_stack(g), gp)
    tr = (b_mat[..., 0, 0] + b_mat[..., 1, 1]).real
    det = (
        b_mat[..., 0, 0] * b_mat[..., 1, 1] - b_mat[..., 0, 1] * b_mat[..., 1, 0]
    ).real
    disc = np.sqrt(np.maximum(tr**2 - 4.0 * det, 0.0))
    return 0.5 * (tr - disc), 0.5 * (tr + disc)


@dataclass(frozen=True)
class NormalFrame:
    """Holomorphic normal coordinates at a base point.

    The change of coordinates is z = L (w + 1/2 b(w, w)), i.e. ``linear_map``
    maps new to old coordinates and ``quadratic_coeffs`` b[i, j, k] (symmetric
    in j, k) are the second-order coefficients expressed in the new frame.
    """

    base_point: tuple
    linear_map: np.ndarray
    quadratic_coeffs: np.ndarray

    def map_points(self, w: np.ndarray) -> np.ndarray:
        """Apply the coordinate change to a (..., n) array of new coordinates."""
        quad = 0.5 * np.einsum("ijk,...j,...k->...i", self.quadratic_coeffs, w, w)
        return np.einsum("im,...m->...i", self.linear_map, w + quad)

    def jacobian(self, w: np.ndarray) -> np.ndarray:
        """Holomorphic Jacobian dZ^i/dw^a at points w, shape (..., n, n)."""
        n = self.linear_map.shape[0]
        jq = np.einsum("mak,...k->...ma", self.quadratic_coeffs, w)
        eye = np.eye(n)
        return np.einsum("im,...ma->...ia", self.linear_map, eye + jq)


def normal_frame(g0: np.ndarray, dg0: np.ndarray, hess0: np.ndarray,
                 base_point: tuple = ()) -> NormalFrame:
    """Construct the coordinates of the holomorphic normal-frame lemma.

    Parameters
    ----------
    g0 : (n, n) Hermitian PD metric value at the base point.
    dg0 : (n, n, n) holomorphic metric derivatives, dg0[k, i, j] = d_k g_{i jbar}.
    hess0 : (n, n) Hermitian form (the potential's complex Hessian) to diagonalize.

    Three stages: (1) L1 from the inverse Cholesky transpose of g0 pulls the
    metric to the identity; (2) a unitary diagonalizes the transformed form,
    eigenvalues in descending order, while fixing the identity metric;
    (3) quadratic coefficients b^i_{jk}, supported on indices with i in
    {j, k}, kill the holomorphic derivatives of the diagonal metric entries.
    Stage order matters: the quadratic change alters neither the point values
    of the metric nor the complex Hessian at the base point.
    """
    g0 = np.asarray(g0, dtype=complex)
    dg0 = np.asarray(dg0, dtype=complex)
    hess0 = np.asarray(hess0, dtype=complex)
    n = g0.shape[0]

    try:
        c = np.linalg.cholesky(g0)
    except np.linalg.LinAlgError as e:
        raise PositivityViolation(f"base metric not positive definite: {e}") from e
    # with g0 = C C^dagger, L1 = C^{-T} gives L1^T g0 conj(L1) = I
    l1 = np.linalg.inv(c).T

    h1 = l1.T @ hess0 @ np.conj(l1)
    h1 = 0.5 * (h1 + h1.conj().T)
    evals, vecs = np.linalg.eigh(h1)
    order = np.argsort(-evals, kind="stable")
    vecs = vecs[:, order]
    u = np.conj(vecs)
    lin = l1 @ u

    # Post-linear holomorphic metric derivatives D[c, a, b] = d_{w^c} g_{a bbar}(0).
    d_post = np.einsum("kc,ia,jb,kij->cab", lin, lin, np.conj(lin), dg0)
    b = np.zeros((n, n, n), dtype=complex)
    for i in range(n):
        for k in range(n):
            target = -d_post[k, i, i]
            if k == i:
                b[i, i, i] = target
            else:
                # symmetric pair (i,k) and (k,i) both contribute once
                b[i, i, k] = target
                b[i, k, i] = target
    return NormalFrame(base_point=tuple(base_point), linear_map=lin, quadratic_coeffs=b)


@dataclass(frozen=True)
class FrameDecomposition:
    """Rank-one frame decomposition a = sum_nu beta_nu gamma_nu gamma_nu^*."""

    dim: int
    frame: np.ndarray   # (N, n) unit vectors, rows gamma_nu
    betas: np.ndarray   # (N,) strictly positive weights
    bounds: Tuple[float, float]

    def reconstruct(self) -> np.ndarray:
        return np.einsum("v,vi,vj->ij", self.betas, self.frame, np.conj(self.frame))


def frame_decompose(a: np.ndarray, eig_range: Tuple[float, float],
                    floor_fraction: float = _DIAG_RESERVE) -> FrameDecomposition:
    """Decompose a Hermitian PD matrix into positively weighted rank ones.

    The frame always contains the standard basis e_1..e_n whose weights keep
    at least ``floor_fraction`` of the smallest eigenvalue in reserve.  For
    n = 2 the remaining rank-one part c * v v^* (c = eig gap) is carried by a
    single unit vector u = cos(s) e_1 + sin(s) e^{i phi} e_2 whose phase
    matches the off-diagonal argument exactly and whose amplitude angle s is
    chosen so the diagonal load splits inside the reserve budget; the weight
    solve is then exact by construction.  Weights are Lipschitz in a.
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    lam, lam_hi = float(eig_range[0]), float(eig_range[1])
    if not (0 < lam <= lam_hi):
        raise ValueError("eig_range must satisfy 0 < lam <= Lam")
    evals = np.linalg.eigvalsh(0.5 * (a + a.conj().T))
    tol = 1e-12 * max(1.0, lam_hi)
    if evals[0] < lam - tol or evals[-1] > lam_hi + tol:
        raise EigRangeViolation(
            f"eigenvalues {evals} outside declared range [{lam}, {lam_hi}]"
        )

    if n == 1:
        frame = np.ones((1, 1), dtype=complex)
        betas = np.array([a[0, 0].real])
        return FrameDecomposition(1, frame, betas, (float(betas[0]), float(betas[0])))

    a11 = a[0, 0].real
    a22 = a[1, 1].real
    z = a[0, 1]
    lam1 = float(evals[0])

    if abs(z) == 0.0:
        frame = np.eye(2, dtype=complex)
        betas = np.array([a11, a22])
    else:
        # rank-one remainder R = a - lam1 * I, R11 R22 = |z|^2 exactly;
        # clip tiny negative round-off when an eigenvector aligns with an axis
        r11 = max(a11 - lam1, 0.0)
        r22 = max(a22 - lam1, 0.0)
        budget = (1.0 - floor_fraction) * lam1
        t = np.sqrt((r22 + budget) / (r11 + budget))
        load1 = abs(z) / t
        load2 = abs(z) * t
        w = load1 + load2
        cos_s = np.sqrt(load1 / w)
        sin_s = np.sqrt(load2 / w)
        phase = z / abs(z)
        u = np.array([cos_s, sin_s * np.conj(phase)], dtype=complex)
        frame = np.vstack([np.eye(2, dtype=complex), u[None, :]])
        betas = np.array([a11 - load1, a22 - load2, w])

    floor = floor_fraction * lam * 0.5
    if np.any(betas <= 0) or betas[0] < floor or betas[1] < floor:
        raise ShiftFailure(
            f"positivity floor not met (betas {betas}); eig_range too wide for the frame"
        )
    recon = np.einsum("v,vi,vj->ij", betas, frame, np.conj(frame))
    err = float(np.max(np.abs(recon - a)))
    if err > 1e-11 * max(1.0, lam_hi):
        raise ShiftFailure(f"reconstruction residual {err:.3e} too large")
    return FrameDecomposition(2, frame, betas, (float(np.min(betas)), float(np.max(betas))))
