"""
Differential reassignment of Gabor transforms.

Two routes are offered: an explicit upwind convection scheme built on the
left-invariant differences, and phase-preserving morphological erosion of the
modulus. Both keep the field reconstructible with the usual synthesis.
"""
import logging
import math
from dataclasses import dataclass
from dataclasses import field as dataclass_field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import minimum_filter1d

from engines.calculus import phase_difference
from engines.fields import PhaseField, Window
from engines.gabor import gabor_analysis, gabor_synthesis
from models import GaborParams, ReassignParams
from utils.errors import GaborFlowError, InputValidationError, require

logger = logging.getLogger(__name__)

FREEZE_THRESHOLD = 1e-300
GROWTH_LIMIT = 10.0


@dataclass
class ReassignOutcome:
    field: PhaseField
    steps: int = 0
    substeps: int = 1
    frozen_cells: int = 0
    courant: float = 0.0
    warnings: List[str] = dataclass_field(default_factory=list)


# ---------------------------------------------------------------------------
# Reconstruction metrics
# ---------------------------------------------------------------------------

def reconstruction_errors(f: np.ndarray, f_tilde: np.ndarray) -> Tuple[float, float]:
    """(||f - f~|| / ||f||, || |f| - |f~| || / ||f||)."""
    f = np.asarray(f, dtype=complex)
    f_tilde = np.asarray(f_tilde, dtype=complex)
    require(f.shape == f_tilde.shape, "shape-mismatch", f"signal shapes differ: {f.shape} vs {f_tilde.shape}")
    norm = np.linalg.norm(f)
    if norm == 0:
        raise GaborFlowError("zero-norm", "reference signal has zero norm")
    eps1 = np.linalg.norm(f - f_tilde) / norm
    eps2 = np.linalg.norm(np.abs(f) - np.abs(f_tilde)) / norm
    return float(eps1), float(eps2)


def energy_rescale(f_tilde: np.ndarray, f: np.ndarray) -> np.ndarray:
    f_tilde = np.asarray(f_tilde, dtype=complex)
    norm = np.linalg.norm(f_tilde)
    if norm == 0:
        raise GaborFlowError("zero-norm", "processed signal has zero norm; cannot match energy")
    return f_tilde * (np.linalg.norm(f) / norm)


# ---------------------------------------------------------------------------
# Erosion
# ---------------------------------------------------------------------------

def _periodic_offsets(n: int) -> np.ndarray:
    """One representative per residue mod n, each with minimal absolute value."""
    return np.arange(-(n // 2), n - n // 2)


def erode_quadratic_separable(A: np.ndarray, t: float, steps: Sequence[Tuple[int, float]]) -> np.ndarray:
    """Quadratic erosion |x|^2 / (4t) as one periodic 1D pass per (axis, spacing) pair."""
    A = np.asarray(A, dtype=float)
    if t <= 0:
        return A.copy()
    spread = float(A.max() - A.min())
    out = A
    for axis, h in steps:
        offsets = _periodic_offsets(A.shape[axis])
        weights = (offsets * h) ** 2 / (4.0 * t)
        keep = weights <= spread
        best = out.copy()
        for j, w in zip(offsets[keep], weights[keep]):
            if j == 0:
                continue
            np.minimum(best, np.roll(out, j, axis=axis) + w, out=best)
        out = best
    return out


def erode_interpolated_separable(A: np.ndarray, t: float, steps: Sequence[Tuple[int, float]]) -> np.ndarray:
    """
    Quadratic erosion |x|^2 / (4t) of the periodic piecewise-linear interpolant,
    evaluated at the samples, one 1D pass per (axis, spacing) pair.

    On each segment [d, d+1] (in cells) the interpolant is linear, so the
    minimizer of u(d) + (s - d) (u(d+1) - u(d)) + s^2 h^2 / (4t) has a closed
    form and is clamped to the segment. Unlike the sampled erosion this sees
    displacements shorter than one cell.
    """
    A = np.asarray(A, dtype=float)
    if t <= 0:
        return A.copy()
    k = 1.0 / (4.0 * t)
    spread = float(A.max() - A.min())
    out = A
    for axis, h in steps:
        n = A.shape[axis]
        curvature = k * h * h
        best = out.copy()
        for d in range(-(n // 2), n - n // 2 - 1):
            nearest = 0 if d <= 0 <= d + 1 else min(abs(d), abs(d + 1))
            if curvature * nearest ** 2 > spread:
                continue
            u0 = np.roll(out, -d, axis=axis)
            slope = np.roll(out, -(d + 1), axis=axis) - u0
            s = np.clip(-slope / (2.0 * curvature), d, d + 1)
            np.minimum(best, u0 + (s - d) * slope + curvature * s * s, out=best)
        out = best
    return out


def _erode_quadratic(A: np.ndarray, t: float, dp: float, dq: float) -> np.ndarray:
    return erode_quadratic_separable(A, t, ((-1, dq), (-2, dp)))


def _erode_power(A: np.ndarray, t: float, eta: float, dp: float, dq: float) -> np.ndarray:
    spread = float(A.max() - A.min())
    power = 2.0 * eta / (2.0 * eta - 1.0)
    coef = (2.0 * eta - 1.0) / (2.0 * eta) * t ** (-1.0 / (2.0 * eta - 1.0))
    rows = _periodic_offsets(A.shape[-2])
    cols = _periodic_offsets(A.shape[-1])
    best = A.copy()
    for i in rows:
        for j in cols:
            w = coef * np.hypot(i * dp, j * dq) ** power
            if w > spread or (i == 0 and j == 0):
                continue
            np.minimum(best, np.roll(A, (i, j), axis=(-2, -1)) + w, out=best)
    return best


def _erode_disc(A: np.ndarray, t: float, dp: float, dq: float) -> np.ndarray:
    n_cols = A.shape[-1]
    best = np.full_like(A, np.inf)
    for i in _periodic_offsets(A.shape[-2]):
        remaining = t * t - (i * dp) ** 2
        if remaining <= 0:
            continue
        # largest j with (j dq)^2 < remaining
        half = int(math.ceil(math.sqrt(remaining) / dq)) - 1
        if half < 0:
            continue
        rolled = np.roll(A, i, axis=-2)
        if 2 * half + 1 >= n_cols:
            row_min = np.broadcast_to(rolled.min(axis=-1, keepdims=True), A.shape)
        else:
            row_min = minimum_filter1d(rolled, size=2 * half + 1, axis=-1, mode="wrap")
        np.minimum(best, row_min, out=best)
    return best


def erode_sampled(A: np.ndarray, t: float, eta: float, dp: float, dq: float) -> np.ndarray:
    """
    Periodic (min,+) erosion of a sampled field with an isotropic kernel in the
    sampling coordinates.

    Args:
        A: real array [..., rows, cols].
        t: erosion time, t >= 0.
        eta: kernel exponent; 1 quadratic, 1/2 flat disc, otherwise the power kernel.
        dp: row spacing.
        dq: column spacing.
    """
    if eta < 0.5:
        raise GaborFlowError("eta-out-of-range", f"eta must be >= 1/2, got {eta}")
    A = np.asarray(A, dtype=float)
    if t <= 0:
        return A.copy()
    if eta == 1.0:
        return _erode_quadratic(A, t, dp, dq)
    if eta == 0.5:
        return _erode_disc(A, t, dp, dq)
    return _erode_power(A, t, eta, dp, dq)


def erode_modulus(A: np.ndarray, t: float, a: float, eta: float, p: GaborParams) -> np.ndarray:
    """Erosion of a phase-space modulus; the kernel is isotropic in (p/a, a q)."""
    A = np.asarray(A, dtype=float)
    require(A.shape[-2:] == (p.K, p.M), "shape-mismatch", f"modulus shape {A.shape} != {(p.K, p.M)}")
    return erode_sampled(A, t, eta, p.dp / a, a * p.dq)


def erode_modulus_interpolated(A: np.ndarray, t: float, a: float, p: GaborParams) -> np.ndarray:
    """Quadratic erosion of the interpolated modulus, kernel isotropic in (p/a, a q)."""
    A = np.asarray(A, dtype=float)
    require(A.shape[-2:] == (p.K, p.M), "shape-mismatch", f"modulus shape {A.shape} != {(p.K, p.M)}")
    return erode_interpolated_separable(A, t, ((-1, a * p.dq), (-2, p.dp / a)))


def erosion_reassign(G: PhaseField, rp: ReassignParams, p: Optional[GaborParams] = None) -> PhaseField:
    """
    Erode the modulus, keep the phase.

    The quadratic kernel (eta = 1) erodes the piecewise-linear interpolant of
    the modulus unless ``rp.erosion_sampling == "grid"``; the flat and power
    kernels always work on the samples.
    """
    p = p or G.params
    a = rp.a if rp.a is not None else p.a
    modulus = G.modulus
    if rp.eta == 1.0 and rp.erosion_sampling == "interpolated":
        eroded = erode_modulus_interpolated(modulus, rp.t_final, a, p)
    else:
        eroded = erode_modulus(modulus, rp.t_final, a, rp.eta, p)
    phase = np.exp(1j * np.angle(G.data))
    return G.with_data(eroded * phase)


# ---------------------------------------------------------------------------
# Upwind convection
# ---------------------------------------------------------------------------

def _velocities(G: PhaseField, a: float, p: GaborParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    modulus = G.modulus
    tiny = modulus < FREEZE_THRESHOLD
    frozen = tiny.copy()
    for shift, axis in ((1, 0), (-1, 0), (1, 1), (-1, 1)):
        frozen |= np.roll(tiny, shift, axis=axis)

    log_mod = np.log(np.where(tiny, 1.0, modulus))
    v1 = -0.5 * a * p.K * (np.roll(log_mod, -1, axis=0) - np.roll(log_mod, 1, axis=0))
    v2 = -0.5 * a * p.M * (np.roll(log_mod, -1, axis=1) - np.roll(log_mod, 1, axis=1))
    v1[frozen] = 0.0
    v2[frozen] = 0.0
    return v1, v2, frozen


def upwind_rhs(W: np.ndarray, v1: np.ndarray, v2: np.ndarray, p: GaborParams, scheme: str) -> Tuple[np.ndarray, np.ndarray]:
    """Velocity-weighted one-sided differences along both generators."""
    fwd1 = phase_difference(W, 1, "forward", p)
    bwd1 = phase_difference(W, 1, "backward", p)
    fwd2 = phase_difference(W, 2, "forward", p)
    bwd2 = phase_difference(W, 2, "backward", p)
    pos1, neg1 = np.maximum(v1, 0.0), np.minimum(v1, 0.0)
    pos2, neg2 = np.maximum(v2, 0.0), np.minimum(v2, 0.0)
    if scheme == "as-written":
        rhs1 = pos1 * bwd1 + neg1 * fwd1
        rhs2 = pos2 * bwd2 + neg2 * fwd2
    else:
        rhs1 = pos1 * fwd1 + neg1 * bwd1
        rhs2 = pos2 * fwd2 + neg2 * bwd2
    return rhs1, rhs2


def upwind_reassign_detailed(G: PhaseField, rp: ReassignParams, p: Optional[GaborParams] = None) -> ReassignOutcome:
    p = p or G.params
    if rp.mobility != "unit":
        raise InputValidationError(
            "invalid-argument", "the upwind scheme is only defined for unit mobility", mobility=rp.mobility
        )
    if rp.t_final == 0:
        return ReassignOutcome(field=G.with_data(G.data.copy()))

    a = rp.a if rp.a is not None else p.a
    v1, v2, frozen = _velocities(G, a, p)
    frozen_cells = int(frozen.sum())
    warnings: List[str] = []
    if frozen_cells:
        msg = f"{frozen_cells} cells frozen (modulus below {FREEZE_THRESHOLD:g})"
        logger.warning(msg)
        warnings.append(msg)

    n_steps = max(int(round(rp.t_final / rp.dt)), 1)
    scale1 = p.K * rp.dt if rp.step_scale == "literal" else rp.dt
    scale2 = p.M * rp.dt if rp.step_scale == "literal" else rp.dt
    courant = scale1 * p.K * float(np.abs(v1).max()) + scale2 * (p.M / p.N) * float(np.abs(v2).max())
    substeps = max(int(math.ceil(courant)), 1)
    logger.info(
        f"upwind: {n_steps} steps of dt={rp.dt}, scheme={rp.scheme}, step_scale={rp.step_scale}, "
        f"Courant {courant:.3g}"
    )
    if substeps > 1:
        msg = f"Courant number {courant:.3g} > 1; each step split into {substeps} substeps"
        logger.warning(msg)
        warnings.append(msg)

    W = G.data.copy()
    tau1, tau2 = scale1 / substeps, scale2 / substeps
    for step in range(n_steps * substeps):
        before = np.abs(W).max()
        rhs1, rhs2 = upwind_rhs(W, v1, v2, p, rp.scheme)
        W_next = W + tau1 * rhs1 + tau2 * rhs2
        after = np.abs(W_next).max()
        if not np.isfinite(after) or after > GROWTH_LIMIT * before:
            raise GaborFlowError(
                "unstable-step",
                f"max modulus grew from {before:.3e} to {after:.3e} in one step",
                step=step,
                courant=courant,
            )
        W = W_next

    return ReassignOutcome(
        field=G.with_data(W),
        steps=n_steps,
        substeps=substeps,
        frozen_cells=frozen_cells,
        courant=courant,
        warnings=warnings,
    )


def upwind_reassign(G: PhaseField, rp: ReassignParams, p: Optional[GaborParams] = None) -> PhaseField:
    return upwind_reassign_detailed(G, rp, p).field


def reassign(G: PhaseField, rp: ReassignParams, p: Optional[GaborParams] = None) -> ReassignOutcome:
    if rp.method == "upwind":
        return upwind_reassign_detailed(G, rp, p)
    return ReassignOutcome(field=erosion_reassign(G, rp, p))


def reassign_signal(f: np.ndarray, w: Window, rp: ReassignParams, p: GaborParams) -> Dict[str, object]:
    """Analyse, reassign, synthesise and rescale to the input energy; errors against f."""
    G = gabor_analysis(f, w, p)
    outcome = reassign(G, rp, p)
    f_tilde = energy_rescale(gabor_synthesis(outcome.field, w, p), f)
    eps1, eps2 = reconstruction_errors(f, f_tilde)
    return {"signal": f_tilde, "outcome": outcome, "eps1": eps1, "eps2": eps2}
