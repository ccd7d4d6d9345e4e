"""
Left-invariant diffusion on phase space.

Coherence-enhancing diffusion uses the twisted differences of engines.calculus
in divergence form, so every step commutes with grid time-frequency shifts.
Linear smoothing applies the twisted phase-space kernel by direct summation.
"""
import logging
from typing import Optional, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from engines.calculus import diff_group, phase_difference
from engines.fields import GroupField, PhaseField, Window
from models import DiffusionParams, GaborParams, MetricParams, SmoothingParams
from utils.errors import GaborFlowError

logger = logging.getLogger(__name__)

CFL_SAFETY = 0.25
DEGENERATE_GAP = 1e-14


def default_beta(p: GaborParams) -> float:
    """Metric balance that makes one position step and one frequency step equally long."""
    return MetricParams.square_grid(p).beta


def metric_steps(beta: float, p: GaborParams) -> Tuple[float, float]:
    """Grid spacings (h1, h2) in the coordinates (beta^2 p, q)."""
    return beta ** 2 * p.dp, p.dq


def cfl_limit(beta: float, p: GaborParams) -> float:
    h1, h2 = metric_steps(beta, p)
    return CFL_SAFETY * min(h1, h2) ** 2


# ---------------------------------------------------------------------------
# Auxiliary matrix and conductivity
# ---------------------------------------------------------------------------

def auxiliary_matrix(G_abs: np.ndarray, dp: DiffusionParams, p: GaborParams) -> np.ndarray:
    """
    Field of symmetric 2x2 matrices [K, M, 2, 2] from the modulus.

    Hessian mode takes Gaussian second derivatives in (beta^2 p, q); structure
    tensor mode takes the outer product of Gaussian gradients and smooths each
    component at scale rho (defaults to sigma). Scales are in units of the
    frequency step.
    """
    beta = dp.beta or default_beta(p)
    h1, h2 = metric_steps(beta, p)
    A = np.asarray(G_abs, dtype=float)
    sigma = (dp.sigma * h2 / h1, dp.sigma)

    def derivative(order):
        return gaussian_filter(A, sigma=sigma, order=order, mode="wrap") / (h1 ** order[0] * h2 ** order[1])

    out = np.empty(A.shape + (2, 2))
    if dp.adaptivity == "hessian":
        out[..., 0, 0] = derivative((2, 0))
        out[..., 1, 1] = derivative((0, 2))
        out[..., 0, 1] = out[..., 1, 0] = derivative((1, 1))
        return out

    g1 = derivative((1, 0))
    g2 = derivative((0, 1))
    rho = dp.rho if dp.rho is not None else dp.sigma
    rho_grid = (rho * h2 / h1, rho)
    out[..., 0, 0] = gaussian_filter(g1 * g1, sigma=rho_grid, mode="wrap")
    out[..., 1, 1] = gaussian_filter(g2 * g2, sigma=rho_grid, mode="wrap")
    out[..., 0, 1] = out[..., 1, 0] = gaussian_filter(g1 * g2, sigma=rho_grid, mode="wrap")
    return out


def conductivity(A: np.ndarray, dp: DiffusionParams) -> np.ndarray:
    """
    C = S diag(eps, (1-eps) exp(-c / (l1-l2)^2) + eps) S^T with |l1| <= |l2|.

    "descending" swaps the two diffusivities so the direction of the smaller
    eigenvalue gets the large one. Degenerate spectra give eps*I.
    """
    A = np.asarray(A, dtype=float)
    sym = 0.5 * (A + np.swapaxes(A, -1, -2))
    values, vectors = np.linalg.eigh(sym)
    swap = np.abs(values[..., 0]) > np.abs(values[..., 1])
    lam1 = np.where(swap, values[..., 1], values[..., 0])
    lam2 = np.where(swap, values[..., 0], values[..., 1])
    e1 = np.where(swap[..., None], vectors[..., :, 1], vectors[..., :, 0])
    e2 = np.where(swap[..., None], vectors[..., :, 0], vectors[..., :, 1])

    gap = np.abs(lam1 - lam2)
    degenerate = gap <= DEGENERATE_GAP * np.maximum(np.abs(lam2), np.finfo(float).tiny)
    with np.errstate(divide="ignore", over="ignore"):
        strong = (1.0 - dp.eps) * np.exp(-dp.c / np.where(degenerate, 1.0, gap) ** 2) + dp.eps
    strong = np.where(degenerate, dp.eps, strong)

    if dp.ordering == "descending":
        d1, d2 = strong, np.full_like(strong, dp.eps)
    else:
        d1, d2 = np.full_like(strong, dp.eps), strong
    C = d1[..., None, None] * (e1[..., :, None] * e1[..., None, :]) + d2[..., None, None] * (
        e2[..., :, None] * e2[..., None, :]
    )
    eye = np.broadcast_to(np.eye(2), C.shape)
    return np.where(degenerate[..., None, None], dp.eps * eye, C)


# ---------------------------------------------------------------------------
# Coherence-enhancing diffusion
# ---------------------------------------------------------------------------

def _divergence_step(W: np.ndarray, C: np.ndarray, beta: float, forward, backward) -> np.ndarray:
    scale = beta ** -2
    g1 = scale * forward(W, 1)
    g2 = forward(W, 2)
    flux1 = C[..., 0, 0] * g1 + C[..., 0, 1] * g2
    flux2 = C[..., 1, 0] * g1 + C[..., 1, 1] * g2
    return scale * backward(flux1, 1) + backward(flux2, 2)


def _check_cfl(dp: DiffusionParams, beta: float, p: GaborParams) -> int:
    limit = cfl_limit(beta, p)
    if dp.dt > limit:
        raise GaborFlowError(
            "cfl-violated",
            f"dt={dp.dt} exceeds the explicit stability bound {limit:.4g}",
            dt=dp.dt,
            limit=limit,
            beta=beta,
        )
    return int(round(dp.t_final / dp.dt))


def ced_evolve(G: PhaseField, dp: DiffusionParams, p: Optional[GaborParams] = None) -> PhaseField:
    p = p or G.params
    beta = dp.beta or default_beta(p)
    n_steps = _check_cfl(dp, beta, p)
    logger.info(f"CED: beta={beta:.4g}, eps={dp.eps}, c={dp.c}, {n_steps} steps of dt={dp.dt}")

    def forward(x, axis):
        return phase_difference(x, axis, "forward", p)

    def backward(x, axis):
        return phase_difference(x, axis, "backward", p)

    W = G.data.copy()
    C = conductivity(auxiliary_matrix(np.abs(W), dp, p), dp)
    for _ in range(n_steps):
        if dp.readapt:
            C = conductivity(auxiliary_matrix(np.abs(W), dp, p), dp)
        W = W + dp.dt * _divergence_step(W, C, beta, forward, backward)
    return G.with_data(W)


def ced_evolve_group(W: GroupField, dp: DiffusionParams, p: Optional[GaborParams] = None) -> GroupField:
    """Same explicit scheme on the group quotient; the modulus is phase-independent."""
    p = p or W.params
    beta = dp.beta or default_beta(p)
    n_steps = _check_cfl(dp, beta, p)

    def forward(x, axis):
        return diff_group(W.with_data(x), axis, "forward", p).data

    def backward(x, axis):
        return diff_group(W.with_data(x), axis, "backward", p).data

    data = W.data.copy()
    C = conductivity(auxiliary_matrix(np.abs(data[:, :, 0]), dp, p), dp)[:, :, None]
    for _ in range(n_steps):
        if dp.readapt:
            C = conductivity(auxiliary_matrix(np.abs(data[:, :, 0]), dp, p), dp)[:, :, None]
        data = data + dp.dt * _divergence_step(data, C, beta, forward, backward)
    return W.with_data(data)


def evolve_window_isotropic(w: Window, dp: DiffusionParams, p: GaborParams) -> Window:
    """
    Window-side counterpart of ced_evolve at eps=1: analysing with the returned
    window equals running the phase-space evolution on the analysis with w.
    """
    beta = dp.beta or default_beta(p)
    n_steps = _check_cfl(dp, beta, p)
    j = np.arange(p.N)
    up = np.exp(2j * np.pi * j / p.M)
    scale2 = p.M / p.N

    def t1_plus(x):
        return p.K * (np.roll(x, p.L) - x)

    def t1_minus(x):
        return p.K * (x - np.roll(x, -p.L))

    psi = w.samples.astype(complex)
    for _ in range(n_steps):
        second1 = t1_minus(t1_plus(psi))
        second2 = scale2 * (1.0 - np.conj(up)) * (scale2 * (up - 1.0) * psi)
        psi = psi + dp.dt * (beta ** -4 * second1 + second2)
    return Window(psi, w.kind, w.a)


# ---------------------------------------------------------------------------
# Linear left-invariant smoothing
# ---------------------------------------------------------------------------

def smoothing_kernel(p, q, p2, q2, sp: SmoothingParams):
    """Twisted phase-space kernel of the local heat-kernel approximation at (p, q; p2, q2)."""
    dp_ = np.asarray(p2, dtype=float) - np.asarray(p, dtype=float)
    dq_ = np.asarray(q2, dtype=float) - np.asarray(q, dtype=float)
    envelope = np.exp(-(dp_ ** 2 / sp.D11 + dq_ ** 2 / sp.D22) * sp.c_loc / (4.0 * sp.t))
    twist = np.exp(-1j * np.pi * dp_ * (np.asarray(q2, dtype=float) + np.asarray(q, dtype=float)))
    return envelope * twist * smoothing_normalization(sp)


def smoothing_normalization(sp: SmoothingParams, dim: int = 1) -> float:
    """
    Mass of the phase-space kernel.

    The local group kernel carries (c / (8 t sqrt(D11 D22))) exp(-alpha |s|) with
    alpha = c / (4 t sqrt(D11 D22)); integrating that against the character
    exp(-2 pi i s) over s gives alpha^2 / (alpha^2 + 4 pi^2), which is
    1 / (1 + 64 pi^2 D11 D22 t^2 / c^2).
    """
    c, t = sp.c_loc, sp.t
    gaussian = (c / (4.0 * np.pi * t * np.sqrt(sp.D11 * sp.D22))) ** dim
    return gaussian / (1.0 + 64.0 * np.pi ** 2 * sp.D11 * sp.D22 * t ** 2 / c ** 2)


def twisted_smooth(data: np.ndarray, sp: SmoothingParams, p: GaborParams, l_axis: int = -2, m_axis: int = -1) -> np.ndarray:
    """
    Direct summation of the twisted kernel over one (position, frequency) axis
    pair, truncated where the Gaussian envelope drops below sp.truncation.
    """
    offsets_l = np.arange(-(p.K // 2) + 1, p.K // 2 + 1)
    offsets_m = np.arange(-(p.M // 2) + 1, p.M // 2 + 1)
    dl = offsets_l * p.dp
    dm = offsets_m * p.dq
    envelope = np.exp(-(dl[:, None] ** 2 / sp.D11 + dm[None, :] ** 2 / sp.D22) * sp.c_loc / (4.0 * sp.t))
    keep = np.argwhere(envelope >= sp.truncation)

    q = np.arange(p.M) * p.dq
    shape = [1] * data.ndim
    shape[m_axis] = p.M
    cell = p.dp * p.dq
    out = np.zeros_like(data, dtype=complex)
    for i, j in keep:
        weight = smoothing_kernel(0.0, q, dl[i], q + dm[j], sp) * cell
        shifted = np.roll(data, (-int(offsets_l[i]), -int(offsets_m[j])), axis=(l_axis, m_axis))
        out += weight.reshape(shape) * shifted
    return out


def linear_smooth(G: PhaseField, sp: SmoothingParams, p: Optional[GaborParams] = None) -> PhaseField:
    p = p or G.params
    logger.info(f"linear smoothing: t={sp.t}, D=({sp.D11}, {sp.D22})")
    return G.with_data(twisted_smooth(G.data, sp, p))
