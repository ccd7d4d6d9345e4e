"""
Discrete Gabor transform on the finite Heisenberg quotient.

Analysis is one FFT of length M per spatial shift; synthesis inverts the frame
operator, which the Zak transform diagonalizes.
"""
import logging
import threading
from collections import OrderedDict
from typing import Optional, Tuple

import numpy as np

from engines.calculus import cr_operator
from engines.fields import GroupField, PhaseField, Window, ZakCoefficients
from models import GaborParams
from utils.config import get_settings
from utils.errors import GaborFlowError, require

logger = logging.getLogger(__name__)

FRAME_TOLERANCE = 1e-14
NULLSPACE_TOLERANCE = 1e-8

_window_cache: "OrderedDict[Tuple[str, GaborParams], Window]" = OrderedDict()
_cache_lock = threading.Lock()


# ---------------------------------------------------------------------------
# Windows
# ---------------------------------------------------------------------------

def gaussian_profile(n: np.ndarray, N: int, a: float) -> np.ndarray:
    """exp(-pi (|n| - floor((N-1)/2))^2 / (N^2 a^2)), peak 1 at |n| = floor((N-1)/2)."""
    c = (N - 1) // 2
    return np.exp(-np.pi * (np.abs(n) - c) ** 2 / (N ** 2 * a ** 2))


def make_gaussian_window(p: GaborParams) -> Window:
    c = (p.N - 1) // 2
    samples = np.roll(gaussian_profile(np.arange(p.N), p.N, p.a), -c).astype(complex)
    return Window(samples, "sampled-gaussian", p.a)


def make_discrete_cr_window(p: GaborParams) -> Window:
    """
    Window whose Gabor transforms satisfy the discrete Cauchy-Riemann system exactly.

    The constraint is linear in the conjugated window. By covariance it is enough
    to impose it on the transform of a delta at 0; the nullspace of the resulting
    operator is spanned by a smooth bump at n=0 and its alternating-sign
    companion at n=N/2, and the smooth member is the one with least
    first-difference energy.
    """
    if not (p.L == 1 and p.K == p.N and p.M == p.N):
        raise GaborFlowError(
            "cr-window-requires-extreme-oversampling",
            f"discrete CR window needs K=M=N and L=1, got K={p.K}, M={p.M}, L={p.L}",
        )
    delta = np.zeros(p.N, dtype=complex)
    delta[0] = 1.0
    columns = []
    for j in range(p.N):
        unit = np.zeros(p.N, dtype=complex)
        unit[j] = 1.0
        G = analysis_array(delta, unit, p)
        columns.append(cr_operator(G, p.a, p).ravel())
    constraint = np.stack(columns, axis=1)

    _, sigma, vh = np.linalg.svd(constraint, full_matrices=False)
    null_count = int(np.sum(sigma <= NULLSPACE_TOLERANCE * sigma[0]))
    logger.info(f"CR constraint N={p.N}: nullspace dimension {null_count}, sigma_min={sigma[-1]:.3e}")
    if null_count not in (1, 2):
        raise GaborFlowError(
            "cr-nullspace-degenerate",
            f"expected a smooth solution plus at most its parity companion, found {null_count} null vectors",
            singular_values=sigma[-4:].tolist(),
        )
    basis = vh[-null_count:].conj().T
    if null_count == 2:
        diffs = np.roll(basis, -1, axis=0) - basis
        _, vecs = np.linalg.eigh(diffs.conj().T @ diffs)
        conj_window = basis @ vecs[:, 0]
    else:
        conj_window = basis[:, 0]

    samples = np.conj(conj_window)
    samples = samples * np.exp(-1j * np.angle(samples[0]))
    samples = samples / np.linalg.norm(samples)
    return Window(samples, "discrete-cr", p.a)


def get_window(kind: str, p: GaborParams) -> Window:
    """Cached window lookup; kind is "gaussian" or "cr"."""
    key = (kind, p)
    with _cache_lock:
        if key in _window_cache:
            _window_cache.move_to_end(key)
            return _window_cache[key]

    if kind in ("gaussian", "sampled-gaussian"):
        window = make_gaussian_window(p)
    elif kind in ("cr", "discrete-cr"):
        window = make_discrete_cr_window(p)
    else:
        raise ValueError(f"Unknown window kind {kind!r}")

    with _cache_lock:
        _window_cache[key] = window
        while len(_window_cache) > get_settings().cache_size:
            _window_cache.popitem(last=False)
    return window


# ---------------------------------------------------------------------------
# Zak transform and frame operator
# ---------------------------------------------------------------------------

def zak_transform(f: np.ndarray, p: GaborParams) -> np.ndarray:
    """Z[n, k] = (1/(N sqrt K)) sum_j f[n + jL] e^{-2 pi i k j / K}, shape [..., L, K]."""
    f = np.asarray(f, dtype=complex)
    require(f.shape[-1] == p.N, "shape-mismatch", f"signal length {f.shape[-1]} != N={p.N}")
    blocks = f.reshape(f.shape[:-1] + (p.K, p.L))
    return np.swapaxes(np.fft.fft(blocks, axis=-2), -1, -2) / (p.N * np.sqrt(p.K))


def inverse_zak(Z: np.ndarray, p: GaborParams) -> np.ndarray:
    blocks = np.fft.ifft(np.swapaxes(Z, -1, -2), axis=-2) * (p.N * np.sqrt(p.K))
    return blocks.reshape(blocks.shape[:-2] + (p.N,))


def frame_eigenvalues(w: Window, p: GaborParams) -> ZakCoefficients:
    zw = zak_transform(w.samples, p)
    energy = np.abs(zw) ** 2
    shift = p.K // p.P
    total = sum(np.roll(energy, j * shift, axis=-1) for j in range(p.P))
    eigenvalues = p.L * p.N * p.K * total
    top = eigenvalues.max()
    if top <= 0 or eigenvalues.min() <= FRAME_TOLERANCE * top:
        raise GaborFlowError(
            "window-not-frame",
            "window does not generate a frame on this lattice",
            min_eigenvalue=float(eigenvalues.min()),
            max_eigenvalue=float(top),
        )
    return ZakCoefficients(values=zw, eigenvalues=eigenvalues)


def frame_operator(f: np.ndarray, w: Window, p: GaborParams) -> np.ndarray:
    """Apply Z^-1 Lambda Z to f."""
    zc = frame_eigenvalues(w, p)
    return inverse_zak(zak_transform(f, p) * zc.eigenvalues, p)


# ---------------------------------------------------------------------------
# Analysis / synthesis
# ---------------------------------------------------------------------------

def _shift_index(p: GaborParams) -> np.ndarray:
    n = np.arange(p.N)
    l = np.arange(p.K)
    return (n[None, :] - l[:, None] * p.L) % p.N


def _section_phase(p: GaborParams, sign: int) -> np.ndarray:
    l = np.arange(p.K)[:, None]
    m = np.arange(p.M)[None, :]
    return np.exp(sign * 2j * np.pi * ((l * m) % p.P) / p.P)


def analysis_array(f: np.ndarray, conj_window: np.ndarray, p: GaborParams) -> np.ndarray:
    """
    Batched analysis on the last axis: [..., N] -> [..., K, M].

    ``conj_window`` is the complex conjugate of the window samples.
    """
    f = np.asarray(f, dtype=complex)
    gathered = conj_window[_shift_index(p)] * f[..., None, :]
    folded = gathered.reshape(gathered.shape[:-1] + (p.N // p.M, p.M)).sum(axis=-2)
    return np.fft.fft(folded, axis=-1) * _section_phase(p, 1) / p.N


def synthesis_sum(G: np.ndarray, w: Window, p: GaborParams) -> np.ndarray:
    """sum_{l,m} G[l,m] psi_{lm}, batched over leading axes: [..., K, M] -> [..., N]."""
    inner = p.M * np.fft.ifft(G * _section_phase(p, -1), axis=-1)
    tiled = np.tile(inner, (1,) * (inner.ndim - 1) + (p.N // p.M,))
    return (w.samples[_shift_index(p)] * tiled).sum(axis=-2)


def gabor_analysis(f: np.ndarray, w: Window, p: GaborParams) -> PhaseField:
    f = np.asarray(f, dtype=complex)
    require(f.shape == (p.N,), "shape-mismatch", f"signal shape {f.shape} != ({p.N},)")
    require(w.N == p.N, "shape-mismatch", f"window length {w.N} != N={p.N}")
    return PhaseField(analysis_array(f, np.conj(w.samples), p), p)


def gabor_synthesis(G: PhaseField, w: Window, p: GaborParams) -> np.ndarray:
    """Frame inversion: F^{-1} sum_{l,m} G[l,m] psi_{lm}."""
    zc = frame_eigenvalues(w, p)
    y = synthesis_sum(G.data, w, p)
    return inverse_zak(zak_transform(y, p) / zc.eigenvalues, p)


# ---------------------------------------------------------------------------
# Phase-space <-> group
# ---------------------------------------------------------------------------

def apply_s_inverse(G: PhaseField, p: Optional[GaborParams] = None) -> GroupField:
    """W[l,m,k] = exp(-2 pi i (k/Q + lm/(2P))) G[l,m]."""
    p = p or G.params
    c = p.Q // (2 * p.P)
    l = np.arange(p.K)[:, None, None]
    m = np.arange(p.M)[None, :, None]
    k = np.arange(p.Q)[None, None, :]
    phase = np.exp(-2j * np.pi * ((k + c * l * m) % p.Q) / p.Q)
    return GroupField(phase * G.data[:, :, None], p)


def apply_s(W: GroupField) -> PhaseField:
    """Restriction to the section k = -Q lm / (2P) mod Q."""
    p = W.params
    c = p.Q // (2 * p.P)
    l = np.arange(p.K)[:, None]
    m = np.arange(p.M)[None, :]
    k0 = (-c * l * m) % p.Q
    return PhaseField(W.data[l, m, k0], p)


# ---------------------------------------------------------------------------
# Grid time-frequency shifts
# ---------------------------------------------------------------------------

def time_frequency_shift(f: np.ndarray, l0: int, m0: int, p: GaborParams) -> np.ndarray:
    """U_[l0, m0, 0] f[n] = e^{-pi i m0 l0 / P} e^{2 pi i n m0 / M} f[n - l0 L]."""
    n = np.arange(p.N)
    shifted = np.roll(np.asarray(f, dtype=complex), l0 * p.L, axis=-1)
    return np.exp(-1j * np.pi * m0 * l0 / p.P) * np.exp(2j * np.pi * ((n * m0) % p.M) / p.M) * shifted


def translate_phase(G: np.ndarray, l0: int, m0: int, p: GaborParams) -> np.ndarray:
    """Left translation on phase space matching time_frequency_shift on signals."""
    l = np.arange(p.K)[:, None]
    twist = np.exp(-1j * np.pi * m0 * l0 / p.P) * np.exp(2j * np.pi * ((l * m0) % p.P) / p.P)
    return twist * np.roll(G, (l0, m0), axis=(-2, -1))
