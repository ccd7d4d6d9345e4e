"""
Closed-form Gabor transforms of Gaussian-windowed chirps and their exact
flat-disc erosions.

f(xi) = exp(-xi^2 / (2 b^2)) exp(i pi r xi^2) analysed with psi(xi) = exp(-pi xi^2)
gives a Gaussian in (p, q) with complex quadratic form B. Everything for a
general window scale a follows from the a=1 case by the rescaling
G_a[b, r](p, q) = a G_1[b/a, r a^2](p/a, a q).
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.integrate import quad_vec
from scipy.optimize import brentq

from engines.fields import PhaseField
from engines.gabor import gabor_analysis, make_gaussian_window
from models import ChirpParams, GaborParams
from utils.errors import GaborFlowError, InputValidationError

logger = logging.getLogger(__name__)

DEGENERACY_TOLERANCE = 1e-12
AXIS_TOLERANCE = 1e-10
IMAG_ROOT_TOLERANCE = 1e-5
CONSTRAINT_TOLERANCE = 1e-6
NEWTON_STEPS = 4
MAX_BRACKET_DOUBLINGS = 200

BRANCH_GENERIC = "generic"
BRANCH_AXIS1 = "axis1"
BRANCH_AXIS2 = "axis2"
BRANCH_SPLIT = "split"

_BRANCH_NAMES = (BRANCH_GENERIC, BRANCH_AXIS1, BRANCH_AXIS2, BRANCH_SPLIT)


@dataclass(frozen=True, eq=False)
class ChirpGaborForm:
    """Quadratic form B (complex symmetric 2x2) and the prefactor sqrt(1/alpha)."""

    B: np.ndarray
    prefactor: complex
    chirp: ChirpParams

    def exponent(self, p, q):
        B = self.B
        return B[0, 0] * p * p + 2.0 * B[0, 1] * p * q + B[1, 1] * q * q

    def evaluate(self, p, q, s=None):
        """Value on the group at (p, q, s); s=None evaluates on the phase-space section s=-pq/2."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        value = self.prefactor * np.exp(self.exponent(p, q))
        if s is None:
            return value
        return value * np.exp(-2j * np.pi * (np.asarray(s, dtype=float) + 0.5 * p * q))

    def phase_space(self, p, q):
        return self.evaluate(p, q)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "b": self.chirp.b,
            "r": self.chirp.r,
            "re_B": self.B.real.tolist(),
            "im_B": self.B.imag.tolist(),
            "prefactor": [self.prefactor.real, self.prefactor.imag],
        }


@dataclass(frozen=True, eq=False)
class EigenFrame:
    """Eigenpairs of Re(B) with |lambda1| < |lambda2|."""

    lambda1: float
    lambda2: float
    k1: np.ndarray
    k2: np.ndarray

    def alpha(self, p, q) -> Tuple[np.ndarray, np.ndarray]:
        """Coordinates (alpha1, alpha2) of (p, q) in the orthonormal frame (k1, k2)."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        return self.k1[0] * p + self.k1[1] * q, self.k2[0] * p + self.k2[1] * q

    def point(self, alpha1, alpha2) -> Tuple[np.ndarray, np.ndarray]:
        return (
            alpha1 * self.k1[0] + alpha2 * self.k2[0],
            alpha1 * self.k1[1] + alpha2 * self.k2[1],
        )

    def matrix(self) -> np.ndarray:
        return self.lambda1 * np.outer(self.k1, self.k1) + self.lambda2 * np.outer(self.k2, self.k2)

    def finite_time(self, c: float = 1.0) -> float:
        return finite_time(self, c)

    def to_dict(self, c: float = 1.0) -> Dict[str, Any]:
        return {
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "k1": self.k1.tolist(),
            "k2": self.k2.tolist(),
            "t_fin": finite_time(self, c),
        }


@dataclass(frozen=True)
class LagrangeRoot:
    """Multiplier of the circle-constrained minimization plus the attained minimum."""

    value: float
    branch: str
    minimum: float
    alpha1_star: float
    alpha2_star: float
    residual: float = 0.0


# ---------------------------------------------------------------------------
# Signal and exact transform
# ---------------------------------------------------------------------------

def _wrap(n: np.ndarray, size: int) -> np.ndarray:
    """Map 0..size-1 to the centered range [-size/2, size/2)."""
    return ((np.asarray(n) + size // 2) % size) - size // 2


def chirp_signal(c: ChirpParams, N: int, centered: bool = True) -> np.ndarray:
    """Samples f(xi) at xi = n/N; centered samples put xi in [-1/2, 1/2)."""
    n = np.arange(N)
    xi = (_wrap(n, N) if centered else n) / N
    return np.exp(-xi ** 2 / (2.0 * c.b ** 2)) * np.exp(1j * np.pi * c.r * xi ** 2)


def chirp_gabor_exact(c: ChirpParams) -> ChirpGaborForm:
    b2 = c.b ** 2
    b4 = b2 * b2
    r = c.r
    shifted = b2 + 1.0 / (2.0 * np.pi)
    d = r * r * b4 + shifted ** 2

    B11 = complex(-0.5 * shifted - np.pi * r * r * b4, np.pi * r * b4) / d
    B22 = complex(-np.pi * b2 * shifted, -np.pi * r * b4) / d
    B12 = complex(np.pi * r * b4, np.pi * r * r * b4 + 0.5 * b2 + 1.0 / (4.0 * np.pi)) / d
    B = np.array([[B11, B12], [B12, B22]], dtype=complex)

    alpha = complex(1.0 + 1.0 / (2.0 * np.pi * b2), -r)
    prefactor = complex(np.sqrt(1.0 / alpha))
    return ChirpGaborForm(B=B, prefactor=prefactor, chirp=c)


def rescaled_chirp(c: ChirpParams, a: float) -> ChirpParams:
    """Chirp parameters of the dilated signal f(a xi)."""
    return ChirpParams(b=c.b / a, r=c.r * a * a)


def gabor_exact(c: ChirpParams, a: float, p, q, s=None):
    """Continuous Gabor transform for window exp(-pi xi^2 / a^2)."""
    form = chirp_gabor_exact(rescaled_chirp(c, a))
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    value = a * form.evaluate(p / a, a * q)
    if s is None:
        return value
    return value * np.exp(-2j * np.pi * (np.asarray(s, dtype=float) + 0.5 * p * q))


def phase_grid(p: GaborParams) -> Tuple[np.ndarray, np.ndarray]:
    """Centered physical coordinates (p_l, q_m) of the phase-space grid, shape [K, M]."""
    pos = _wrap(np.arange(p.K), p.K) * p.dp
    freq = _wrap(np.arange(p.M), p.M) * p.dq
    return np.meshgrid(pos, freq, indexing="ij")


def sampled_exact_field(c: ChirpParams, p: GaborParams) -> PhaseField:
    P_, Q_ = phase_grid(p)
    return PhaseField(gabor_exact(c, p.a, P_, Q_), p)


def periodic_gabor_exact(c: ChirpParams, a: float, p_vals, q_vals) -> np.ndarray:
    """
    Transform of the chirp restricted to [-1/2, 1/2) with the 1-periodized
    window, by adaptive quadrature; shape [len(p_vals), len(q_vals)].

    This is the limit of the discrete transform as N grows with K and P fixed.
    """
    p_vals = np.asarray(p_vals, dtype=float)[:, None]
    q_vals = np.asarray(q_vals, dtype=float)[None, :]

    def integrand(xi):
        f = np.exp(-xi ** 2 / (2.0 * c.b ** 2)) * np.exp(1j * np.pi * c.r * xi ** 2)
        d = xi - p_vals
        wrapped = d - np.round(d)
        value = f * np.exp(-np.pi * wrapped ** 2 / a ** 2) * np.exp(-2j * np.pi * q_vals * d)
        return np.concatenate([value.real.ravel(), value.imag.ravel()])

    total, _ = quad_vec(integrand, -0.5, 0.5, epsabs=1e-13, epsrel=1e-12, limit=4000)
    half = total.size // 2
    return (total[:half] + 1j * total[half:]).reshape(p_vals.shape[0], q_vals.shape[1])


def convergence_grid(N: int, a: float, K: int = 16, P: int = 4) -> GaborParams:
    """Grid with K and P held fixed, so only M = P N / K grows with N."""
    L = N // K
    return GaborParams(N=N, K=K, M=P * L, L=L, Q=2 * P, a=a)


def convergence_gap(c: ChirpParams, N: int, a: float = 1 / 8, K: int = 16, P: int = 4) -> float:
    """Sup-norm distance between the discrete chirp transform and its continuous limit."""
    p = convergence_grid(N, a, K, P)
    G = gabor_analysis(chirp_signal(c, N), make_gaussian_window(p), p)
    pos = _wrap(np.arange(p.K), p.K) * p.dp
    freq = _wrap(np.arange(p.M), p.M) * p.dq
    exact = periodic_gabor_exact(c, a, pos, freq)
    gap = float(np.abs(G.data - exact).max())
    logger.info(f"convergence gap N={N} (K={K}, P={P}): {gap:.3e}")
    return gap


# ---------------------------------------------------------------------------
# Eigenframe
# ---------------------------------------------------------------------------

def _orient(v: np.ndarray) -> np.ndarray:
    nonzero = np.flatnonzero(np.abs(v) > 1e-15)
    if nonzero.size and v[nonzero[0]] < 0:
        return -v
    return v


def eigenframe(form: ChirpGaborForm) -> EigenFrame:
    re_B = 0.5 * (form.B.real + form.B.real.T)
    values, vectors = np.linalg.eigh(re_B)
    order = np.argsort(np.abs(values))
    l1, l2 = float(values[order[0]]), float(values[order[1]])
    if abs(l1 - l2) < DEGENERACY_TOLERANCE * abs(l2):
        raise GaborFlowError(
            "degenerate-spectrum",
            "Re(B) has a repeated eigenvalue; principal directions are undefined",
            lambda1=l1,
            lambda2=l2,
        )
    k1 = _orient(vectors[:, order[0]].copy())
    k2 = _orient(vectors[:, order[1]].copy())
    return EigenFrame(lambda1=l1, lambda2=l2, k1=k1, k2=k2)


# ---------------------------------------------------------------------------
# Collapse time on the weak principal axis
# ---------------------------------------------------------------------------

def _isoline_curvature(frame: EigenFrame, x: np.ndarray) -> float:
    R = frame.matrix()
    gx, gy = 2.0 * R @ x
    hxx, hxy, hyy = 2.0 * R[0, 0], 2.0 * R[0, 1], 2.0 * R[1, 1]
    norm = np.hypot(gx, gy)
    if norm == 0:
        return np.inf
    return abs(gy * gy * hxx - 2.0 * gx * gy * hxy + gx * gx * hyy) / norm ** 3


def axis_collapse_time(frame: EigenFrame, alpha1: float) -> float:
    """
    Largest t for which the circle of radius t around alpha1*k1 still has its
    minimizer on the k1 axis: the isoline through the outward point at distance t
    has curvature exactly 1/t there.
    """
    alpha1 = abs(float(alpha1))
    if alpha1 == 0:
        return 0.0

    def tangency(t: float) -> float:
        return t * _isoline_curvature(frame, (alpha1 + t) * frame.k1) - 1.0

    hi = alpha1
    for _ in range(MAX_BRACKET_DOUBLINGS):
        if tangency(hi) > 0:
            break
        hi *= 2.0
    else:
        raise GaborFlowError("root-find-failed", "could not bracket the collapse time", alpha1=alpha1)
    try:
        return float(brentq(tangency, 0.0, hi, xtol=1e-15 * alpha1, rtol=4 * np.finfo(float).eps))
    except (ValueError, RuntimeError) as e:
        raise GaborFlowError("root-find-failed", f"collapse time root find failed: {e}", alpha1=alpha1)


def t_max(frame: EigenFrame, p: float) -> float:
    """Collapse time at the point of the k1 axis with first coordinate p."""
    if p == 0:
        return 0.0
    if abs(frame.k1[0]) < 1e-15:
        raise InputValidationError("invalid-argument", "k1 is vertical; points on its axis are not parameterized by p")
    return axis_collapse_time(frame, p / frame.k1[0])


def t_max_closed_form(frame: EigenFrame, p: float) -> float:
    alpha1 = p / frame.k1[0]
    l1, l2 = abs(frame.lambda1), abs(frame.lambda2)
    return l1 * abs(alpha1) / (l2 - l1)


# ---------------------------------------------------------------------------
# Lagrange multiplier of the circle-constrained minimization
# ---------------------------------------------------------------------------

def quartic_coefficients(frame: EigenFrame, alpha1, alpha2, t) -> np.ndarray:
    """
    Coefficients (highest degree first, shape [..., 5]) of
    t^2 (x-l1)^2 (x-l2)^2 - (l1 a1)^2 (x-l2)^2 - (l2 a2)^2 (x-l1)^2.
    """
    l1, l2 = frame.lambda1, frame.lambda2
    alpha1, alpha2, t = np.broadcast_arrays(
        np.asarray(alpha1, dtype=float), np.asarray(alpha2, dtype=float), np.asarray(t, dtype=float)
    )
    s, pr = l1 + l2, l1 * l2
    c1 = (l1 * alpha1) ** 2
    c2 = (l2 * alpha2) ** 2
    t2 = t * t
    return np.stack(
        [
            t2,
            -2.0 * s * t2,
            (s * s + 2.0 * pr) * t2 - c1 - c2,
            -2.0 * s * pr * t2 + 2.0 * (l2 * c1 + l1 * c2),
            pr * pr * t2 - c1 * l2 * l2 - c2 * l1 * l1,
        ],
        axis=-1,
    )


def _horner(coeffs: np.ndarray, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    value = np.zeros_like(x)
    slope = np.zeros_like(x)
    for j in range(coeffs.shape[-1]):
        slope = slope * x + value
        value = value * x + coeffs[..., j : j + 1]
    return value, slope


def quartic_residual(coeffs: np.ndarray, x) -> np.ndarray:
    """|P(x)| relative to sum_i |c_i| |x|^i."""
    x = np.asarray(x, dtype=float)[..., None]
    value, _ = _horner(coeffs, x)
    scale, _ = _horner(np.abs(coeffs), np.abs(x))
    return (np.abs(value) / np.maximum(scale, np.finfo(float).tiny))[..., 0]


def _generic_roots(frame: EigenFrame, a1: np.ndarray, a2: np.ndarray, t: np.ndarray):
    """Minimizing real root per point, or NaN where no candidate satisfies the constraint."""
    l1, l2 = frame.lambda1, frame.lambda2
    coeffs = quartic_coefficients(frame, a1, a2, t)
    monic = coeffs[:, 1:] / coeffs[:, :1]

    n = coeffs.shape[0]
    companion = np.zeros((n, 4, 4))
    companion[:, 0, :] = -monic
    companion[:, 1, 0] = companion[:, 2, 1] = companion[:, 3, 2] = 1.0
    roots = np.linalg.eigvals(companion)

    real = np.abs(roots.imag) <= IMAG_ROOT_TOLERANCE * (1.0 + np.abs(roots.real))
    lam = roots.real.copy()
    for _ in range(NEWTON_STEPS):
        value, slope = _horner(coeffs, lam)
        ok = np.abs(slope) > 0
        lam = np.where(ok, lam - np.divide(value, slope, out=np.zeros_like(value), where=ok), lam)

    a1c, a2c, tc = a1[:, None], a2[:, None], t[:, None]
    d1, d2 = lam - l1, lam - l2
    valid = real & (np.abs(d1) > 1e-14 * abs(l1)) & (np.abs(d2) > 1e-14 * abs(l2))
    with np.errstate(divide="ignore", invalid="ignore"):
        s1 = lam * a1c / d1
        s2 = lam * a2c / d2
        distance = (s1 - a1c) ** 2 + (s2 - a2c) ** 2
        valid &= np.abs(distance - tc * tc) <= CONSTRAINT_TOLERANCE * tc * tc
        u = np.where(valid, l1 * s1 ** 2 + l2 * s2 ** 2, np.inf)

    pick = np.argmin(u, axis=1)
    rows = np.arange(n)
    found = np.isfinite(u[rows, pick])
    nan = np.full(n, np.nan)
    return (
        np.where(found, lam[rows, pick], nan),
        np.where(found, u[rows, pick], nan),
        np.where(found, s1[rows, pick], nan),
        np.where(found, s2[rows, pick], nan),
        quartic_residual(coeffs, np.where(found, lam[rows, pick], 0.0)),
    )


def lagrange_field(frame: EigenFrame, alpha1, alpha2, t: float, collapse_error: Optional[str] = None) -> Dict[str, np.ndarray]:
    """
    Batched Lagrange multipliers and constrained minima of sum_k lambda_k alpha_k'^2
    over the circle of radius t around (alpha1, alpha2).

    On the weak axis beyond the collapse time the minimizer splits off the axis;
    with ``collapse_error`` set that case raises GaborFlowError with that code,
    otherwise one of the two symmetric minimizers is returned (branch "split").
    """
    if t <= 0:
        raise InputValidationError("invalid-argument", f"t must be positive, got {t}")
    b1, b2 = np.broadcast_arrays(np.asarray(alpha1, dtype=float), np.asarray(alpha2, dtype=float))
    shape = b1.shape
    a1 = b1.ravel()
    a2 = b2.ravel()
    l1, l2 = frame.lambda1, frame.lambda2

    scale = np.maximum(np.maximum(np.abs(a1), np.abs(a2)), t)
    on_axis1 = np.abs(a1) <= AXIS_TOLERANCE * scale
    on_axis2 = ~on_axis1 & (np.abs(a2) <= AXIS_TOLERANCE * scale)
    generic = ~(on_axis1 | on_axis2)

    n = a1.size
    lam = np.empty(n)
    u = np.empty(n)
    s1 = np.empty(n)
    s2 = np.empty(n)
    residual = np.zeros(n)
    branch = np.zeros(n, dtype=int)

    # strong axis: the minimizer moves outward along k2
    sign2 = np.where(a2 >= 0, 1.0, -1.0)
    lam[on_axis1] = (1.0 + np.abs(a2[on_axis1]) / t) * l2
    u[on_axis1] = l2 * (np.abs(a2[on_axis1]) + t) ** 2
    s1[on_axis1] = 0.0
    s2[on_axis1] = a2[on_axis1] + t * sign2[on_axis1]
    branch[on_axis1] = 1

    for i in np.flatnonzero(on_axis2):
        collapse = axis_collapse_time(frame, a1[i])
        if t <= collapse:
            lam[i] = (1.0 + abs(a1[i]) / t) * l1
            u[i] = l1 * (abs(a1[i]) + t) ** 2
            s1[i] = a1[i] + t * np.sign(a1[i])
            s2[i] = 0.0
            branch[i] = 2
            continue
        if collapse_error is not None:
            raise GaborFlowError(
                collapse_error,
                f"t={t} exceeds the collapse time {collapse:.6g} on the weak principal axis",
                alpha1=float(a1[i]),
                t_max=collapse,
            )
        s1[i] = l2 * a1[i] / (l2 - l1)
        s2[i] = np.sqrt(max(t * t - (s1[i] - a1[i]) ** 2, 0.0))
        lam[i] = l2
        u[i] = l1 * s1[i] ** 2 + l2 * s2[i] ** 2
        branch[i] = 3

    if generic.any():
        tg = np.full(int(generic.sum()), float(t))
        g_lam, g_u, g_s1, g_s2, g_res = _generic_roots(frame, a1[generic], a2[generic], tg)
        if np.isnan(g_lam).any():
            bad = np.flatnonzero(generic)[np.isnan(g_lam)][0]
            raise GaborFlowError(
                "no-admissible-root",
                "no real root of the multiplier quartic satisfies the circle constraint",
                alpha1=float(a1[bad]),
                alpha2=float(a2[bad]),
                t=float(t),
            )
        lam[generic], u[generic], s1[generic], s2[generic], residual[generic] = g_lam, g_u, g_s1, g_s2, g_res

    return {
        "lambda": lam.reshape(shape),
        "minimum": u.reshape(shape),
        "alpha1_star": s1.reshape(shape),
        "alpha2_star": s2.reshape(shape),
        "residual": residual.reshape(shape),
        "branch": branch.reshape(shape),
    }


def lagrange_multiplier(frame: EigenFrame, p: float, q: float, t: float) -> LagrangeRoot:
    a1, a2 = frame.alpha(p, q)
    out = lagrange_field(frame, a1, a2, t, collapse_error="no-admissible-root")
    return LagrangeRoot(
        value=float(out["lambda"]),
        branch=_BRANCH_NAMES[int(out["branch"])],
        minimum=float(out["minimum"]),
        alpha1_star=float(out["alpha1_star"]),
        alpha2_star=float(out["alpha2_star"]),
        residual=float(out["residual"]),
    )


def lagrange_approximation(frame: EigenFrame, p: float, q: float, t: float, c_knob: float = 0.5) -> float:
    """
    Two-branch closed-form approximation of the multiplier.

    Below the collapse time of the point's weak-axis coordinate the weak
    eigenvalue drives the multiplier, above it the strong one; both branches
    are exact on the respective principal axis.
    """
    if t <= 0:
        raise InputValidationError("invalid-argument", f"t must be positive, got {t}")
    a1, a2 = (float(v) for v in frame.alpha(p, q))
    l1, l2 = frame.lambda1, frame.lambda2
    if t <= axis_collapse_time(frame, a1):
        radius = np.sqrt(a1 ** 2 + a2 ** 2 * ((a1 ** 2 + a2 ** 2) / t ** 2) ** 1.5)
        return float(l1 * (1.0 + radius / t))
    radius = np.sqrt(a2 ** 2 + c_knob ** 2 * (l1 / l2) ** 2 * a1 ** 2)
    return float(l2 * (1.0 + radius / t))


# ---------------------------------------------------------------------------
# Exactly eroded chirp transform (flat disc kernel)
# ---------------------------------------------------------------------------

def _check_eta(eta: float) -> None:
    if eta != 0.5:
        raise GaborFlowError(
            "eta-out-of-range",
            f"closed-form erosion of the chirp is only available for the flat disc (eta=1/2), got {eta}",
        )


def eroded_chirp_field(c: ChirpParams, a: float, t: float, p, q, s=None, eta: float = 0.5, strict: bool = False):
    """
    Eroded transform at arrays of points (p, q). Modulus is the disc-erosion of
    |G|; phase is that of the unprocessed transform.
    """
    _check_eta(eta)
    if t < 0:
        raise InputValidationError("invalid-argument", f"t must be non-negative, got {t}")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if t == 0:
        return gabor_exact(c, a, p, q, s)

    form = chirp_gabor_exact(rescaled_chirp(c, a))
    frame = eigenframe(form)
    x1, x2 = p / a, a * q
    a1, a2 = frame.alpha(x1, x2)
    out = lagrange_field(frame, a1, a2, t, collapse_error="beyond-collapse" if strict else None)

    im_B = form.B.imag
    phase = im_B[0, 0] * x1 * x1 + 2.0 * im_B[0, 1] * x1 * x2 + im_B[1, 1] * x2 * x2
    value = a * form.prefactor * np.exp(1j * phase) * np.exp(out["minimum"])
    if s is None:
        return value
    return value * np.exp(-2j * np.pi * (np.asarray(s, dtype=float) + 0.5 * p * q))


def eroded_chirp_exact(c: ChirpParams, a: float, eta: float, t: float, p: float, q: float, s: float) -> complex:
    """Single-point evaluation; raises ``beyond-collapse`` past the weak-axis collapse time."""
    return complex(eroded_chirp_field(c, a, t, p, q, s, eta=eta, strict=True))


def sampled_eroded_field(c: ChirpParams, p: GaborParams, t: float) -> PhaseField:
    P_, Q_ = phase_grid(p)
    return PhaseField(eroded_chirp_field(c, p.a, t, P_, Q_), p)


# ---------------------------------------------------------------------------
# Isocontour anisotropy
# ---------------------------------------------------------------------------

def finite_time(frame: EigenFrame, c: float = 1.0) -> float:
    """Time at which the level set exp(u) = exp(-|c|) collapses onto the k1 axis."""
    return float(np.sqrt(abs(c) / abs(frame.lambda2)))


def collapse_anisotropy(frame: EigenFrame, t: float, c: float) -> float:
    t_fin = finite_time(frame, c)
    if t < 0 or t >= t_fin:
        raise GaborFlowError(
            "t-beyond-finite-time",
            f"t={t} outside [0, t_fin={t_fin:.6g})",
            t=t,
            t_fin=t_fin,
        )
    return float((np.sqrt(abs(c) / abs(frame.lambda1)) - t) / (t_fin - t))
