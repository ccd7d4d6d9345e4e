"""
Two-dimensional Gabor pipeline for tagged images.

Image transforms are tensor products of the 1D machinery, stored as
G[l1, l2, m1, m2]. Positions are array indices (x1, x2) in pixels; frequencies
are cycles per pixel.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import map_coordinates

from engines.diffusion import smoothing_normalization, twisted_smooth
from engines.fields import PhaseField, Window
from engines.gabor import analysis_array
from engines.reassignment import erode_quadratic_separable
from models import GaborParams, PhantomSpec, ReassignParams, SmoothingParams
from utils.config import get_settings
from utils.errors import GaborFlowError, InputValidationError, require

logger = logging.getLogger(__name__)

COM_HALF_WIDTH = 3
CONDITION_THRESHOLD = 1e8
VALID_SAMPLE_LEVEL = 0.999


@dataclass(eq=False)
class TagStack:
    """images[t, i] is frame t scanned with tag direction directions[i] (degrees)."""

    images: np.ndarray
    directions: List[float]

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=float)
        if self.images.ndim != 4 or self.images.shape[1] != len(self.directions):
            raise InputValidationError(
                "shape-mismatch",
                f"tag stack must be [T, {len(self.directions)}, N, N], got {self.images.shape}",
            )
        if len(self.directions) < 2:
            raise InputValidationError("invalid-argument", "at least two tag directions are required")

    @property
    def frames(self) -> int:
        return self.images.shape[0]


@dataclass(eq=False)
class FrequencyField:
    q: np.ndarray
    valid: np.ndarray
    stride: int


@dataclass(eq=False)
class DeformationGradientField:
    D: np.ndarray
    condition: np.ndarray
    valid: np.ndarray
    stride: int


@dataclass(eq=False)
class DeformationNet:
    points: np.ndarray
    masked: np.ndarray


@dataclass(eq=False)
class Phantom:
    stack: TagStack
    truth: DeformationNet
    grid0: np.ndarray
    seed: np.ndarray
    spec: PhantomSpec


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

def gabor2d_array(img: np.ndarray, conj_window: np.ndarray, p: GaborParams) -> np.ndarray:
    """[N, N] image -> [K, K, M, M] coefficients, one 1D analysis per axis."""
    along2 = analysis_array(img, conj_window, p)               # [N, K2, M2]
    moved = np.moveaxis(along2, 0, -1)                          # [K2, M2, N]
    along1 = analysis_array(moved, conj_window, p)              # [K2, M2, K1, M1]
    return np.transpose(along1, (2, 0, 3, 1))


def gabor2d_analysis(img: np.ndarray, w: Window, p: GaborParams) -> PhaseField:
    img = np.asarray(img, dtype=complex)
    require(img.shape == (p.N, p.N), "shape-mismatch", f"image shape {img.shape} != ({p.N}, {p.N})")
    require(w.N == p.N, "shape-mismatch", f"window length {w.N} != N={p.N}")
    return PhaseField(gabor2d_array(img, np.conj(w.samples), p), p, dim=2)


def rot90_image(img: np.ndarray) -> np.ndarray:
    """f'[n1, n2] = f[n2, -n1] on the periodic grid."""
    n = img.shape[0]
    return img[:, (-np.arange(n)) % n].T


def rot90_field(G: PhaseField) -> PhaseField:
    """Matching rotation of a d=2 field: G'[l1, l2, m1, m2] = G[l2, -l1, m2, -m1]."""
    p = G.params
    neg_l = (-np.arange(p.K)) % p.K
    neg_m = (-np.arange(p.M)) % p.M
    flipped = G.data[:, neg_l][:, :, :, neg_m]
    return G.with_data(np.transpose(flipped, (1, 0, 3, 2)))


def reassign2d(G: PhaseField, rp: ReassignParams, p: Optional[GaborParams] = None) -> PhaseField:
    """Erosion of the 4D modulus with (|dp|^2/a^2 + a^2 |dq|^2)/(4t); phase restored."""
    p = p or G.params
    if rp.method != "erosion":
        raise InputValidationError("invalid-argument", "2D reassignment is erosion-based", method=rp.method)
    if rp.eta != 1.0:
        raise GaborFlowError("eta-out-of-range", f"2D reassignment uses the quadratic kernel (eta=1), got {rp.eta}")
    a = rp.a if rp.a is not None else p.a
    hp, hq = p.dp / a, a * p.dq
    eroded = erode_quadratic_separable(G.modulus, rp.t_final, ((0, hp), (1, hp), (2, hq), (3, hq)))
    return G.with_data(eroded * np.exp(1j * np.angle(G.data)))


def linear_smooth2d(G: PhaseField, sp: SmoothingParams, p: Optional[GaborParams] = None) -> PhaseField:
    p = p or G.params
    once = twisted_smooth(G.data, sp, p, l_axis=0, m_axis=2)
    twice = twisted_smooth(once, sp, p, l_axis=1, m_axis=3)
    # product of two 1D normalizations -> the d=2 normalization
    correction = smoothing_normalization(sp, dim=2) / smoothing_normalization(sp) ** 2
    return G.with_data(twice * correction)


# ---------------------------------------------------------------------------
# Frequency covector fields
# ---------------------------------------------------------------------------

def _wrapped(size: int) -> np.ndarray:
    n = np.arange(size)
    return ((n + size // 2) % size) - size // 2


def canonical_sign(q: np.ndarray) -> np.ndarray:
    """Representative of +-q in the upper half-plane; on the q2=0 line, q1 >= 0."""
    q = np.asarray(q, dtype=float)
    flip = (q[..., 1] < 0) | ((q[..., 1] == 0) & (q[..., 0] < 0))
    return np.where(flip[..., None], -q, q)


def _frequency_row(mod_row: np.ndarray, allowed: np.ndarray, support: np.ndarray, refine: str) -> Tuple[np.ndarray, np.ndarray]:
    """Per-position peak for one l1 row: mod_row is [K2, M, M]."""
    M = mod_row.shape[-1]
    freqs = _wrapped(M)
    masked = np.where(allowed, mod_row, -np.inf)
    flat = masked.reshape(masked.shape[0], -1).argmax(axis=1)
    m1, m2 = np.unravel_index(flat, (M, M))
    peak = masked.reshape(masked.shape[0], -1)[np.arange(masked.shape[0]), flat]
    q = np.stack([freqs[m1], freqs[m2]], axis=-1).astype(float)

    if refine == "center-of-mass":
        offsets = np.arange(-COM_HALF_WIDTH, COM_HALF_WIDTH + 1)
        i1 = (m1[:, None, None] + offsets[None, :, None]) % M
        i2 = (m2[:, None, None] + offsets[None, None, :]) % M
        rows = np.arange(mod_row.shape[0])[:, None, None]
        weights = mod_row[rows, i1, i2] * support[i1, i2]
        total = weights.sum(axis=(1, 2))
        safe = np.where(total > 0, total, 1.0)
        q[:, 0] += (weights * offsets[None, :, None]).sum(axis=(1, 2)) / safe
        q[:, 1] += (weights * offsets[None, None, :]).sum(axis=(1, 2)) / safe

    valid = np.isfinite(peak) & (peak > 0)
    return canonical_sign(q / M), valid


def frequency_field(
    G: PhaseField, dc_mask_radius: float = 2.0, refine: str = "center-of-mass", threads: Optional[int] = None
) -> FrequencyField:
    """
    Dominant local frequency per position, in cycles per pixel.

    Frequencies within dc_mask_radius bins of the origin are ignored and the
    peak is searched in the canonical half-plane.
    """
    require(G.dim == 2, "shape-mismatch", "frequency_field expects a d=2 phase field")
    p = G.params
    freqs = _wrapped(p.M)
    f1, f2 = np.meshgrid(freqs, freqs, indexing="ij")
    support = (np.hypot(f1, f2) >= dc_mask_radius).astype(float)
    half_plane = (f2 > 0) | ((f2 == 0) & (f1 >= 0))
    allowed = (support > 0) & half_plane
    if not allowed.any():
        raise GaborFlowError(
            "empty-after-mask", f"DC mask radius {dc_mask_radius} removes every frequency bin", M=p.M
        )

    modulus = G.modulus
    workers = max(1, min(threads or get_settings().threads, p.K))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda l1: _frequency_row(modulus[l1], allowed, support, refine), range(p.K)))
    q = np.stack([r[0] for r in rows])
    valid = np.stack([r[1] for r in rows])
    logger.info(f"frequency field: {int(valid.sum())}/{valid.size} valid positions, refine={refine}")
    return FrequencyField(q=q, valid=valid, stride=p.L)


# ---------------------------------------------------------------------------
# Deformation gradient and net
# ---------------------------------------------------------------------------

def deformation_gradient(
    Q_t: Sequence[FrequencyField], Q_prev: Sequence[FrequencyField], cond_threshold: float = CONDITION_THRESHOLD
) -> DeformationGradientField:
    """Least-squares D solving Q_t D = Q_prev per position (rows are tag directions)."""
    if len(Q_t) != len(Q_prev) or len(Q_t) < 2:
        raise InputValidationError(
            "invalid-argument", f"need matching stacks of >= 2 directions, got {len(Q_t)} and {len(Q_prev)}"
        )
    cur = np.stack([f.q for f in Q_t], axis=-2)          # [K, K, n, 2]
    prev = np.stack([f.q for f in Q_prev], axis=-2)
    valid = np.all([f.valid for f in Q_t], axis=0) & np.all([f.valid for f in Q_prev], axis=0)

    align = np.sign(np.sum(cur * prev, axis=-1, keepdims=True))
    cur = cur * np.where(align < 0, -1.0, 1.0)

    normal = np.einsum("...ni,...nj->...ij", cur, cur)
    rhs = np.einsum("...ni,...nj->...ij", cur, prev)
    with np.errstate(all="ignore"):
        condition = np.linalg.cond(normal)
    valid &= np.isfinite(condition) & (condition <= cond_threshold)

    D = np.broadcast_to(np.eye(2), normal.shape).copy()
    if valid.any():
        D[valid] = np.linalg.solve(normal[valid], rhs[valid])
    masked = int((~valid).sum())
    if masked:
        logger.warning(f"deformation gradient: {masked} positions rank-deficient or invalid, set to identity")
    return DeformationGradientField(D=D, condition=condition, valid=valid, stride=Q_t[0].stride)


def sample_gradient(field: DeformationGradientField, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Bilinear D at pixel positions x [..., 2]; second value flags usable samples."""
    x = np.asarray(x, dtype=float)
    coords = (x / field.stride).reshape(-1, 2).T
    K1, K2 = field.valid.shape
    D = np.empty((coords.shape[1], 2, 2))
    for i in range(2):
        for j in range(2):
            D[:, i, j] = map_coordinates(field.D[..., i, j], coords, order=1, mode="nearest")
    support = map_coordinates(field.valid.astype(float), coords, order=1, mode="nearest")
    inside = (coords[0] >= 0) & (coords[0] <= K1 - 1) & (coords[1] >= 0) & (coords[1] <= K2 - 1)
    ok = inside & (support >= VALID_SAMPLE_LEVEL) & np.all(np.isfinite(D), axis=(1, 2))
    return D.reshape(x.shape[:-1] + (2, 2)), ok.reshape(x.shape[:-1])


def polar_grid(center: Sequence[float], inner: float, outer: float, rings: int, points: int) -> np.ndarray:
    """[R, J, 2] grid; ring 0 is the outer contour and point 0 sits at angle 0."""
    radii = np.linspace(outer, inner, rings)
    angles = 2.0 * np.pi * np.arange(points) / points
    x1 = center[0] + radii[:, None] * np.cos(angles)[None, :]
    x2 = center[1] + radii[:, None] * np.sin(angles)[None, :]
    return np.stack([x1, x2], axis=-1)


def deformation_net(
    D_fields: Sequence[Optional[DeformationGradientField]], seed: np.ndarray, grid0: np.ndarray
) -> DeformationNet:
    """
    Propagate the material grid frame by frame: along the outer contour from the
    seed, then inward ring by ring using the already updated ring of the same
    frame. D_fields[t] maps frame t-1 to frame t; D_fields[0] is unused.
    """
    seed = np.asarray(seed, dtype=float)
    grid0 = np.asarray(grid0, dtype=float)
    T = len(D_fields)
    require(seed.shape == (T, 2), "shape-mismatch", f"seed path shape {seed.shape} != ({T}, 2)")
    R, J, _ = grid0.shape

    points = np.empty((T, R, J, 2))
    masked = np.zeros((T, R, J), dtype=bool)
    points[0] = grid0
    for t in range(1, T):
        field = D_fields[t]
        prev = points[t - 1]
        cur = points[t]
        cur[0, 0] = seed[t]

        last = np.eye(2)
        for j in range(J - 1):
            D, ok = sample_gradient(field, cur[0, j])
            if ok:
                last = D
            else:
                masked[t, 0, j] = True
            cur[0, j + 1] = cur[0, j] + last @ (prev[0, j + 1] - prev[0, j])

        last_ring = np.broadcast_to(np.eye(2), (J, 2, 2)).copy()
        for r in range(R - 1):
            D, ok = sample_gradient(field, cur[r])
            last_ring[ok] = D[ok]
            masked[t, r] |= ~ok
            step = prev[r + 1] - prev[r]
            cur[r + 1] = cur[r] + np.einsum("jab,jb->ja", last_ring, step)
        _, ok = sample_gradient(field, cur[R - 1])
        masked[t, R - 1] |= ~ok

    n_masked = int(masked.sum())
    if n_masked:
        logger.warning(f"deformation net: {n_masked} points sampled outside the valid deformation field")
    return DeformationNet(points=points, masked=masked)


def net_error(net: DeformationNet, truth: DeformationNet, frame: int = -1) -> float:
    """Mean Euclidean distance (pixels) between corresponding net points at one frame."""
    return float(np.linalg.norm(net.points[frame] - truth.points[frame], axis=-1).mean())


# ---------------------------------------------------------------------------
# Synthetic tagged phantom
# ---------------------------------------------------------------------------

def _center(spec: PhantomSpec) -> np.ndarray:
    if spec.center is not None:
        return np.asarray(spec.center, dtype=float)
    return np.array([spec.size / 2.0, spec.size / 2.0])


def phantom_forward(spec: PhantomSpec, t: float, X: np.ndarray) -> np.ndarray:
    """Material point X (frame 0) -> its position at frame t."""
    c = _center(spec)
    d = np.asarray(X, dtype=float) - c
    r = np.hypot(d[..., 0], d[..., 1])
    theta = np.arctan2(d[..., 1], d[..., 0])
    r_new = r * (1.0 + t * spec.scaling * (1.0 - r / spec.radius))
    theta_new = theta + t * spec.rotation * (1.0 + 0.5 * r / spec.radius)
    return np.stack([c[0] + r_new * np.cos(theta_new), c[1] + r_new * np.sin(theta_new)], axis=-1)


def phantom_inverse(spec: PhantomSpec, t: float, x: np.ndarray) -> np.ndarray:
    c = _center(spec)
    d = np.asarray(x, dtype=float) - c
    r_new = np.hypot(d[..., 0], d[..., 1])
    theta_new = np.arctan2(d[..., 1], d[..., 0])
    s = t * spec.scaling
    disc = np.maximum((1.0 + s) ** 2 - 4.0 * s * r_new / spec.radius, 0.0)
    r = 2.0 * r_new / ((1.0 + s) + np.sqrt(disc))
    theta = theta_new - t * spec.rotation * (1.0 + 0.5 * r / spec.radius)
    return np.stack([c[0] + r * np.cos(theta), c[1] + r * np.sin(theta)], axis=-1)


def tag_vector(direction_deg: float, period: float) -> np.ndarray:
    angle = np.deg2rad(direction_deg)
    return np.array([np.cos(angle), np.sin(angle)]) / period


def make_phantom(spec: PhantomSpec) -> Phantom:
    """Tagged frames of a smoothly scaled and rotated disc plus the exact material net."""
    n = spec.size
    grid = np.stack(np.meshgrid(np.arange(n), np.arange(n), indexing="ij"), axis=-1).astype(float)
    c = _center(spec)
    images = np.empty((spec.frames, len(spec.directions), n, n))
    for t in range(spec.frames):
        material = phantom_inverse(spec, t, grid) - c
        fade = np.exp(-spec.fading * t)
        for i, direction in enumerate(spec.directions):
            k = tag_vector(direction, spec.tag_period)
            images[t, i] = fade * 0.5 * (1.0 + np.cos(2.0 * np.pi * (material @ k)))

    grid0 = polar_grid(c, spec.inner_radius, spec.outer_radius, spec.rings, spec.points)
    truth = np.stack([phantom_forward(spec, t, grid0) for t in range(spec.frames)])
    logger.info(f"phantom: {spec.frames} frames, {len(spec.directions)} tag directions, size {n}")
    return Phantom(
        stack=TagStack(images=images, directions=list(spec.directions)),
        truth=DeformationNet(points=truth, masked=np.zeros(truth.shape[:-1], dtype=bool)),
        grid0=grid0,
        seed=truth[:, 0, 0].copy(),
        spec=spec,
    )


def exact_deformation_field(spec: PhantomSpec, t: int, p: GaborParams, step: float = 1e-4) -> DeformationGradientField:
    """Jacobian of x_{t-1} -> x_t at the position grid, by central differences of the exact maps."""
    pos = np.arange(p.K) * p.L
    x = np.stack(np.meshgrid(pos, pos, indexing="ij"), axis=-1).astype(float)

    def motion(y):
        return phantom_forward(spec, t, phantom_inverse(spec, t - 1, y))

    D = np.empty(x.shape[:-1] + (2, 2))
    for k in range(2):
        e = np.zeros(2)
        e[k] = step
        D[..., :, k] = (motion(x + e) - motion(x - e)) / (2.0 * step)
    valid = np.ones(x.shape[:-1], dtype=bool)
    return DeformationGradientField(D=D, condition=np.ones(valid.shape), valid=valid, stride=p.L)


def image_gabor_params(size: int, a: float = 0.25) -> GaborParams:
    """Stride-2 grid with as many frequency bins as positions per axis."""
    require(size % 2 == 0, "invalid-argument", f"image size must be even, got {size}")
    half = size // 2
    return GaborParams(N=size, K=half, M=half, L=2, Q=half, a=a)


def estimate_frequency_fields(
    stack: TagStack,
    w: Window,
    p: GaborParams,
    smoothing: Optional[SmoothingParams] = None,
    dc_mask_radius: float = 2.0,
    refine: str = "center-of-mass",
) -> List[List[FrequencyField]]:
    """fields[t][i] for every frame t and tag direction i."""
    fields = []
    for t in range(stack.frames):
        row = []
        for i in range(len(stack.directions)):
            G = gabor2d_analysis(stack.images[t, i], w, p)
            if smoothing is not None:
                G = linear_smooth2d(G, smoothing, p)
            row.append(frequency_field(G, dc_mask_radius, refine))
        fields.append(row)
    return fields


def estimate_deformation(fields: List[List[FrequencyField]]) -> List[Optional[DeformationGradientField]]:
    out: List[Optional[DeformationGradientField]] = [None]
    for t in range(1, len(fields)):
        out.append(deformation_gradient(fields[t], fields[t - 1]))
    return out
