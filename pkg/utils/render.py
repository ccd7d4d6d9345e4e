"""
RGB pixmaps: phase as hue, modulus as intensity, plus arrow and net overlays.

All outputs are uint8 RGB arrays; write_ppm stores them as binary PPM.
"""
import logging
from typing import Literal, Optional

import cv2
import numpy as np
from matplotlib.colors import hsv_to_rgb

from engines.fields import PhaseField
from utils.errors import InputValidationError

logger = logging.getLogger(__name__)

RenderStyle = Literal["phase-hue", "modulus-gray", "overlay"]

ARROW_COLOR = (255, 64, 0)
RING_COLOR = (0, 255, 0)
SPOKE_COLOR = (255, 255, 0)
MASKED_COLOR = (255, 0, 0)


def _to_uint8(rgb: np.ndarray) -> np.ndarray:
    return np.round(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)


def render_complex(data: np.ndarray, style: RenderStyle = "overlay") -> np.ndarray:
    """hue = arg/2pi, value = |z| / max|z|; a zero array renders black in every style."""
    data = np.asarray(data, dtype=complex)
    modulus = np.abs(data)
    top = modulus.max() if modulus.size else 0.0
    value = modulus / top if top > 0 else np.zeros_like(modulus)

    if style == "modulus-gray":
        return _to_uint8(np.repeat(value[..., None], 3, axis=-1))
    if style == "phase-hue":
        value = (modulus > 0).astype(float)
    elif style != "overlay":
        raise InputValidationError("invalid-argument", f"unknown render style {style!r}")

    hue = np.mod(np.angle(data) / (2.0 * np.pi), 1.0)
    hsv = np.stack([hue, np.ones_like(hue), value], axis=-1)
    return _to_uint8(hsv_to_rgb(hsv))


def render_field(G: PhaseField, style: RenderStyle = "overlay") -> np.ndarray:
    """Phase-space picture with position along the columns and frequency along the rows."""
    if G.dim != 1:
        raise InputValidationError("shape-mismatch", "render_field draws d=1 phase fields", dim=G.dim)
    return render_complex(G.data.T, style)


def gray_background(img: np.ndarray, upsample: int = 1) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    lo, hi = float(img.min()), float(img.max())
    scaled = np.zeros_like(img) if hi <= lo else (img - lo) / (hi - lo)
    gray = _to_uint8(np.repeat(scaled[..., None], 3, axis=-1))
    if upsample > 1:
        gray = cv2.resize(gray, None, fx=upsample, fy=upsample, interpolation=cv2.INTER_NEAREST)
    return np.ascontiguousarray(gray)


def _pt(x: np.ndarray, upsample: int):
    # array index (x1, x2) -> OpenCV point (column, row)
    return int(round(x[1] * upsample)), int(round(x[0] * upsample))


def render_frequency_field(
    q: np.ndarray, valid: np.ndarray, stride: int, image: Optional[np.ndarray] = None,
    upsample: int = 4, length: float = 16.0,
) -> np.ndarray:
    """Arrow per sampled position, drawn along q with length proportional to |q| (cycles/pixel)."""
    K1, K2 = valid.shape
    size = (K1 * stride, K2 * stride)
    canvas = gray_background(image if image is not None else np.zeros(size), upsample)
    for l1 in range(K1):
        for l2 in range(K2):
            if not valid[l1, l2]:
                continue
            start = np.array([l1 * stride, l2 * stride], dtype=float)
            end = start + length * q[l1, l2]
            cv2.arrowedLine(canvas, _pt(start, upsample), _pt(end, upsample), ARROW_COLOR, 1, tipLength=0.3)
    return canvas


def render_net(points: np.ndarray, masked: Optional[np.ndarray] = None, image: Optional[np.ndarray] = None,
               size: Optional[int] = None, upsample: int = 4) -> np.ndarray:
    """Rings (closed) and spokes of one frame of a deformation net [R, J, 2]."""
    if image is None:
        extent = size or int(np.ceil(points[..., :].max())) + 1
        image = np.zeros((extent, extent))
    canvas = gray_background(image, upsample)
    R, J, _ = points.shape
    for r in range(R):
        ring = np.array([_pt(points[r, j], upsample) for j in range(J)], dtype=np.int32)
        cv2.polylines(canvas, [ring], True, RING_COLOR, 1)
    for j in range(J):
        spoke = np.array([_pt(points[r, j], upsample) for r in range(R)], dtype=np.int32)
        cv2.polylines(canvas, [spoke], False, SPOKE_COLOR, 1)
    if masked is not None:
        for r, j in np.argwhere(masked):
            cv2.circle(canvas, _pt(points[r, j], upsample), 2, MASKED_COLOR, -1)
    return canvas


def write_ppm(path: str, rgb: np.ndarray) -> str:
    """Binary PPM; OpenCV expects BGR channel order."""
    if not cv2.imwrite(path, np.ascontiguousarray(rgb[..., ::-1])):
        raise OSError(f"could not write {path}")
    logger.info(f"wrote {rgb.shape[1]}x{rgb.shape[0]} pixmap to {path}")
    return path
