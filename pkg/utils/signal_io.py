"""
File formats: signals, phase fields, real arrays, PGM images and net CSVs.

Binary payloads are little-endian and row-major with a JSON sidecar at
``<path>.json`` describing shape and dtype.
"""
import json
import logging
import os
from typing import List, Literal, Optional, Tuple

import cv2
import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from engines.fields import PhaseField
from models import GaborParams
from utils.errors import InputValidationError

logger = logging.getLogger(__name__)

COMPLEX_DTYPE = "<c16"
REAL_DTYPE = "<f8"
NET_COLUMNS = ["t", "r", "j", "x", "y", "masked"]


class SignalSidecar(BaseModel):
    n: int
    dtype: Literal["c128"] = "c128"


class FieldSidecar(BaseModel):
    dtype: Literal["c128"] = "c128"
    dim: int = 1
    shape: List[int]
    params: GaborParams


class ArraySidecar(BaseModel):
    dtype: Literal["f64"] = "f64"
    shape: List[int]
    directions: Optional[List[float]] = None


def sidecar_path(path: str) -> str:
    return f"{path}.json"


def _require_file(path: str) -> None:
    if not os.path.isfile(path):
        raise InputValidationError("missing-file", f"input file not found: {path}", path=path)


def _read_sidecar(path: str, model):
    meta = sidecar_path(path)
    _require_file(meta)
    try:
        with open(meta, "r", encoding="utf-8") as fh:
            return model.model_validate(json.load(fh))
    except (json.JSONDecodeError, ValidationError) as e:
        raise InputValidationError("malformed-sidecar", f"cannot parse {meta}: {e}", path=meta)


def _write_sidecar(path: str, sidecar: BaseModel) -> None:
    with open(sidecar_path(path), "w", encoding="utf-8") as fh:
        fh.write(sidecar.model_dump_json(indent=2))


def _read_payload(path: str, dtype: str, count: int) -> np.ndarray:
    _require_file(path)
    data = np.fromfile(path, dtype=dtype)
    if data.size != count:
        raise InputValidationError(
            "shape-mismatch", f"{path} holds {data.size} values, sidecar announces {count}", path=path
        )
    return data


# ---------------------------------------------------------------------------
# Signals
# ---------------------------------------------------------------------------

def read_signal(path: str) -> np.ndarray:
    """Complex signal from a two-column ``re,im`` CSV or a raw c128 file with sidecar."""
    _require_file(path)
    if path.lower().endswith(".csv"):
        df = pd.read_csv(path, header=None)
        if df.shape[1] == 1:
            df[1] = 0.0
        if df.shape[1] != 2:
            raise InputValidationError("malformed-csv", f"{path}: expected 're,im' columns, got {df.shape[1]}")
        values = df.to_numpy(dtype=float)
        return values[:, 0] + 1j * values[:, 1]
    meta = _read_sidecar(path, SignalSidecar)
    return _read_payload(path, COMPLEX_DTYPE, meta.n).astype(complex)


def write_signal(path: str, f: np.ndarray) -> str:
    f = np.asarray(f, dtype=complex)
    if path.lower().endswith(".csv"):
        pd.DataFrame({"re": f.real, "im": f.imag}).to_csv(path, header=False, index=False, float_format="%.17g")
    else:
        f.astype(COMPLEX_DTYPE).tofile(path)
        _write_sidecar(path, SignalSidecar(n=f.size))
    logger.info(f"wrote signal of length {f.size} to {path}")
    return path


# ---------------------------------------------------------------------------
# Phase fields
# ---------------------------------------------------------------------------

def read_field(path: str) -> PhaseField:
    meta = _read_sidecar(path, FieldSidecar)
    data = _read_payload(path, COMPLEX_DTYPE, int(np.prod(meta.shape)))
    return PhaseField(data.reshape(meta.shape).astype(complex), meta.params, meta.dim)


def write_field(path: str, G: PhaseField) -> str:
    G.data.astype(COMPLEX_DTYPE).tofile(path)
    _write_sidecar(path, FieldSidecar(dim=G.dim, shape=list(G.data.shape), params=G.params))
    logger.info(f"wrote phase field {G.data.shape} to {path}")
    return path


# ---------------------------------------------------------------------------
# Real arrays and images
# ---------------------------------------------------------------------------

def read_array(path: str) -> Tuple[np.ndarray, Optional[List[float]]]:
    meta = _read_sidecar(path, ArraySidecar)
    data = _read_payload(path, REAL_DTYPE, int(np.prod(meta.shape)))
    return data.reshape(meta.shape).astype(float), meta.directions


def write_array(path: str, data: np.ndarray, directions: Optional[List[float]] = None) -> str:
    data = np.asarray(data, dtype=float)
    data.astype(REAL_DTYPE).tofile(path)
    _write_sidecar(path, ArraySidecar(shape=list(data.shape), directions=directions))
    return path


def read_image(path: str) -> np.ndarray:
    """Grayscale image as float: 8/16-bit PGM via OpenCV, anything else as a raw f64 array."""
    _require_file(path)
    if path.lower().endswith(".pgm"):
        img = cv2.imread(path, cv2.IMREAD_UNCHANGED)
        if img is None or img.ndim != 2:
            raise InputValidationError("malformed-image", f"{path} is not a grayscale PGM", path=path)
        return img.astype(float)
    data, _ = read_array(path)
    if data.ndim != 2:
        raise InputValidationError("shape-mismatch", f"{path}: expected a 2D image, got shape {data.shape}")
    return data


def write_pgm(path: str, img: np.ndarray, bits: int = 8) -> str:
    """Rescale to the full 8- or 16-bit range and write a binary PGM."""
    img = np.asarray(img, dtype=float)
    top = 255 if bits == 8 else 65535
    lo, hi = float(img.min()), float(img.max())
    scaled = np.zeros_like(img) if hi <= lo else (img - lo) / (hi - lo)
    out = np.round(scaled * top).astype(np.uint8 if bits == 8 else np.uint16)
    if not cv2.imwrite(path, out):
        raise OSError(f"could not write {path}")
    return path


# ---------------------------------------------------------------------------
# Deformation nets
# ---------------------------------------------------------------------------

def net_to_frame(points: np.ndarray, masked: np.ndarray) -> pd.DataFrame:
    T, R, J, _ = points.shape
    t, r, j = np.meshgrid(np.arange(T), np.arange(R), np.arange(J), indexing="ij")
    return pd.DataFrame(
        {
            "t": t.ravel(),
            "r": r.ravel(),
            "j": j.ravel(),
            "x": points[..., 0].ravel(),
            "y": points[..., 1].ravel(),
            "masked": masked.ravel().astype(bool),
        }
    )


def write_net_csv(path: str, points: np.ndarray, masked: np.ndarray) -> str:
    net_to_frame(points, masked).to_csv(path, index=False, float_format="%.10g")
    logger.info(f"wrote deformation net {points.shape[:3]} to {path}")
    return path


def read_net_csv(path: str) -> Tuple[np.ndarray, np.ndarray]:
    _require_file(path)
    df = pd.read_csv(path)
    missing = [c for c in NET_COLUMNS if c not in df.columns]
    if missing:
        raise InputValidationError("malformed-csv", f"{path}: missing columns {missing}")
    df = df.sort_values(["t", "r", "j"])
    shape = (df["t"].max() + 1, df["r"].max() + 1, df["j"].max() + 1)
    points = df[["x", "y"]].to_numpy(dtype=float).reshape(shape + (2,))
    masked = df["masked"].to_numpy(dtype=bool).reshape(shape)
    return points, masked
