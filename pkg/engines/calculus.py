"""
Left-invariant forward/backward differences on the discrete Heisenberg quotient
and on its phase-space section, plus the Cauchy-Riemann residual.

Array helpers act on the trailing (l, m) axes so they broadcast over batches.
"""
import logging
from typing import Literal, Optional

import numpy as np

from engines.fields import GroupField, PhaseField
from engines.heisenberg import right_shift_indices
from models import GaborParams

logger = logging.getLogger(__name__)

Direction = Literal["forward", "backward"]


def _twist(p: GaborParams, sign: int) -> np.ndarray:
    m = np.arange(p.M)
    return np.exp(sign * 2j * np.pi * (m % p.P) / p.P)


def phase_difference(data: np.ndarray, axis: int, direction: Direction, p: GaborParams) -> np.ndarray:
    """
    Left-invariant difference of a phase-space array along one generator.

    Args:
        data: complex array [..., K, M].
        axis: 1 position, 2 frequency, 3 phase.
        direction: "forward" or "backward".
        p: grid parameters.
    """
    if axis == 1:
        if direction == "forward":
            return p.K * (_twist(p, -1) * np.roll(data, -1, axis=-2) - data)
        return p.K * (data - _twist(p, 1) * np.roll(data, 1, axis=-2))
    if axis == 2:
        scale = p.M / p.N
        if direction == "forward":
            return scale * (np.roll(data, -1, axis=-1) - data)
        return scale * (data - np.roll(data, 1, axis=-1))
    if axis == 3:
        if direction == "forward":
            return p.Q * (np.exp(-2j * np.pi / p.Q) - 1.0) * data
        return p.Q * (1.0 - np.exp(2j * np.pi / p.Q)) * data
    raise ValueError(f"axis must be 1, 2 or 3, got {axis}")


def diff_phase(G: PhaseField, axis: int, direction: Direction, p: Optional[GaborParams] = None) -> PhaseField:
    p = p or G.params
    return G.with_data(phase_difference(G.data, axis, direction, p))


def diff_group(W: GroupField, axis: int, direction: Direction, p: Optional[GaborParams] = None) -> GroupField:
    """Group-shift differences W(g e_i) - W(g) (forward) or W(g) - W(g e_i^-1) (backward)."""
    p = p or W.params
    step = {1: p.K, 2: p.M / p.N, 3: p.Q}[axis]
    if direction == "forward":
        shifted = W.data[right_shift_indices(axis, 1, p)]
        return W.with_data(step * (shifted - W.data))
    shifted = W.data[right_shift_indices(axis, -1, p)]
    return W.with_data(step * (W.data - shifted))


def cr_operator(data: np.ndarray, a: float, p: GaborParams) -> np.ndarray:
    a2 = phase_difference(data, 2, "forward", p) + phase_difference(data, 2, "backward", p)
    a1 = phase_difference(data, 1, "forward", p) + phase_difference(data, 1, "backward", p)
    return a2 / a + 1j * a * a1


def cr_residual(G: PhaseField, a: Optional[float] = None, p: Optional[GaborParams] = None) -> float:
    """Relative l2 norm of the centered Cauchy-Riemann operator applied to G (0 for a zero field)."""
    p = p or G.params
    a = a if a is not None else p.a
    norm = np.linalg.norm(G.data)
    if norm == 0:
        return 0.0
    return float(np.linalg.norm(cr_operator(G.data, a, p)) / norm)


def phase_inner(x: np.ndarray, y: np.ndarray) -> complex:
    """Discrete inner product (1/#cells) sum conj(x) y."""
    return complex(np.vdot(x, y) / x.size)
