"""
Finite Heisenberg group quotient [l, m, k] mod [K, M, Q] and its embedding
into the continuous reduced Heisenberg group (p, q, s).
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from models import GaborParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroupElement:
    l: int
    m: int
    k: int

    def normalized(self, p: GaborParams) -> "GroupElement":
        return GroupElement(self.l % p.K, self.m % p.M, self.k % p.Q)

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.l, self.m, self.k)


IDENTITY = GroupElement(0, 0, 0)


def _half_ratio(p: GaborParams) -> int:
    return p.Q // (2 * p.P)


def raw_mul(g: GroupElement, h: GroupElement, p: GaborParams) -> GroupElement:
    """Group law on unreduced representatives."""
    c = _half_ratio(p)
    return GroupElement(g.l + h.l, g.m + h.m, g.k + h.k + c * (g.m * h.l - h.m * g.l))


def group_mul(g: GroupElement, h: GroupElement, p: GaborParams) -> GroupElement:
    return raw_mul(g, h, p).normalized(p)


def group_inv(g: GroupElement, p: GaborParams) -> GroupElement:
    return GroupElement(-g.l, -g.m, -g.k).normalized(p)


def embed_phi(g: GroupElement, p: GaborParams) -> Tuple[float, float, float]:
    """Monomorphism into the continuous group: [l, m, k] -> (l/K, mK/P, k/Q)."""
    return (g.l / p.K, g.m * p.K / p.P, g.k / p.Q)


def continuous_mul(x: Tuple[float, float, float], y: Tuple[float, float, float]) -> Tuple[float, float, float]:
    """(p,q,s)(p',q',s') = (p+p', q+q', s+s'+(qp'-pq')/2)."""
    p1, q1, s1 = x
    p2, q2, s2 = y
    return (p1 + p2, q1 + q2, s1 + s2 + 0.5 * (q1 * p2 - p1 * q2))


def right_shift_indices(axis: int, sign: int, p: GaborParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Index arrays of g * e_axis^sign for every g on the [K, M, Q] grid.

    Args:
        axis: 1 (position), 2 (frequency) or 3 (phase).
        sign: +1 for the generator, -1 for its inverse.
        p: grid parameters.

    Returns:
        (l', m', k') integer arrays of shape [K, M, Q], already reduced.
    """
    if axis not in (1, 2, 3) or sign not in (1, -1):
        raise ValueError(f"axis must be 1..3 and sign +-1, got axis={axis}, sign={sign}")
    c = _half_ratio(p)
    l, m, k = np.meshgrid(np.arange(p.K), np.arange(p.M), np.arange(p.Q), indexing="ij")
    if axis == 1:
        return (l + sign) % p.K, m, (k + c * m * sign) % p.Q
    if axis == 2:
        return l, (m + sign) % p.M, (k - c * l * sign) % p.Q
    return l, m, (k + sign) % p.Q
