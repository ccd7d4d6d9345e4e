import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np

from models import GaborParams
from utils.errors import InputValidationError

logger = logging.getLogger(__name__)

WindowKind = Literal["sampled-gaussian", "discrete-cr"]


@dataclass(eq=False)
class Window:
    """N-periodic analysis window; samples[0] is the window center."""

    samples: np.ndarray
    kind: WindowKind
    a: float

    @property
    def N(self) -> int:
        return self.samples.shape[-1]

    def __getitem__(self, n):
        return self.samples[np.mod(n, self.N)]

    def scaled(self, factor: float) -> "Window":
        return Window(self.samples * factor, self.kind, self.a)


@dataclass(eq=False)
class PhaseField:
    """Complex field on the (l, m) phase-space grid; d=2 stores [K1, K2, M1, M2]."""

    data: np.ndarray
    params: GaborParams
    dim: int = 1

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        p = self.params
        expected = (p.K, p.M) if self.dim == 1 else (p.K, p.K, p.M, p.M)
        if self.data.shape != expected:
            raise InputValidationError(
                "shape-mismatch",
                f"phase field has shape {self.data.shape}, expected {expected}",
                dim=self.dim,
            )
        if not np.all(np.isfinite(self.data)):
            raise InputValidationError("non-finite-field", "phase field contains NaN or inf")

    @property
    def modulus(self) -> np.ndarray:
        return np.abs(self.data)

    def with_data(self, data: np.ndarray) -> "PhaseField":
        return PhaseField(data, self.params, self.dim)


@dataclass(eq=False)
class GroupField:
    """Complex field on the [K, M, Q] group quotient."""

    data: np.ndarray
    params: GaborParams

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        p = self.params
        if self.data.shape != (p.K, p.M, p.Q):
            raise InputValidationError(
                "shape-mismatch", f"group field has shape {self.data.shape}, expected {(p.K, p.M, p.Q)}"
            )

    def with_data(self, data: np.ndarray) -> "GroupField":
        return GroupField(data, self.params)


@dataclass(eq=False)
class ZakCoefficients:
    values: np.ndarray
    eigenvalues: np.ndarray
