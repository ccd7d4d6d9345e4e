import logging
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from utils.errors import InputValidationError

logger = logging.getLogger(__name__)

_WARNED_ODD = set()

PRESETS: Dict[str, Dict[str, Any]] = {
    "paper128": {"N": 128, "K": 128, "M": 128, "L": 1, "Q": 256, "a": 1 / 8},
}
PRESETS["extreme128"] = PRESETS["paper128"]


class GaborParams(BaseModel):
    """
    Integer grid of the finite Heisenberg quotient plus the window scale.

    N samples, K spatial shifts with stride L = N/K, M frequency bins,
    Q phase levels and the derived oversampling P = M/L.
    """

    model_config = ConfigDict(frozen=True)

    N: int = Field(..., gt=0)
    K: int = Field(..., gt=0)
    M: int = Field(..., gt=0)
    L: int = Field(..., gt=0)
    Q: int = Field(..., gt=0)
    a: float = Field(..., gt=0)

    @model_validator(mode="after")
    def _check_grid(self) -> "GaborParams":
        if self.N != self.K * self.L:
            raise ValueError(f"N = K*L violated: N={self.N}, K={self.K}, L={self.L}")
        if self.M % self.L:
            raise ValueError(f"P = M/L must be an integer: M={self.M}, L={self.L}")
        P = self.M // self.L
        if self.Q % (2 * P):
            raise ValueError(f"Q/(2P) must be an integer: Q={self.Q}, P={P}")
        if self.K % P:
            raise ValueError(f"K/P must be an integer: K={self.K}, P={P}")
        if not self.normal and (self.L, self.N) not in _WARNED_ODD:
            _WARNED_ODD.add((self.L, self.N))
            logger.warning(
                f"L={self.L}, N={self.N}: odd L or N, the discrete subgroup is not normal; "
                "group-field operations are only meaningful for the phase-space section"
            )
        return self

    @property
    def P(self) -> int:
        return self.M // self.L

    @property
    def normal(self) -> bool:
        return self.L % 2 == 0 and self.N % 2 == 0

    @property
    def dp(self) -> float:
        """Position step of the phase-space grid."""
        return 1.0 / self.K

    @property
    def dq(self) -> float:
        """Frequency step of the phase-space grid (equals N/M)."""
        return self.K / self.P

    @classmethod
    def preset(cls, name: str) -> "GaborParams":
        if name not in PRESETS:
            raise InputValidationError("unknown-preset", f"unknown preset {name!r}; known: {sorted(PRESETS)}")
        return cls(**PRESETS[name])

    @classmethod
    def extreme(cls, N: int, a: float, Q: Optional[int] = None) -> "GaborParams":
        """Extreme oversampling K = M = N, L = 1."""
        return cls(N=N, K=N, M=N, L=1, Q=Q if Q is not None else 2 * N, a=a)

    def with_scale(self, a: float) -> "GaborParams":
        return GaborParams(N=self.N, K=self.K, M=self.M, L=self.L, Q=self.Q, a=a)


class MetricParams(BaseModel):
    beta: float = Field(..., gt=0)

    @classmethod
    def square_grid(cls, p: GaborParams) -> "MetricParams":
        """beta such that one position step and one frequency step have equal metric length."""
        return cls(beta=(p.dq / p.dp) ** 0.5)


class ReassignParams(BaseModel):
    t_final: float = Field(0.1, ge=0)
    dt: float = Field(1e-3, gt=0)
    a: Optional[float] = Field(None, gt=0)
    eta: float = Field(1.0, ge=0.5)
    method: Literal["upwind", "erosion"] = "erosion"
    mobility: Literal["unit", "modulus"] = "unit"
    scheme: Literal["upwind", "as-written"] = "upwind"
    step_scale: Literal["unit", "literal"] = "unit"
    # quadratic erosion of the piecewise-linear interpolant, or of the samples only
    erosion_sampling: Literal["interpolated", "grid"] = "interpolated"

    @model_validator(mode="after")
    def _check_steps(self) -> "ReassignParams":
        if self.t_final > 0 and self.dt > self.t_final:
            raise ValueError(f"dt={self.dt} exceeds t_final={self.t_final}")
        return self


class DiffusionParams(BaseModel):
    beta: Optional[float] = Field(None, gt=0)
    eps: float = Field(0.1, gt=0, le=1)
    c: float = Field(1.0, gt=0)
    sigma: float = Field(1.0, gt=0)
    rho: Optional[float] = Field(None, gt=0)
    dt: float = Field(0.05, gt=0)
    t_final: float = Field(0.5, ge=0)
    adaptivity: Literal["hessian", "structure-tensor"] = "hessian"
    ordering: Literal["ascending", "descending"] = "ascending"
    readapt: bool = False


class SmoothingParams(BaseModel):
    D11: float = Field(1.0, gt=0)
    D22: float = Field(1.0, gt=0)
    c_loc: float = Field(1.0, gt=0)
    t: float = Field(..., gt=0)
    truncation: float = Field(1e-8, gt=0, lt=1)


class ChirpParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    b: float = Field(0.5, gt=0)
    r: float = 1.0


class PhantomSpec(BaseModel):
    size: int = Field(64, ge=16)
    frames: int = Field(10, ge=2)
    directions: List[float] = Field(default_factory=lambda: [0.0, 45.0, 90.0, 135.0])
    tag_period: float = Field(8.0, gt=2)
    scaling: float = 0.02
    rotation: float = 0.01
    radius: float = Field(32.0, gt=0)
    fading: float = Field(0.0, ge=0)
    center: Optional[List[float]] = None
    rings: int = Field(6, ge=2)
    points: int = Field(40, ge=3)
    inner_radius: float = Field(8.0, gt=0)
    outer_radius: float = Field(20.0, gt=0)

    @model_validator(mode="after")
    def _check_net(self) -> "PhantomSpec":
        if self.inner_radius >= self.outer_radius:
            raise ValueError("inner_radius must be smaller than outer_radius")
        return self


class RunConfig(BaseModel):
    command: Literal[
        "gabor", "reassign", "diffuse", "chirp-oracle", "freqfield", "defnet", "phantom", "table"
    ]
    inputs: List[str] = Field(default_factory=list)
    output: Optional[str] = None
    report: Optional[str] = None
    reference: Optional[str] = None
    render: Optional[str] = None
    style: Literal["phase-hue", "modulus-gray", "overlay"] = "overlay"
    preset: Optional[str] = None
    gabor: Optional[GaborParams] = None
    window: Literal["gaussian", "cr"] = "gaussian"
    inverse: bool = False
    reassign: ReassignParams = Field(default_factory=ReassignParams)
    diffusion: DiffusionParams = Field(default_factory=DiffusionParams)
    smoothing: Optional[SmoothingParams] = None
    mode: Literal["ced", "linear"] = "ced"
    chirp: ChirpParams = Field(default_factory=ChirpParams)
    t: float = Field(0.0, ge=0)
    grid: Optional[List[int]] = None
    a_values: Optional[List[float]] = None
    phantom: PhantomSpec = Field(default_factory=PhantomSpec)
    dc_mask_radius: float = Field(2.0, ge=0)
    refine: Literal["argmax", "center-of-mass"] = "center-of-mass"
    seed: int = 0

    def gabor_params(self) -> Optional[GaborParams]:
        if self.gabor is not None:
            return self.gabor
        if self.preset:
            return GaborParams.preset(self.preset)
        return None


class RunReport(BaseModel):
    command: str
    parameters: Dict[str, Any] = Field(default_factory=dict)
    metrics: Dict[str, Any] = Field(default_factory=dict)
    wall_time_ms: float = 0.0
    frozen_cells: Optional[int] = None
    warnings: List[str] = Field(default_factory=list)
    outputs: List[str] = Field(default_factory=list)


class OracleRequest(BaseModel):
    chirp: ChirpParams = Field(default_factory=ChirpParams)
    a: float = Field(1.0, gt=0)
    t: float = Field(0.0, ge=0)
    c: float = Field(1.0, gt=0)
