"""Mixing map f from sources to observations"""
from dataclasses import dataclass
from typing import Any, Dict, Union

import numpy as np

from core.exceptions import DomainError, ShapeError, UnmixError
from core.logger import logger
from synthesis.sources import SourceSet

MIXING_MODES = ("linear", "nonlinear")
MAX_CONDITION = 10.0
MAX_ROW_COSINE = 0.95


@dataclass
class MixingSpec:
    """X_τ = W·Z_τ, or tanh(W·Z_τ) in nonlinear mode"""

    mode: str
    weight_matrix: np.ndarray

    def __post_init__(self):
        self.weight_matrix = np.atleast_2d(np.asarray(self.weight_matrix, dtype=np.float64))
        if self.mode not in MIXING_MODES:
            raise DomainError(f"mixing mode must be one of {MIXING_MODES}, got {self.mode!r}")
        if self.weight_matrix.ndim != 2:
            raise ShapeError(f"weight matrix must be 2-D, got shape {self.weight_matrix.shape}")
        if not np.all(np.isfinite(self.weight_matrix)):
            raise DomainError("weight matrix has non-finite entries")

    @property
    def m(self) -> int:
        return self.weight_matrix.shape[0]

    @property
    def n(self) -> int:
        return self.weight_matrix.shape[1]

    @property
    def nonlinearity(self) -> str:
        return "tanh" if self.mode == "nonlinear" else "identity"

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mode': self.mode,
            'nonlinearity': self.nonlinearity,
            'm': self.m,
            'n': self.n,
            'weight_matrix': self.weight_matrix.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MixingSpec":
        return cls(mode=data['mode'], weight_matrix=np.asarray(data['weight_matrix'], dtype=np.float64))


def _well_conditioned(W: np.ndarray) -> bool:
    if np.linalg.cond(W) >= MAX_CONDITION:
        return False
    cosines = W @ W.T
    off_diagonal = cosines[~np.eye(len(W), dtype=bool)]
    return off_diagonal.size == 0 or np.max(np.abs(off_diagonal)) < MAX_ROW_COSINE


def make_mixing_spec(n: int, m: int, mode: str = "nonlinear", seed: int = 0,
                     max_attempts: int = 1000) -> MixingSpec:
    """Seeded Gaussian W with unit rows, condition number < 10 and no near-collinear rows"""
    if not 1 <= m <= n:
        raise DomainError(f"need 1 <= m <= n, got m={m}, n={n}")

    # own stream so the mixing never shares draws with the sources
    rng = np.random.default_rng([seed, 1])
    for attempt in range(max_attempts):
        W = rng.standard_normal((m, n))
        W /= np.linalg.norm(W, axis=1, keepdims=True)
        if _well_conditioned(W):
            logger.debug(f"Mixing matrix accepted after {attempt + 1} draw(s)")
            return MixingSpec(mode=mode, weight_matrix=W)

    raise UnmixError(f"no well-conditioned {m}x{n} mixing matrix in {max_attempts} draws")


def mix(sources: Union[SourceSet, np.ndarray], spec: MixingSpec) -> np.ndarray:
    """Apply the mixing to every time step of an (n, T) source array"""
    Z = sources.sources if isinstance(sources, SourceSet) else np.asarray(sources, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] != spec.n:
        raise ShapeError(f"mixing expects ({spec.n}, T) sources, got {Z.shape}")

    X = spec.weight_matrix @ Z
    if spec.mode == "nonlinear":
        X = np.tanh(X)
    return X
