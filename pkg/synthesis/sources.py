"""Three synthetic sources with distinct temporal structure"""
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List

import numpy as np

from core.exceptions import DomainError, UnmixError
from core.logger import logger
from priors.gp_prior import cholesky_with_jitter, normalized_time_grid, se_kernel_matrix
from synthesis.signals import lag_one_autocorrelation, zscore

MIN_LENGTH = 50


@dataclass(frozen=True)
class SourceSpec:
    """Waveform parameters; defaults give a slow, a medium and a fast source"""

    slow_cycles: float = 1.5
    slow_drift: float = 0.3
    gp_length_scale: float = 0.1
    fast_cycles: float = 8.0
    max_abs_corr: float = 0.2
    max_attempts: int = 100

    def descriptors(self) -> List[Dict[str, Any]]:
        return [
            {'family': 'drifting_sinusoid', 'cycles': self.slow_cycles, 'drift': self.slow_drift},
            {'family': 'se_gp_sample', 'length_scale': self.gp_length_scale},
            {'family': 'sinusoid', 'cycles': self.fast_cycles},
        ]


@dataclass
class SourceSet:
    """z-scored sources (n, T) and the seed that produced them"""

    sources: np.ndarray
    seed: int
    spec: SourceSpec = field(default_factory=SourceSpec)

    @property
    def n(self) -> int:
        return self.sources.shape[0]

    @property
    def T(self) -> int:
        return self.sources.shape[1]

    def to_dict(self) -> Dict[str, Any]:
        return {'seed': self.seed, 'n': self.n, 'T': self.T,
                'spec': asdict(self.spec), 'descriptors': self.spec.descriptors()}


def _draw_sources(T: int, rng: np.random.Generator, spec: SourceSpec) -> np.ndarray:
    u = normalized_time_grid(T)

    # slow sinusoid whose frequency decays by `slow_drift` over the sequence
    phase = 2.0 * math.pi * spec.slow_cycles * u * (1.0 - 0.5 * spec.slow_drift * u)
    slow = np.sin(phase + rng.uniform(0.0, 2.0 * math.pi))

    chol, _ = cholesky_with_jitter(se_kernel_matrix(u, spec.gp_length_scale))
    medium = chol @ rng.standard_normal(T)

    fast = np.sin(2.0 * math.pi * spec.fast_cycles * u + rng.uniform(0.0, 2.0 * math.pi))

    return np.stack([zscore(slow), zscore(medium), zscore(fast)])


def _is_acceptable(sources: np.ndarray, spec: SourceSpec) -> bool:
    corr = np.corrcoef(sources)
    off_diagonal = corr[~np.eye(len(corr), dtype=bool)]
    if np.max(np.abs(off_diagonal)) >= spec.max_abs_corr:
        return False
    lag1 = [lag_one_autocorrelation(s) for s in sources]
    return lag1[0] > lag1[1] > lag1[2]


def generate_sources(T: int = 200, seed: int = 0, spec: SourceSpec = None) -> SourceSet:
    """
    Draw the slow / medium / fast sources with numpy's PCG64 generator.

    Seeds seed, seed+1, … are tried until the sources are pairwise
    uncorrelated (|corr| < max_abs_corr) and their lag-1 autocorrelations are
    ordered slow > medium > fast. The accepted seed is recorded.
    """
    spec = spec or SourceSpec()
    if T < MIN_LENGTH:
        raise DomainError(f"sources need T >= {MIN_LENGTH}, got {T}")

    for attempt in range(spec.max_attempts):
        candidate = seed + attempt
        sources = _draw_sources(T, np.random.default_rng(candidate), spec)
        if _is_acceptable(sources, spec):
            if attempt:
                logger.info(f"Source seed {seed} rejected, using seed {candidate}")
            return SourceSet(sources=sources, seed=candidate, spec=spec)
        logger.debug(f"Source seed {candidate} failed the independence/ordering check")

    raise UnmixError(f"no acceptable sources within {spec.max_attempts} seeds from {seed}")
