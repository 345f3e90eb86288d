"""Permutation- and sign-matched RMSE against ground-truth sources"""
import itertools
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import DomainError, ShapeError
from synthesis.signals import zscore_rows

MAX_MATCH_DIMENSIONS = 6

DISPLAY_NAMES = {
    'gp-avae': 'GP-AVAE',
    'half-gp-vae': 'Half-GP-VAE',
    'half-gp-avae': 'Half-GP-AVAE',
}


def display_name(variant: str) -> str:
    return DISPLAY_NAMES.get(variant, variant)


def rmse(a, b) -> float:
    """√mean((a − b)²)"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"rmse: sequence shapes differ, {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.sqrt(np.mean(diff * diff)))


@dataclass
class EvalReport:
    """Matched RMSE of one model variant; permutation[k] is the inferred row matched to source k"""

    per_source_rmse: List[float]
    permutation: List[int]
    signs: List[int]
    model_variant: str
    scenario: str = ""
    seed: Optional[int] = None
    config_hash: str = ""
    average_rmse: Optional[float] = None

    def __post_init__(self):
        if self.average_rmse is None:
            self.average_rmse = float(np.mean(self.per_source_rmse))
        if sorted(self.permutation) != list(range(len(self.per_source_rmse))):
            raise DomainError(f"permutation {self.permutation} is not a bijection")

    @property
    def n(self) -> int:
        return len(self.per_source_rmse)

    @property
    def display_name(self) -> str:
        return display_name(self.model_variant)

    def align(self, inferred: np.ndarray) -> np.ndarray:
        """Reorder and sign-flip z-scored inferred rows onto the sources"""
        z = zscore_rows(inferred)
        return np.stack([self.signs[k] * z[self.permutation[k]] for k in range(self.n)])

    def to_dict(self) -> Dict[str, Any]:
        return {
            'model_variant': self.model_variant,
            'display_name': self.display_name,
            'scenario': self.scenario,
            'seed': self.seed,
            'config_hash': self.config_hash,
            'per_source_rmse': list(self.per_source_rmse),
            'average_rmse': self.average_rmse,
            'permutation': list(self.permutation),
            'signs': list(self.signs),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EvalReport":
        return cls(
            per_source_rmse=[float(v) for v in data['per_source_rmse']],
            permutation=[int(v) for v in data['permutation']],
            signs=[int(v) for v in data['signs']],
            model_variant=data['model_variant'],
            scenario=data.get('scenario', ''),
            seed=data.get('seed'),
            config_hash=data.get('config_hash', ''),
            average_rmse=data.get('average_rmse'),
        )


def _pairwise_costs(inferred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """cost[k, j, s] = RMSE of source k against inferred row j with sign (+1, −1)[s]"""
    n = truth.shape[0]
    costs = np.empty((n, n, 2))
    for k in range(n):
        for j in range(n):
            costs[k, j, 0] = rmse(truth[k], inferred[j])
            costs[k, j, 1] = rmse(truth[k], -inferred[j])
    return costs


def match_components(inferred, truth, model_variant: str = "", scenario: str = "",
                     seed: Optional[int] = None, config_hash: str = "") -> EvalReport:
    """
    z-score both sets, then search every permutation and sign pattern for the
    assignment with the lowest average RMSE. Ties keep the earliest candidate
    in itertools order, so exact matches resolve to the identity.
    """
    inferred = np.atleast_2d(np.asarray(inferred, dtype=np.float64))
    truth = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    if inferred.shape != truth.shape:
        raise ShapeError(f"inferred {inferred.shape} and true {truth.shape} components differ in shape")
    n = truth.shape[0]
    if n > MAX_MATCH_DIMENSIONS:
        raise DomainError(f"brute-force matching supports up to {MAX_MATCH_DIMENSIONS} components, got {n}")

    costs = _pairwise_costs(zscore_rows(inferred), zscore_rows(truth))
    sources = np.arange(n)

    best: Optional[Tuple[float, Tuple[int, ...], Tuple[int, ...]]] = None
    for perm in itertools.permutations(range(n)):
        for flips in itertools.product((0, 1), repeat=n):
            total = float(np.sum(costs[sources, list(perm), list(flips)]))
            if best is None or total < best[0]:
                best = (total, perm, flips)

    _, perm, flips = best
    per_source = [float(costs[k, perm[k], flips[k]]) for k in range(n)]
    return EvalReport(
        per_source_rmse=per_source,
        permutation=list(perm),
        signs=[-1 if f else 1 for f in flips],
        model_variant=model_variant,
        scenario=scenario,
        seed=seed,
        config_hash=config_hash,
    )


def identity_rmse(inferred, truth) -> List[float]:
    """Per-source RMSE without permuting or flipping, after z-scoring"""
    z_inf, z_true = zscore_rows(inferred), zscore_rows(truth)
    return [rmse(t, i) for t, i in zip(z_true, z_inf)]


def reports_from_values(columns: Dict[str, Sequence[float]], scenario: str = "") -> List[EvalReport]:
    """EvalReports for externally supplied per-source RMSE columns"""
    return [
        EvalReport(per_source_rmse=[float(v) for v in values], permutation=list(range(len(values))),
                   signs=[1] * len(values), model_variant=variant, scenario=scenario)
        for variant, values in columns.items()
    ]
