"""Joint and marginal latent batches, and the discriminator loss"""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from core.autodiff import Operand, Tensor, as_tensor, gather
from core.exceptions import DomainError, IndexRangeError, ShapeError
from models.networks import Discriminator, discriminator_forward


@dataclass
class AdversarialBatch:
    """Time-aligned rows and per-dimension shuffled rows of the latent means"""

    joint: Tensor
    marginal: Tensor
    indices: np.ndarray
    marginal_index: np.ndarray

    @property
    def size(self) -> int:
        return self.joint.shape[0]


def _check_means(mu: Tensor) -> None:
    if mu.value.ndim != 2:
        raise ShapeError(f"latent means must be (n, T), got {mu.shape}")


def make_joint_batch(mu: Operand, indices: Sequence[int]) -> Tensor:
    """Row b = (μ¹_{τ_b}, …, μⁿ_{τ_b})"""
    mu = as_tensor(mu)
    _check_means(mu)
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    n, T = mu.shape
    if idx.size and (idx.min() < 0 or idx.max() >= T):
        raise IndexRangeError(f"joint batch indices must lie in [0, {T})")
    return gather(mu, np.broadcast_to(idx, (n, idx.size)))


def marginal_index(n: int, indices: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """An independent permutation of the sampled time indices per dimension"""
    return np.stack([rng.permutation(indices) for _ in range(n)])


def make_marginal_batch(mu: Operand, rng: np.random.Generator,
                        indices: Optional[Sequence[int]] = None) -> Tensor:
    """Row b = (μ¹_{π₁(b)}, …, μⁿ_{πₙ(b)}); shuffling keeps each column's values"""
    mu = as_tensor(mu)
    _check_means(mu)
    n, T = mu.shape
    idx = np.arange(T) if indices is None else np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size > T:
        raise DomainError(f"marginal batch of {idx.size} rows exceeds sequence length {T}")
    return gather(mu, marginal_index(n, idx, rng))


def make_adversarial_batch(mu: Operand, rng: np.random.Generator,
                           batch_size: Optional[int] = None) -> AdversarialBatch:
    """Fresh joint/marginal pair; B = T uses every time step"""
    mu = as_tensor(mu)
    _check_means(mu)
    n, T = mu.shape
    B = T if batch_size is None else int(batch_size)
    if not 1 <= B <= T:
        raise DomainError(f"adversarial batch size must lie in [1, {T}], got {B}")

    indices = np.arange(T) if B == T else np.sort(rng.choice(T, size=B, replace=False))
    shuffled = marginal_index(n, indices, rng)
    return AdversarialBatch(
        joint=make_joint_batch(mu, indices),
        marginal=gather(mu, shuffled),
        indices=indices,
        marginal_index=shuffled,
    )


def discriminator_loss(disc: Discriminator, batch: AdversarialBatch) -> Tensor:
    """−mean log D(marginal) − mean log(1 − D(joint))"""
    if batch.joint.shape[1] != disc.n:
        raise ShapeError(f"discriminator expects {disc.n} latent dimensions, batch has {batch.joint.shape[1]}")
    p_marginal = discriminator_forward(disc, batch.marginal)
    p_joint = discriminator_forward(disc, batch.joint)
    return -(p_marginal.log().mean()) - (1.0 - p_joint).log().mean()
