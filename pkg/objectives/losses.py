"""Reconstruction likelihood and the composite objectives of the three model variants"""
import math
from dataclasses import dataclass, field, replace
from typing import ClassVar, Dict, Optional, Tuple

import numpy as np

from core.autodiff import Operand, Tensor, as_tensor
from core.exceptions import DomainError, ShapeError, UsageError
from models.networks import (Discriminator, Encoder, LatentBank, Mlp, encoder_forward,
                             mlp_forward, reparameterize)
from objectives.adversarial import discriminator_loss, make_adversarial_batch
from priors.gp_prior import EECoefficients, GPPriorSet, ee_penalty

DEFAULT_OBS_VAR = 0.01


@dataclass
class LossBreakdown:
    """Scalar parts of one objective evaluation"""

    HISTORY_COLUMNS: ClassVar[Tuple[str, ...]] = ("recon", "kl", "adv", "ee", "total")

    recon_nll: float
    kl_total: float
    adversarial_term: float = 0.0
    ee_term: float = 0.0
    total: float = 0.0
    adversarial_weight: float = 0.0
    graph: Optional[Tensor] = field(default=None, repr=False, compare=False)

    def composed_total(self) -> float:
        """recon + KL − Λ·adversarial + EE, in the order the graph adds them"""
        return ((self.recon_nll + self.kl_total) - self.adversarial_weight * self.adversarial_term) + self.ee_term

    def first_non_finite(self) -> Optional[str]:
        for name, value in zip(self.HISTORY_COLUMNS, self.history_values()):
            if not math.isfinite(value):
                return name
        return None

    def history_values(self) -> Tuple[float, ...]:
        return (self.recon_nll, self.kl_total, self.adversarial_term, self.ee_term, self.total)

    def detached(self) -> "LossBreakdown":
        return replace(self, graph=None)

    def to_dict(self) -> Dict[str, float]:
        return dict(zip(self.HISTORY_COLUMNS, self.history_values()))


def reconstruction_nll(X: Operand, X_hat: Operand, obs_var: float = DEFAULT_OBS_VAR) -> Tensor:
    """Gaussian NLL Σ (X − X̂)² / (2·obs_var) + ½·ln(2π·obs_var) per entry"""
    X, X_hat = as_tensor(X), as_tensor(X_hat)
    if X.shape != X_hat.shape:
        raise ShapeError(f"reconstruction: observed {X.shape} vs decoded {X_hat.shape}")
    if not obs_var > 0:
        raise DomainError(f"observation variance must be positive, got {obs_var}")
    normalizer = 0.5 * X.size * math.log(2.0 * math.pi * obs_var)
    return (X_hat - X).square().sum() / (2.0 * obs_var) + normalizer


def decode(decoder: Mlp, Z: Tensor) -> Tensor:
    """Per-time-step decoding of an (n, T) latent sequence into (m, T)"""
    return mlp_forward(decoder, Z.T).T


def _compose(recon: Tensor, kl: Tensor, adversarial: Optional[Tensor], lam: float,
             ee: Optional[Tensor]) -> LossBreakdown:
    total = recon + kl
    if adversarial is not None:
        total = total - lam * adversarial
    if ee is not None:
        total = total + ee
    return LossBreakdown(
        recon_nll=recon.item(),
        kl_total=kl.item(),
        adversarial_term=adversarial.item() if adversarial is not None else 0.0,
        ee_term=ee.item() if ee is not None else 0.0,
        total=total.item(),
        adversarial_weight=lam if adversarial is not None else 0.0,
        graph=total,
    )


def _variational_loss(mu: Tensor, log_var: Tensor, decoder: Mlp, priors: GPPriorSet, X: Operand,
                      noise: np.ndarray, ee: Optional[EECoefficients], obs_var: float,
                      disc: Optional[Discriminator] = None, lam: float = 0.0,
                      rng: Optional[np.random.Generator] = None,
                      batch_size: Optional[int] = None) -> LossBreakdown:
    n = mu.shape[0]
    if priors.n != n or decoder.input_dim != n:
        raise ShapeError(f"{n} latent dimensions, but {priors.n} priors and a decoder taking {decoder.input_dim}")
    if lam < 0:
        raise DomainError(f"adversarial weight must be non-negative, got {lam}")

    Z = reparameterize(mu, log_var, noise)
    recon = reconstruction_nll(X, decode(decoder, Z), obs_var)
    kl = priors.kl_total(mu, log_var)

    adversarial = None
    if disc is not None and lam > 0:
        if rng is None:
            raise UsageError("adversarial objective needs a random generator for shuffling")
        # rows come from the live means; Φ is held fixed in this step
        batch = make_adversarial_batch(mu, rng, batch_size)
        adversarial = discriminator_loss(disc.frozen(), batch)

    penalty = ee_penalty(priors.length_scales(), log_var.exp(), ee) if ee is not None else None
    return _compose(recon, kl, adversarial, lam, penalty)


def half_vae_loss(bank: LatentBank, decoder: Mlp, priors: GPPriorSet, X: Operand, noise: np.ndarray,
                  ee: Optional[EECoefficients] = None, obs_var: float = DEFAULT_OBS_VAR) -> LossBreakdown:
    """Encoder-free objective: reconstruction + GP KL (+ EE)"""
    return _variational_loss(bank.mu, bank.log_var, decoder, priors, X, noise, ee, obs_var)


def half_avae_loss(bank: LatentBank, decoder: Mlp, priors: GPPriorSet, disc: Discriminator,
                   X: Operand, noise: np.ndarray, lam: float, rng: Optional[np.random.Generator],
                   ee: Optional[EECoefficients] = None, obs_var: float = DEFAULT_OBS_VAR,
                   batch_size: Optional[int] = None) -> LossBreakdown:
    """Encoder-free objective minus Λ times the discriminator loss on fresh batches"""
    return _variational_loss(bank.mu, bank.log_var, decoder, priors, X, noise, ee, obs_var,
                             disc, lam, rng, batch_size)


def gp_avae_loss(encoder: Optional[Encoder], decoder: Mlp, priors: GPPriorSet,
                 disc: Optional[Discriminator], X: Operand, noise: np.ndarray, lam: float,
                 rng: Optional[np.random.Generator], ee: Optional[EECoefficients] = None,
                 obs_var: float = DEFAULT_OBS_VAR, batch_size: Optional[int] = None) -> LossBreakdown:
    """Encoder-based objective; means come from f⁻¹ applied to every time step"""
    if encoder is None:
        raise UsageError("gp-avae objective needs an encoder")
    X = as_tensor(X)
    mu_rows, log_var = encoder_forward(encoder, X.T)
    return _variational_loss(mu_rows.T, log_var, decoder, priors, X, noise, ee, obs_var,
                             disc, lam, rng, batch_size)
