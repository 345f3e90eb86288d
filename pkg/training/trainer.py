"""Alternating training loop for the three model variants"""
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from core.autodiff import Tensor, as_tensor, backward
from core.exceptions import ConfigError, DomainError, ShapeError, TrainingDivergedError
from core.logger import logger
from models.networks import Discriminator, Encoder, LatentBank, ModelParams, Mlp, encoder_forward
from objectives.adversarial import discriminator_loss, make_adversarial_batch
from objectives.losses import (DEFAULT_OBS_VAR, LossBreakdown, gp_avae_loss, half_avae_loss,
                               half_vae_loss)
from priors.gp_prior import (DEFAULT_BASE_JITTER, DEFAULT_MAX_JITTER, DEFAULT_PRIOR_NOISE,
                             EECoefficients, GPPriorSet)
from training.optimizer import Adam, AdamHyper

VARIANTS = ("gp-avae", "half-gp-vae", "half-gp-avae")
ADVERSARIAL_VARIANTS = ("gp-avae", "half-gp-avae")
ENCODER_VARIANTS = ("gp-avae",)
DEFAULT_HIDDEN = (32, 32)
# posterior variance starts at the prior noise level
DEFAULT_TRAIN_INIT_LOG_VAR = math.log(DEFAULT_PRIOR_NOISE)


@dataclass(frozen=True)
class TrainConfig:
    """Everything one training run depends on"""

    model_variant: str = "half-gp-avae"
    epochs: int = 3000
    lr_main: float = 1e-2
    lr_network: float = 1e-3
    lr_disc: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    lam: float = 1.0
    warmup: int = 0
    ee_enabled: bool = True
    beta1: float = 0.01
    beta2: float = 1.0
    beta3: float = 1.0
    ee_floor: float = 1e-6
    disc_steps_per_main_step: int = 1
    decoder_hidden: Tuple[int, ...] = DEFAULT_HIDDEN
    encoder_hidden: Optional[Tuple[int, ...]] = None
    discriminator_hidden: Tuple[int, ...] = DEFAULT_HIDDEN
    obs_var: float = DEFAULT_OBS_VAR
    init_log_var: float = DEFAULT_TRAIN_INIT_LOG_VAR
    base_jitter: float = DEFAULT_BASE_JITTER
    max_jitter: float = DEFAULT_MAX_JITTER
    prior_noise: float = DEFAULT_PRIOR_NOISE
    init_length_scales: Optional[Tuple[float, ...]] = None
    adversarial_batch_size: Optional[int] = None
    seed: int = 0
    T: int = 200
    m: int = 2
    n: int = 3
    log_every: int = 100

    def __post_init__(self):
        if self.model_variant not in VARIANTS:
            raise ConfigError("training.model_variant", f"must be one of {', '.join(VARIANTS)}")
        for key in ("lr_main", "lr_network", "lr_disc", "obs_var", "adam_eps"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"training.{key}", "must be positive")
        if self.lam < 0:
            raise ConfigError("training.lam", "adversarial weight must be non-negative")
        if self.epochs < 0:
            raise ConfigError("training.epochs", "must be non-negative")
        if self.warmup < 0:
            raise ConfigError("training.warmup", "must be non-negative")
        if self.disc_steps_per_main_step < 1:
            raise ConfigError("training.disc_steps_per_main_step", "must be at least 1")
        if self.encoder_hidden is not None and self.model_variant not in ENCODER_VARIANTS:
            raise ConfigError("training.encoder_hidden",
                              f"{self.model_variant} is encoder-free and takes no encoder settings")
        if min(self.T, self.m, self.n) < 1:
            raise ConfigError("data", f"T, m and n must be positive, got {self.T}, {self.m}, {self.n}")
        if self.adversarial_batch_size is not None and not 1 <= self.adversarial_batch_size <= self.T:
            raise ConfigError("training.adversarial_batch_size", f"must lie in [1, {self.T}]")
        if self.prior_noise < 0:
            raise ConfigError("prior.noise", "must be non-negative")
        if self.init_length_scales is not None:
            if len(self.init_length_scales) != self.n:
                raise ConfigError("prior.init_length_scales", f"needs one value per latent dimension ({self.n})")
            if min(self.init_length_scales) <= 0:
                raise ConfigError("prior.init_length_scales", "length scales must be positive")

    @property
    def adversarial(self) -> bool:
        return self.model_variant in ADVERSARIAL_VARIANTS

    @property
    def uses_encoder(self) -> bool:
        return self.model_variant in ENCODER_VARIANTS

    def ee_coefficients(self) -> Optional[EECoefficients]:
        if not self.ee_enabled:
            return None
        return EECoefficients(self.beta1, self.beta2, self.beta3, self.ee_floor)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def alternate_schedule(epoch: int, config: TrainConfig) -> Tuple[int, int]:
    """(discriminator steps, main steps) for one epoch; warm-up holds the discriminator off"""
    if epoch < 0:
        raise DomainError(f"epoch must be non-negative, got {epoch}")
    if not config.adversarial or epoch < config.warmup:
        return 0, 1
    return config.disc_steps_per_main_step, 1


@dataclass
class RandomStreams:
    """Independent generators for init, discriminator init, noise and shuffling"""

    init: np.random.Generator
    discriminator: np.random.Generator
    noise: np.random.Generator
    shuffle: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "RandomStreams":
        children = np.random.SeedSequence(seed).spawn(4)
        return cls(*(np.random.default_rng(child) for child in children))


def build_model(config: TrainConfig, streams: RandomStreams) -> ModelParams:
    n, m = config.n, config.m
    decoder = Mlp([n, *config.decoder_hidden, m], streams.init, "identity", name="decoder")
    model = ModelParams(decoder=decoder)
    if config.uses_encoder:
        hidden = config.encoder_hidden if config.encoder_hidden is not None else DEFAULT_HIDDEN
        model.encoder = Encoder(m, n, hidden, streams.init, config.init_log_var)
    else:
        model.bank = LatentBank(n, config.T, config.init_log_var)
    if config.adversarial:
        model.discriminator = Discriminator(n, config.discriminator_hidden, streams.discriminator)
    return model


def current_means(model: ModelParams, X: Tensor) -> Tensor:
    """Latent means (n, T), live in the graph"""
    if model.bank is not None:
        return model.bank.mu
    mu_rows, _ = encoder_forward(model.encoder, X.T)
    return mu_rows.T


@dataclass
class TrainResult:
    config: TrainConfig
    model: ModelParams
    priors: GPPriorSet
    history: List[LossBreakdown] = field(default_factory=list)
    discriminator_history: List[float] = field(default_factory=list)
    inferred_means: Optional[np.ndarray] = None

    @property
    def variant(self) -> str:
        return self.config.model_variant

    def named_parameters(self) -> Dict[str, Tensor]:
        """Model parameters plus the prior's log length scales, as stored in checkpoints"""
        named = self.model.named_parameters()
        named[self.priors.log_length_scales.name] = self.priors.log_length_scales
        return named

    def history_rows(self) -> List[Tuple]:
        return [(epoch, *entry.history_values()) for epoch, entry in enumerate(self.history)]


class Trainer:
    """Owns the parameters, optimizers and random streams of one run"""

    def __init__(self, config: TrainConfig, observations: np.ndarray,
                 priors: Optional[GPPriorSet] = None):
        X = np.asarray(observations, dtype=np.float64)
        if X.shape != (config.m, config.T):
            raise ShapeError(f"observations must be ({config.m}, {config.T}), got {X.shape}")

        self.config = config
        self.X = as_tensor(X)
        self.streams = RandomStreams.from_seed(config.seed)
        self.model = build_model(config, self.streams)
        self.priors = priors or GPPriorSet(config.n, config.T, config.init_length_scales,
                                           base_jitter=config.base_jitter, max_jitter=config.max_jitter,
                                           noise=config.prior_noise)
        if (self.priors.n, self.priors.T) != (config.n, config.T):
            raise ShapeError(f"priors cover n={self.priors.n}, T={self.priors.T}; "
                             f"config has n={config.n}, T={config.T}")
        self.ee = config.ee_coefficients()

        betas = dict(beta1=config.adam_beta1, beta2=config.adam_beta2, eps=config.adam_eps)
        self.latent_opt = Adam(self.model.latent_parameters() + self.priors.parameters(),
                               AdamHyper(lr=config.lr_main, **betas))
        self.network_opt = Adam(self.model.network_parameters(), AdamHyper(lr=config.lr_network, **betas))
        self.disc_opt = None
        if self.model.discriminator is not None:
            self.disc_opt = Adam(self.model.discriminator_parameters(), AdamHyper(lr=config.lr_disc, **betas))

    @property
    def main_parameters(self) -> List[Tensor]:
        return self.latent_opt.params + self.network_opt.params

    def named_parameters(self) -> Dict[str, Tensor]:
        named = self.model.named_parameters()
        named[self.priors.log_length_scales.name] = self.priors.log_length_scales
        return named

    def _objective(self, noise: np.ndarray, lam: float) -> LossBreakdown:
        cfg, model = self.config, self.model
        if cfg.model_variant == "gp-avae":
            return gp_avae_loss(model.encoder, model.decoder, self.priors, model.discriminator,
                                self.X, noise, lam, self.streams.shuffle, self.ee, cfg.obs_var,
                                cfg.adversarial_batch_size)
        if cfg.model_variant == "half-gp-avae":
            return half_avae_loss(model.bank, model.decoder, self.priors, model.discriminator,
                                  self.X, noise, lam, self.streams.shuffle, self.ee, cfg.obs_var,
                                  cfg.adversarial_batch_size)
        return half_vae_loss(model.bank, model.decoder, self.priors, self.X, noise, self.ee, cfg.obs_var)

    def update_discriminator(self, epoch: int) -> float:
        """One Adam step on Φ; the batch rows are constants here"""
        means = current_means(self.model, self.X).detach()
        batch = make_adversarial_batch(means, self.streams.shuffle, self.config.adversarial_batch_size)
        loss = discriminator_loss(self.model.discriminator, batch)
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingDivergedError("discriminator", epoch, value)
        self.disc_opt.step(backward(loss, self.model.discriminator_parameters()))
        return value

    def update_model(self, epoch: int, adversarial_active: bool) -> LossBreakdown:
        """One Adam step on Ω or Θ, Ψ and Γ with Φ frozen"""
        noise = self.streams.noise.standard_normal((self.config.n, self.config.T))
        lam = self.config.lam if adversarial_active else 0.0
        breakdown = self._objective(noise, lam)

        bad_term = breakdown.first_non_finite()
        if bad_term is not None:
            raise TrainingDivergedError(bad_term, epoch, breakdown.to_dict()[bad_term])

        grads = backward(breakdown.graph, self.main_parameters)
        for param, grad in grads.items():
            if not np.all(np.isfinite(grad)):
                raise TrainingDivergedError(f"gradient of {param.name}", epoch, float("nan"))

        self.latent_opt.step(grads)
        self.network_opt.step(grads)
        return breakdown.detached()

    def inferred_means(self) -> np.ndarray:
        return current_means(self.model, self.X).numpy().copy()

    def run(self, progress: bool = False) -> TrainResult:
        cfg = self.config
        result = TrainResult(config=cfg, model=self.model, priors=self.priors)
        logger.info(f"Training {cfg.model_variant}: {cfg.epochs} epochs, T={cfg.T}, m={cfg.m}, n={cfg.n}, "
                    f"seed={cfg.seed}")

        with tqdm(total=cfg.epochs, desc=f"Training {cfg.model_variant}", unit="epoch", ncols=80,
                  disable=not progress, leave=False) as pbar:
            for epoch in range(cfg.epochs):
                disc_steps, main_steps = alternate_schedule(epoch, cfg)
                for _ in range(disc_steps):
                    result.discriminator_history.append(self.update_discriminator(epoch))
                for _ in range(main_steps):
                    breakdown = self.update_model(epoch, adversarial_active=disc_steps > 0)
                result.history.append(breakdown)

                if cfg.log_every and epoch % cfg.log_every == 0:
                    logger.debug(f"[{cfg.model_variant}] epoch {epoch}: recon={breakdown.recon_nll:.4f} "
                                 f"kl={breakdown.kl_total:.4f} adv={breakdown.adversarial_term:.4f} "
                                 f"ee={breakdown.ee_term:.4f} total={breakdown.total:.4f}")
                pbar.update(1)

        result.inferred_means = self.inferred_means()
        if result.history:
            logger.info(f"Finished {cfg.model_variant}: final total {result.history[-1].total:.4f}, "
                        f"length scales {np.array2string(self.priors.length_scale_values, precision=4)}")
        return result


def train(config: TrainConfig, observations: np.ndarray, priors: Optional[GPPriorSet] = None,
          progress: bool = False) -> TrainResult:
    """Train one variant on (m, T) observations and return parameters plus per-epoch history"""
    return Trainer(config, observations, priors).run(progress=progress)
