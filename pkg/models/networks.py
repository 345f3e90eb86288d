"""Decoder, encoder, discriminator and the encoder-free latent bank"""
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.autodiff import Operand, Tensor, as_tensor, broadcast_add_row
from core.exceptions import ShapeError, UsageError

# Probabilities stay inside (δ, 1 − δ) so log D never sees 0
DISCRIMINATOR_DELTA = 1e-7
LOGIT_BOUND = math.log((1.0 - DISCRIMINATOR_DELTA) / DISCRIMINATOR_DELTA)
DEFAULT_INIT_LOG_VAR = math.log(0.1)

OUTPUT_ACTIVATIONS = ("identity", "sigmoid", "tanh")


def glorot_uniform(rng: np.random.Generator, d_in: int, d_out: int) -> np.ndarray:
    """uniform(−a, a) with a = √(6 / (d_in + d_out))"""
    bound = math.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-bound, bound, size=(d_in, d_out))


class Mlp:
    """Affine layers with tanh hidden activations"""

    def __init__(self, layer_dims: Sequence[int], rng: Optional[np.random.Generator] = None,
                 output_activation: str = "identity", name: str = "mlp"):
        dims = [int(d) for d in layer_dims]
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ShapeError(f"{name}: need at least two positive layer widths, got {list(layer_dims)}")
        if output_activation not in OUTPUT_ACTIVATIONS:
            raise UsageError(f"{name}: unknown output activation {output_activation!r}")

        rng = rng if rng is not None else np.random.default_rng(0)
        self.layer_dims = dims
        self.output_activation = output_activation
        self.name = name
        self.weights: List[Tensor] = []
        self.biases: List[Tensor] = []
        for k, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
            self.weights.append(Tensor(glorot_uniform(rng, d_in, d_out), requires_grad=True,
                                       name=f"{name}.layers.{k}.weight"))
            self.biases.append(Tensor(np.zeros(d_out), requires_grad=True,
                                      name=f"{name}.layers.{k}.bias"))

    @classmethod
    def from_arrays(cls, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray],
                    output_activation: str = "identity", name: str = "mlp") -> "Mlp":
        """Build a network with hand-set parameters"""
        dims = [np.shape(weights[0])[0]] + [np.shape(w)[1] for w in weights]
        net = cls(dims, output_activation=output_activation, name=name)
        for k, (w, b) in enumerate(zip(weights, biases)):
            if np.shape(w) != (dims[k], dims[k + 1]) or np.shape(b) != (dims[k + 1],):
                raise ShapeError(f"{name}: layer {k} weight {np.shape(w)} / bias {np.shape(b)} "
                                 f"do not chain with widths {dims}")
            net.weights[k].value[...] = w
            net.biases[k].value[...] = b
        return net

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def parameter_count(self) -> int:
        return sum(d_in * d_out + d_out for d_in, d_out in zip(self.layer_dims[:-1], self.layer_dims[1:]))

    def parameters(self) -> List[Tensor]:
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        return params

    def named_parameters(self) -> Dict[str, Tensor]:
        return {p.name: p for p in self.parameters()}

    def frozen(self) -> "Mlp":
        """Same function, constant weights"""
        clone = object.__new__(Mlp)
        clone.layer_dims = list(self.layer_dims)
        clone.output_activation = self.output_activation
        clone.name = self.name
        clone.weights = [w.detach() for w in self.weights]
        clone.biases = [b.detach() for b in self.biases]
        return clone

    def __call__(self, x: Operand) -> Tensor:
        return mlp_forward(self, x)


def mlp_forward(net: Mlp, input: Operand) -> Tensor:
    """Rows of `input` (batch × d_in) through every layer"""
    h = as_tensor(input)
    if h.value.ndim != 2 or h.shape[1] != net.input_dim:
        raise ShapeError(f"{net.name}: expected (batch, {net.input_dim}) input, got {h.shape}")

    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = broadcast_add_row(h @ w, b)
        activation = "tanh" if k < last else net.output_activation
        if activation == "tanh":
            h = h.tanh()
        elif activation == "sigmoid":
            h = h.sigmoid()
    return h


class LatentBank:
    """Directly trainable posterior: per-dimension means and one shared log-variance"""

    def __init__(self, n: int, T: int, init_log_var: float = DEFAULT_INIT_LOG_VAR,
                 init_mu: Optional[np.ndarray] = None):
        mu = np.zeros((n, T)) if init_mu is None else np.asarray(init_mu, dtype=np.float64)
        if mu.shape != (n, T):
            raise ShapeError(f"latent bank means must be ({n}, {T}), got {mu.shape}")
        self.mu = Tensor(mu, requires_grad=True, name="bank.mu")
        self.log_var = Tensor(np.full(n, init_log_var), requires_grad=True, name="bank.log_var")

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    @property
    def T(self) -> int:
        return self.mu.shape[1]

    @property
    def variances(self) -> np.ndarray:
        return np.exp(self.log_var.value)

    def parameters(self) -> List[Tensor]:
        return [self.mu, self.log_var]

    def named_parameters(self) -> Dict[str, Tensor]:
        return {p.name: p for p in self.parameters()}


def reparameterize(mu: Tensor, log_var: Tensor, noise: np.ndarray) -> Tensor:
    """Z = μ + exp(½·log σ²)·ε with one shared σ² per row of μ"""
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != mu.shape:
        raise ShapeError(f"noise shape {noise.shape} does not match means {mu.shape}")
    std = (0.5 * log_var).exp().reshape(mu.shape[0], 1)
    return mu + std * noise


def latent_sample(bank: LatentBank, noise: np.ndarray) -> Tensor:
    return reparameterize(bank.mu, bank.log_var, noise)


class Encoder:
    """Mean head m → … → n plus n free log-variance scalars"""

    def __init__(self, m: int, n: int, hidden: Sequence[int] = (32, 32),
                 rng: Optional[np.random.Generator] = None,
                 init_log_var: float = DEFAULT_INIT_LOG_VAR, mean_head: Optional[Mlp] = None):
        self.mean_head = mean_head or Mlp([m, *hidden, n], rng, "identity", name="encoder.mean")
        if (self.mean_head.input_dim, self.mean_head.output_dim) != (m, n):
            raise ShapeError(f"encoder mean head maps {self.mean_head.input_dim} -> "
                             f"{self.mean_head.output_dim}, expected {m} -> {n}")
        self.log_var = Tensor(np.full(n, init_log_var), requires_grad=True, name="encoder.log_var")

    def parameters(self) -> List[Tensor]:
        return self.mean_head.parameters() + [self.log_var]

    def named_parameters(self) -> Dict[str, Tensor]:
        return {p.name: p for p in self.parameters()}


def encoder_forward(net: Optional[Encoder], X: Operand) -> Tuple[Tensor, Tensor]:
    """Per-time-step means (batch × n) and the shared log-variances (n,)"""
    if net is None:
        raise UsageError("encoder_forward called on an encoder-free model")
    return mlp_forward(net.mean_head, X), net.log_var


class Discriminator:
    """n → … → 1 network with a clamped-logit sigmoid output"""

    def __init__(self, n: int, hidden: Sequence[int] = (32, 32),
                 rng: Optional[np.random.Generator] = None, net: Optional[Mlp] = None):
        self.net = net or Mlp([n, *hidden, 1], rng, "identity", name="discriminator")
        if self.net.output_dim != 1:
            raise ShapeError(f"discriminator must have one output, got {self.net.output_dim}")

    @property
    def n(self) -> int:
        return self.net.input_dim

    def parameters(self) -> List[Tensor]:
        return self.net.parameters()

    def named_parameters(self) -> Dict[str, Tensor]:
        return self.net.named_parameters()

    def frozen(self) -> "Discriminator":
        return Discriminator(self.n, net=self.net.frozen())


def discriminator_forward(disc: Discriminator, z_points: Operand) -> Tensor:
    """Probability that each row was drawn from the product of marginals"""
    logits = mlp_forward(disc.net, z_points)
    return logits.clamp(-LOGIT_BOUND, LOGIT_BOUND).sigmoid().reshape(logits.shape[0])


@dataclass
class ModelParams:
    """Decoder Ψ, optional encoder Θ, optional discriminator Φ, optional latent bank Ω"""

    decoder: Mlp
    encoder: Optional[Encoder] = None
    discriminator: Optional[Discriminator] = None
    bank: Optional[LatentBank] = None

    def latent_parameters(self) -> List[Tensor]:
        return self.bank.parameters() if self.bank is not None else []

    def network_parameters(self) -> List[Tensor]:
        params = list(self.decoder.parameters())
        if self.encoder is not None:
            params.extend(self.encoder.parameters())
        return params

    def discriminator_parameters(self) -> List[Tensor]:
        return self.discriminator.parameters() if self.discriminator is not None else []

    def named_parameters(self) -> Dict[str, Tensor]:
        named = {}
        for p in self.latent_parameters() + self.network_parameters() + self.discriminator_parameters():
            named[p.name] = p
        return named
