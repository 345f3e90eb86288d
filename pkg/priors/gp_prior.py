"""Squared-exponential Gaussian process priors, their KL terms and the EE penalty"""
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky

from core.autodiff import Operand, Tensor, apply_primitive, as_tensor, register_primitive
from core.exceptions import DomainError, FactorizationError, ShapeError
from core.logger import logger

DEFAULT_BASE_JITTER = 1e-8
DEFAULT_MAX_JITTER = 1e-2
# white-noise variance the experiments add to every SE covariance
DEFAULT_PRIOR_NOISE = 1e-2


def normalized_time_grid(T: int) -> np.ndarray:
    """τ = 0, 1, …, T−1 scaled into [0, 1)"""
    if T < 1:
        raise DomainError(f"time grid needs T >= 1, got {T}")
    return np.arange(T, dtype=np.float64) / T


def squared_distances(time_grid: np.ndarray) -> np.ndarray:
    diff = time_grid[:, None] - time_grid[None, :]
    return diff * diff


def se_kernel_matrix(time_grid: np.ndarray, length_scale: float) -> np.ndarray:
    """k(τ, τ') = exp(−(τ − τ')² / (2Γ²))"""
    if not length_scale > 0:
        raise DomainError(f"length scale must be positive, got {length_scale}")
    grid = np.asarray(time_grid, dtype=np.float64)
    return np.exp(-squared_distances(grid) / (2.0 * length_scale ** 2))


def cholesky_with_jitter(K: np.ndarray, base_jitter: float = DEFAULT_BASE_JITTER,
                         max_jitter: float = DEFAULT_MAX_JITTER) -> Tuple[np.ndarray, float]:
    """Lower factor of K + j·I, escalating j ×10 from base_jitter up to max_jitter"""
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ShapeError(f"kernel matrix must be square, got {K.shape}")
    if np.max(np.abs(K - K.T), initial=0.0) > 1e-12:
        raise DomainError("kernel matrix is not symmetric")
    if not 0 < base_jitter <= max_jitter:
        raise DomainError(f"need 0 < base_jitter <= max_jitter, got {base_jitter}, {max_jitter}")

    eye = np.eye(K.shape[0])
    step = 0
    jitter = base_jitter
    while jitter <= max_jitter * (1.0 + 1e-9):
        try:
            return cholesky(K + jitter * eye, lower=True), jitter
        except LinAlgError:
            logger.debug(f"Cholesky failed with jitter {jitter:.0e}, escalating")
        step += 1
        jitter = base_jitter * 10.0 ** step

    raise FactorizationError(f"Cholesky failed up to jitter {max_jitter:g}")


@dataclass
class PriorFactor:
    """
    Factorized covariance K + (noise + j)·I of one latent dimension. `kernel`
    holds the noise-free SE part, which is all Γ acts on.
    """

    chol: np.ndarray
    jitter: float = 0.0
    noise: float = 0.0
    kernel: Optional[np.ndarray] = None
    sq_dists: Optional[np.ndarray] = None
    length_scale: Optional[Tensor] = None
    inverse: Optional[np.ndarray] = field(default=None, repr=False)
    log_det: Optional[float] = None

    def __post_init__(self):
        self.chol = np.asarray(self.chol, dtype=np.float64)
        if self.inverse is None:
            self.inverse = cho_solve((self.chol, True), np.eye(self.size))
        if self.log_det is None:
            self.log_det = 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    @property
    def size(self) -> int:
        return self.chol.shape[0]


def prior_factor(time_grid: np.ndarray, length_scale: Union[Tensor, float],
                 base_jitter: float = DEFAULT_BASE_JITTER,
                 max_jitter: float = DEFAULT_MAX_JITTER, noise: float = 0.0,
                 sq_dists: Optional[np.ndarray] = None) -> PriorFactor:
    """Factor the SE kernel plus noise·I; a Tensor length scale stays differentiable"""
    if noise < 0:
        raise DomainError(f"prior noise must be non-negative, got {noise}")
    gamma = as_tensor(length_scale)
    kernel = se_kernel_matrix(time_grid, gamma.item())
    covariance = kernel + noise * np.eye(kernel.shape[0]) if noise > 0 else kernel
    chol, jitter = cholesky_with_jitter(covariance, base_jitter, max_jitter)
    if sq_dists is None:
        sq_dists = squared_distances(np.asarray(time_grid, dtype=np.float64))
    return PriorFactor(chol=chol, jitter=jitter, noise=noise, kernel=kernel, sq_dists=sq_dists,
                       length_scale=gamma if gamma.requires_grad else None)


@register_primitive("gp_kl")
def _gp_kl(mu, var, length_scale=None, *, factor: PriorFactor):
    """KL(N(μ, σ²I) ‖ N(0, K)) with its closed-form derivatives"""
    T = factor.size
    if mu.shape != (T,):
        raise ShapeError(f"gp_kl: mean sequence {mu.shape} does not match prior of size {T}")
    if var.size != 1:
        raise ShapeError(f"gp_kl: shared variance must be a scalar, got {var.shape}")
    s2 = float(var.reshape(-1)[0])
    if not s2 > 0:
        raise DomainError(f"gp_kl: variance must be positive, got {s2}")

    k_inv = factor.inverse
    alpha = cho_solve((factor.chol, True), mu)
    trace = float(np.trace(k_inv))
    value = 0.5 * (s2 * trace + float(mu @ alpha) - T + factor.log_det - T * np.log(s2))

    def vjp(g):
        g = float(g)
        grads = [g * alpha, np.full(var.shape, g * 0.5 * (trace - T / s2))]
        if length_scale is not None:
            gamma = float(length_scale.reshape(-1)[0])
            # dKL/dK, then chain through dK/dΓ = K ∘ D² / Γ³
            dkl_dk = 0.5 * (k_inv - s2 * (k_inv @ k_inv) - np.outer(alpha, alpha))
            dk_dgamma = factor.kernel * factor.sq_dists / gamma ** 3
            grads.append(np.full(length_scale.shape, g * float(np.sum(dkl_dk * dk_dgamma))))
        return tuple(grads)

    return np.array(value), vjp


def kl_gaussian_vs_gp(mu_seq: Operand, shared_var: Operand, prior: PriorFactor) -> Tensor:
    """KL between the shared-variance posterior of one dimension and its GP prior"""
    operands = [as_tensor(mu_seq), as_tensor(shared_var)]
    if prior.length_scale is not None:
        operands.append(prior.length_scale)
    return apply_primitive("gp_kl", operands, factor=prior)


def default_length_scales(n: int, low: float = 0.02, high: float = 0.2) -> np.ndarray:
    """Geometrically spaced, so no two dimensions start with equal Γ"""
    if n == 1:
        return np.array([np.sqrt(low * high)])
    return np.geomspace(low, high, n)


class GPPriorSet:
    """One SE-kernel GP prior per latent dimension, Γ stored as exp(log Γ)"""

    def __init__(self, n: int, T: int, init_length_scales: Optional[Sequence[float]] = None,
                 base_jitter: float = DEFAULT_BASE_JITTER, max_jitter: float = DEFAULT_MAX_JITTER,
                 noise: float = 0.0):
        init = default_length_scales(n) if init_length_scales is None else np.asarray(init_length_scales, dtype=np.float64)
        if init.shape != (n,):
            raise ShapeError(f"expected {n} initial length scales, got shape {init.shape}")
        if np.any(init <= 0):
            raise DomainError("initial length scales must be positive")
        if noise < 0:
            raise DomainError(f"prior noise must be non-negative, got {noise}")

        self.time_grid = normalized_time_grid(T)
        self.sq_dists = squared_distances(self.time_grid)
        self.base_jitter = base_jitter
        self.max_jitter = max_jitter
        self.noise = noise
        self.log_length_scales = Tensor(np.log(init), requires_grad=True, name="prior.log_length_scales")
        # dimension -> (Γ value the factor was built for, factor)
        self._cache: Dict[int, Tuple[float, PriorFactor]] = {}

    @property
    def n(self) -> int:
        return self.log_length_scales.shape[0]

    @property
    def T(self) -> int:
        return self.time_grid.shape[0]

    @property
    def length_scale_values(self) -> np.ndarray:
        return np.exp(self.log_length_scales.value)

    def parameters(self):
        return [self.log_length_scales]

    def length_scales(self) -> Tensor:
        """Γ as a live tensor"""
        return self.log_length_scales.exp()

    def factor(self, i: int, length_scales: Optional[Tensor] = None) -> PriorFactor:
        """Cached factor of dimension i, linked to the live Γ^i"""
        gammas = self.length_scales() if length_scales is None else length_scales
        gamma_i = gammas.take([i])
        value = gamma_i.item()
        cached = self._cache.get(i)
        if cached is None or cached[0] != value:
            cached = (value, prior_factor(self.time_grid, value, self.base_jitter, self.max_jitter,
                                          self.noise, self.sq_dists))
            self._cache[i] = cached
        return replace(cached[1], length_scale=gamma_i)

    def kl_total(self, mu: Tensor, log_var: Tensor) -> Tensor:
        """Σ_i KL over all dimensions for means (n, T) and log-variances (n,)"""
        if mu.shape != (self.n, self.T) or log_var.shape != (self.n,):
            raise ShapeError(f"posterior shapes {mu.shape}, {log_var.shape} do not match "
                             f"{self.n} priors over T={self.T}")
        gammas = self.length_scales()
        variances = log_var.exp()
        total = None
        for i in range(self.n):
            term = kl_gaussian_vs_gp(mu.take([i], axis=0).reshape(self.T),
                                     variances.take([i]), self.factor(i, gammas))
            total = term if total is None else total + term
        return total


@dataclass(frozen=True)
class EECoefficients:
    """Weights of the External Enhancement penalty"""

    beta1: float = 0.01
    beta2: float = 1.0
    beta3: float = 1.0
    floor: float = 1e-6

    def __post_init__(self):
        for name in ("beta1", "beta2", "beta3", "floor"):
            if getattr(self, name) < 0:
                raise DomainError(f"EE coefficient {name} must be non-negative")


def ee_penalty(length_scales: Operand, shared_vars: Operand, coeffs: EECoefficients) -> Tensor:
    """β₁·Σ_{i<j} 1/((Γ^i−Γ^j)² + ε) + β₂·ΣΓ^i + β₃·Σσ²_i"""
    gammas = as_tensor(length_scales)
    variances = as_tensor(shared_vars)
    n = gammas.shape[0]
    if gammas.shape != (n,) or variances.shape != (n,):
        raise ShapeError(f"ee_penalty: shapes {gammas.shape} and {variances.shape} must both be ({n},)")

    repulsion = Tensor(0.0)
    for i in range(n):
        for j in range(i + 1, n):
            diff = gammas.take([i]) - gammas.take([j])
            repulsion = repulsion + (1.0 / (diff.square() + coeffs.floor)).sum()

    return coeffs.beta1 * repulsion + coeffs.beta2 * gammas.sum() + coeffs.beta3 * variances.sum()
