"""Configuration management for unmix"""
import dataclasses
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union, get_type_hints

import yaml

from core.exceptions import ConfigError
from objectives.losses import DEFAULT_OBS_VAR
from priors.gp_prior import DEFAULT_PRIOR_NOISE
from synthesis.mixing import MIXING_MODES
from synthesis.sources import MIN_LENGTH, SourceSpec
from training.trainer import DEFAULT_HIDDEN, DEFAULT_TRAIN_INIT_LOG_VAR, VARIANTS, TrainConfig

SCENARIOS = ("determined", "underdetermined")
SOURCE_COUNT = 3


@dataclass(frozen=True)
class DataConfig:
    T: int = 200
    n: int = SOURCE_COUNT
    m: Optional[int] = None
    mixing: str = "nonlinear"
    seed: Optional[int] = None
    slow_cycles: float = 1.5
    slow_drift: float = 0.3
    gp_length_scale: float = 0.1
    fast_cycles: float = 8.0
    max_abs_corr: float = 0.2
    max_attempts: int = 100

    def source_spec(self) -> SourceSpec:
        return SourceSpec(slow_cycles=self.slow_cycles, slow_drift=self.slow_drift,
                          gp_length_scale=self.gp_length_scale, fast_cycles=self.fast_cycles,
                          max_abs_corr=self.max_abs_corr, max_attempts=self.max_attempts)


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 3000
    lr_main: float = 1e-2
    lr_network: float = 1e-3
    lr_disc: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    lam: float = 1.0
    warmup: int = 100
    disc_steps_per_main_step: int = 1
    decoder_hidden: Tuple[int, ...] = DEFAULT_HIDDEN
    encoder_hidden: Tuple[int, ...] = DEFAULT_HIDDEN
    discriminator_hidden: Tuple[int, ...] = DEFAULT_HIDDEN
    obs_var: float = DEFAULT_OBS_VAR
    init_log_var: float = DEFAULT_TRAIN_INIT_LOG_VAR
    adversarial_batch_size: Optional[int] = None
    log_every: int = 100


@dataclass(frozen=True)
class PriorConfig:
    base_jitter: float = 1e-8
    max_jitter: float = 1e-2
    noise: float = DEFAULT_PRIOR_NOISE
    # None means geometric spacing between 0.02 and 0.2
    init_length_scales: Optional[Tuple[float, ...]] = None


@dataclass(frozen=True)
class EEConfig:
    enabled: bool = True
    beta1: float = 0.01
    beta2: float = 1.0
    beta3: float = 1.0
    floor: float = 1e-6


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved, validated experiment description"""

    scenario: str = "underdetermined"
    models: Tuple[str, ...] = VARIANTS
    seeds: Tuple[int, ...] = (0,)
    output_dir: str = "runs"
    data: DataConfig = field(default_factory=DataConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    ee: EEConfig = field(default_factory=EEConfig)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError("scenario", f"must be one of {', '.join(SCENARIOS)}, got {self.scenario!r}")
        if not self.models:
            raise ConfigError("models", "at least one model variant is required")
        for variant in self.models:
            if variant not in VARIANTS:
                raise ConfigError("models", f"unknown variant {variant!r} (choose from {', '.join(VARIANTS)})")
        if len(set(self.models)) != len(self.models):
            raise ConfigError("models", "variants must not repeat")
        if not self.seeds:
            raise ConfigError("seeds", "at least one seed is required")
        if not self.output_dir:
            raise ConfigError("output_dir", "must not be empty")

        if self.data.T < MIN_LENGTH:
            raise ConfigError("data.T", f"must be at least {MIN_LENGTH}, got {self.data.T}")
        if self.data.n != SOURCE_COUNT:
            raise ConfigError("data.n", f"the synthetic benchmark has exactly {SOURCE_COUNT} sources")
        if self.data.mixing not in MIXING_MODES:
            raise ConfigError("data.mixing", f"must be one of {', '.join(MIXING_MODES)}")
        m = self.m
        if m < 1:
            raise ConfigError("data.m", f"must be positive, got {m}")
        if self.scenario == "determined" and m != self.data.n:
            raise ConfigError("data.m", f"determined scenario needs m = n = {self.data.n}, got m={m}")
        if self.scenario == "underdetermined" and m >= self.data.n:
            raise ConfigError("data.m", f"underdetermined scenario needs m < n = {self.data.n}, got m={m}")
        if not 0 < self.prior.base_jitter <= self.prior.max_jitter:
            raise ConfigError("prior.base_jitter", "need 0 < base_jitter <= max_jitter")
        if self.prior.noise < 0:
            raise ConfigError("prior.noise", "must be non-negative")
        for name in ("beta1", "beta2", "beta3", "floor"):
            if getattr(self.ee, name) < 0:
                raise ConfigError(f"ee.{name}", "must be non-negative")

        for variant in self.models:
            self.train_config(variant, self.seeds[0])

    @property
    def m(self) -> int:
        """Observed signal count; defaults to n (determined) or n − 1 (underdetermined)"""
        if self.data.m is not None:
            return self.data.m
        return self.data.n if self.scenario == "determined" else self.data.n - 1

    def train_config(self, variant: str, seed: int) -> TrainConfig:
        t = self.training
        return TrainConfig(
            model_variant=variant,
            epochs=t.epochs,
            lr_main=t.lr_main,
            lr_network=t.lr_network,
            lr_disc=t.lr_disc,
            adam_beta1=t.adam_beta1,
            adam_beta2=t.adam_beta2,
            adam_eps=t.adam_eps,
            lam=t.lam,
            warmup=t.warmup,
            ee_enabled=self.ee.enabled,
            beta1=self.ee.beta1,
            beta2=self.ee.beta2,
            beta3=self.ee.beta3,
            ee_floor=self.ee.floor,
            disc_steps_per_main_step=t.disc_steps_per_main_step,
            decoder_hidden=tuple(t.decoder_hidden),
            encoder_hidden=tuple(t.encoder_hidden) if variant == "gp-avae" else None,
            discriminator_hidden=tuple(t.discriminator_hidden),
            obs_var=t.obs_var,
            init_log_var=t.init_log_var,
            base_jitter=self.prior.base_jitter,
            max_jitter=self.prior.max_jitter,
            prior_noise=self.prior.noise,
            init_length_scales=(None if self.prior.init_length_scales is None
                                else tuple(self.prior.init_length_scales)),
            adversarial_batch_size=t.adversarial_batch_size,
            seed=seed,
            T=self.data.T,
            m=self.m,
            n=self.data.n,
            log_every=t.log_every,
        )

    def for_seed(self, seed: int, source_seed: Optional[int] = None) -> "ExperimentConfig":
        """Single-seed config, optionally pinning the accepted source seed"""
        data = self.data if source_seed is None else replace(self.data, seed=source_seed)
        return replace(self, seeds=(seed,), data=data)

    def to_dict(self) -> Dict[str, Any]:
        return _jsonable(asdict(self))

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON; the output location does not count"""
        content = self.to_dict()
        content.pop('output_dir')
        canonical = json.dumps(content, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _type_name(hint: Any) -> str:
    return getattr(hint, '__name__', str(hint))


def _coerce(value: Any, hint: Any, key_path: str) -> Any:
    if dataclasses.is_dataclass(hint):
        return _build(hint, value, key_path)

    origin = getattr(hint, '__origin__', None)
    args = getattr(hint, '__args__', ())
    if origin is Union:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _coerce(value, inner, key_path)
    if origin in (tuple, Tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(key_path, f"expected a list, got {type(value).__name__}")
        return tuple(_coerce(v, args[0], f"{key_path}[{i}]") for i, v in enumerate(value))

    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(key_path, f"expected a boolean, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key_path, f"expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key_path, f"expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(key_path, f"expected a string, got {value!r}")
        return value
    raise ConfigError(key_path, f"unsupported type {_type_name(hint)}")


def _build(cls, raw: Any, prefix: str = ""):
    """Instantiate a config dataclass from a mapping, rejecting unknown keys"""
    where = prefix or "<document>"
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(where, f"expected a mapping, got {type(raw).__name__}")

    hints = get_type_hints(cls)
    names = [f.name for f in dataclasses.fields(cls)]
    for key in raw:
        if key not in names:
            raise ConfigError(f"{prefix}.{key}" if prefix else str(key), "unknown key")

    kwargs = {}
    for name in names:
        if name in raw:
            key_path = f"{prefix}.{name}" if prefix else name
            kwargs[name] = _coerce(raw[name], hints[name], key_path)
    return cls(**kwargs)


def parse_config(text: str) -> ExperimentConfig:
    """Validated config from a JSON document; an empty document gives the defaults"""
    if not text or not text.strip():
        return ExperimentConfig()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("<document>", f"not valid JSON ({e})")
    return _build(ExperimentConfig, raw)


def config_from_dict(raw: Dict[str, Any]) -> ExperimentConfig:
    return _build(ExperimentConfig, raw)


def emit_config(config: ExperimentConfig) -> str:
    return json.dumps(config.to_dict(), indent=2)


def parse_override(item: str) -> Tuple[str, Any]:
    """'training.epochs=5' -> ('training.epochs', 5); values read as JSON, then YAML"""
    key, sep, text = item.partition('=')
    key = key.strip()
    if not sep or not key:
        raise ConfigError(item, "override must look like key=value")
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        try:
            value = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigError(key, f"cannot parse value {text!r} ({e})")
    return key, value


class Config:
    """Configuration manager: raw document plus overrides, resolved on demand"""

    def __init__(self, config_path: str = None):
        self.config_path = config_path or self._find_config()
        self.config = self._load_config()

    def _find_config(self) -> Optional[str]:
        """Find config.yml in project directory"""
        current_dir = Path(__file__).parent.parent
        config_file = current_dir / "config.yml"

        if config_file.exists():
            return str(config_file)

        return None

    def _load_config(self) -> Dict[str, Any]:
        """Load configuration from a JSON or YAML file"""
        if not self.config_path:
            return {}
        if not os.path.exists(self.config_path):
            raise ConfigError("--config", f"file not found: {self.config_path}")

        with open(self.config_path, 'r', encoding='utf-8') as f:
            text = f.read()

        try:
            loaded = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError:
            try:
                loaded = yaml.safe_load(text)
            except yaml.YAMLError as e:
                raise ConfigError("<document>", f"{self.config_path} is neither JSON nor YAML ({e})")

        if loaded is None:
            return {}
        if not isinstance(loaded, dict):
            raise ConfigError("<document>", f"{self.config_path} must contain a mapping")
        return loaded

    def get(self, key: str, default=None):
        """Get configuration value"""
        keys = key.split('.')
        value = self.config

        for k in keys:
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default

        return value

    def set(self, key: str, value: Any):
        """Set configuration value"""
        keys = key.split('.')
        config = self.config

        for k in keys[:-1]:
            if not isinstance(config.get(k), dict):
                config[k] = {}
            config = config[k]

        config[keys[-1]] = value

    def apply_overrides(self, overrides: Sequence[str]):
        for item in overrides or ():
            key, value = parse_override(item)
            self.set(key, value)

    def resolve(self) -> ExperimentConfig:
        return config_from_dict(self.config)


def load_experiment_config(config_path: Optional[str] = None, overrides: Sequence[str] = (),
                           out: Optional[str] = None, seed: Optional[int] = None) -> ExperimentConfig:
    """Config file, then --set overrides, then the --out / --seed shortcuts"""
    cfg = Config(config_path)
    cfg.apply_overrides(overrides)
    if out is not None:
        cfg.set('output_dir', out)
    if seed is not None:
        cfg.set('seeds', [seed])
    return cfg.resolve()


def write_resolved_config(config: ExperimentConfig, path: Union[str, Path]) -> str:
    output_file = Path(path)
    output_file.parent.mkdir(parents=True, exist_ok=True)
    output_file.write_text(emit_config(config) + "\n", encoding='utf-8')
    return str(output_file)


def known_keys(cls=ExperimentConfig, prefix: str = "") -> List[str]:
    """Dotted paths of every leaf setting"""
    keys = []
    for f in dataclasses.fields(cls):
        hint = get_type_hints(cls)[f.name]
        path = f"{prefix}{f.name}"
        if dataclasses.is_dataclass(hint):
            keys.extend(known_keys(hint, f"{path}."))
        else:
            keys.append(path)
    return keys
