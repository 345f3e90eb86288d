"""Model checkpoints: named parameter arrays with shapes, stored as JSON"""
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import numpy as np

from core.autodiff import Tensor
from core.exceptions import ShapeError, UnmixError
from output.json_exporter import JSONExporter

CHECKPOINT_FORMAT = "unmix-checkpoint"
CHECKPOINT_VERSION = 1


def checkpoint_dict(named: Mapping[str, Tensor], variant: str,
                    metadata: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Serializable form of a parameter set"""
    return {
        'format': CHECKPOINT_FORMAT,
        'format_version': CHECKPOINT_VERSION,
        'variant': variant,
        'metadata': dict(metadata or {}),
        'parameters': {
            name: {'shape': list(t.shape), 'values': t.value.reshape(-1).tolist()}
            for name, t in sorted(named.items())
        },
    }


def save_checkpoint(path: Union[str, Path], named: Mapping[str, Tensor], variant: str,
                    metadata: Optional[Dict[str, Any]] = None) -> str:
    return JSONExporter().export(checkpoint_dict(named, variant, metadata), path)


def load_checkpoint(path: Union[str, Path]) -> Dict[str, Any]:
    payload = JSONExporter().load(path)
    if payload.get('format') != CHECKPOINT_FORMAT:
        raise UnmixError(f"{path} is not an unmix checkpoint")
    if payload.get('format_version') != CHECKPOINT_VERSION:
        raise UnmixError(f"unsupported checkpoint version {payload.get('format_version')} in {path}")
    return payload


def restore_parameters(named: Mapping[str, Tensor], payload: Dict[str, Any]) -> None:
    """Copy stored values into live tensors, checking names and shapes"""
    stored = payload['parameters']
    missing = sorted(set(named) - set(stored))
    if missing:
        raise UnmixError(f"checkpoint lacks parameters: {', '.join(missing)}")

    for name, tensor in named.items():
        entry = stored[name]
        shape = tuple(entry['shape'])
        if shape != tensor.shape:
            raise ShapeError(f"{name}: checkpoint shape {shape} does not match model shape {tensor.shape}")
        tensor.value[...] = np.asarray(entry['values'], dtype=np.float64).reshape(shape)
