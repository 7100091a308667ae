"""Model checkpoints: versioned npz containers, exact round-trip."""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from ..errors import ConfigError
from ..numcore import MlpParams, Tensor
from .config import ModelConfig
from .params import ModelParams

CHECKPOINT_VERSION = 1


def save_checkpoint(path: str, params: ModelParams, graph_hash: str, extra: dict | None = None) -> None:
    arrays = {f"t|{name}": t.data for name, t in sorted(params.tensors().items())}
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": params.config.to_dict(),
        "layer_kinds": params.layer_kinds,
        "mlp_norm": {p: m.apply_output_norm for p, m in params.mlps.items()},
        "graph_hash": graph_hash,
        "extra": extra or {},
    }
    arrays["__meta__"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".npz.tmp")
    os.close(fd)
    try:
        with open(tmp, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str) -> tuple[ModelParams, dict]:
    with np.load(path) as data:
        if "__meta__" not in data:
            raise ConfigError("not a model checkpoint: missing metadata")
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ConfigError(f"unsupported checkpoint version {meta.get('version')!r}")
        tensors = {k[2:]: np.array(data[k]) for k in data.files if k.startswith("t|")}

    config = ModelConfig.from_dict(meta["config"])
    mlps: dict[str, MlpParams] = {}
    for mlp_path, normed in meta["mlp_norm"].items():
        def grab(field: str, required: bool = True):
            key = f"{mlp_path}.{field}"
            if key not in tensors:
                if required:
                    raise ConfigError(f"checkpoint missing tensor '{key}'")
                return None
            return Tensor(tensors[key], requires_grad=True)

        mlps[mlp_path] = MlpParams(
            w_in=grab("w_in"),
            b_in=grab("b_in"),
            w_out=grab("w_out"),
            b_out=grab("b_out"),
            apply_output_norm=bool(normed),
            norm_scale=grab("norm_scale", required=False),
            norm_shift=grab("norm_shift", required=False),
        )
    return ModelParams(config, mlps, dict(meta["layer_kinds"])), meta
