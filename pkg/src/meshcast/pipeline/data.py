"""Dataset container: fields + forcing + statics, normalization, windowing,
boundary handling, and the flat-binary/sidecar file format."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError
from ..meshgraph import PLANAR, GridSpec
from ..meshgraph.io import atomic_write_text
from ..models import RolloutInput
from ..objectives import TrainingWindow

DATASET_SCHEMA_VERSION = 1


@dataclass
class Dataset:
    """[time, nodes, channels] arrays plus metadata and normalization stats.

    ``fields``/``forcing`` are stored in physical units; ``normalized_*``
    accessors apply the per-channel statistics fitted on the train split.
    """

    fields: np.ndarray  # [T, N, d_x]
    forcing: np.ndarray  # [T, N, d_f]
    static: np.ndarray  # [N, d_s]
    variables: list[str]
    units: list[str]
    forcing_names: list[str]
    static_names: list[str]
    grid: GridSpec
    splits: dict[str, tuple[int, int]]
    boundary_width: int = 0
    norm_mean: np.ndarray | None = None
    norm_std: np.ndarray | None = None
    forcing_mean: np.ndarray | None = None
    forcing_std: np.ndarray | None = None
    static_mean: np.ndarray | None = None
    static_std: np.ndarray | None = None

    def __post_init__(self):
        t, n, dx = self.fields.shape
        if self.forcing.shape[:2] != (t, n):
            raise ShapeError("forcing must align with field timestamps")
        if self.static.shape[0] != n:
            raise ShapeError("static fields must cover every grid node")
        if n != self.grid.n_nodes:
            raise ShapeError("grid descriptor does not match node count")
        if len(self.variables) != dx or len(self.units) != dx:
            raise ShapeError("variable metadata does not match field width")

    # -- normalization ----------------------------------------------------------

    def fit_normalization(self) -> None:
        lo, hi = self.splits["train"]
        train = self.fields[lo:hi].reshape(-1, self.fields.shape[-1])
        self.norm_mean = train.mean(axis=0)
        self.norm_std = _safe_std(train)
        train_f = self.forcing[lo:hi].reshape(-1, self.forcing.shape[-1])
        self.forcing_mean = train_f.mean(axis=0)
        self.forcing_std = _safe_std(train_f)
        self.static_mean = self.static.mean(axis=0)
        self.static_std = _safe_std(self.static)

    def normalize(self, raw: np.ndarray) -> np.ndarray:
        return (raw - self.norm_mean) / self.norm_std

    def denormalize(self, normed: np.ndarray) -> np.ndarray:
        return normed * self.norm_std + self.norm_mean

    @property
    def normalized_fields(self) -> np.ndarray:
        return self.normalize(self.fields)

    @property
    def normalized_forcing(self) -> np.ndarray:
        return (self.forcing - self.forcing_mean) / self.forcing_std

    @property
    def normalized_static(self) -> np.ndarray:
        return (self.static - self.static_mean) / self.static_std

    @property
    def n_steps(self) -> int:
        return len(self.fields)

    @property
    def d_x(self) -> int:
        return self.fields.shape[-1]

    @property
    def forcing_window_width(self) -> int:
        return 3 * self.forcing.shape[-1] + self.static.shape[-1]

    def boundary_mask(self) -> np.ndarray | None:
        if self.boundary_width <= 0:
            return None
        return build_boundary_mask(self.grid, self.boundary_width)

    # -- windows -----------------------------------------------------------------

    def window_forcing(self, t: int) -> np.ndarray:
        """Forcing for predicting step t: steps t-1, t, t+1 plus statics."""
        if t - 1 < 0 or t + 1 >= self.n_steps:
            raise ShapeError(f"forcing window at t={t} is out of range")
        nf = self.normalized_forcing
        parts = [nf[t - 1], nf[t], nf[t + 1], self.normalized_static]
        return np.concatenate(parts, axis=1)

    def eligible_inits(self, split: str, horizon: int, stride: int = 1) -> list[int]:
        """Indices usable as X^0 so that history and horizon stay in-split."""
        lo, hi = self.splits[split]
        first = max(lo + 1, 1)
        last = min(hi, self.n_steps - 1) - horizon - 1
        return list(range(first, last + 1, max(1, stride)))

    def training_window(self, i0: int, horizon: int) -> TrainingWindow:
        nf = self.normalized_fields
        return TrainingWindow(
            x_prev2=nf[i0 - 1],
            x_prev1=nf[i0],
            targets=nf[i0 + 1: i0 + 1 + horizon],
            forcing=np.stack([self.window_forcing(i0 + 1 + t) for t in range(horizon)]),
            boundary_mask=self.boundary_mask(),
        )

    def rollout_input(self, i0: int, horizon: int) -> RolloutInput:
        nf = self.normalized_fields
        mask = self.boundary_mask()
        boundary = nf[i0 + 1: i0 + 1 + horizon] if mask is not None else None
        return RolloutInput(
            x_prev2=nf[i0 - 1],
            x_prev1=nf[i0],
            forcing=np.stack([self.window_forcing(i0 + 1 + t) for t in range(horizon)]),
            boundary=boundary,
            boundary_mask=mask,
        )


def _safe_std(arr: np.ndarray) -> np.ndarray:
    std = arr.std(axis=0)
    return np.where(std > 1e-12, std, 1.0)


# ---------------------------------------------------------------------------
# boundary handling
# ---------------------------------------------------------------------------


def build_boundary_mask(grid: GridSpec, width: int) -> np.ndarray:
    """Frame of exactly ``width`` cells around a rectangular planar grid."""
    if grid.geometry != PLANAR:
        raise ConfigError("boundary masks apply to planar grids")
    if width < 0 or 2 * width >= min(grid.n_rows, grid.n_cols):
        raise ConfigError(f"boundary width {width} does not fit the grid")
    mask = np.zeros((grid.n_rows, grid.n_cols), dtype=bool)
    if width > 0:
        mask[:width] = mask[-width:] = True
        mask[:, :width] = mask[:, -width:] = True
    return mask.ravel()


def apply_boundary(x_hat: np.ndarray, b_t: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Interior from the prediction, frame cells from the boundary series."""
    x_hat = np.asarray(x_hat, dtype=np.float64)
    b_t = np.asarray(b_t, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if x_hat.shape != b_t.shape or mask.shape != (x_hat.shape[0],):
        raise ShapeError("boundary series/mask do not match the state")
    out = x_hat.copy()
    out[mask] = b_t[mask]
    return out


# ---------------------------------------------------------------------------
# file format: flat little-endian binary + JSON sidecar
# ---------------------------------------------------------------------------


def save_dataset(ds: Dataset, path: str) -> None:
    """PATH.bin holds fields, forcing, static concatenated as LE float64."""
    base = _strip_suffix(path)
    arrays = [ds.fields, ds.forcing, ds.static]
    with open(base + ".bin.tmp", "wb") as fh:
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    os.replace(base + ".bin.tmp", base + ".bin")
    header = {
        "schema_version": DATASET_SCHEMA_VERSION,
        "dims": {
            "fields": list(ds.fields.shape),
            "forcing": list(ds.forcing.shape),
            "static": list(ds.static.shape),
        },
        "variables": ds.variables,
        "units": ds.units,
        "forcing_names": ds.forcing_names,
        "static_names": ds.static_names,
        "grid": ds.grid.describe(),
        "splits": {k: list(v) for k, v in ds.splits.items()},
        "boundary_width": ds.boundary_width,
        "normalization": {
            "mean": _maybe_list(ds.norm_mean),
            "std": _maybe_list(ds.norm_std),
            "forcing_mean": _maybe_list(ds.forcing_mean),
            "forcing_std": _maybe_list(ds.forcing_std),
            "static_mean": _maybe_list(ds.static_mean),
            "static_std": _maybe_list(ds.static_std),
        },
    }
    atomic_write_text(base + ".json", json.dumps(header, indent=1))


def load_dataset(path: str) -> Dataset:
    base = _strip_suffix(path)
    try:
        with open(base + ".json", "r", encoding="utf-8") as fh:
            header = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read dataset sidecar {base}.json: {exc}") from exc
    if header.get("schema_version") != DATASET_SCHEMA_VERSION:
        raise ConfigError("unsupported dataset schema version")
    dims = header["dims"]
    raw = np.fromfile(base + ".bin", dtype="<f8")
    sizes = [int(np.prod(dims[k])) for k in ("fields", "forcing", "static")]
    if raw.size != sum(sizes):
        raise ConfigError("dataset binary does not match sidecar dims")
    fields = raw[: sizes[0]].reshape(dims["fields"])
    forcing = raw[sizes[0]: sizes[0] + sizes[1]].reshape(dims["forcing"])
    static = raw[sizes[0] + sizes[1]:].reshape(dims["static"])
    grid = GridSpec(header["grid"]["geometry"], header["grid"]["n_rows"], header["grid"]["n_cols"])
    norm = header["normalization"]
    ds = Dataset(
        fields=fields,
        forcing=forcing,
        static=static,
        variables=header["variables"],
        units=header["units"],
        forcing_names=header["forcing_names"],
        static_names=header["static_names"],
        grid=grid,
        splits={k: (int(a), int(b)) for k, (a, b) in header["splits"].items()},
        boundary_width=int(header.get("boundary_width", 0)),
        norm_mean=_maybe_array(norm["mean"]),
        norm_std=_maybe_array(norm["std"]),
        forcing_mean=_maybe_array(norm["forcing_mean"]),
        forcing_std=_maybe_array(norm["forcing_std"]),
        static_mean=_maybe_array(norm["static_mean"]),
        static_std=_maybe_array(norm["static_std"]),
    )
    return ds


def _strip_suffix(path: str) -> str:
    for suffix in (".bin", ".json"):
        if path.endswith(suffix):
            return path[: -len(suffix)]
    return path


def _maybe_list(arr):
    return None if arr is None else np.asarray(arr).tolist()


def _maybe_array(lst):
    return None if lst is None else np.asarray(lst, dtype=np.float64)
