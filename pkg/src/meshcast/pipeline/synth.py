"""Synthetic toy-weather generator.

Two smooth scalar fields are advected by a fixed rotational flow with
diffusion and a small state-dependent stochastic term, while a diurnal
cycle pumps energy in and out modulated by a static orography-like field.
Forcing channels are the sine/cosine time-of-day encodings; the orography
(plus, for limited areas, the boundary indicator) enters as static fields.
Everything is reproducible per seed.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..meshgraph import SPHERICAL, GridSpec
from ..numcore import stream
from .data import Dataset, build_boundary_mask

VARIABLES = ["theta", "chi"]
UNITS = ["K", "g/kg"]
FORCING_NAMES = ["sin_tod", "cos_tod"]
STEPS_PER_DAY = 8


def _smooth_field(rng: np.random.Generator, rows: int, cols: int, modes: int = 4) -> np.ndarray:
    r = np.arange(rows)[:, None] / rows
    c = np.arange(cols)[None, :] / cols
    out = np.zeros((rows, cols))
    for _ in range(modes):
        fr, fc = rng.integers(1, 4, size=2)
        amp = rng.normal(scale=1.0 / (fr + fc))
        phase = rng.uniform(0, 2 * np.pi)
        out += amp * np.sin(2 * np.pi * (fr * r + fc * c) + phase)
    return out


def _bilinear(field: np.ndarray, r: np.ndarray, c: np.ndarray, periodic_c: bool) -> np.ndarray:
    rows, cols = field.shape
    r = np.clip(r, 0.0, rows - 1.0)
    if periodic_c:
        c = np.mod(c, cols)
    else:
        c = np.clip(c, 0.0, cols - 1.0)
    r0 = np.floor(r).astype(int)
    c0 = np.floor(c).astype(int)
    r1 = np.minimum(r0 + 1, rows - 1)
    c1 = (c0 + 1) % cols if periodic_c else np.minimum(c0 + 1, cols - 1)
    wr = r - r0
    wc = c - c0
    return (
        field[r0, c0] * (1 - wr) * (1 - wc)
        + field[r1, c0] * wr * (1 - wc)
        + field[r0, c1] * (1 - wr) * wc
        + field[r1, c1] * wr * wc
    )


def _laplacian(field: np.ndarray, periodic_c: bool) -> np.ndarray:
    up = np.roll(field, 1, axis=0)
    down = np.roll(field, -1, axis=0)
    up[0] = field[0]
    down[-1] = field[-1]
    if periodic_c:
        left = np.roll(field, 1, axis=1)
        right = np.roll(field, -1, axis=1)
    else:
        left = np.roll(field, 1, axis=1)
        right = np.roll(field, -1, axis=1)
        left[:, 0] = field[:, 0]
        right[:, -1] = field[:, -1]
    return up + down + left + right - 4 * field


def synth_data(
    grid: GridSpec,
    t_total: int,
    seed: int,
    *,
    advection: float = 0.6,
    diffusion: float = 0.08,
    noise: float = 0.01,
    boundary_width: int = 0,
    split_fractions: tuple[float, float, float] = (0.7, 0.15, 0.15),
) -> Dataset:
    """Simulate ``t_total`` steps of the toy system on a grid.

    Splits are contiguous in time (train, then val, then test).
    """
    if grid.n_rows < 8 or grid.n_cols < 8:
        raise ConfigError("grid must be at least 8x8")
    if t_total < 4:
        raise ConfigError("need at least 4 time steps")
    rows, cols = grid.n_rows, grid.n_cols
    periodic = grid.geometry == SPHERICAL
    rng = stream(seed, "synth")

    orog = _smooth_field(rng, rows, cols)
    theta = 10.0 + 3.0 * _smooth_field(rng, rows, cols)
    chi = 5.0 + 2.0 * _smooth_field(rng, rows, cols)

    # fixed flow field: solid-body zonal jet with meridional shear
    # (spherical) or rotation about the domain center (planar)
    rr, cc = np.meshgrid(np.arange(rows, dtype=float), np.arange(cols, dtype=float), indexing="ij")
    if periodic:
        v_r = np.zeros((rows, cols))
        v_c = advection * (1.0 + np.sin(np.pi * rr / max(rows - 1, 1)))
    else:
        r0, c0 = (rows - 1) / 2.0, (cols - 1) / 2.0
        omega = advection / max(rows, cols)
        v_r = -omega * (cc - c0)
        v_c = omega * (rr - r0)

    fields = np.empty((t_total, rows * cols, 2))
    forcing = np.empty((t_total, rows * cols, len(FORCING_NAMES)))
    dep_r = rr - v_r
    dep_c = cc - v_c
    for t in range(t_total):
        tod = 2.0 * np.pi * t / STEPS_PER_DAY
        fields[t, :, 0] = theta.ravel()
        fields[t, :, 1] = chi.ravel()
        forcing[t, :, 0] = np.sin(tod)
        forcing[t, :, 1] = np.cos(tod)

        new = []
        for var, heat in ((theta, 0.3), (chi, 0.1)):
            adv = _bilinear(var, dep_r, dep_c, periodic) if advection != 0.0 else var
            nxt = adv + diffusion * _laplacian(adv, periodic)
            nxt = nxt + heat * np.sin(tod) * (1.0 + 0.3 * orog)
            if noise > 0.0:
                eps = rng.standard_normal(var.shape)
                nxt = nxt + noise * (0.5 + 0.5 * np.abs(np.tanh(nxt))) * eps
            new.append(nxt)
        theta, chi = new

    static_names = ["orography"]
    static = [orog.ravel()]
    if boundary_width > 0:
        mask = build_boundary_mask(grid, boundary_width)
        static_names.append("boundary")
        static.append(mask.astype(np.float64))

    f_train, f_val, _ = split_fractions
    i_train = max(4, int(round(t_total * f_train)))
    i_val = min(t_total, i_train + max(0, int(round(t_total * f_val))))
    splits = {"train": (0, i_train), "val": (i_train, i_val), "test": (i_val, t_total)}

    ds = Dataset(
        fields=fields,
        forcing=forcing,
        static=np.stack(static, axis=1),
        variables=list(VARIABLES),
        units=list(UNITS),
        forcing_names=list(FORCING_NAMES),
        static_names=static_names,
        grid=grid,
        splits=splits,
        boundary_width=boundary_width,
    )
    ds.fit_normalization()
    return ds
