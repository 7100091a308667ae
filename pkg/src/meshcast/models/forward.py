"""Single-step forward passes of all model variants.

Each pass re-initializes graph representations from embedded static
features, threads node/edge state through the prescribed GNN sequence and
finishes with a residual grid MLP, a mesh-to-grid map, and an output head
whose prediction rides a skip connection off the previous state.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, ShapeError
from ..layers import gnn_step
from ..numcore import DiagGaussian, Tensor, concat, mlp_forward
from .config import HIER_DET, HIER_LATENT, MS_DET, MS_LATENT
from .params import ModelParams
from .topology import GRID, GraphTopology


def _t(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def grid_input(x_prev2, x_prev1, f_t, x_target=None) -> Tensor:
    parts = [_t(x_prev2), _t(x_prev1)]
    if x_target is not None:
        parts.append(_t(x_target))
    parts.append(_t(f_t))
    return concat(parts, axis=1)


def _static_node_reps(params: ModelParams, topo: GraphTopology) -> dict[str, Tensor]:
    return {
        topo.mesh_set(l): mlp_forward(params.mlp(f"embed/node/{l}"), Tensor(topo.node_static[topo.mesh_set(l)]))
        for l in topo.levels
    }


def _static_edge_reps(params: ModelParams, topo: GraphTopology, names) -> dict[str, Tensor]:
    return {
        name: mlp_forward(params.mlp(f"embed/edge/{name}"), Tensor(topo.edge_static[name]))
        for name in names
    }


def _apply(params: ModelParams, topo: GraphTopology, role: str, set_name: str,
           h_s: Tensor, e: Tensor, h_r: Tensor) -> tuple[Tensor, Tensor]:
    return gnn_step(topo.edge_index[set_name], h_s, e, h_r, params.layer(role))


def _finish_grid(params: ModelParams, topo: GraphTopology, prefix: str,
                 h_grid: Tensor, h_mesh1: Tensor, e_m2g: Tensor, x_prev1) -> tuple[Tensor, Tensor | None]:
    res = prefix + "grid_res"
    head = prefix + "head"
    m2g_role = prefix + "m2g" if prefix else "dec/m2g"
    h_grid = h_grid + mlp_forward(params.mlp(res), h_grid)
    h_grid, _ = _apply(params, topo, m2g_role, "m2g", h_mesh1, e_m2g, h_grid)
    out = mlp_forward(params.mlp(head), h_grid)
    d_x = params.config.d_x
    if params.config.learn_sigma:
        pred = _t(x_prev1) + out[:, :d_x]
        sigma = out[:, d_x:].softplus()
        return pred, sigma
    return _t(x_prev1) + out, None


def _check_state(x, topo: GraphTopology, d_x: int, what: str) -> None:
    if tuple(np.shape(x.data if isinstance(x, Tensor) else x)) != (topo.n_grid, d_x):
        raise ShapeError(f"{what} must have shape ({topo.n_grid}, {d_x})")


# ---------------------------------------------------------------------------
# deterministic variants
# ---------------------------------------------------------------------------


def step_multiscale(params: ModelParams, topo: GraphTopology, x_prev2, x_prev1, f_t):
    """Encode -> fixed number of mesh processing steps -> decode."""
    cfg = params.config
    if cfg.variant != MS_DET:
        raise ConfigError("step_multiscale requires the multiscale deterministic variant")
    _check_state(_t(x_prev1), topo, cfg.d_x, "previous state")
    h_grid = mlp_forward(params.mlp("embed/grid"), grid_input(x_prev2, x_prev1, f_t))
    h_mesh = _static_node_reps(params, topo)["mesh:1"]
    e = _static_edge_reps(params, topo, ["m2m", "g2m", "m2g"])
    h_mesh, _ = _apply(params, topo, "enc/g2m", "g2m", h_grid, e["g2m"], h_mesh)
    e_m2m = e["m2m"]
    for i in range(cfg.processor_steps):
        h_mesh, e_m2m = _apply(params, topo, f"proc/{i}", "m2m", h_mesh, e_m2m, h_mesh)
    return _finish_grid(params, topo, "", h_grid, h_mesh, e["m2g"], x_prev1)


def step_graphfm(params: ModelParams, topo: GraphTopology, x_prev2, x_prev1, f_t):
    """Grid -> up through the hierarchy -> down/up sweeps -> down -> grid."""
    cfg = params.config
    if cfg.variant != HIER_DET:
        raise ConfigError("step_graphfm requires the hierarchical deterministic variant")
    _check_state(_t(x_prev1), topo, cfg.d_x, "previous state")
    L = topo.top_level
    h_grid = mlp_forward(params.mlp("embed/grid"), grid_input(x_prev2, x_prev1, f_t))
    H = _static_node_reps(params, topo)
    E = _static_edge_reps(params, topo, list(topo.edge_index))

    ms = topo.mesh_set
    H[ms(1)], _ = _apply(params, topo, "enc/g2m", "g2m", h_grid, E["g2m"], H[ms(1)])
    for l in range(1, L):
        up = f"up:{l}:{l + 1}"
        H[ms(l + 1)], E[up] = _apply(params, topo, f"enc/up/{l}", up, H[ms(l)], E[up], H[ms(l + 1)])

    for s in range(cfg.sweeps):
        intra = f"m2m:{L}"
        H[ms(L)], E[intra] = _apply(params, topo, f"sweep{s}/top_intra", intra, H[ms(L)], E[intra], H[ms(L)])
        for l in range(L - 1, 0, -1):
            down = f"down:{l + 1}:{l}"
            H[ms(l)], E[down] = _apply(params, topo, f"sweep{s}/down/{l}", down, H[ms(l + 1)], E[down], H[ms(l)])
            intra = f"m2m:{l}"
            H[ms(l)], E[intra] = _apply(params, topo, f"sweep{s}/down_intra/{l}", intra, H[ms(l)], E[intra], H[ms(l)])
        intra = "m2m:1"
        H[ms(1)], E[intra] = _apply(params, topo, f"sweep{s}/bottom_intra", intra, H[ms(1)], E[intra], H[ms(1)])
        for l in range(2, L + 1):
            up = f"up:{l - 1}:{l}"
            H[ms(l)], E[up] = _apply(params, topo, f"sweep{s}/up/{l}", up, H[ms(l - 1)], E[up], H[ms(l)])
            intra = f"m2m:{l}"
            H[ms(l)], E[intra] = _apply(params, topo, f"sweep{s}/up_intra/{l}", intra, H[ms(l)], E[intra], H[ms(l)])

    for l in range(L - 1, 0, -1):
        down = f"down:{l + 1}:{l}"
        H[ms(l)], _ = _apply(params, topo, f"dec/down/{l}", down, H[ms(l + 1)], E[down], H[ms(l)])
    return _finish_grid(params, topo, "", h_grid, H[ms(1)], E["m2g"], x_prev1)


def single_step(params: ModelParams, topo: GraphTopology, x_prev2, x_prev1, f_t):
    if params.config.variant == MS_DET:
        return step_multiscale(params, topo, x_prev2, x_prev1, f_t)
    if params.config.variant == HIER_DET:
        return step_graphfm(params, topo, x_prev2, x_prev1, f_t)
    raise ConfigError(f"'{params.config.variant}' has no deterministic single step")


# ---------------------------------------------------------------------------
# latent variants
# ---------------------------------------------------------------------------


def _upward_pass(params: ModelParams, topo: GraphTopology, prefix: str, h_grid: Tensor,
                 E: dict[str, Tensor]) -> Tensor:
    """Shared shape of latent map / posterior: grid -> top level, no edge updates."""
    cfg = params.config
    H = _static_node_reps(params, topo)
    ms = topo.mesh_set
    if cfg.variant == MS_LATENT:
        H[ms(1)], _ = _apply(params, topo, f"{prefix}/g2m", "g2m", h_grid, E["g2m"], H[ms(1)])
        steps = cfg.latent_steps if prefix == "lm" else cfg.posterior_steps
        for i in range(steps):
            H[ms(1)], _ = _apply(params, topo, f"{prefix}/proc/{i}", "m2m", H[ms(1)], E["m2m"], H[ms(1)])
        return H[ms(1)]
    L = topo.top_level
    H[ms(1)], _ = _apply(params, topo, f"{prefix}/g2m", "g2m", h_grid, E["g2m"], H[ms(1)])
    H[ms(1)], _ = _apply(params, topo, f"{prefix}/intra/1", "m2m:1", H[ms(1)], E["m2m:1"], H[ms(1)])
    for l in range(2, L + 1):
        up = f"up:{l - 1}:{l}"
        H[ms(l)], _ = _apply(params, topo, f"{prefix}/up/{l}", up, H[ms(l - 1)], E[up], H[ms(l)])
        intra = f"m2m:{l}"
        H[ms(l)], _ = _apply(params, topo, f"{prefix}/intra/{l}", intra, H[ms(l)], E[intra], H[ms(l)])
    return H[ms(L)]


def latent_width(params: ModelParams, topo: GraphTopology) -> int:
    """Latent rows: top-level nodes (hierarchical) or all mesh nodes (ms)."""
    if params.config.variant == MS_LATENT:
        return topo.node_counts[topo.mesh_set(1)]
    return topo.n_top


def latent_map_mean(params: ModelParams, topo: GraphTopology, x_prev2, x_prev1, f_t) -> DiagGaussian:
    """Conditional prior over the latent state: learned mean, unit variance."""
    cfg = params.config
    if not cfg.is_latent:
        raise ConfigError("latent map requires a latent variant")
    n = latent_width(params, topo)
    if cfg.static_prior:
        return DiagGaussian(Tensor(np.zeros((n, cfg.d_z))), Tensor(np.ones((n, cfg.d_z))))
    h_grid = mlp_forward(params.mlp("embed/grid"), grid_input(x_prev2, x_prev1, f_t))
    E = _static_edge_reps(params, topo, list(topo.edge_index))
    h_top = _upward_pass(params, topo, "lm", h_grid, E)
    mean = mlp_forward(params.mlp("lm/head"), h_top)
    return DiagGaussian(mean, Tensor(np.ones((n, cfg.d_z))))


def variational_params(params: ModelParams, topo: GraphTopology, x_prev2, x_prev1, x_t, f_t) -> DiagGaussian:
    """Gaussian posterior over the latent state, conditioned on the target too."""
    cfg = params.config
    if not cfg.is_latent:
        raise ConfigError("variational approximation requires a latent variant")
    h_grid = mlp_forward(params.mlp("embed/grid_q"), grid_input(x_prev2, x_prev1, f_t, x_target=x_t))
    E = _static_edge_reps(params, topo, list(topo.edge_index))
    h_top = _upward_pass(params, topo, "q", h_grid, E)
    out = mlp_forward(params.mlp("q/head"), h_top)
    dz = cfg.d_z
    return DiagGaussian(out[:, :dz], out[:, dz:].softplus())


def predictor(params: ModelParams, topo: GraphTopology, z, x_prev2, x_prev1, f_t):
    """Deterministic decoder: latent state + history + forcing -> next state."""
    cfg = params.config
    if not cfg.is_latent:
        raise ConfigError("predictor requires a latent variant")
    z = _t(z)
    if z.shape != (latent_width(params, topo), cfg.d_z):
        raise ShapeError(f"latent state must have shape ({latent_width(params, topo)}, {cfg.d_z})")
    h_grid = mlp_forward(params.mlp("embed/grid"), grid_input(x_prev2, x_prev1, f_t))
    E = _static_edge_reps(params, topo, list(topo.edge_index))
    ms = topo.mesh_set

    if cfg.variant == MS_LATENT:
        # latent state enters immediately: it is the receiver of the g2m map
        h_mesh, _ = _apply(params, topo, "pred/g2m", "g2m", h_grid, E["g2m"], z)
        e_m2m = E["m2m"]
        for i in range(cfg.predictor_steps):
            h_mesh, e_m2m = _apply(params, topo, f"pred/proc/{i}", "m2m", h_mesh, e_m2m, h_mesh)
        return _finish_grid(params, topo, "pred/", h_grid, h_mesh, E["m2g"], x_prev1)

    L = topo.top_level
    H = _static_node_reps(params, topo)
    H[ms(1)], _ = _apply(params, topo, "pred/g2m", "g2m", h_grid, E["g2m"], H[ms(1)])
    for s in range(cfg.predictor_sweeps):
        pre = f"pred/s{s}"
        for l in range(1, L):
            intra = f"m2m:{l}"
            # intra-level state updated here is reused in the downward pass
            H[ms(l)], E[intra] = _apply(params, topo, f"{pre}/up_intra/{l}", intra, H[ms(l)], E[intra], H[ms(l)])
            up = f"up:{l}:{l + 1}"
            receiver = z if l == L - 1 else H[ms(l + 1)]
            H[ms(l + 1)], _ = _apply(params, topo, f"{pre}/up/{l + 1}", up, H[ms(l)], E[up], receiver)
        intra = f"m2m:{L}"
        H[ms(L)], _ = _apply(params, topo, f"{pre}/top_intra", intra, H[ms(L)], E[intra], H[ms(L)])
        for l in range(L - 1, 0, -1):
            down = f"down:{l + 1}:{l}"
            H[ms(l)], _ = _apply(params, topo, f"{pre}/down/{l}", down, H[ms(l + 1)], E[down], H[ms(l)])
            intra = f"m2m:{l}"
            H[ms(l)], _ = _apply(params, topo, f"{pre}/down_intra/{l}", intra, H[ms(l)], E[intra], H[ms(l)])
    return _finish_grid(params, topo, "pred/", h_grid, H[ms(1)], E["m2g"], x_prev1)
