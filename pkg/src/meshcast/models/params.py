"""Parameter trees for the four model variants.

Every learnable tensor lives in one MLP; MLPs are keyed by role paths like
``embed/grid``, ``sweep0/up/2/edge`` or ``pred/head``.  GNN layers pair an
``.../edge`` and ``.../node`` MLP under a role with a registered layer
kind.  The flat ``tensors()`` view feeds the optimizer and checkpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError
from ..layers import INTERACTION, PROPAGATION, GnnLayerParams
from ..numcore import MlpParams, Tensor, mlp_init
from .config import HIER_DET, HIER_LATENT, MS_DET, MS_LATENT, ModelConfig
from .topology import GraphTopology


@dataclass
class ModelParams:
    config: ModelConfig
    mlps: dict[str, MlpParams]
    layer_kinds: dict[str, str]

    def mlp(self, path: str) -> MlpParams:
        return self.mlps[path]

    def layer(self, role: str) -> GnnLayerParams:
        return GnnLayerParams(self.mlps[role + "/edge"], self.mlps[role + "/node"], self.layer_kinds[role])

    def tensors(self) -> dict[str, Tensor]:
        flat: dict[str, Tensor] = {}
        for path in sorted(self.mlps):
            for name, t in self.mlps[path].named_tensors(path + "."):
                flat[name] = t
        return flat

    def with_tensors(self, flat: dict[str, Tensor]) -> "ModelParams":
        mlps: dict[str, MlpParams] = {}
        for path, p in self.mlps.items():
            mlps[path] = MlpParams(
                w_in=flat[path + ".w_in"],
                b_in=flat[path + ".b_in"],
                w_out=flat[path + ".w_out"],
                b_out=flat[path + ".b_out"],
                apply_output_norm=p.apply_output_norm,
                norm_scale=flat.get(path + ".norm_scale"),
                norm_shift=flat.get(path + ".norm_shift"),
            )
        return ModelParams(self.config, mlps, dict(self.layer_kinds))

    def named_grads(self, leaf_grads: dict[Tensor, np.ndarray]) -> dict[str, np.ndarray]:
        """Remap backward()'s tensor-keyed gradients onto parameter names."""
        return {name: leaf_grads[t] for name, t in self.tensors().items() if t in leaf_grads}

    def copy(self) -> "ModelParams":
        flat = {k: Tensor(t.data.copy(), requires_grad=t.requires_grad) for k, t in self.tensors().items()}
        return self.with_tensors(flat)

    def zeroed(self) -> "ModelParams":
        """All-zero twin (norm scales kept at 1), for persistence-identity tests."""
        flat = {}
        for k, t in self.tensors().items():
            if k.endswith(".norm_scale"):
                flat[k] = Tensor(np.ones_like(t.data), requires_grad=t.requires_grad)
            else:
                flat[k] = Tensor(np.zeros_like(t.data), requires_grad=t.requires_grad)
        return self.with_tensors(flat)


def _roles(config: ModelConfig, topo: GraphTopology):
    """(embed_paths, plain_mlps, gnn_roles) for the variant.

    embed_paths: path -> input width (output d_z, normed)
    plain_mlps:  path -> (d_in, d_out, normed)
    gnn_roles:   role -> kind
    """
    dz = config.d_z
    d_grid_in = 2 * config.d_x + config.d_forcing
    node_w = topo.node_static[topo.mesh_set(1)].shape[1]
    L = topo.top_level

    embeds: dict[str, int] = {"embed/grid": d_grid_in}
    for lev in topo.levels:
        embeds[f"embed/node/{lev}"] = node_w
    for name, feats in topo.edge_static.items():
        embeds[f"embed/edge/{name}"] = feats.shape[1]

    plain: dict[str, tuple[int, int, bool]] = {}
    gnn: dict[str, str] = {}

    def head(path):
        plain[path] = (dz, config.head_width, False)

    if config.variant == MS_DET:
        gnn["enc/g2m"] = INTERACTION
        for i in range(config.processor_steps):
            gnn[f"proc/{i}"] = INTERACTION
        gnn["dec/m2g"] = INTERACTION
        plain["grid_res"] = (dz, dz, True)
        head("head")

    elif config.variant == HIER_DET:
        gnn["enc/g2m"] = PROPAGATION
        for l in range(1, L):
            gnn[f"enc/up/{l}"] = PROPAGATION
        for s in range(config.sweeps):
            gnn[f"sweep{s}/top_intra"] = INTERACTION
            for l in range(L - 1, 0, -1):
                gnn[f"sweep{s}/down/{l}"] = INTERACTION
                gnn[f"sweep{s}/down_intra/{l}"] = INTERACTION
            gnn[f"sweep{s}/bottom_intra"] = INTERACTION
            for l in range(2, L + 1):
                gnn[f"sweep{s}/up/{l}"] = PROPAGATION
                gnn[f"sweep{s}/up_intra/{l}"] = INTERACTION
        for l in range(L - 1, 0, -1):
            gnn[f"dec/down/{l}"] = INTERACTION
        gnn["dec/m2g"] = PROPAGATION
        plain["grid_res"] = (dz, dz, True)
        head("head")

    elif config.variant == HIER_LATENT:
        if L < 2:
            raise ConfigError("hierarchical latent variant needs at least 2 mesh levels")
        embeds["embed/grid_q"] = 3 * config.d_x + config.d_forcing
        # latent map: one upward pass, all propagation
        gnn["lm/g2m"] = PROPAGATION
        for l in range(1, L + 1):
            gnn[f"lm/intra/{l}"] = PROPAGATION
        for l in range(2, L + 1):
            gnn[f"lm/up/{l}"] = PROPAGATION
        plain["lm/head"] = (dz, dz, False)
        # predictor: interaction upward (latent injected at the top), propagation downward
        for s in range(config.predictor_sweeps):
            pre = f"pred/s{s}"
            for l in range(1, L):
                gnn[f"{pre}/up_intra/{l}"] = INTERACTION
            for l in range(2, L + 1):
                gnn[f"{pre}/up/{l}"] = INTERACTION
            gnn[f"{pre}/top_intra"] = PROPAGATION
            for l in range(L - 1, 0, -1):
                gnn[f"{pre}/down/{l}"] = PROPAGATION
                gnn[f"{pre}/down_intra/{l}"] = PROPAGATION
        gnn["pred/g2m"] = PROPAGATION
        gnn["pred/m2g"] = PROPAGATION
        plain["pred/grid_res"] = (dz, dz, True)
        head("pred/head")
        # posterior: latent-map shape, conditioned also on the target state
        gnn["q/g2m"] = PROPAGATION
        for l in range(1, L + 1):
            gnn[f"q/intra/{l}"] = PROPAGATION
        for l in range(2, L + 1):
            gnn[f"q/up/{l}"] = PROPAGATION
        plain["q/head"] = (dz, 2 * dz, False)

    elif config.variant == MS_LATENT:
        embeds["embed/grid_q"] = 3 * config.d_x + config.d_forcing
        gnn["lm/g2m"] = PROPAGATION
        for i in range(config.latent_steps):
            gnn[f"lm/proc/{i}"] = PROPAGATION
        plain["lm/head"] = (dz, dz, False)
        gnn["pred/g2m"] = INTERACTION  # latent enters here as the receiver state
        for i in range(config.predictor_steps):
            gnn[f"pred/proc/{i}"] = INTERACTION
        gnn["pred/m2g"] = INTERACTION
        plain["pred/grid_res"] = (dz, dz, True)
        head("pred/head")
        gnn["q/g2m"] = PROPAGATION
        for i in range(config.posterior_steps):
            gnn[f"q/proc/{i}"] = PROPAGATION
        plain["q/head"] = (dz, 2 * dz, False)

    else:
        raise ConfigError(f"unknown variant '{config.variant}'")

    return embeds, plain, gnn


def init_model_params(rng: np.random.Generator, config: ModelConfig, topo: GraphTopology) -> ModelParams:
    """Fresh parameters: random hidden layers, zero output layers.

    Zero output layers make the untrained model the persistence map.
    """
    dz = config.d_z
    embeds, plain, gnn = _roles(config, topo)
    mlps: dict[str, MlpParams] = {}
    for path in sorted(embeds):
        mlps[path] = mlp_init(rng, embeds[path], dz, dz, output_norm=True)
    for path in sorted(plain):
        d_in, d_out, normed = plain[path]
        mlps[path] = mlp_init(rng, d_in, dz, d_out, output_norm=normed)
    for role in sorted(gnn):
        mlps[role + "/edge"] = mlp_init(rng, 3 * dz, dz, dz, output_norm=True)
        mlps[role + "/node"] = mlp_init(rng, 2 * dz, dz, dz, output_norm=True)
    return ModelParams(config, mlps, dict(gnn))


def randomize_outputs(params: ModelParams, rng: np.random.Generator, scale: float = 0.1) -> ModelParams:
    """Give every zero output layer small random weights (test models)."""
    flat = {}
    for k, t in params.tensors().items():
        if k.endswith((".w_out", ".b_out")):
            flat[k] = Tensor(rng.normal(scale=scale, size=t.shape), requires_grad=t.requires_grad)
        else:
            flat[k] = Tensor(t.data.copy(), requires_grad=t.requires_grad)
    return params.with_tensors(flat)
