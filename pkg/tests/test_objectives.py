"""Objective tests: loop oracles, the sigma-weighting equivalence, FD gradients."""

import numpy as np
import pytest
from gradcheck import directional_fd, random_direction, rel_err

from meshcast.errors import ConfigError, ShapeError
from meshcast.meshgraph import HIERARCHICAL, assemble_model_graph, build_icosphere_levels, global_grid
from meshcast.models import (
    HIER_LATENT,
    ModelConfig,
    build_topology,
    init_model_params,
    latent_width,
    randomize_outputs,
)
from meshcast.numcore import AdamWState, Tensor, adamw_step, backward
from meshcast.objectives import (
    LossWeights,
    StageConfig,
    TrainingWindow,
    combined_loss,
    crps_train_loss,
    draw_training_noise,
    elbo_step_loss,
    estimate_inv_var_weights,
    multi_step_loss,
    nll_loss,
    weighted_mse,
)

D_X, D_F, D_Z = 2, 4, 6


def mk_weights(n, dx=D_X, lam=None, omega=None, **kw):
    return LossWeights(
        area_w=np.ones(n),
        var_inv_var=np.ones(dx) if lam is None else lam,
        level_w=np.ones(dx) if omega is None else omega,
        **kw,
    )


@pytest.fixture(scope="module")
def topo():
    levels = build_icosphere_levels(1)
    # small grid, 2-level hierarchy: everything stays under 50 mesh nodes
    g = assemble_model_graph(global_grid(8, 16), levels, HIERARCHICAL)
    return build_topology(g)


@pytest.fixture(scope="module")
def lparams(topo):
    cfg = ModelConfig(variant=HIER_LATENT, d_x=D_X, d_forcing=D_F, d_z=D_Z)
    params = init_model_params(np.random.default_rng(0), cfg, topo)
    return randomize_outputs(params, np.random.default_rng(1), scale=0.05)


def mk_window(topo, T=2, seed=0):
    rng = np.random.default_rng(seed)
    n = topo.n_grid
    return TrainingWindow(
        x_prev2=rng.normal(size=(n, D_X)),
        x_prev1=rng.normal(size=(n, D_X)),
        targets=rng.normal(size=(T, n, D_X)),
        forcing=rng.normal(size=(T, n, D_F)),
    )


# ---------------------------------------------------------------------------
# weighted MSE
# ---------------------------------------------------------------------------


def test_wmse_zero_when_equal():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(5, D_X))
    assert weighted_mse(Tensor(x), Tensor(x.copy()), mk_weights(5)).item() == 0.0


def test_wmse_unit_case():
    # single node, single variable, unit weights, error e: loss = e^2 / (T*N)
    e = 1.7
    w = LossWeights(np.ones(1), np.ones(1), np.ones(1))
    got = weighted_mse(Tensor([[e]]), Tensor([[0.0]]), w).item()
    assert got == pytest.approx(e * e)


def test_wmse_matches_triple_loop_oracle():
    rng = np.random.default_rng(1)
    T, n, dx = 3, 7, D_X
    preds = [rng.normal(size=(n, dx)) for _ in range(T)]
    targets = [rng.normal(size=(n, dx)) for _ in range(T)]
    area = rng.uniform(0.5, 1.5, n)
    lam = rng.uniform(0.5, 2.0, dx)
    omega = rng.uniform(0.5, 2.0, dx)
    w = LossWeights(area, lam, omega)
    got = weighted_mse([Tensor(p) for p in preds], [Tensor(t) for t in targets], w).item()

    acc = 0.0
    for t in range(T):
        for a in range(n):
            for j in range(dx):
                acc += area[a] * omega[j] * lam[j] * (preds[t][a, j] - targets[t][a, j]) ** 2
    assert abs(got - acc / (T * n)) < 1e-12


def test_wmse_invariant_under_node_permutation():
    rng = np.random.default_rng(2)
    n = 9
    pred, target = rng.normal(size=(n, D_X)), rng.normal(size=(n, D_X))
    area = rng.uniform(0.5, 1.5, n)
    w = mk_weights(n)
    w.area_w = area
    perm = rng.permutation(n)
    w2 = mk_weights(n)
    w2.area_w = area[perm]
    a = weighted_mse(Tensor(pred), Tensor(target), w).item()
    b = weighted_mse(Tensor(pred[perm]), Tensor(target[perm]), w2).item()
    assert abs(a - b) < 1e-12


# ---------------------------------------------------------------------------
# NLL and the sigma equivalence
# ---------------------------------------------------------------------------


def test_nll_at_mode_with_unit_sigma():
    x = np.zeros((1, 1))
    got = nll_loss(Tensor(x), np.ones(1), Tensor(x.copy()), np.ones(1)).item()
    assert got == pytest.approx(0.5 * np.log(2 * np.pi))


def test_nll_grows_logarithmically_in_sigma():
    x = np.zeros((1, 1))
    y = np.ones((1, 1))
    vals = [
        nll_loss(Tensor(x), np.full(1, s), Tensor(y), np.ones(1)).item()
        for s in (1e2, 1e3, 1e4)
    ]
    assert vals[1] > vals[0] and vals[2] > vals[1]
    assert vals[2] - vals[1] == pytest.approx(np.log(10.0), rel=1e-4)


def test_nll_minus_wmse_constant_with_equivalence_sigma():
    rng = np.random.default_rng(3)
    n, dx = 11, D_X
    lam = rng.uniform(0.5, 3.0, dx)
    omega = rng.uniform(0.5, 2.0, dx)
    w = mk_weights(n, lam=lam, omega=omega)
    sigma = w.fixed_sigma()
    target = rng.normal(size=(n, dx))

    def diff_at(pred):
        nll = nll_loss(Tensor(pred), sigma, Tensor(target), w.area_w).item()
        mse = weighted_mse(Tensor(pred), Tensor(target), w).item()
        return nll - mse

    d1 = diff_at(rng.normal(size=(n, dx)))
    d2 = diff_at(rng.normal(size=(n, dx)))
    assert abs(d1 - d2) < 1e-9


def test_nll_rejects_nonpositive_sigma():
    from meshcast.errors import NumericsError

    with pytest.raises(NumericsError):
        nll_loss(Tensor([[0.0]]), np.zeros(1), Tensor([[0.0]]), np.ones(1))


# ---------------------------------------------------------------------------
# CRPS training loss
# ---------------------------------------------------------------------------


def test_crps_zero_when_members_hit_target():
    y = np.full((3, D_X), 0.7)
    assert crps_train_loss(Tensor(y), Tensor(y.copy()), Tensor(y.copy()), np.ones(3)).item() == 0.0


def test_crps_bracketing_members_cancel():
    # a=0, b=2, y=1: 0.5 * (1 + 1 - 2) = 0
    got = crps_train_loss(
        Tensor([[0.0]]), Tensor([[2.0]]), Tensor([[1.0]]), np.ones(1)
    ).item()
    assert got == 0.0


def test_crps_collapsed_members_give_mae():
    got = crps_train_loss(Tensor([[0.0]]), Tensor([[0.0]]), Tensor([[1.0]]), np.ones(1)).item()
    assert got == 1.0


def test_crps_symmetric_and_nonnegative():
    rng = np.random.default_rng(4)
    a, b, y = (rng.normal(size=(6, D_X)) for _ in range(3))
    w = rng.uniform(0.2, 2.0, 6)
    ab = crps_train_loss(Tensor(a), Tensor(b), Tensor(y), w).item()
    ba = crps_train_loss(Tensor(b), Tensor(a), Tensor(y), w).item()
    assert ab == pytest.approx(ba, abs=1e-14)
    assert ab >= 0


# ---------------------------------------------------------------------------
# variational objectives
# ---------------------------------------------------------------------------


def _noise_for(params, topo, T=1, seed=0):
    return draw_training_noise(params, topo, seed, 0, T)


def test_elbo_autoencoder_mode_is_pure_reconstruction(lparams, topo):
    win = mk_window(topo, T=1)
    w0 = mk_weights(topo.n_grid, lambda_kl=0.0)
    w1 = mk_weights(topo.n_grid, lambda_kl=1.0)
    noise = _noise_for(lparams, topo)["elbo-q"][0]
    l0 = elbo_step_loss(lparams, topo, win.x_prev2, win.x_prev1, win.targets[0], win.forcing[0], w0, noise).item()
    l1 = elbo_step_loss(lparams, topo, win.x_prev2, win.x_prev1, win.targets[0], win.forcing[0], w1, noise).item()
    assert l1 > l0  # the KL term is strictly positive here


def test_elbo_kl_term_vanishes_when_q_matches_prior(topo):
    cfg = ModelConfig(variant=HIER_LATENT, d_x=D_X, d_forcing=D_F, d_z=D_Z)
    params = init_model_params(np.random.default_rng(0), cfg, topo).zeroed()
    # zero params: q mean 0, q std softplus(0)=ln2; shift the head bias so std == 1
    inv_softplus_one = float(np.log(np.e - 1.0))
    params.mlp("q/head").b_out.data[D_Z:] = inv_softplus_one
    win = mk_window(topo, T=1)
    noise = _noise_for(params, topo)["elbo-q"][0]
    w0 = mk_weights(topo.n_grid, lambda_kl=0.0)
    w1 = mk_weights(topo.n_grid, lambda_kl=5.0)
    args = (params, topo, win.x_prev2, win.x_prev1, win.targets[0], win.forcing[0])
    assert elbo_step_loss(*args, w0, noise).item() == pytest.approx(
        elbo_step_loss(*args, w1, noise).item(), abs=1e-10
    )


def test_multi_step_T1_equals_single_step(lparams, topo):
    win = mk_window(topo, T=1)
    w = mk_weights(topo.n_grid, lambda_kl=0.7)
    noise = _noise_for(lparams, topo, T=1)["elbo-q"]
    a = multi_step_loss(lparams, topo, win, 1, w, noise).item()
    b = elbo_step_loss(lparams, topo, win.x_prev2, win.x_prev1, win.targets[0], win.forcing[0], w, noise[0]).item()
    assert a == pytest.approx(b, abs=1e-12)


def test_multi_step_T2_matches_manual_composition(lparams, topo):
    from meshcast.objectives import _elbo_parts

    win = mk_window(topo, T=2)
    w = mk_weights(topo.n_grid, lambda_kl=0.3)
    noise = _noise_for(lparams, topo, T=2)["elbo-q"]
    got = multi_step_loss(lparams, topo, win, 2, w, noise).item()

    l1, pred1 = _elbo_parts(lparams, topo, win.x_prev2, win.x_prev1, win.targets[0], win.forcing[0], w, noise[0])
    l2, _ = _elbo_parts(lparams, topo, win.x_prev1, pred1, win.targets[1], win.forcing[1], w, noise[1])
    assert got == pytest.approx(l1.item() + l2.item(), abs=1e-10)


def test_multi_step_requires_window_coverage(lparams, topo):
    win = mk_window(topo, T=2)
    w = mk_weights(topo.n_grid)
    with pytest.raises(ShapeError):
        multi_step_loss(lparams, topo, win, 3, w, np.zeros((3, latent_width(lparams, topo), D_Z)))


def test_combined_loss_reduces_to_multi_step_without_crps(lparams, topo):
    win = mk_window(topo, T=2)
    w = mk_weights(topo.n_grid, lambda_kl=0.5, lambda_crps=0.0)
    noise = _noise_for(lparams, topo, T=2)
    a = combined_loss(lparams, topo, win, 2, w, noise).item()
    b = multi_step_loss(lparams, topo, win, 2, w, noise["elbo-q"]).item()
    assert a == pytest.approx(b, abs=1e-12)


def test_combined_loss_finite_at_random_init(lparams, topo):
    win = mk_window(topo, T=2)
    w = mk_weights(topo.n_grid, lambda_kl=1.0, lambda_crps=10.0)
    noise = _noise_for(lparams, topo, T=2)
    assert np.isfinite(combined_loss(lparams, topo, win, 2, w, noise).item())


def test_combined_loss_gradient_reaches_every_component(lparams, topo):
    win = mk_window(topo, T=2)
    w = mk_weights(topo.n_grid, lambda_kl=1.0, lambda_crps=5.0)
    noise = _noise_for(lparams, topo, T=2)
    loss = combined_loss(lparams, topo, win, 2, w, noise)
    grads = lparams.named_grads(backward(loss))
    groups = {}
    for name, g in grads.items():
        prefix = name.split("/")[0]
        groups[prefix] = groups.get(prefix, 0.0) + float(np.abs(g).sum())
    for prefix in ("embed", "lm", "pred", "q"):
        assert groups.get(prefix, 0.0) > 0, f"no gradient in component '{prefix}'"


def test_elbo_decreases_under_optimization(lparams, topo):
    win = mk_window(topo, T=1)
    w = mk_weights(topo.n_grid, lambda_kl=1.0)
    params = lparams
    state = AdamWState.init(params.tensors())
    losses = []
    for i in range(25):
        noise = draw_training_noise(params, topo, 1, 0, 1)["elbo-q"]
        loss = multi_step_loss(params, topo, win, 1, w, noise)
        losses.append(loss.item())
        grads = params.named_grads(backward(loss))
        flat, state = adamw_step(params.tensors(), grads, state, lr=2e-3, weight_decay=0.0)
        params = params.with_tensors(flat)
    assert np.mean(losses[-5:]) < losses[0]


# ---------------------------------------------------------------------------
# finite-difference gradient oracles
# ---------------------------------------------------------------------------


def _loss_as_fn_of_params(template, topo, build_loss):
    def f(arrays):
        flat = {k: Tensor(v, requires_grad=False) for k, v in arrays.items()}
        return build_loss(template.with_tensors(flat)).item()

    return f


@pytest.mark.parametrize("case", ["elbo", "multi", "crps", "combined"])
def test_objective_gradients_match_directional_fd(case, lparams, topo):
    win = mk_window(topo, T=2)
    w = mk_weights(topo.n_grid, lambda_kl=0.8, lambda_crps=3.0)
    noise = _noise_for(lparams, topo, T=2, seed=5)

    def build_loss(p):
        if case == "elbo":
            return elbo_step_loss(p, topo, win.x_prev2, win.x_prev1, win.targets[0], win.forcing[0], w, noise["elbo-q"][0])
        if case == "multi":
            return multi_step_loss(p, topo, win, 2, w, noise["elbo-q"])
        if case == "crps":
            from meshcast.objectives import _latent_rollout_steps, crps_train_loss as cl

            a = _latent_rollout_steps(p, topo, win, 2, noise["crps-a"])
            b = _latent_rollout_steps(p, topo, win, 2, noise["crps-b"])
            return cl(a, b, [win.targets[0], win.targets[1]], w.area_w)
        return combined_loss(p, topo, win, 2, w, noise)

    loss = build_loss(lparams)
    grads = lparams.named_grads(backward(loss))
    arrays = {k: t.data for k, t in lparams.tensors().items()}
    full_grads = {k: grads.get(k, np.zeros_like(v)) for k, v in arrays.items()}

    rng = np.random.default_rng(17)
    f = _loss_as_fn_of_params(lparams, topo, build_loss)
    for _ in range(3):
        v = random_direction(arrays, rng)
        analytic = sum(np.sum(full_grads[k] * v[k]) for k in arrays)
        numeric = directional_fd(f, arrays, v, h=1e-6)
        assert rel_err(np.array([analytic]), np.array([numeric])) < 1e-6


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------


def test_stage_config_validation():
    StageConfig(epochs=0, learning_rate=1e-3)
    with pytest.raises(ConfigError):
        StageConfig(epochs=-1, learning_rate=1e-3)
    with pytest.raises(ConfigError):
        StageConfig(epochs=1, learning_rate=1e-3, mode="bogus")


def test_estimate_inv_var_weights_clamps_degenerate():
    fields = np.zeros((5, 3, 2))
    fields[:, :, 0] = np.arange(5)[:, None]  # variance of diffs is 0 -> clamp
    lam = estimate_inv_var_weights(fields)
    assert lam[0] == 1e6 and lam[1] == 1e6
    rng = np.random.default_rng(0)
    fields = rng.normal(size=(50, 4, 2))
    lam = estimate_inv_var_weights(fields)
    diffs = np.diff(fields, axis=0).reshape(-1, 2)
    np.testing.assert_allclose(lam, 1.0 / diffs.var(axis=0))
