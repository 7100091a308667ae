"""Graph construction tests: exact count reproduction plus structural invariants."""

import numpy as np
import pytest

from meshcast.errors import GraphBuildError
from meshcast.meshgraph import (
    HIERARCHICAL,
    MULTISCALE,
    PLANAR,
    SPHERICAL,
    assemble_model_graph,
    build_icosphere_levels,
    build_interlevel_global,
    build_interlevel_lam,
    build_lam_levels,
    check_graph,
    compute_static_features,
    connect_grid_to_mesh,
    connect_mesh_to_grid,
    global_grid,
    graph_stats,
    load_graph,
    merge_multiscale,
    planar_grid,
    save_graph,
)


@pytest.fixture(scope="module")
def ico_levels():
    return build_icosphere_levels(4)


@pytest.fixture(scope="module")
def global_hier(ico_levels):
    # hierarchy uses the 4 finest levels; the base icosahedron is left out
    return assemble_model_graph(global_grid(121, 240), ico_levels, HIERARCHICAL, hierarchy_levels=4)


@pytest.fixture(scope="module")
def global_ms(ico_levels):
    return assemble_model_graph(global_grid(121, 240), ico_levels, MULTISCALE)


@pytest.fixture(scope="module")
def lam_levels():
    return build_lam_levels(81, 81, 4, extent=(267.0, 237.0))


@pytest.fixture(scope="module")
def lam_hier(lam_levels):
    return assemble_model_graph(planar_grid(238, 268), lam_levels, HIERARCHICAL, hierarchy_levels=3)


@pytest.fixture(scope="module")
def lam_ms(lam_levels):
    return assemble_model_graph(planar_grid(238, 268), lam_levels, MULTISCALE)


# ---------------------------------------------------------------------------
# icosphere levels
# ---------------------------------------------------------------------------


def test_icosahedron_counts():
    levels = build_icosphere_levels(0)
    assert len(levels) == 1
    assert levels[0].n_nodes == 12
    assert len(levels[0].edge_sets["m2m:1"]) == 60


def test_icosphere_vertex_formula(ico_levels):
    for k, g in enumerate(ico_levels):
        assert g.n_nodes == 10 * 4**k + 2
        assert len(g.edge_sets["m2m:1"]) == 60 * 4**k


def test_icosphere_nodes_are_nested(ico_levels):
    for coarse, fine in zip(ico_levels, ico_levels[1:]):
        np.testing.assert_array_equal(coarse.node_pos, fine.node_pos[: coarse.n_nodes])


def test_icosphere_vertices_on_unit_sphere(ico_levels):
    xyz = ico_levels[-1].coords3d()
    np.testing.assert_allclose(np.linalg.norm(xyz, axis=1), 1.0, atol=1e-12)


# ---------------------------------------------------------------------------
# multiscale merges
# ---------------------------------------------------------------------------


def test_merge_single_level_is_identity(ico_levels):
    g = merge_multiscale([ico_levels[0]])
    assert g.n_nodes == 12
    np.testing.assert_array_equal(
        np.unique(g.edge_sets["m2m"].pairs, axis=0),
        np.unique(ico_levels[0].edge_sets["m2m:1"].pairs, axis=0),
    )


def test_global_multiscale_counts(ico_levels):
    g = merge_multiscale(ico_levels)
    assert g.n_nodes == 2562
    assert len(g.edge_sets["m2m"]) == 20460


def test_lam_multiscale_counts(lam_levels):
    g = merge_multiscale(lam_levels)
    assert g.n_nodes == 6561
    assert len(g.edge_sets["m2m"]) == 57616


def test_merge_rejects_non_nested_levels(ico_levels):
    shifted = build_lam_levels(3, 3, 1)
    with pytest.raises(GraphBuildError):
        merge_multiscale([shifted[0], ico_levels[0]])


# ---------------------------------------------------------------------------
# inter-level edges
# ---------------------------------------------------------------------------


def test_global_interlevel_counts(ico_levels):
    inter = build_interlevel_global(ico_levels[1:])  # G_4..G_1
    ups = {up.name: len(up) for up, _ in inter}
    assert ups == {"up:1:2": 4482, "up:2:3": 1122, "up:3:4": 282}


def test_global_down_is_exact_reversal(ico_levels):
    up, down = build_interlevel_global(ico_levels[1:])[0]
    assert {tuple(p) for p in up.pairs} == {(r, s) for s, r in down.pairs}


def test_lam_interlevel_counts(lam_levels):
    inter = build_interlevel_lam(lam_levels[1:])  # 3 finest levels
    ups = {up.name: len(up) for up, _ in inter}
    assert ups == {"up:1:2": 6561, "up:2:3": 729}


def test_lam_every_coarse_node_receives_nine(lam_levels):
    up, _ = build_interlevel_lam(lam_levels[1:])[0]
    counts = np.bincount(up.receivers)
    assert np.all(counts == 9)


# ---------------------------------------------------------------------------
# quadrilateral lattices
# ---------------------------------------------------------------------------


def test_lam_level_counts(lam_levels):
    nodes = [g.n_nodes for g in lam_levels]
    edges = [len(g.edge_sets["m2m:1"]) for g in lam_levels]
    assert nodes == [9, 81, 729, 6561]
    assert edges == [40, 544, 5512, 51520]


def test_three_by_three_lattice():
    g = build_lam_levels(3, 3, 1)[0]
    assert g.n_nodes == 9
    assert len(g.edge_sets["m2m:1"]) == 40


def test_interior_node_has_eight_neighbours():
    g = build_lam_levels(5, 5, 1)[0]
    center = 2 * 5 + 2
    in_deg = np.sum(g.edge_sets["m2m:1"].receivers == center)
    assert in_deg == 8


def test_lam_tripling_requires_divisibility():
    with pytest.raises(GraphBuildError):
        build_lam_levels(10, 9, 3)


def test_lam_levels_share_center_positions(lam_levels):
    coarse, fine = lam_levels[2], lam_levels[3]
    fine_positions = {tuple(p) for p in fine.node_pos}
    assert all(tuple(p) in fine_positions for p in coarse.node_pos)


# ---------------------------------------------------------------------------
# grid <-> mesh
# ---------------------------------------------------------------------------


def test_global_g2m_count(global_hier):
    assert len(global_hier.edge_sets["g2m"]) == 46158


def test_global_m2g_count(global_hier):
    assert len(global_hier.edge_sets["m2g"]) == 87120
    in_deg = np.bincount(global_hier.edge_sets["m2g"].receivers, minlength=121 * 240)
    assert np.all(in_deg[: 121 * 240] == 3)


def test_lam_g2m_count(lam_hier):
    assert len(lam_hier.edge_sets["g2m"]) == 100656


def test_lam_m2g_count(lam_hier):
    assert len(lam_hier.edge_sets["m2g"]) == 255136


def test_grid_node_on_mesh_node_connects(ico_levels):
    mesh = ico_levels[1]  # 42 nodes
    grid_pos = mesh.node_pos[:5]
    es = connect_grid_to_mesh(grid_pos, mesh, 0.6, SPHERICAL)
    for gi in range(5):
        assert gi in es.senders
        receivers = set(es.receivers[es.senders == gi])
        assert gi in receivers  # its own coincident mesh node is in range


def test_planar_nearest_sender_is_coincident_mesh_node(lam_levels):
    mesh = lam_levels[-1]
    grid_pos = mesh.node_pos[:7]
    es = connect_mesh_to_grid(grid_pos, mesh, PLANAR)
    for gi in range(7):
        senders = es.senders[es.receivers == gi]
        assert len(senders) == 4
        assert gi in set(senders)


# ---------------------------------------------------------------------------
# static features
# ---------------------------------------------------------------------------


def test_node_features_at_origin(global_hier):
    feats = global_hier.features.node_features
    origin = np.flatnonzero(
        (global_hier.node_pos[:, 0] == 0.0) & (global_hier.node_pos[:, 1] == 0.0)
    )
    assert len(origin)
    np.testing.assert_allclose(feats[origin], [[1.0, 0.0, 1.0]], atol=1e-15)


def test_longest_mesh_edge_feature_is_one(global_ms):
    lengths = global_ms.features.edge_features["m2m"][:, 0]
    assert lengths.max() == pytest.approx(1.0, abs=1e-15)


def test_reversed_edge_negates_displacement(lam_hier):
    up = lam_hier.features.edge_features["up:1:2"]
    down = lam_hier.features.edge_features["down:2:1"]
    np.testing.assert_allclose(up[:, 0], down[:, 0])
    np.testing.assert_allclose(up[:, 1:], -down[:, 1:])


def test_planar_node_features_scaled_by_max_coordinate(lam_hier):
    feats = lam_hier.features.node_features
    assert np.abs(feats).max() == pytest.approx(1.0)
    assert feats.shape[1] == 2


# ---------------------------------------------------------------------------
# stats, totals, validation
# ---------------------------------------------------------------------------


def test_global_hierarchical_totals(global_hier):
    st = graph_stats(global_hier)
    assert st["mesh_nodes"] == 3408
    assert st["mesh_edges_total"] == 32172
    assert st["nodes_per_level"] == {0: 29040, 1: 2562, 2: 642, 3: 162, 4: 42}
    sets = st["edge_sets"]
    assert sets["m2m:1"]["edges"] == 15360
    assert sets["m2m:2"]["edges"] == 3840
    assert sets["m2m:3"]["edges"] == 960
    assert sets["m2m:4"]["edges"] == 240
    assert sets["up:1:2"]["edges"] == 4482
    assert sets["up:2:3"]["edges"] == 1122
    assert sets["up:3:4"]["edges"] == 282


def test_lam_hierarchical_totals(lam_hier):
    st = graph_stats(lam_hier)
    assert st["mesh_nodes"] == 7371
    assert st["mesh_edges_total"] == 72156
    sets = st["edge_sets"]
    assert sets["m2m:1"]["edges"] == 51520
    assert sets["m2m:2"]["edges"] == 5512
    assert sets["m2m:3"]["edges"] == 544


def test_lam_multiscale_totals(lam_ms):
    st = graph_stats(lam_ms)
    assert st["mesh_nodes"] == 6561
    assert st["edge_sets"]["m2m"]["edges"] == 57616


def test_mesh_only_graph_has_zero_grid_nodes(ico_levels):
    st = graph_stats(ico_levels[0])
    assert st["nodes_per_level"].get(0, 0) == 0
    assert st["mesh_nodes"] == 12


def test_check_graph_passes_on_built_graphs(global_hier, lam_hier, global_ms, lam_ms):
    for g in (global_hier, lam_hier, global_ms, lam_ms):
        assert check_graph(g) == []


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_graph_roundtrip_exact(tmp_path, ico_levels):
    g = assemble_model_graph(global_grid(13, 24), ico_levels[:2], HIERARCHICAL)
    path = tmp_path / "g.json"
    save_graph(g, str(path))
    g2 = load_graph(str(path))
    assert g2.kind == g.kind and g2.geometry == g.geometry
    assert g.node_pos.tobytes() == g2.node_pos.tobytes()
    assert g.node_level.tobytes() == g2.node_level.tobytes()
    assert set(g.edge_sets) == set(g2.edge_sets)
    for name in g.edge_sets:
        assert g.edge_sets[name].pairs.tobytes() == g2.edge_sets[name].pairs.tobytes()
    np.testing.assert_array_equal(g.features.node_features, g2.features.node_features)
