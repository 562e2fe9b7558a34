import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ogp_modlab.errors import ParameterError, UndefinedModularityError
from ogp_modlab.modularity import (MoveState, amalgamate_eta_fat, mean_field_prediction,
                                   modularity, modularity_naive, robustness_gap,
                                   weighted_modularity, weighted_modularity_naive)
from ogp_modlab.partitions import (Partition, balanced_random_partition, decoy, planted_partition,
                                   signature)
from ogp_modlab.sbm import BlockModelParams, Graph, generate_sbm, weighted_block_graph


def _graph(n=60, k=3, p=0.3, q=0.05, seed=0):
    return generate_sbm(BlockModelParams.from_probabilities(n, k, p, q), seed)


def test_two_triangles():
    g = Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])
    part = Partition(np.array([0, 0, 0, 1, 1, 1]), 2)
    # coverage 6/7, each part has volume 7
    assert modularity(g, part).score == pytest.approx(6 / 7 - 2 * (7 / 14) ** 2)
    assert modularity_naive(g, part) == pytest.approx(6 / 7 - 0.5)


def test_single_part_scores_zero():
    g, _ = _graph()
    assert modularity(g, Partition(np.zeros(g.n, dtype=int), 3)).score == pytest.approx(0.0)


def test_edgeless_graph_is_undefined():
    g = Graph.from_edges(3, np.empty((0, 2), dtype=int))
    with pytest.raises(UndefinedModularityError):
        modularity(g, planted_partition(3, 3))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), k=st.integers(2, 5))
def test_fast_matches_naive(seed, k):
    g, _ = _graph(n=40, k=k, seed=seed)
    part = Partition(np.random.default_rng(seed).integers(0, k, g.n), k)
    br = modularity(g, part)
    assert br.score == pytest.approx(modularity_naive(g, part), abs=1e-12)
    assert br.score == pytest.approx(br.coverage - br.degree_tax)
    assert -0.5 <= br.score < 1


def test_weighted_modularity_matches_naive():
    wg = weighted_block_graph(BlockModelParams.from_probabilities(12, 3, 0.6, 0.1))
    rng = np.random.default_rng(0)
    for _ in range(20):
        part = Partition(rng.integers(0, 3, 12), 3)
        assert weighted_modularity(wg, part).score == pytest.approx(
            weighted_modularity_naive(wg, part), abs=1e-12)


def test_mean_field_at_planted_and_decoy():
    params = BlockModelParams(n=2000, k=3, a=3, b=1, omega=50)
    planted = planted_partition(2000, 3)
    # planted: g = k(k-1) = 6, prefactor 0.4, so 0.4 * 6 / 9
    assert mean_field_prediction(params, signature(planted, planted)) == pytest.approx(0.4 * 6 / 9)
    # decoy: g = k(k-1) - 2 = 4
    dec = decoy(planted, 0, 1)
    assert mean_field_prediction(params, signature(dec, planted)) == pytest.approx(0.4 * 4 / 9)


def test_moves_track_scratch_recomputation():
    g, planted = _graph(n=80, seed=3)
    rng = np.random.default_rng(1)
    state = MoveState(g, balanced_random_partition(g.n, 3, 2), planted)
    for step in range(500):
        u, b = int(rng.integers(g.n)), int(rng.integers(3))
        before = state.score
        delta = state.move_delta(u, b)
        state.apply_move(u, b)
        assert state.score == pytest.approx(before + delta, abs=1e-12)
        if step % 50 == 0:
            state.verify()
    state.verify()


def test_delta_tables_agree():
    g, planted = _graph(n=50, seed=5)
    state = MoveState(g, balanced_random_partition(g.n, 3, 0), planted)
    deltas = state.all_deltas()
    nums = state.delta_numerators()
    assert nums.dtype.kind == "i"
    assert np.allclose(nums / (4.0 * g.m ** 2), deltas, atol=1e-15)
    for u in range(0, g.n, 7):
        for b in range(3):
            assert deltas[u, b] == pytest.approx(state.move_delta(u, b), abs=1e-15)
    assert np.all(deltas[np.arange(g.n), state.labels] == 0)


def test_candidate_distances_match_actual_moves():
    g, planted = _graph(n=30, seed=2)
    state = MoveState(g, balanced_random_partition(g.n, 3, 4), planted)
    table = state.candidate_distances()
    for u in range(g.n):
        a, j = int(state.labels[u]), int(planted.labels[u])
        for b in range(3):
            trial = MoveState(g, state.partition(), planted)
            trial.apply_move(u, b)
            assert table[a, b, j] == pytest.approx(trial.distance())


def test_move_state_rejects_bad_moves():
    g, planted = _graph()
    state = MoveState(g, planted, planted)
    with pytest.raises(ParameterError):
        state.move_delta(g.n, 0)
    with pytest.raises(ParameterError):
        state.apply_move(0, 3)
    with pytest.raises(ParameterError):
        MoveState(g, planted).kernel_arrays()


def test_fattening_merges_small_parts():
    g, planted = _graph(n=90, seed=1)
    labels = planted.labels.copy()
    labels[:3] = 3
    labels[3:5] = 4
    part = Partition(labels, 5)
    merged, fp = amalgamate_eta_fat(g, part, 0.1)
    vol = np.bincount(merged.labels, weights=g.degrees, minlength=5)
    assert np.all(vol[merged.part_sizes > 0] >= 0.1 * 2 * g.m)
    drop = modularity(g, part).score - modularity(g, merged).score
    assert drop < 0.2 and drop <= 2 * fp.zeta + 1e-12


def test_fattening_is_identity_on_fat_partitions():
    g, planted = _graph(n=90, seed=1)
    merged, fp = amalgamate_eta_fat(g, planted, 0.05)
    assert merged == planted and fp.zeta == 0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), eta=st.floats(0.01, 0.5))
def test_fattening_bounds_hold(seed, eta):
    g, _ = _graph(n=40, seed=seed % 50)
    part = Partition(np.random.default_rng(seed).integers(0, 6, g.n), 6)
    amalgamate_eta_fat(g, part, eta)   # raises InvariantError on violation


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), frac=st.floats(0.01, 0.5))
def test_edge_removal_bound(seed, frac):
    g, planted = _graph(n=40, seed=seed % 50)
    rng = np.random.default_rng(seed)
    count = max(1, min(g.m - 1, int(frac * g.m)))
    removed = g.edges[rng.choice(g.m, size=count, replace=False)]
    delta, bound = robustness_gap(g, planted, removed)
    assert delta < bound == pytest.approx(2 * count / g.m)
