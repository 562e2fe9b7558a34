import math

import numpy as np
import pytest
from scipy.stats import chisquare

from ogp_modlab import _kernels as K
from ogp_modlab.dynamics import (ChainConfig, beta_rule, default_nu, exact_gibbs, greedy_run,
                                 kernel_probabilities, mcmc_run, ogp_certificate, ogp_params,
                                 standard_probes, total_variation)
from ogp_modlab.errors import ParameterError
from ogp_modlab.landscape.polytope import h_curve
from ogp_modlab.modularity import MoveState
from ogp_modlab.partitions import Partition, balanced_random_partition, decoy, planted_partition
from ogp_modlab.sbm import BlockModelParams, Graph, generate_sbm
from ogp_modlab.verification import fold_labelings


def _two_cliques():
    edges = [(u, v) for u in range(4) for v in range(u + 1, 4)]
    edges += [(u + 4, v + 4) for u, v in edges] + [(3, 4)]
    return Graph.from_edges(8, edges), planted_partition(8, 2)


def _path(n):
    return Graph.from_edges(n, [(u, u + 1) for u in range(n - 1)])


def test_ogp_params_at_reference_point():
    model = BlockModelParams(n=2000, k=3, a=3, b=1, omega=50)
    prm = ogp_params(model, 0.3)
    assert prm.nu_prime == pytest.approx(0.2 + 1 / 9)
    assert prm.nu_close == pytest.approx(0.5 - 0.2 - 1 / 9)
    assert (prm.nu1, prm.nu2) == (0.25, 0.3)
    assert prm.threshold == pytest.approx(0.4 * h_curve(prm.nu_prime, 3))
    assert prm.threshold == pytest.approx(0.172642, abs=1e-6)
    assert default_nu(3) == pytest.approx(0.2916666, abs=1e-6)
    with pytest.raises(ParameterError):
        ogp_params(model, 0.2)


def test_beta_rule():
    assert beta_rule(0.1, 3) == pytest.approx(20.99, abs=0.01)
    assert beta_rule(math.log(4) + 1, 4) == pytest.approx(1.0)
    assert beta_rule(0.05, 3) > beta_rule(0.1, 3)
    with pytest.raises(ParameterError):
        beta_rule(0.0, 3)


def test_greedy_on_disjoint_cliques_is_idle():
    g, planted = generate_sbm(BlockModelParams.from_probabilities(6, 3, 1.0, 0.0), 0)
    trace = greedy_run(g, planted, planted)
    assert len(trace.steps) == 1 and trace.tau == 0 and trace.first_exit is None


def test_greedy_strictly_increases():
    params = BlockModelParams(n=200, k=3, a=3, b=1, omega=20)
    g, planted = generate_sbm(params, 1)
    trace = greedy_run(g, balanced_random_partition(200, 3, 0), planted)
    assert np.all(np.diff(trace.modularity) > 0)
    again = greedy_run(g, balanced_random_partition(200, 3, 0), planted)
    assert np.array_equal(trace.modularity, again.modularity)
    assert trace.terminal == again.terminal


def test_kernel_uniform_at_zero_beta():
    g, planted = _two_cliques()
    probs = kernel_probabilities(MoveState(g, planted, planted), 0.0)
    assert np.allclose(probs[np.arange(8), planted.labels], 0)
    assert np.allclose(probs[np.arange(8), 1 - planted.labels], 1 / 8)


def test_compiled_heat_bath_matches_probabilities():
    g = _path(5)
    part = Partition(np.array([0, 0, 1, 2, 1]), 3)
    state = MoveState(g, part, planted_partition(5, 3))
    beta = 2.0
    expect = kernel_probabilities(state, beta).ravel()
    rng = np.random.default_rng(0)
    buf = np.empty(15)
    draws = 20000
    freq = np.zeros(15)
    for u in rng.random(draws):
        freq[K.heat_bath_choice(state.labels, state.counts, state.vol, state.degrees,
                                state.m, beta * 5, u, buf)] += 1
    mask = expect > 0
    assert freq[~mask].sum() == 0
    assert chisquare(freq[mask], expect[mask] * draws).pvalue > 1e-3


def test_chain_is_deterministic_and_tau_zero_from_planted():
    params = BlockModelParams(n=150, k=3, a=3, b=1, omega=20)
    g, planted = generate_sbm(params, 0)
    cfg = ChainConfig(beta=20.0, max_steps=3000, nu1=0.19, nu2=0.3, sample_every=500, seed=4)
    a = mcmc_run(g, planted, planted, cfg)
    b = mcmc_run(g, planted, planted, cfg)
    assert a.tau == 0
    assert np.array_equal(a.modularity, b.modularity) and a.terminal == b.terminal
    assert list(a.steps) == [0, 500, 1000, 1500, 2000, 2500, 3000]


def test_chain_tau_from_far_start_at_zero_beta():
    g, planted = _two_cliques()
    cfg = ChainConfig(beta=0.0, max_steps=5000, nu1=0.1, nu2=0.3, sample_every=100, seed=1)
    trace = mcmc_run(g, decoy(planted, 0, 1), planted, cfg)
    assert trace.tau is not None and trace.tau > 0
    assert trace.first_exit == 0


def test_chain_config_validation():
    with pytest.raises(ParameterError):
        ChainConfig(beta=-1, max_steps=10, nu1=0.1, nu2=0.2)
    with pytest.raises(ParameterError):
        ChainConfig(beta=1, max_steps=10, nu1=0.3, nu2=0.2)
    with pytest.raises(ParameterError):
        ChainConfig(beta=1, max_steps=10, nu1=0.1, nu2=0.2, kernel="glauber")


def test_gibbs_table_basics():
    g, planted = _two_cliques()
    uniform = exact_gibbs(g, 2, 0.0, planted)
    assert np.allclose(uniform.probabilities, 1 / 256)
    table = exact_gibbs(g, 2, 3.0, planted)
    assert table.probabilities.sum() == pytest.approx(1.0)
    assert table.labels(5).tolist() == [1, 0, 1, 0, 0, 0, 0, 0]
    with pytest.raises(ParameterError):
        exact_gibbs(_path(30), 2, 1.0)


def test_gibbs_concentrates_near_planted():
    g, planted = _two_cliques()
    table = exact_gibbs(g, 2, beta_rule(0.1, 2), planted)
    assert table.mass_within(0.1) > 0.9


def _occupation(kernel, steps=200000):
    g = _path(5)
    planted = planted_partition(5, 2)
    cfg = ChainConfig(beta=1.0, max_steps=steps, nu1=0.1, nu2=0.3, sample_every=steps, seed=0,
                      kernel=kernel)
    trace = mcmc_run(g, planted, planted, cfg, track_occupation=True)
    table = exact_gibbs(g, 2, 1.0, planted)
    return trace.visits / trace.visits.sum(), table


def test_metropolis_occupation_matches_gibbs():
    occ, table = _occupation("metropolis")
    tv = total_variation(fold_labelings(occ, 5, 2), fold_labelings(table.probabilities, 5, 2))
    assert tv < 0.02


def test_heat_bath_occupation_matches_its_own_law():
    occ, table = _occupation("heat-bath")
    pi = table.heat_bath_stationary()
    assert total_variation(fold_labelings(occ, 5, 2), fold_labelings(pi, 5, 2)) < 0.02


def test_certificate_on_small_instance():
    params = BlockModelParams(n=300, k=3, a=3, b=1, omega=40)
    g, planted = generate_sbm(params, 0)
    prm = ogp_params(params, 0.3)
    report = ogp_certificate(g, planted, prm, standard_probes(g, planted, [0.0, 0.1, 1 / 3]))
    assert report.q_star >= report.threshold
    names = {p.name for p in report.probes}
    assert "decoy(0,1)" in names and "greedy<planted>" in names
    for p in report.probes:
        assert p.above == (p.modularity >= report.threshold)
    assert report.params.c1 == report.c1
