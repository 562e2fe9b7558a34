"""Executable acceptance checks.

Each ``check_*`` function runs one criterion and returns a ``CheckResult``
holding the verdict and the measured values. ``verify_suite`` runs the
fast algebraic and oracle checks ("quick") or all of them ("full").
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dynamics import (ChainConfig, beta_rule, exact_gibbs, greedy_run, kernel_probabilities,
                       mcmc_run, ogp_certificate, ogp_params, standard_probes, total_variation)
from . import _kernels as K
from .landscape.circulation import (balanced_max_descent, cycle_decompose, off_diagonal_mass,
                                    random_circulation)
from .landscape.polytope import (SignaturePolytopeSpec, closed_form_value, far_bound, g_pairwise,
                                 grid_max_g, h_curve, h_minimiser, max_g_closed_form)
from .landscape.sweep import empirical_H_sweep
from .modularity import (MoveState, amalgamate_eta_fat, mean_field_prediction, modularity,
                         robustness_gap, weighted_modularity)
from .partitions import (Partition, balanced_random_partition, best_alignment, decoy,
                         interpolated_partition, overlap_counts, signature)
from .sbm import BlockModelParams, generate_sbm, weighted_block_graph

SEEDS = tuple(range(10))
STRONG = BlockModelParams(n=2000, k=3, a=3, b=1, omega=50)
SMALL = BlockModelParams(n=500, k=3, a=3, b=1, omega=50)
D_GRID = tuple(i / 30 for i in range(11))
OGP_NU = 0.3


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict, repr=False)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(number: int, name: str):
    def wrap(fn):
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            passed, detail, data = fn(*args, **kwargs)
            return CheckResult(number, name, bool(passed), detail, time.perf_counter() - t0, data)
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        run.number = number
        return run
    return wrap


# ---------------------------------------------------------------- algebra and oracles

@_timed(1, "g/h identity")
def check_gh_identity():
    worst = 0.0
    for k in (3, 4, 5):
        for t in np.linspace(0.0, 1.0, 101):
            value, _ = max_g_closed_form(k, float(t))
            worst = max(worst, abs(value / k ** 2 - h_curve(float(t) / k, k)))
    return worst <= 1e-12, f"max |g/k^2 - h| = {worst:.2e}", {"max_error": worst}


@_timed(2, "closed-form maximum equals grid oracle")
def check_closed_form_oracle(resolution: int = 8):
    rows = []
    for t in (Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1)):
        grid = grid_max_g(SignaturePolytopeSpec(3, float(t)), resolution)
        rows.append((float(t), grid.exact, closed_form_value(3, t)))
    ok = all(g == c for _, g, c in rows)
    detail = ", ".join(f"t={t}: grid {g} vs {c}" for t, g, c in rows)
    return ok, detail, {"rows": rows}


@_timed(3, "far bound")
def check_far_bound(resolution: int = 8):
    rows = []
    for k in (3, 4):
        for t in (1.25, 1.5, 2.0):
            grid = grid_max_g(SignaturePolytopeSpec(k, t), resolution)
            rows.append((k, t, grid.exact, far_bound(k)))
    ok = all(g < b for _, _, g, b in rows)
    detail = ", ".join(f"k={k},t={t}: {float(g):.4f} < {b:g}" for k, t, g, b in rows)
    return ok, detail, {"rows": rows}


@_timed(4, "balanced maxima decrease; descent raises g")
def check_balanced_monotone(resolution: int = 60):
    # t*N must be integral for every t; 60 is the smallest multiple of 12 that works
    ts = (0.2, 0.6, 1.0, 1.4)
    grids = [grid_max_g(SignaturePolytopeSpec(3, t, balanced=True), resolution,
                        max_resolution=resolution) for t in ts]
    values = [g.exact for g in grids]
    decreasing = all(a > b for a, b in zip(values, values[1:]))
    pairs = []
    for (i2, t2), (i1, t1) in itertools.product(enumerate(ts), repeat=2):
        if t1 < t2:
            x = grids[i2].maximizer
            out = balanced_max_descent(x, t1)
            pairs.append((t2, t1, g_pairwise(x), g_pairwise(out), off_diagonal_mass(out)))
    raised = all(after > before and abs(mass - t1) < 1e-10
                 for _, t1, before, after, mass in pairs)
    detail = (f"grid maxima {[round(float(v), 4) for v in values]}; "
              f"descent raised g on {sum(a > b for _, _, b, a, _ in pairs)}/{len(pairs)} pairs")
    return decreasing and raised, detail, {"values": values, "pairs": pairs}


@_timed(5, "cycle decomposition reconstruction")
def check_cycle_decomposition(count: int = 1000, seed: int = 0):
    rng = np.random.default_rng(seed)
    worst, over = 0.0, 0
    for _ in range(count):
        k = int(rng.integers(2, 7))
        c = random_circulation(k, rng)
        dec = cycle_decompose(c)
        worst = max(worst, float(np.abs(dec.reconstruct(k) - c.b).max()))
        over += len(dec.cycles) > np.count_nonzero(c.b > 0)
    return worst <= 1e-10 and over == 0, \
        f"max entry error {worst:.1e}, {over} decompositions over the support bound", {}


@_timed(6, "incremental moves match recomputation")
def check_incremental(moves: int = 10_000, checkpoint: int = 100, seed: int = 0):
    params = BlockModelParams(n=300, k=3, a=3, b=1, omega=50)
    graph, planted = generate_sbm(params, seed)
    rng = np.random.default_rng(seed)
    state = MoveState(graph, balanced_random_partition(graph.n, 3, seed), planted)
    worst, mismatched = 0.0, 0
    for step in range(1, moves + 1):
        u = int(rng.integers(graph.n))
        b = int(rng.integers(3))
        state.apply_move(u, b)
        fresh = modularity(graph, state.partition()).score
        worst = max(worst, abs(fresh - state.score))
        if step % checkpoint == 0:
            best, _ = best_alignment(overlap_counts(state.partition(), planted))
            mismatched += best != int(state.best[0])
    return worst <= 1e-9 and mismatched == 0, \
        f"max score gap {worst:.1e}, {mismatched} distance mismatches in {moves // checkpoint} checkpoints", {}


@_timed(7, "mean-field modularity")
def check_mean_field():
    params = BlockModelParams(n=300, k=3, a=3, b=1, omega=50)
    wg = weighted_block_graph(params)
    planted = wg.planted
    parts = {"planted": planted, "decoy": decoy(planted, 0, 1),
             "interpolated(0.5)": interpolated_partition(planted, 0, 1, 0.5),
             "balanced-random": balanced_random_partition(300, 3, 0)}
    gaps = {name: abs(weighted_modularity(wg, p).score
                      - mean_field_prediction(params, signature(p, planted)))
            for name, p in parts.items()}
    return max(gaps.values()) <= 0.02, \
        ", ".join(f"{k} {v:.4f}" for k, v in gaps.items()), {"gaps": gaps}


@_timed(14, "edge-removal bound and fattening")
def check_robustness_fattening(pairs: int = 100, seed: int = 0):
    rng = np.random.default_rng(seed)
    worst_ratio, worst_fat = 0.0, 0.0
    for _ in range(pairs):
        n = int(rng.integers(20, 120))
        k = int(rng.integers(2, 5))
        a = float(rng.uniform(0.2, 0.9))
        params = BlockModelParams.from_probabilities(max(n, k), k, a, float(rng.uniform(0, a * 0.8)))
        graph, _ = generate_sbm(params, int(rng.integers(1 << 30)))
        if graph.m < 2:
            continue
        parts = int(rng.integers(1, 8))
        part = Partition(rng.integers(0, parts, size=graph.n), parts)
        size = int(rng.integers(1, graph.m))
        removed = graph.edges[rng.choice(graph.m, size=size, replace=False)]
        delta, bound = robustness_gap(graph, part, removed)
        worst_ratio = max(worst_ratio, delta / bound)
        eta = float(rng.uniform(0.01, 0.4))
        before = modularity(graph, part).score
        merged, _ = amalgamate_eta_fat(graph, part, eta)
        worst_fat = max(worst_fat, (before - modularity(graph, merged).score) / (2 * eta))
    return worst_ratio < 1 and worst_fat < 1, \
        f"max |dq|/(2|E0|/|E|) = {worst_ratio:.3f}, max drop/(2 eta) = {worst_fat:.3f}", {}


# ---------------------------------------------------------------- Monte Carlo

@_timed(8, "concentration of planted and decoy scores")
def check_concentration(seeds=SEEDS):
    pref = STRONG.prefactor
    rows = []
    for s in seeds:
        graph, planted = generate_sbm(STRONG, s)
        qp = modularity(graph, planted).score
        qd = modularity(graph, decoy(planted, 0, 1)).score
        rows.append((s, qp - pref * h_curve(0, 3), qd - pref * h_curve(1 / 3, 3)))
    good = sum(abs(a) <= 0.05 and abs(b) <= 0.05 for _, a, b in rows)
    detail = f"{good}/{len(rows)} seeds within 0.05; gaps " + \
        " ".join(f"({a:+.4f},{b:+.4f})" for _, a, b in rows)
    return good >= math.ceil(0.9 * len(rows)), detail, {"rows": rows}


@_timed(9, "empirical H(d) against the h curve")
def check_landscape(seeds=SEEDS, search_budget: int = 200):
    target = h_minimiser(3)
    spacing = np.abs(np.array(D_GRID) - target)
    nearest = set(np.flatnonzero(np.isclose(spacing, spacing.min(), atol=1e-12)))
    rows = []
    for s in seeds:
        graph, planted = generate_sbm(STRONG, s)
        pts = empirical_H_sweep(graph, planted, STRONG, D_GRID, search_budget=search_budget, seed=s)
        H = np.array([p.H_empirical for p in pts])
        theory = np.array([p.modularity_theory for p in pts])
        rows.append((s, float(np.abs(H - theory).max()), int(np.argmin(H))))
    close = sum(dev <= 0.05 for _, dev, _ in rows)
    argmin_ok = sum(i in nearest for _, _, i in rows)
    need = math.ceil(0.9 * len(rows))
    detail = (f"within 0.05 in {close}/{len(rows)} seeds (max dev "
              f"{max(r[1] for r in rows):.4f}); minimiser at nearest grid point to 1/4 in "
              f"{argmin_ok}/{len(rows)} seeds (argmin d = "
              f"{sorted({round(D_GRID[i], 4) for _, _, i in rows})})")
    return close >= need and argmin_ok >= need, detail, {"rows": rows}


def ogp_probe_grid() -> list[float]:
    return sorted(set(D_GRID) | {h_minimiser(3)})


@_timed(10, "overlap-gap band is empty")
def check_ogp_band(seeds=SEEDS):
    params = ogp_params(STRONG, OGP_NU)
    violations, witnesses, wide, rows = [], 0, 0, []
    for s in seeds:
        graph, planted = generate_sbm(STRONG, s)
        report = ogp_certificate(graph, planted, params, standard_probes(graph, planted, ogp_probe_grid(), seed=s))
        violations += [(s, r.name, r.distance, r.modularity - report.threshold)
                       for r in report.band_violations]
        w = report.witness
        witnesses += w is not None and abs(w.distance - 1 / 3) < 2 / STRONG.n
        wide += len(report.wide_band_violations)
        rows.append((s, report.c1, report.c2))
    detail = (f"threshold {params.threshold:.6f}, band ({params.nu1:.4f}, {params.nu2}); "
              f"{len(violations)} band violations {[(s, n, round(d, 4), round(m, 4)) for s, n, d, m in violations]}; "
              f"decoy witness above threshold in {witnesses}/{len(seeds)} seeds; "
              f"{wide} probes above threshold in the wider ({params.nu_close:.4f}, {params.nu2})")
    return not violations and witnesses == len(seeds), detail, {"violations": violations, "gaps": rows}


@_timed(11, "greedy stays at its start basin")
def check_greedy(seeds=SEEDS):
    rows = []
    for s in seeds:
        graph, planted = generate_sbm(STRONG, s)
        rd = greedy_run(graph, decoy(planted, 0, 1), planted)
        rp = greedy_run(graph, planted, planted)
        rows.append((s, rd.final_distance, rp.final_distance))
    need = math.ceil(0.9 * len(rows))
    far = sum(d >= 1 / 3 - 0.02 for _, d, _ in rows)
    near = sum(d <= 0.01 for _, _, d in rows)
    detail = (f"decoy start ends at d >= 1/3-0.02 in {far}/{len(rows)}, planted start ends at "
              f"d <= 0.01 in {near}/{len(rows)}")
    return far >= need and near >= need, detail, {"rows": rows}


def fold_labelings(prob: np.ndarray, n: int, k: int) -> np.ndarray:
    """Sum a distribution over labellings into one over partitions (labels up to renaming)."""
    codes = np.arange(k ** n)
    labels = (codes[:, None] // (k ** np.arange(n))[None, :]) % k
    canon = np.empty(len(codes), dtype=np.int64)
    for c in range(len(codes)):
        seen: dict[int, int] = {}
        row = [seen.setdefault(int(x), len(seen)) for x in labels[c]]
        canon[c] = int(np.dot(row, k ** np.arange(n)))
    out = np.zeros(k ** n)
    np.add.at(out, canon, prob)
    return out


@_timed(12, "chain occupation matches the Gibbs table")
def check_gibbs(steps: int = 10 ** 6, draws: int = 10 ** 5, seed: int = 0):
    params = BlockModelParams.from_probabilities(8, 2, 0.9, 0.05)
    graph, planted = generate_sbm(params, seed)
    beta = 2.0
    table = exact_gibbs(graph, 2, beta, planted)
    gibbs = fold_labelings(table.probabilities, 8, 2)
    own_law = fold_labelings(table.heat_bath_stationary(), 8, 2)
    tv = {}
    for kernel in ("heat-bath", "metropolis"):
        cfg = ChainConfig(beta=beta, max_steps=steps, nu1=0.0, nu2=0.5, seed=seed,
                          sample_every=steps, kernel=kernel)
        trace = mcmc_run(graph, planted, planted, cfg, track_occupation=True)
        occ = fold_labelings(trace.visits / trace.visits.sum(), 8, 2)
        tv[kernel] = (total_variation(occ, gibbs), total_variation(occ, own_law))

    # kernel frequencies from a fixed state
    state = MoveState(graph, planted, planted)
    probs = kernel_probabilities(state, beta).ravel()
    rng = np.random.default_rng(seed)
    buf = np.empty(graph.n * 2)
    counts = np.zeros(graph.n * 2)
    for u in rng.random(draws):
        counts[K.heat_bath_choice(state.labels, state.counts, state.vol, state.degrees,
                                  state.m, beta * graph.n, u, buf)] += 1
    sigma = np.sqrt(draws * probs * (1 - probs))
    z = np.abs(counts - draws * probs) / np.where(sigma > 0, sigma, 1.0)
    freq_ok = bool(np.all(z[probs > 0] <= 3.0) and np.all(counts[probs == 0] == 0))
    occupation_ok = tv["heat-bath"][0] <= 0.05
    detail = (f"heat-bath TV to Gibbs {tv['heat-bath'][0]:.4f} (to its own stationary law "
              f"{tv['heat-bath'][1]:.4f}); metropolis TV to Gibbs {tv['metropolis'][0]:.4f}; "
              f"kernel frequency max |z| = {z[probs > 0].max():.2f}")
    return occupation_ok and freq_ok, detail, {"tv": tv, "z": z}


@_timed(13, "slow mixing from the decoy")
def check_slow_mixing(seeds=SEEDS, steps: int = 10 ** 6):
    params = ogp_params(SMALL, OGP_NU)
    rows = []
    for s in seeds:
        graph, planted = generate_sbm(SMALL, s)
        report = ogp_certificate(graph, planted, params,
                                 standard_probes(graph, planted, ogp_probe_grid(), seed=s))
        if report.c2 is None or report.c2 <= 0:
            rows.append((s, report.c2, None, False, False))
            continue
        beta = beta_rule(report.c2, SMALL.k)
        cfg = dict(beta=beta, max_steps=steps, nu1=params.nu_close, nu2=params.nu2,
                   seed=s, sample_every=10_000)
        from_decoy = mcmc_run(graph, decoy(planted, 0, 1), planted, ChainConfig(**cfg))
        from_truth = mcmc_run(graph, planted, planted, ChainConfig(**cfg))
        rows.append((s, report.c2, beta, from_decoy.tau is None, from_truth.first_exit is None))
    need = math.ceil(0.9 * len(rows))
    trapped = sum(r[3] for r in rows)
    stayed = sum(r[4] for r in rows)
    betas = [r[2] for r in rows if r[2] is not None]
    detail = (f"decoy start never reached d <= {params.nu_close:.4f} in {trapped}/{len(rows)}; "
              f"planted start never left it in {stayed}/{len(rows)}; beta in "
              f"[{min(betas):.0f}, {max(betas):.0f}]" if betas else "no positive c2")
    return trapped >= need and stayed >= need, detail, {"rows": rows}


ALL = (check_gh_identity, check_closed_form_oracle, check_far_bound, check_balanced_monotone,
       check_cycle_decomposition, check_incremental, check_mean_field, check_concentration,
       check_landscape, check_ogp_band, check_greedy, check_gibbs, check_slow_mixing,
       check_robustness_fattening)
QUICK = (check_gh_identity, check_closed_form_oracle, check_far_bound, check_balanced_monotone,
         check_cycle_decomposition, check_incremental, check_mean_field, check_robustness_fattening)


def verify_suite(level: str = "quick", echo=print) -> list[CheckResult]:
    """Run the quick (algebra and oracles) or full (adds Monte Carlo) checks in order."""
    if level not in ("quick", "full"):
        raise ValueError(f"level must be 'quick' or 'full', got {level!r}")
    results = []
    for check in (QUICK if level == "quick" else ALL):
        result = check()
        results.append(result)
        if echo is not None:
            echo(result.line())
    return results
