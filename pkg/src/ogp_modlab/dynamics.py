"""Single-node dynamics on partitions: greedy ascent, the exp(beta n q) chain, exact Gibbs tables."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .errors import InvariantError, ParameterError
from .landscape.polytope import h_curve, h_minimiser
from .modularity import MoveState, modularity, part_statistics
from .partitions import Partition, best_alignment, overlap_counts, planted_partition
from .sbm import BlockModelParams, Graph

REGION_NAMES = {K.CLOSE: "close", K.BETWEEN: "between", K.FAR: "far"}
_CHUNK = 1024
_MAX_K = 8  # the compiled kernels re-solve alignments over the k! permutation table


# ---------------------------------------------------------------- thresholds

def default_nu(k: int) -> float:
    """Midpoint of the admissible interval (1/(2(k-1)), 1/k)."""
    return 0.5 * (h_minimiser(k) + 1.0 / k)


def mirror_distance(nu_prime: float, k: int) -> float:
    """The other root of h(d) = h(nu_prime); h is symmetric about 1/(2(k-1))."""
    return 2.0 * h_minimiser(k) - nu_prime


@dataclass(frozen=True)
class OgpParams:
    """Overlap-gap parameters.

    ``nu1, nu2`` bound the forbidden band; ``nu_close`` is the left root of
    h(d) = h(nu_prime) and bounds the near region used for the chain.
    ``c1, c2`` are filled in from measurements by ``ogp_certificate``.
    """

    k: int
    prefactor: float
    mu: float
    nu: float
    nu_prime: float
    nu_close: float
    nu1: float
    nu2: float
    delta: float | None = None
    delta_prime: float | None = None
    c1: float | None = None
    c2: float | None = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ParameterError(f"mu must be positive, got {self.mu}")
        if not 0 <= self.nu1 < self.nu2:
            raise ParameterError(f"need 0 <= nu1 < nu2, got {self.nu1}, {self.nu2}")

    @property
    def threshold(self) -> float:
        """Score above which a partition counts as near-optimal: prefactor*h(0) - mu."""
        return self.prefactor * h_curve(0.0, self.k) - self.mu

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__} | {"threshold": self.threshold}


def ogp_params(model: BlockModelParams, nu: float | None = None) -> OgpParams:
    """Parameters built from nu in (1/(2(k-1)), 1/k).

    nu' = 2nu/3 + 1/(3k) sits between nu and 1/k; mu = prefactor*(h(0) - h(nu'))
    puts the threshold at the mean-field score of distance nu'. The band is
    (1/(2(k-1)), nu).
    """
    k = model.k
    nu = default_nu(k) if nu is None else float(nu)
    if not h_minimiser(k) < nu < 1.0 / k:
        raise ParameterError(f"nu must lie in ({h_minimiser(k)}, {1.0 / k}), got {nu}")
    nu_prime = 2.0 * nu / 3.0 + 1.0 / (3.0 * k)
    pref = model.prefactor
    mu = pref * (h_curve(0.0, k) - h_curve(nu_prime, k))
    return OgpParams(k=k, prefactor=pref, mu=mu, nu=nu, nu_prime=nu_prime,
                     nu_close=mirror_distance(nu_prime, k), nu1=h_minimiser(k), nu2=nu)


def beta_rule(arg: float, k: int) -> float:
    """Smallest beta with log k - beta*arg <= -1."""
    if not arg > 0:
        raise ParameterError(f"beta rule needs a positive gap, got {arg}")
    return (math.log(k) + 1.0) / arg


# ---------------------------------------------------------------- traces

@dataclass(frozen=True)
class ChainConfig:
    beta: float
    max_steps: int
    nu1: float
    nu2: float
    sample_every: int = 1000
    seed: int = 0
    kernel: str = "heat-bath"   # or "metropolis": a different chain with the Gibbs law

    def __post_init__(self):
        if self.beta < 0:
            raise ParameterError(f"beta must be >= 0, got {self.beta}")
        if self.max_steps < 1:
            raise ParameterError("max_steps must be positive")
        if self.sample_every < 1:
            raise ParameterError("sample_every must be positive")
        if not 0 <= self.nu1 < self.nu2:
            raise ParameterError(f"need 0 <= nu1 < nu2, got {self.nu1}, {self.nu2}")
        if self.kernel not in ("heat-bath", "metropolis"):
            raise ParameterError(f"unknown kernel {self.kernel!r}")

    @property
    def kernel_code(self) -> int:
        return K.HEAT_BATH if self.kernel == "heat-bath" else K.METROPOLIS


@dataclass(frozen=True)
class ChainTrace:
    steps: np.ndarray
    modularity: np.ndarray
    distance: np.ndarray
    region: np.ndarray
    tau: int | None            # None: the close region was never entered
    first_exit: int | None     # first step outside the close region, None if never
    terminal: Partition
    seed: int | None
    wall_clock: float
    visits: np.ndarray | None = field(default=None, repr=False)

    @property
    def final_distance(self) -> float:
        return float(self.distance[-1])

    @property
    def final_modularity(self) -> float:
        return float(self.modularity[-1])

    def rows(self):
        for s, q, d, r in zip(self.steps, self.modularity, self.distance, self.region):
            yield int(s), float(q), float(d), REGION_NAMES[int(r)]


def _region(dist: float, nu1: float, nu2: float) -> int:
    return int(K.region_of(dist, nu1, nu2))


def _state(graph: Graph, start: Partition, planted: Partition) -> MoveState:
    if start.k > _MAX_K:
        raise ParameterError(f"compiled dynamics support k <= {_MAX_K}")
    if start.k != planted.k:
        raise ParameterError("start and planted partitions must declare the same k")
    return MoveState(graph, start, planted)


def _check_state(state: MoveState) -> None:
    """Full re-solve of alignment and score; raises on any drift."""
    counts = overlap_counts(state.partition(), state.planted)
    if not np.array_equal(counts, state.overlap):
        raise InvariantError("tracked overlap counts drifted")
    best, _ = best_alignment(counts)
    if best != int(state.best[0]):
        raise InvariantError(f"tracked alignment {state.best[0]} != re-solved {best}")
    internal, vol = part_statistics(state.graph, state.labels, state.k)
    if not (np.array_equal(internal, state.internal) and np.array_equal(vol, state.vol)):
        raise InvariantError("tracked part statistics drifted")


# ---------------------------------------------------------------- greedy

def greedy_run(graph: Graph, start: Partition, planted: Partition,
               nu1: float | None = None, nu2: float | None = None,
               max_steps: int | None = None) -> ChainTrace:
    """Best-improvement ascent; every step is recorded.

    Improvements are compared as exact integers (delta * 4m^2), so the run
    is deterministic and terminates. Ties go to the smallest (node, label).
    """
    t0 = time.perf_counter()
    state = _state(graph, start, planted)
    k, n = start.k, graph.n
    if nu1 is None or nu2 is None:
        nu = default_nu(k)
        nu1 = mirror_distance(2 * nu / 3 + 1 / (3 * k), k) if nu1 is None else nu1
        nu2 = nu if nu2 is None else nu2
    budget = 50 * n * k if max_steps is None else int(max_steps)
    nodes = np.zeros(budget, dtype=np.int64)
    labels = np.zeros(budget, dtype=np.int64)
    nums = np.zeros(budget, dtype=np.int64)
    bests = np.zeros(budget, dtype=np.int64)
    q0 = state.score
    d0 = state.distance()
    taken = K.greedy_steps(*state.kernel_arrays(), budget, nodes, labels, nums, bests)
    _check_state(state)
    m = graph.m
    q = q0 + np.concatenate([[0], np.cumsum(nums[:taken])]) / (4.0 * m * m)
    if abs(q[-1] - state.score) > 1e-9:
        raise InvariantError(f"greedy score drift: {q[-1]} vs {state.score}")
    q[-1] = state.score
    if np.any(np.diff(q) <= 0):
        raise InvariantError("greedy step did not increase modularity")
    dist = np.concatenate([[d0], 1.0 - bests[:taken] / n])
    region = np.array([_region(x, nu1, nu2) for x in dist], dtype=np.int64)
    inside = np.flatnonzero(region == K.CLOSE)
    outside = np.flatnonzero(region != K.CLOSE)
    return ChainTrace(steps=np.arange(taken + 1), modularity=q, distance=dist, region=region,
                      tau=int(inside[0]) if len(inside) else None,
                      first_exit=int(outside[0]) if len(outside) else None,
                      terminal=state.partition(),
                      seed=None, wall_clock=time.perf_counter() - t0)


# ---------------------------------------------------------------- the chain

def kernel_probabilities(state: MoveState, beta: float) -> np.ndarray:
    """(n, k) probabilities of each single-node relabelling; zero on current labels."""
    n = state.graph.n
    x = beta * n * state.all_deltas()
    own = np.zeros_like(x, dtype=bool)
    own[np.arange(n), state.labels] = True
    x[own] = -np.inf
    x -= x.max()
    w = np.exp(x)
    return w / w.sum()


def mcmc_step(state: MoveState, cfg: ChainConfig, rng: np.random.Generator) -> tuple[int, int]:
    """Advance ``state`` by one step of the chain; returns the applied (node, label)."""
    n, k = state.graph.n, state.k
    u1, u2 = rng.random(), rng.random()
    if cfg.kernel == "heat-bath":
        buf = np.empty(n * k)
        idx = int(K.heat_bath_choice(state.labels, state.counts, state.vol, state.degrees,
                                     state.m, cfg.beta * n, u1, buf))
        node, label = divmod(idx, k)
    else:
        pick = min(int(u1 * n * (k - 1)), n * (k - 1) - 1)
        node, label = divmod(pick, k - 1)
        if label >= state.labels[node]:
            label += 1
        x = cfg.beta * n * state.move_delta(node, label)
        if not (x >= 0 or u2 < math.exp(x)):
            return node, int(state.labels[node])
    state.apply_move(node, label)
    return node, label


def mcmc_run(graph: Graph, start: Partition, planted: Partition, cfg: ChainConfig,
             track_occupation: bool = False) -> ChainTrace:
    """Run the chain for ``cfg.max_steps`` steps, recording tau exactly.

    Uniforms come from ``np.random.default_rng(cfg.seed)`` in blocks of 1024
    steps; after every block the alignment and part statistics are
    re-solved from scratch and compared with the tracked values.
    """
    t0 = time.perf_counter()
    state = _state(graph, start, planted)
    n, k = graph.n, start.k
    if cfg.nu2 > 1.0 - 1.0 / k + 1e-12:
        raise ParameterError(f"nu2 must be at most 1 - 1/k = {1 - 1 / k}")
    rng = np.random.default_rng(cfg.seed)
    arrays = state.kernel_arrays()
    buf = np.empty(n * k)
    if track_occupation:
        if k ** n > 10 ** 7:
            raise ParameterError("occupation tracking needs k^n <= 1e7")
        powers = k ** np.arange(n, dtype=np.int64)
        code = np.array([int(np.dot(state.labels, powers))], dtype=np.int64)
        visits = np.zeros(k ** n, dtype=np.int64)
    else:
        powers = np.zeros(0, dtype=np.int64)
        code = np.zeros(1, dtype=np.int64)
        visits = np.zeros(0, dtype=np.int64)

    d0 = state.distance()
    r0 = _region(d0, cfg.nu1, cfg.nu2)
    tau = np.array([0 if r0 == K.CLOSE else -1], dtype=np.int64)
    exit_step = np.array([-1 if r0 == K.CLOSE else 0], dtype=np.int64)
    steps, qs, ds, regs = [np.array([0])], [np.array([state.score])], [np.array([d0])], [np.array([r0])]
    cap = _CHUNK // cfg.sample_every + 2
    o_step = np.empty(cap, dtype=np.int64)
    o_q = np.empty(cap)
    o_d = np.empty(cap)
    o_r = np.empty(cap, dtype=np.int64)
    done = 0
    while done < cfg.max_steps:
        size = min(_CHUNK, cfg.max_steps - done)
        uniforms = rng.random((size, 2))
        w = K.run_chain(*arrays, cfg.kernel_code, cfg.beta * n, uniforms, cfg.nu1, cfg.nu2,
                        done, tau, exit_step, cfg.sample_every, o_step, o_q, o_d, o_r, buf,
                        code, powers, visits)
        steps.append(o_step[:w].copy())
        qs.append(o_q[:w].copy())
        ds.append(o_d[:w].copy())
        regs.append(o_r[:w].copy())
        done += size
        _check_state(state)
    if steps[-1].size == 0 or steps[-1][-1] != done:
        steps.append(np.array([done]))
        qs.append(np.array([state.score]))
        ds.append(np.array([state.distance()]))
        regs.append(np.array([_region(state.distance(), cfg.nu1, cfg.nu2)]))
    q_end = modularity(graph, state.partition()).score
    if abs(q_end - state.score) > 1e-9:
        raise InvariantError(f"chain score drift: {state.score} vs {q_end}")
    return ChainTrace(steps=np.concatenate(steps), modularity=np.concatenate(qs),
                      distance=np.concatenate(ds), region=np.concatenate(regs),
                      tau=int(tau[0]) if tau[0] >= 0 else None,
                      first_exit=int(exit_step[0]) if exit_step[0] >= 0 else None,
                      terminal=state.partition(), seed=cfg.seed, wall_clock=time.perf_counter() - t0,
                      visits=visits if track_occupation else None)


# ---------------------------------------------------------------- exact Gibbs

@dataclass(frozen=True)
class GibbsTable:
    """All k^n labellings (code = sum_u label_u k^u) with weights exp(beta n q)."""

    n: int
    k: int
    beta: float
    modularity: np.ndarray
    distances: np.ndarray
    log_weights: np.ndarray = field(repr=False)
    log_z: float = 0.0

    @property
    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_weights - self.log_z)

    @property
    def z(self) -> float:
        return math.exp(self.log_z)

    def labels(self, code: int) -> np.ndarray:
        return (code // self.k ** np.arange(self.n)) % self.k

    def mass_within(self, zeta: float) -> float:
        """Gibbs probability of {d <= zeta}."""
        return float(self.probabilities[self.distances <= zeta + 1e-12].sum())

    def heat_bath_stationary(self) -> np.ndarray:
        """Stationary law of the heat-bath chain: proportional to w(A) * sum_{B ~ A} w(B).

        The chain moves A -> B with probability w(B) / Z_A, Z_A summing over the
        n(k-1) neighbours of A, so it is reversible for w(A) Z_A; this equals
        the Gibbs law only where Z_A is constant.
        """
        n, k = self.n, self.k
        codes = np.arange(k ** n)
        lw = self.log_weights
        top = lw.max()
        w = np.exp(lw - top)
        zsum = np.zeros(k ** n)
        for u in range(n):
            digit = (codes // k ** u) % k
            for shift in range(1, k):
                other = codes + (((digit + shift) % k) - digit) * k ** u
                zsum += w[other]
        pi = w * zsum
        return pi / pi.sum()


def enumerate_labelings(n: int, k: int) -> np.ndarray:
    codes = np.arange(k ** n, dtype=np.int64)
    return ((codes[:, None] // (k ** np.arange(n))[None, :]) % k).astype(np.int64)


def exact_gibbs(graph: Graph, k: int, beta: float, planted: Partition | None = None,
                budget: int = 10 ** 6) -> GibbsTable:
    n = graph.n
    if k ** n > budget:
        raise ParameterError(f"state space k^n = {k ** n} exceeds the budget {budget}")
    if beta < 0:
        raise ParameterError("beta must be >= 0")
    if graph.m == 0:
        raise ParameterError("graph has no edges")
    planted = planted_partition(n, k) if planted is None else planted
    lab = enumerate_labelings(n, k)
    e = graph.edges
    m = graph.m
    coverage = np.count_nonzero(lab[:, e[:, 0]] == lab[:, e[:, 1]], axis=1) / m
    deg = graph.degrees.astype(np.float64)
    tax = np.zeros(len(lab))
    for a in range(k):
        vol = (lab == a).astype(np.float64) @ deg
        tax += vol ** 2
    q = coverage - tax / (2.0 * m) ** 2
    # overlap counts for every labelling, then the best alignment over k! permutations
    over = np.zeros((len(lab), k, k), dtype=np.int64)
    for j in range(k):
        cols = lab[:, planted.labels == j]
        for a in range(k):
            over[:, a, j] = np.count_nonzero(cols == a, axis=1)
    from .partitions import permutation_table
    perms = permutation_table(k)
    best = over[:, perms, np.arange(k)].sum(axis=2).max(axis=1)
    dist = 1.0 - best / n
    lw = beta * n * q
    top = lw.max()
    log_z = float(top + math.log(np.exp(lw - top).sum()))
    return GibbsTable(n=n, k=k, beta=beta, modularity=q, distances=dist, log_weights=lw, log_z=log_z)


def total_variation(p: np.ndarray, r: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(r)).sum())


# ---------------------------------------------------------------- OGP certificate

@dataclass(frozen=True)
class ProbeResult:
    name: str
    distance: float
    modularity: float
    above: bool
    cls: str            # close | band | far for the certificate band, "below" otherwise


@dataclass(frozen=True)
class OgpReport:
    params: OgpParams
    threshold: float
    probes: list[ProbeResult]
    band_violations: list[ProbeResult]
    wide_band_violations: list[ProbeResult]   # above threshold in (nu_close, nu)
    witness: ProbeResult | None
    q_star: float
    c1: float | None
    c2: float | None

    @property
    def ok(self) -> bool:
        return not self.band_violations and self.witness is not None


def standard_probes(graph: Graph, planted: Partition, d_grid, greedy: bool = True,
                    seed: int = 0) -> list[tuple[str, Partition]]:
    """Interpolated optimisers for every (i, j) at each d, decoys, and greedy endpoints.

    Greedy runs start from the planted partition, each decoy, the (0, 1)
    interpolation at every d, and one balanced random partition.
    """
    from .partitions import balanced_random_partition, decoy, interpolated_partition
    k = planted.k
    out: list[tuple[str, Partition]] = []
    starts: list[tuple[str, Partition]] = [("planted", planted)]
    for d in d_grid:
        t = float(d) * k
        if t > 1 + 1e-12:
            raise ParameterError(f"probe distances must lie in [0, 1/k], got {d}")
        for i in range(k):
            for j in range(k):
                if i != j:
                    part = interpolated_partition(planted, i, j, min(t, 1.0))
                    out.append((f"interp({i},{j},d={d:.4f})", part))
                    if i == 0 and j == 1:
                        starts.append((f"interp(0,1,d={d:.4f})", part))
    for i in range(k):
        for j in range(k):
            if i != j:
                part = decoy(planted, i, j)
                out.append((f"decoy({i},{j})", part))
                starts.append((f"decoy({i},{j})", part))
    starts.append(("random", balanced_random_partition(graph.n, k, seed)))
    if greedy:
        for name, part in starts:
            out.append((f"greedy<{name}>", greedy_run(graph, part, planted).terminal))
    return out


def ogp_certificate(graph: Graph, planted: Partition, params: OgpParams,
                    probes: list[tuple[str, Partition]]) -> OgpReport:
    """Classify probes above the threshold and measure the region gaps.

    A probe above threshold is 'close' for d <= nu1, 'band' for nu1 < d < nu2
    (a violation) and 'far' for d >= nu2. The gaps use the chain regions
    {d <= nu_close}, (nu_close, nu2), {d >= nu2}: c1 = q* - max far score and
    c2 = max far score - max between score, with q* the best probe score.
    """
    from .partitions import distance as part_distance
    thr = params.threshold
    results = []
    for name, part in probes:
        d = part_distance(part, planted).distance
        q = modularity(graph, part).score
        above = q >= thr
        if not above:
            cls = "below"
        elif d <= params.nu1 + 1e-12:
            cls = "close"
        elif d < params.nu2 - 1e-12:
            cls = "band"
        else:
            cls = "far"
        results.append(ProbeResult(name, d, q, bool(above), cls))
    band = [r for r in results if r.cls == "band"]
    wide = [r for r in results if r.above and params.nu_close + 1e-12 < r.distance < params.nu2 - 1e-12]
    far = [r for r in results if r.cls == "far"]
    witness = None
    if far:
        decoys = [r for r in far if r.name.startswith("decoy")]
        witness = max(decoys or far, key=lambda r: r.modularity)
    q_star = max(r.modularity for r in results)
    far_all = [r.modularity for r in results if r.distance >= params.nu2 - 1e-12]
    btw_all = [r.modularity for r in results
               if params.nu_close + 1e-12 < r.distance < params.nu2 - 1e-12]
    c1 = q_star - max(far_all) if far_all else None
    c2 = max(far_all) - max(btw_all) if far_all and btw_all else None
    measured = replace(params, c1=c1, c2=c2)
    return OgpReport(measured, thr, results, band, wide, witness, q_star, c1, c2)
