"""Modularity scores, incremental single-node moves, fattening and edge-removal robustness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvariantError, ParameterError, UndefinedModularityError
from .landscape.polytope import g_of_signature
from .partitions import Partition, Signature, best_alignment, overlap_counts, permutation_table
from .sbm import BlockModelParams, Graph, WeightedBlockGraph


@dataclass(frozen=True)
class ModularityBreakdown:
    score: float
    coverage: float
    degree_tax: float


def _require_edges(graph: Graph) -> None:
    if graph.m == 0:
        raise UndefinedModularityError("modularity is undefined on a graph without edges")


def part_statistics(graph: Graph, labels: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-part internal edge counts e(A) and degree volumes vol(A)."""
    e = graph.edges
    lu, lv = labels[e[:, 0]], labels[e[:, 1]]
    internal = np.bincount(lu[lu == lv], minlength=k).astype(np.int64)
    vol = np.bincount(labels, weights=graph.degrees, minlength=k).astype(np.int64)
    return internal, vol


def _breakdown(internal, vol, m: int) -> ModularityBreakdown:
    coverage = float(np.sum(internal)) / m
    tax = float(np.sum(np.asarray(vol, dtype=np.float64) ** 2)) / float(2 * m) ** 2
    return ModularityBreakdown(coverage - tax, coverage, tax)


def modularity(graph: Graph, part: Partition) -> ModularityBreakdown:
    _require_edges(graph)
    if part.n != graph.n:
        raise ParameterError(f"partition has {part.n} nodes, graph has {graph.n}")
    internal, vol = part_statistics(graph, part.labels, part.k)
    return _breakdown(internal, vol, graph.m)


def modularity_naive(graph: Graph, part: Partition) -> float:
    """Pairwise double sum (1/2m) sum_{u,v same part} (A_uv - d_u d_v / 2m); O(n^2) oracle."""
    _require_edges(graph)
    n, two_m = graph.n, 2.0 * graph.m
    adj = np.zeros((n, n))
    adj[graph.edges[:, 0], graph.edges[:, 1]] = 1.0
    adj += adj.T
    d = graph.degrees.astype(np.float64)
    same = part.labels[:, None] == part.labels[None, :]
    return float(np.sum((adj - np.outer(d, d) / two_m)[same]) / two_m)


# ---------------------------------------------------------------- mean field

def weighted_modularity(wgraph: WeightedBlockGraph, part: Partition) -> ModularityBreakdown:
    """Exact modularity on the deterministic block weights, in O(k^2) from overlap counts."""
    counts = overlap_counts(part, wgraph.planted)
    total_mass = wgraph.total_volume / 2.0
    if total_mass <= 0:
        raise UndefinedModularityError("weight function is identically zero")
    masses = np.array([wgraph.mass_from_counts(row) for row in counts])
    # every node has the same weighted degree, so vol_w(A)/vol_w(V) = |A|/n
    shares = counts.sum(axis=1) / wgraph.params.n
    coverage = float(masses.sum() / total_mass)
    tax = float(np.sum(shares ** 2))
    return ModularityBreakdown(coverage - tax, coverage, tax)


def weighted_modularity_naive(wgraph: WeightedBlockGraph, part: Partition) -> float:
    """O(n^2) evaluation from the explicit weight matrix (test oracle)."""
    lab = wgraph.planted.labels
    w = np.where(lab[:, None] == lab[None, :], wgraph.params.p, wgraph.params.q)
    np.fill_diagonal(w, 0.0)
    deg = w.sum(axis=1)
    vol = deg.sum()
    same = part.labels[:, None] == part.labels[None, :]
    return float(np.sum((w - np.outer(deg, deg) / vol)[same]) / vol)


def mean_field_prediction(params: BlockModelParams, sig: Signature) -> float:
    return params.prefactor * g_of_signature(sig) / params.k ** 2


# ---------------------------------------------------------------- incremental moves

class MoveState:
    """Mutable partition with cached counts for O(deg + k) moves.

    Caches: per-part internal edges and volumes, the (n, k) matrix of
    neighbour counts per part and, when a planted partition is supplied,
    the part-by-block overlap counts plus the current best alignment.
    All caches are integers, so the cached score is exact up to the final
    floating-point division.
    """

    def __init__(self, graph: Graph, part: Partition, planted: Partition | None = None):
        _require_edges(graph)
        if part.n != graph.n:
            raise ParameterError(f"partition has {part.n} nodes, graph has {graph.n}")
        self.graph = graph
        self.k = part.k
        self.m = graph.m
        self.labels = part.labels.copy()
        self.degrees = graph.degrees
        self.internal, self.vol = part_statistics(graph, self.labels, self.k)
        self.counts = self._neighbour_counts()
        self.planted = planted
        if planted is not None:
            self.planted_labels = planted.labels
            self.overlap = overlap_counts(part, planted).astype(np.int64)
            best, sigma = best_alignment(self.overlap)
            self.sigma = np.array(sigma, dtype=np.int64)
            self.best = np.array([best], dtype=np.int64)

    def _neighbour_counts(self) -> np.ndarray:
        g = self.graph
        rows = np.repeat(np.arange(g.n), g.degrees)
        counts = np.zeros((g.n, self.k), dtype=np.int64)
        np.add.at(counts, (rows, self.labels[g.indices]), 1)
        return counts

    # -- scores
    def breakdown(self) -> ModularityBreakdown:
        return _breakdown(self.internal, self.vol, self.m)

    @property
    def score(self) -> float:
        return self.breakdown().score

    def partition(self) -> Partition:
        return Partition(self.labels.copy(), self.k)

    def distance(self) -> float:
        if self.planted is None:
            raise ParameterError("distance tracking needs the planted partition")
        return 1.0 - int(self.best[0]) / self.graph.n

    # -- moves
    def _check(self, node: int, label: int) -> None:
        if not 0 <= node < self.graph.n:
            raise ParameterError(f"node {node} out of range")
        if not 0 <= label < self.k:
            raise ParameterError(f"label {label} out of range")

    def move_delta(self, node: int, label: int) -> float:
        self._check(node, label)
        a = self.labels[node]
        if a == label:
            return 0.0
        d = float(self.degrees[node])
        two_m = 2.0 * self.m
        gain = (self.counts[node, label] - self.counts[node, a]) / self.m
        tax = 2.0 * d * (self.vol[label] - self.vol[a] + d) / two_m ** 2
        return float(gain - tax)

    def all_deltas(self) -> np.ndarray:
        """(n, k) matrix of move_delta for every (node, label); zero on current labels."""
        rows = np.arange(self.graph.n)
        lab = self.labels
        d = self.degrees.astype(np.float64)[:, None]
        own = self.counts[rows, lab][:, None]
        two_m = 2.0 * self.m
        delta = (self.counts - own) / self.m \
            - 2.0 * d * (self.vol[None, :] - self.vol[lab][:, None] + d) / two_m ** 2
        delta[rows, lab] = 0.0
        return delta

    def delta_numerators(self) -> np.ndarray:
        """Exact integers ``all_deltas() * 4 m^2``; own labels hold zero."""
        rows = np.arange(self.graph.n)
        lab = self.labels
        d = self.degrees[:, None]
        own = self.counts[rows, lab][:, None]
        num = 4 * self.m * (self.counts - own) \
            - 2 * d * (self.vol[None, :] - self.vol[lab][:, None] + d)
        num[rows, lab] = 0
        return num

    def kernel_arrays(self) -> tuple:
        """State arrays in the order the compiled kernels take them (shared, not copied)."""
        if self.planted is None:
            raise ParameterError("compiled dynamics need the planted partition")
        g = self.graph
        return (self.labels, self.counts, self.vol, self.internal, g.indptr, g.indices,
                self.degrees, self.m, self.planted_labels, self.overlap, self.sigma,
                self.best, permutation_table(self.k))

    def apply_move(self, node: int, label: int) -> None:
        self._check(node, label)
        a = int(self.labels[node])
        if a == label:
            return
        d = int(self.degrees[node])
        self.internal[a] -= self.counts[node, a]
        self.internal[label] += self.counts[node, label]
        self.vol[a] -= d
        self.vol[label] += d
        self.labels[node] = label
        nbrs = self.graph.neighbors(node)
        np.subtract.at(self.counts[:, a], nbrs, 1)
        np.add.at(self.counts[:, label], nbrs, 1)
        if self.planted is not None:
            self._update_alignment(a, label, int(self.planted_labels[node]))

    def _update_alignment(self, a: int, b: int, j: int) -> None:
        self.overlap[a, j] -= 1
        self.overlap[b, j] += 1
        own = int(self.sigma[j])
        value = int(self.best[0]) - (own == a) + (own == b)
        if value == self.best[0] + 1:
            # a single move raises any alignment by at most one
            self.best[0] = value
            return
        best, sigma = best_alignment(self.overlap)
        self.best[0] = best
        self.sigma[:] = sigma

    def candidate_distances(self) -> np.ndarray:
        """dist[a, b, j]: distance after moving a block-j node from part a to part b."""
        k = self.k
        perms = permutation_table(k)
        cols = np.arange(k)
        base = self.overlap[perms, cols].sum(axis=1)            # (P,)
        own = perms                                             # own[s, j] = sigma_s(j)
        a = np.arange(k)[:, None, None, None]
        b = np.arange(k)[None, :, None, None]
        j = np.arange(k)[None, None, :, None]
        sig_j = own.T[None, None, :, :]                          # (1,1,k,P)
        vals = base[None, None, None, :] - (sig_j == a) + (sig_j == b)
        best = vals.max(axis=3)
        same = np.arange(k)[:, None] == np.arange(k)[None, :]
        best[same] = int(self.best[0])
        return 1.0 - best / self.graph.n

    def verify(self, tol: float = 1e-9) -> None:
        """Recompute every cache from scratch and raise InvariantError on any mismatch."""
        internal, vol = part_statistics(self.graph, self.labels, self.k)
        if not (np.array_equal(internal, self.internal) and np.array_equal(vol, self.vol)):
            raise InvariantError("cached part statistics drifted")
        if not np.array_equal(self._neighbour_counts(), self.counts):
            raise InvariantError("cached neighbour counts drifted")
        fresh = modularity(self.graph, self.partition()).score
        if abs(fresh - self.score) > tol:
            raise InvariantError(f"cached score {self.score} != recomputed {fresh}")
        if self.planted is not None:
            counts = overlap_counts(self.partition(), self.planted)
            if not np.array_equal(counts, self.overlap):
                raise InvariantError("cached overlap counts drifted")
            best, _ = best_alignment(counts)
            if best != int(self.best[0]):
                raise InvariantError(f"tracked alignment {self.best[0]} != re-solved {best}")


def init_move_state(graph: Graph, part: Partition, planted: Partition | None = None) -> MoveState:
    return MoveState(graph, part, planted)


def move_delta(state: MoveState, node: int, new_label: int) -> float:
    return state.move_delta(node, new_label)


def apply_move(state: MoveState, node: int, new_label: int) -> None:
    state.apply_move(node, new_label)


# ---------------------------------------------------------------- fattening

@dataclass(frozen=True)
class FatteningParams:
    eta: float
    zeta: float


def amalgamate_eta_fat(graph: Graph, part: Partition, eta: float) -> tuple[Partition, FatteningParams]:
    """Merge low-volume parts until every nonempty part has vol >= eta * vol(V).

    While two or more parts are eta-small, the smallest is merged into the
    next smallest; a last remaining small part goes into the smallest fat
    part. The loss in modularity is then below both 2*eta and 2*zeta, where
    zeta is the volume fraction of the input's small parts; both bounds are
    checked on return.
    """
    if not 0 < eta <= 1:
        raise ParameterError(f"eta must lie in (0, 1], got {eta}")
    _require_edges(graph)
    total = 2.0 * graph.m
    labels = part.labels.copy()
    _, vol = part_statistics(graph, labels, part.k)
    vol = vol.astype(np.float64)
    sizes = np.bincount(labels, minlength=part.k)
    nonempty = sizes > 0
    small = nonempty & (vol < eta * total)
    zeta = float(vol[small].sum() / total)

    alive = {int(a) for a in np.flatnonzero(nonempty)}
    vol_map = {a: float(vol[a]) for a in alive}
    target = np.arange(part.k)
    while True:
        small_parts = sorted((vol_map[a], a) for a in alive if vol_map[a] < eta * total)
        if not small_parts:
            break
        if len(small_parts) >= 2:
            (_, src), (_, dst) = small_parts[0], small_parts[1]
        else:
            fat = sorted((vol_map[a], a) for a in alive if vol_map[a] >= eta * total)
            src, dst = small_parts[0][1], fat[0][1]
        target[target == src] = dst
        vol_map[dst] += vol_map.pop(src)
        alive.discard(src)
    merged = Partition(target[labels], part.k)

    before = modularity(graph, part).score
    after = modularity(graph, merged).score
    drop = before - after
    _, out_vol = part_statistics(graph, merged.labels, part.k)
    out_sizes = merged.part_sizes
    if np.any((out_sizes > 0) & (out_vol < eta * total)):
        raise InvariantError("amalgamated partition is not eta-fat")
    if not drop < 2 * eta:
        raise InvariantError(f"modularity drop {drop} is not below 2*eta = {2 * eta}")
    if drop > 2 * zeta + 1e-12:
        raise InvariantError(f"modularity drop {drop} exceeds 2*zeta = {2 * zeta}")
    return merged, FatteningParams(eta, zeta)


# ---------------------------------------------------------------- robustness

def robustness_gap(graph: Graph, part: Partition, removed_edges) -> tuple[float, float]:
    """|q(H) - q(H')| for H' = H minus ``removed_edges``, with the bound 2|E0|/|E|."""
    removed = {tuple(sorted((int(u), int(v)))) for u, v in removed_edges}
    if not removed:
        raise ParameterError("removal set must be nonempty")
    if len(removed) >= graph.m:
        raise ParameterError("removal set must be a proper subset of the edges")
    reduced = graph.without_edges(removed)
    delta = abs(modularity(graph, part).score - modularity(reduced, part).score)
    bound = 2.0 * len(removed) / graph.m
    if not delta < bound:
        raise InvariantError(f"edge-removal change {delta} is not below {bound}")
    return delta, bound
