"""Stochastic block model instances: random graphs, the mean-field weighted graph, edge-list I/O."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateGraphError, GraphFormatError, ParameterError
from .partitions import Partition, planted_partition


@dataclass(frozen=True)
class BlockModelParams:
    """SBM parameters with ``p = omega*a/n`` and ``q = omega*b/n``."""

    n: int
    k: int
    a: float
    b: float
    omega: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n}")
        if int(self.k) != self.k or self.k < 2:
            raise ParameterError(f"k must be an integer >= 2, got {self.k}")
        if self.n < self.k:
            raise ParameterError(f"need n >= k, got n={self.n}, k={self.k}")
        if self.omega <= 0:
            raise ParameterError(f"omega must be positive, got {self.omega}")
        # b = 0 is admitted so that the deterministic q = 0 extreme can be built
        if not (self.a > self.b >= 0):
            raise ParameterError(f"need a > b >= 0, got a={self.a}, b={self.b}")
        if self.p > 1:
            raise ParameterError(f"derived p = {self.p} exceeds 1")

    @classmethod
    def from_probabilities(cls, n: int, k: int, p: float, q: float) -> "BlockModelParams":
        # omega = n makes a and b equal to the edge probabilities
        return cls(n=n, k=k, a=p, b=q, omega=n)

    @property
    def p(self) -> float:
        return self.omega * self.a / self.n

    @property
    def q(self) -> float:
        return self.omega * self.b / self.n

    @property
    def prefactor(self) -> float:
        """(a-b)/(a+(k-1)b), the scale between g(X)/k^2 and modularity."""
        return (self.a - self.b) / (self.a + (self.k - 1) * self.b)

    def to_dict(self) -> dict:
        return {"n": self.n, "k": self.k, "a": self.a, "b": self.b, "omega": self.omega}


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph on nodes ``0..n-1``.

    ``edges`` is an (m, 2) int64 array with ``u < v`` in every row, sorted
    lexicographically. Adjacency is kept in CSR form (``indptr``, ``indices``).
    """

    n: int
    edges: np.ndarray
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    degrees: np.ndarray = field(repr=False)

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise ValueError("edge endpoint out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise ValueError("self-loops are not allowed")
        e = np.sort(e, axis=1)
        order = np.lexsort((e[:, 1], e[:, 0]))
        e = e[order]
        if len(e) > 1 and np.any(np.all(e[1:] == e[:-1], axis=1)):
            raise ValueError("duplicate edges are not allowed")
        degrees = np.bincount(e.ravel(), minlength=n).astype(np.int64)
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        order = np.argsort(src, kind="stable")
        indices = dst[order].astype(np.int64)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(degrees, out=indptr[1:])
        return cls(n=int(n), edges=_readonly(e), indptr=_readonly(indptr),
                   indices=_readonly(indices), degrees=_readonly(degrees))

    @property
    def m(self) -> int:
        return int(len(self.edges))

    @property
    def volume(self) -> int:
        return 2 * self.m

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.edges}

    def without_edges(self, removed) -> "Graph":
        """Copy of the graph with the given (u, v) pairs deleted."""
        drop = {tuple(sorted((int(u), int(v)))) for u, v in removed}
        missing = drop - self.edge_set()
        if missing:
            raise ValueError(f"edges not in graph: {sorted(missing)[:3]}")
        keep = [(u, v) for u, v in self.edge_set() if (u, v) not in drop]
        return Graph.from_edges(self.n, keep)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash((self.n, self.edges.tobytes()))


# ---------------------------------------------------------------- generation

def _geometric_positions(rng: np.random.Generator, total: int, p: float) -> np.ndarray:
    """Indices in ``[0, total)`` of successes of ``total`` Bernoulli(p) trials."""
    if total <= 0 or p <= 0.0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(total, dtype=np.int64)
    chunks = []
    pos = -1
    batch = max(16, int(total * p * 1.1) + 16)
    while True:
        gaps = rng.geometric(p, size=batch)
        # for tiny p the draws can overflow int64; any gap past the end is equivalent
        gaps[(gaps <= 0) | (gaps > total)] = total + 1
        cand = pos + np.cumsum(gaps)
        if cand[-1] >= total:
            chunks.append(cand[cand < total])
            break
        chunks.append(cand)
        pos = int(cand[-1])
        batch = max(16, int((total - pos) * p * 1.1) + 16)
    return np.concatenate(chunks).astype(np.int64)


def _triangle_decode(idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map ``idx = j(j-1)/2 + i`` (``i < j``) back to ``(i, j)``."""
    j = np.floor((1.0 + np.sqrt(1.0 + 8.0 * idx.astype(np.float64))) / 2.0).astype(np.int64)
    # float rounding can be off by one for large idx
    j -= (j * (j - 1) // 2) > idx
    j += ((j + 1) * j // 2) <= idx
    i = idx - j * (j - 1) // 2
    return i, j


def generate_sbm(params: BlockModelParams, seed: int) -> tuple[Graph, Partition]:
    """Sample G(n, k, p, q) with the contiguous planted partition.

    Each block pair is sampled by geometric skipping over its pair index
    space, so the cost is O(m + k^2) rather than O(n^2).
    """
    planted = planted_partition(params.n, params.k)
    sizes = planted.part_sizes
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    rng = np.random.default_rng(seed)
    parts = []
    for r in range(params.k):
        for s in range(r, params.k):
            if r == s:
                total = int(sizes[r]) * (int(sizes[r]) - 1) // 2
                hits = _geometric_positions(rng, total, params.p)
                i, j = _triangle_decode(hits)
                u, v = offsets[r] + i, offsets[r] + j
            else:
                total = int(sizes[r]) * int(sizes[s])
                hits = _geometric_positions(rng, total, params.q)
                u = offsets[r] + hits // sizes[s]
                v = offsets[s] + hits % sizes[s]
            parts.append(np.stack([u, v], axis=1))
    graph = Graph.from_edges(params.n, np.concatenate(parts))
    if graph.m == 0:
        raise DegenerateGraphError(
            f"sampled graph has no edges (params={params.to_dict()}, seed={seed})")
    return graph, planted


def generate_sbm_dense(params: BlockModelParams, seed: int) -> tuple[Graph, Partition]:
    """Reference O(n^2) Bernoulli-per-pair sampler (same law, different stream)."""
    planted = planted_partition(params.n, params.k)
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(params.n, 1)
    same = planted.labels[iu] == planted.labels[ju]
    prob = np.where(same, params.p, params.q)
    keep = rng.random(len(iu)) < prob
    graph = Graph.from_edges(params.n, np.stack([iu[keep], ju[keep]], axis=1))
    if graph.m == 0:
        raise DegenerateGraphError("sampled graph has no edges")
    return graph, planted


# ---------------------------------------------------------------- mean field

@dataclass(frozen=True)
class WeightedBlockGraph:
    """Deterministic weights w_uv = p inside a planted block, q across blocks, w_uu = 0."""

    params: BlockModelParams
    planted: Partition

    def weight(self, u: int, v: int) -> float:
        if u == v:
            return 0.0
        lab = self.planted.labels
        return self.params.p if lab[u] == lab[v] else self.params.q

    @property
    def weighted_degree(self) -> float:
        n, k, p, q = self.params.n, self.params.k, self.params.p, self.params.q
        return (n - 1) * q + (n // k - 1) * (p - q)

    @property
    def total_volume(self) -> float:
        return self.params.n * self.weighted_degree

    def volume(self, nodes) -> float:
        return len(np.unique(np.asarray(nodes, dtype=np.int64))) * self.weighted_degree

    def intra_mass(self, nodes) -> float:
        """e_w(A): total weight of pairs inside ``nodes``."""
        nodes = np.unique(np.asarray(nodes, dtype=np.int64))
        counts = np.bincount(self.planted.labels[nodes], minlength=self.params.k)
        return self.mass_from_counts(counts)

    def mass_from_counts(self, counts) -> float:
        counts = np.asarray(counts, dtype=np.float64)
        size = counts.sum()
        p, q = self.params.p, self.params.q
        return q * size * (size - 1) / 2 + (p - q) * float(np.sum(counts * (counts - 1) / 2))


def weighted_block_graph(params: BlockModelParams) -> WeightedBlockGraph:
    if params.n % params.k:
        raise ParameterError(
            f"weighted block graph needs k | n (n={params.n}, k={params.k})")
    return WeightedBlockGraph(params, planted_partition(params.n, params.k))


# ---------------------------------------------------------------- edge lists

def save_graph(graph: Graph, path) -> None:
    lines = [f"{graph.n} {graph.m}"]
    lines += [f"{u} {v}" for u, v in graph.edges]
    Path(path).write_text("\n".join(lines) + "\n")


def load_graph(path) -> Graph:
    text = Path(path).read_text()
    rows = text.splitlines()
    if not rows:
        raise GraphFormatError("empty file", 1)
    header = rows[0].split()
    if len(header) != 2 or not all(tok.lstrip("-").isdigit() for tok in header):
        raise GraphFormatError(f"expected header 'n m', got {rows[0]!r}", 1)
    n, m = int(header[0]), int(header[1])
    if n < 1 or m < 0:
        raise GraphFormatError(f"invalid header values n={n}, m={m}", 1)
    seen: set[tuple[int, int]] = set()
    edges = []
    for lineno, row in enumerate(rows[1:], start=2):
        tok = row.split()
        if not tok:
            continue
        if len(tok) != 2 or not all(t.isdigit() for t in tok):
            raise GraphFormatError(f"malformed edge line {row!r}", lineno)
        u, v = int(tok[0]), int(tok[1])
        if u >= n or v >= n:
            raise GraphFormatError(f"node id out of range for n={n}: {row!r}", lineno)
        if u == v:
            raise GraphFormatError(f"self-loop {row!r}", lineno)
        if u > v:
            raise GraphFormatError(f"expected u < v, got {row!r}", lineno)
        if (u, v) in seen:
            raise GraphFormatError(f"duplicate edge {row!r}", lineno)
        seen.add((u, v))
        edges.append((u, v))
    if len(edges) != m:
        raise GraphFormatError(f"header declares {m} edges, found {len(edges)}", len(rows))
    return Graph.from_edges(n, edges)


def intra_block_density(graph: Graph, planted: Partition, block: int) -> float:
    lab = planted.labels
    e = graph.edges
    inside = np.count_nonzero((lab[e[:, 0]] == block) & (lab[e[:, 1]] == block))
    s = int(planted.part_sizes[block])
    return inside / (s * (s - 1) / 2)

