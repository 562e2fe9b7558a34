"""Partitions, signature matrices and the distance to the planted partition."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ParameterError


@dataclass(frozen=True, eq=False)
class Partition:
    """Node labelling into at most ``k`` parts; labels lie in ``0..k-1`` and parts may be empty."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ParameterError("labels must be one-dimensional")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ParameterError(f"labels must lie in 0..{self.k - 1}")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return int(self.labels.size)

    @property
    def part_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def members(self, part: int) -> np.ndarray:
        return np.flatnonzero(self.labels == part)

    def relabel(self, mapping) -> "Partition":
        """Return the partition with part ``i`` renamed to ``mapping[i]``."""
        return Partition(np.asarray(mapping, dtype=np.int64)[self.labels], self.k)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash((self.k, self.labels.tobytes()))


def planted_partition(n: int, k: int) -> Partition:
    """Contiguous blocks; the first ``n mod k`` blocks get the extra node."""
    if n < k:
        raise ParameterError(f"need n >= k, got n={n}, k={k}")
    base, extra = divmod(n, k)
    sizes = [base + (1 if j < extra else 0) for j in range(k)]
    return Partition(np.repeat(np.arange(k), sizes), k)


@dataclass(frozen=True)
class Signature:
    """x[i, j] = |A_i ∩ P_j| / |P_j|; every column sums to one."""

    x: np.ndarray

    @property
    def k(self) -> int:
        return self.x.shape[0]

    def column_sums(self) -> np.ndarray:
        return self.x.sum(axis=0)


@dataclass(frozen=True)
class DistanceReport:
    distance: float
    best_permutation: tuple[int, ...]  # best_permutation[i] = part aligned with planted block i
    aligned_overlap: int


def _check_pair(part: Partition, planted: Partition) -> int:
    if part.n != planted.n:
        raise ParameterError(f"partition sizes differ: {part.n} vs {planted.n}")
    if part.k > planted.k:
        raise ParameterError(f"partition declares {part.k} parts, planted has {planted.k}")
    return planted.k


def overlap_counts(part: Partition, planted: Partition) -> np.ndarray:
    """k x k integer matrix ``c[i, j] = |A_i ∩ P_j|``."""
    k = _check_pair(part, planted)
    flat = np.bincount(part.labels * k + planted.labels, minlength=k * k)
    return flat.reshape(k, k)


def signature(part: Partition, planted: Partition) -> Signature:
    counts = overlap_counts(part, planted)
    sizes = planted.part_sizes
    if np.any(sizes == 0):
        raise ParameterError("planted partition has an empty block")
    return Signature(counts / sizes[None, :])


@lru_cache(maxsize=16)
def permutation_table(k: int) -> np.ndarray:
    """All permutations of ``range(k)`` in lexicographic order, shape (k!, k)."""
    return np.array(list(itertools.permutations(range(k))), dtype=np.int64).reshape(-1, k)


def best_alignment(counts: np.ndarray) -> tuple[int, tuple[int, ...]]:
    """Maximise ``sum_i counts[sigma[i], i]`` over permutations.

    Solved as a linear assignment problem; among optimal permutations the
    lexicographically smallest is returned, found by fixing ``sigma[0],
    sigma[1], ...`` in turn to the smallest value that keeps the optimum.
    """
    c = np.asarray(counts)
    k = c.shape[0]
    score = c.T  # score[i, a]: planted block i aligned with part a

    def solve(rows, cols):
        if not rows:
            return 0
        sub = score[np.ix_(rows, cols)]
        r, cc = linear_sum_assignment(sub, maximize=True)
        return sub[r, cc].sum()

    best = solve(list(range(k)), list(range(k)))
    sigma: list[int] = []
    free = list(range(k))
    acc = 0
    for i in range(k):
        for a in free:
            rest = [x for x in free if x != a]
            if acc + score[i, a] + solve(list(range(i + 1, k)), rest) == best:
                sigma.append(a)
                acc += score[i, a]
                free = rest
                break
    return int(best), tuple(sigma)


def best_alignment_bruteforce(counts: np.ndarray) -> tuple[int, tuple[int, ...]]:
    """Oracle: enumerate all k! permutations (first maximiser in lexicographic order)."""
    c = np.asarray(counts)
    k = c.shape[0]
    best_val, best_perm = None, None
    for perm in itertools.permutations(range(k)):
        val = sum(int(c[perm[i], i]) for i in range(k))
        if best_val is None or val > best_val:
            best_val, best_perm = val, perm
    return best_val, best_perm


def distance(part: Partition, planted: Partition) -> DistanceReport:
    counts = overlap_counts(part, planted)
    overlap, sigma = best_alignment(counts)
    return DistanceReport(1.0 - overlap / part.n, sigma, overlap)


def aligned(part: Partition, planted: Partition) -> Partition:
    """Relabel ``part`` so that its best alignment with ``planted`` is the identity."""
    sigma = distance(part, planted).best_permutation
    mapping = np.empty(planted.k, dtype=np.int64)
    mapping[list(sigma)] = np.arange(planted.k)
    return part.relabel(mapping)


# ---------------------------------------------------------------- special partitions

def decoy(planted: Partition, i: int, j: int) -> Partition:
    """Planted blocks with P_j merged into part i; part j is left empty."""
    k = planted.k
    if not (0 <= i < k and 0 <= j < k):
        raise ParameterError(f"block indices must lie in 0..{k - 1}")
    if i == j:
        raise ParameterError("decoy needs two distinct blocks")
    labels = planted.labels.copy()
    labels[labels == j] = i
    return Partition(labels, k)


def interpolated_partition(planted: Partition, i: int, j: int, t: float,
                           seed: int | None = None) -> Partition:
    """Move ``round(t*|P_j|)`` nodes of block j into part i.

    The lowest-indexed nodes of P_j move unless ``seed`` is given, in which
    case a uniformly random subset of that size moves.
    """
    k = planted.k
    if i == j or not (0 <= i < k and 0 <= j < k):
        raise ParameterError(f"need distinct block indices in 0..{k - 1}, got {i}, {j}")
    if not 0.0 <= t <= 1.0:
        raise ParameterError(f"t must lie in [0, 1], got {t}")
    block = planted.members(j)
    count = int(np.floor(t * len(block) + 0.5))
    if seed is None:
        chosen = block[:count]
    else:
        chosen = np.random.default_rng(seed).choice(block, size=count, replace=False)
    labels = planted.labels.copy()
    labels[chosen] = i
    return Partition(labels, k)


def balanced_random_partition(n: int, k: int, seed: int) -> Partition:
    base = planted_partition(n, k).labels
    return Partition(np.random.default_rng(seed).permutation(base), k)


def uniform_signature_partition(planted: Partition) -> Partition:
    """Split every block into k equal slices, slice i going to part i (all x_ij = 1/k)."""
    k = planted.k
    sizes = planted.part_sizes
    if np.any(sizes % k):
        raise ParameterError("every block size must be divisible by k")
    labels = np.empty(planted.n, dtype=np.int64)
    for j in range(k):
        block = planted.members(j)
        labels[block] = np.repeat(np.arange(k), len(block) // k)
    return Partition(labels, k)


# ---------------------------------------------------------------- files

def save_partition(part: Partition, path) -> None:
    Path(path).write_text("".join(f"{x}\n" for x in part.labels))


def load_partition(path, k: int | None = None) -> Partition:
    labels = []
    for lineno, row in enumerate(Path(path).read_text().splitlines(), start=1):
        row = row.strip()
        if not row:
            continue
        if not row.isdigit():
            raise ParameterError(f"line {lineno}: expected a non-negative integer label, got {row!r}")
        labels.append(int(row))
    if not labels:
        raise ParameterError("partition file is empty")
    kk = max(labels) + 1 if k is None else k
    return Partition(np.array(labels), kk)
