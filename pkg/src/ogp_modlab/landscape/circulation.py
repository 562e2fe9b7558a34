"""Circulations on the complete digraph over [k] and transfer moves on balanced signatures.

The off-diagonal part of a doubly stochastic matrix is a circulation: the
out-flow of row i (its off-diagonal row sum) equals its in-flow (the
off-diagonal column sum). Decomposing it into weighted directed cycles and
pushing mass along those cycles back onto the diagonal lowers the
off-diagonal mass while raising g.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvariantError, ParameterError
from .polytope import alignment_ok, g_pairwise

_CONSERVATION_TOL = 1e-12
_ZERO = 1e-15


@dataclass(frozen=True)
class Circulation:
    b: np.ndarray

    def __post_init__(self):
        b = np.array(self.b, dtype=np.float64)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ParameterError("circulation must be a square matrix")
        if np.any(np.diag(b) != 0):
            raise ParameterError("circulation must have a zero diagonal")
        if np.any(b < 0):
            raise ParameterError("circulation entries must be non-negative")
        imbalance = np.abs(b.sum(axis=1) - b.sum(axis=0)).max()
        if imbalance > _CONSERVATION_TOL:
            raise ParameterError(f"flow conservation violated by {imbalance:.3g}")
        b.flags.writeable = False
        object.__setattr__(self, "b", b)

    @property
    def k(self) -> int:
        return self.b.shape[0]

    @classmethod
    def from_signature(cls, x) -> "Circulation":
        x = np.array(x, dtype=np.float64)
        np.fill_diagonal(x, 0.0)
        return cls(x)


@dataclass(frozen=True)
class CycleDecomposition:
    cycles: list[tuple[int, ...]]   # node sequence; edges (c[0],c[1]), ..., (c[-1],c[0])
    weights: list[float]

    def reconstruct(self, k: int) -> np.ndarray:
        out = np.zeros((k, k))
        for cyc, w in zip(self.cycles, self.weights):
            for i, j in cycle_edges(cyc):
                out[i, j] += w
        return out


def cycle_edges(cycle) -> list[tuple[int, int]]:
    c = list(cycle)
    return [(c[s], c[(s + 1) % len(c)]) for s in range(len(c))]


def cycle_decompose(c: Circulation) -> CycleDecomposition:
    """Peel off simple cycles: walk along positive entries until a node repeats.

    Each round zeroes at least one entry (the cycle's minimum), so there are
    at most as many cycles as positive entries.
    """
    b = c.b.copy()
    k = c.k
    support = int(np.count_nonzero(c.b > 0))
    cycles, weights = [], []
    while True:
        out_flow = b.sum(axis=1)
        starts = np.flatnonzero(out_flow > _ZERO * max(1.0, float(c.b.max())))
        if not len(starts):
            break
        node = int(starts[0])
        path, seen = [node], {node: 0}
        while True:
            nxt = int(np.argmax(b[node]))
            if b[node, nxt] <= 0:
                raise InvariantError("walk reached a node without out-flow")
            if nxt in seen:
                cyc = tuple(path[seen[nxt]:])
                break
            seen[nxt] = len(path)
            path.append(nxt)
            node = nxt
        edges = cycle_edges(cyc)
        w = min(b[i, j] for i, j in edges)
        for i, j in edges:
            b[i, j] -= w
        # the minimum edge is cleared exactly; round off tiny float residue
        b[np.abs(b) <= _ZERO * max(1.0, float(c.b.max()))] = 0.0
        cycles.append(cyc)
        weights.append(float(w))
        if len(cycles) > support:
            raise InvariantError("more cycles than positive entries")
    dec = CycleDecomposition(cycles, weights)
    err = np.abs(dec.reconstruct(k) - c.b).max() if k else 0.0
    if err > 1e-10:
        raise InvariantError(f"cycle decomposition reconstructs with error {err:.3g}")
    return dec


def _is_balanced(x: np.ndarray, tol: float = 1e-9) -> bool:
    return (np.all(x >= -tol) and np.allclose(x.sum(axis=0), 1.0, atol=tol)
            and np.allclose(x.sum(axis=1), 1.0, atol=tol))


def off_diagonal_mass(x: np.ndarray) -> float:
    x = np.asarray(x)
    return float(x.sum() - np.trace(x))


def transfer_move(x, cycle, eps: float) -> np.ndarray:
    """Move eps from every cycle edge (i, j) onto the diagonal entries of the cycle's nodes."""
    x = np.array(getattr(x, "x", x), dtype=np.float64)
    if not _is_balanced(x):
        raise ParameterError("transfer moves need a doubly stochastic signature")
    if not alignment_ok(x):
        raise ParameterError("signature violates the identity-alignment constraint")
    edges = cycle_edges(cycle)
    if len(edges) < 2 or len(set(cycle)) != len(cycle):
        raise ParameterError("cycle must be simple with at least two nodes")
    if not eps > 0:
        raise ParameterError("eps must be positive")
    room = min(x[i, j] for i, j in edges)
    if eps > room + 1e-15:
        raise ParameterError(f"eps {eps} exceeds the smallest cycle entry {room}")
    out = x.copy()
    for i, j in edges:
        out[i, j] = 0.0 if eps >= x[i, j] else x[i, j] - eps
    for i in cycle:
        out[i, i] += eps
    drop = off_diagonal_mass(x) - off_diagonal_mass(out)
    if abs(drop - len(edges) * eps) > 1e-12:
        raise InvariantError(f"off-diagonal mass dropped by {drop}, expected {len(edges) * eps}")
    if not g_pairwise(out) > g_pairwise(x):
        raise InvariantError("transfer move did not increase g")
    return out


def balanced_max_descent(x, t1: float) -> np.ndarray:
    """Lower the off-diagonal mass of a balanced signature to ``t1`` by transfer moves.

    The off-diagonal circulation is decomposed into cycles C_1, C_2, ...;
    full moves eps_l = w_l are applied along a prefix of cycles and the last
    one is cut short so that sum_l eps_l |C_l| = t2 - t1.
    """
    x = np.array(getattr(x, "x", x), dtype=np.float64)
    if t1 < 0:
        raise ParameterError(f"target mass must be non-negative, got {t1}")
    t2 = off_diagonal_mass(x)
    if t1 > t2 + 1e-12:
        raise ParameterError(f"target mass {t1} exceeds the current mass {t2}")
    if abs(t2 - t1) <= 1e-15:
        return x
    dec = cycle_decompose(Circulation.from_signature(x))
    need = t2 - t1
    out = x
    for cyc, w in zip(dec.cycles, dec.weights):
        if need <= 1e-15:
            break
        eps = min(w, need / len(cyc))
        out = transfer_move(out, cyc, eps)
        need -= eps * len(cyc)
    if abs(off_diagonal_mass(out) - t1) > 1e-10:
        raise InvariantError("descent missed the target mass")
    return out


def random_circulation(k: int, rng: np.random.Generator, n_cycles: int | None = None) -> Circulation:
    """Sum of random weighted simple cycles (every circulation has this form)."""
    if k < 2:
        raise ParameterError("need k >= 2")
    n_cycles = int(rng.integers(1, 2 * k + 1)) if n_cycles is None else n_cycles
    b = np.zeros((k, k))
    for _ in range(n_cycles):
        length = int(rng.integers(2, k + 1))
        nodes = rng.choice(k, size=length, replace=False)
        w = float(rng.random())
        for i, j in cycle_edges(nodes):
            b[i, j] += w
    return Circulation(b)
