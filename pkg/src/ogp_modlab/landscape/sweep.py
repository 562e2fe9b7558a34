"""Empirical lower bounds on the best modularity at a prescribed distance from the planted partition."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import InvariantError, ParameterError
from ..modularity import MoveState
from ..partitions import Partition, interpolated_partition
from ..sbm import BlockModelParams, Graph
from .polytope import closed_form_value, h_curve

WORKERS_ENV = "OGP_MODLAB_WORKERS"


@dataclass(frozen=True)
class LandscapePoint:
    d: float
    t: float
    k: int
    g_max_theory: float
    h_value: float
    modularity_theory: float
    H_empirical: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.t <= 1 and abs(self.g_max_theory / self.k ** 2 - self.h_value) > 1e-12:
            raise InvariantError("g/k^2 and h disagree")

    def csv_row(self) -> list:
        return [self.d, self.t, self.h_value, self.modularity_theory, self.H_empirical, self.seed]


CSV_HEADER = ["d", "t", "h", "modularity_theory", "H_empirical", "seed"]


def theory_point(params: BlockModelParams, d: float) -> LandscapePoint:
    k = params.k
    h = h_curve(d, k)
    t = d * k
    return LandscapePoint(d=d, t=t, k=k, g_max_theory=float(closed_form_value(k, min(t, 1.0))),
                          h_value=h, modularity_theory=params.prefactor * h)


def band_search(graph: Graph, start: Partition, planted: Partition, lo: float, hi: float,
                budget: int) -> float:
    """Best-improvement moves that keep the distance inside [lo, hi]; returns the final score.

    A move is admissible when its post-move distance, read from the
    candidate-distance table, stays in the band. Improvements are compared
    as exact integers. Stops after ``budget`` moves or when no admissible
    move improves the score.
    """
    state = MoveState(graph, start, planted)
    n = graph.n
    rows = np.arange(n)
    lab_p = planted.labels
    for _ in range(budget):
        num = state.delta_numerators()
        cand = state.candidate_distances()                    # [a, b, j]
        dist = cand[state.labels[:, None], np.arange(state.k)[None, :], lab_p[:, None]]
        ok = (dist >= lo - 1e-12) & (dist <= hi + 1e-12)
        ok[rows, state.labels] = False
        num = np.where(ok, num, 0)
        flat = int(np.argmax(num))
        if num.flat[flat] <= 0:
            break
        u, b = divmod(flat, state.k)
        state.apply_move(u, b)
    return state.score


def _sweep_point(args) -> float:
    graph, planted, d, band, budget = args
    k = planted.k
    t = min(d * k, 1.0)
    best = -math.inf
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            start = interpolated_partition(planted, i, j, t)
            best = max(best, band_search(graph, start, planted, d - band, d + band, budget))
    return best


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        value = int(raw)
    except ValueError:
        raise ParameterError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ParameterError(f"{WORKERS_ENV} must be >= 1")
    return value


def empirical_H_sweep(graph: Graph, planted: Partition, params: BlockModelParams, d_values,
                      band: float | None = None, search_budget: int = 200,
                      seed: int | None = None, workers: int | None = None) -> list[LandscapePoint]:
    """Lower bounds on H(d): interpolated optimisers plus band-constrained local search.

    Every one of the k(k-1) interpolated partitions at t = dk is improved by
    up to ``search_budget`` admissible best-improvement moves; H_empirical
    is the best score seen. The start itself counts since the search only
    ever raises the score.
    """
    k = planted.k
    d_values = [float(d) for d in d_values]
    if any(d < -1e-12 or d > 1.0 / k + 1e-12 for d in d_values):
        raise ParameterError("distances must lie in [0, 1/k]")
    band = 1.0 / math.sqrt(graph.n) if band is None else band
    tasks = [(graph, planted, d, band, search_budget) for d in d_values]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(_sweep_point, tasks))
    else:
        values = [_sweep_point(t) for t in tasks]
    out = []
    for d, value in zip(d_values, values):
        base = theory_point(params, d)
        out.append(LandscapePoint(base.d, base.t, k, base.g_max_theory, base.h_value,
                                  base.modularity_theory, value, seed))
    return out
