"""The landscape objective g over signature matrices and its maximisers.

``g(X) = sum_i sum_{j<j'} (x_ij - x_ij')^2``. Over the slice of the signature
polytope with off-diagonal mass ``t`` its maximum is known in closed form for
``t <= 1``; for ``t > 1`` it stays strictly below ``k(k-1) - 2``. The grid
enumerator here is the brute-force oracle for both facts.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import EmptyFeasibleError, InvariantError, ParameterError
from ..partitions import Signature, permutation_table

_TOL = 1e-12


def _as_matrix(sig) -> np.ndarray:
    return np.asarray(sig.x if isinstance(sig, Signature) else sig, dtype=np.float64)


def g_pairwise(x) -> float:
    x = _as_matrix(x)
    diff = x[:, :, None] - x[:, None, :]
    return float(0.5 * np.sum(diff * diff))


def g_frobenius(x) -> float:
    """``k * ||X||_F^2 - k``; equals g only when every row sums to one."""
    x = _as_matrix(x)
    return float(x.shape[0] * np.sum(x * x) - x.shape[0])


def g_of_signature(sig) -> float:
    x = _as_matrix(sig)
    value = g_pairwise(x)
    if np.allclose(x.sum(axis=1), 1.0, atol=1e-12):
        other = g_frobenius(x)
        if abs(value - other) > 1e-9 * max(1.0, abs(value)):
            raise InvariantError(f"g forms disagree: {value} vs {other}")
    return value


def h_curve(d: float, k: int) -> float:
    if not (-_TOL <= d <= 1.0 / k + _TOL):
        raise ParameterError(f"d must lie in [0, 1/k], got {d}")
    return 1.0 - 1.0 / k - 2.0 * d * (1.0 - d * (k - 1))


def h_minimiser(k: int) -> float:
    return 1.0 / (2 * (k - 1))


def optimizer_signature(k: int, i: int, j: int, t: float) -> np.ndarray:
    """X^(ij)_k(t): identity with t of column j moved from the diagonal to row i."""
    if i == j:
        raise ParameterError("optimizer needs i != j")
    x = np.eye(k)
    x[j, j] = 1.0 - t
    x[i, j] = t
    return x


def closed_form_value(k: int, t):
    """k(k-1) - 2t(k - t(k-1)); exact when ``t`` is a Fraction."""
    return k * (k - 1) - 2 * t * (k - t * (k - 1))


def max_g_closed_form(k: int, t: float) -> tuple[float, list[np.ndarray]]:
    if k < 2:
        raise ParameterError(f"k must be >= 2, got {k}")
    if t < 0 or t > 1:
        raise ParameterError(f"closed form holds for 0 <= t <= 1, got {t}; use far_bound for t > 1")
    value = float(closed_form_value(k, t))
    if t == 0:
        return value, [np.eye(k)]
    opts = [optimizer_signature(k, i, j, t) for i in range(k) for j in range(k) if i != j]
    return value, opts


def far_bound(k: int) -> float:
    """Strict upper bound on g over the slice for every t > 1."""
    if k < 2:
        raise ParameterError(f"k must be >= 2, got {k}")
    return float(k * (k - 1) - 2)


def alignment_ok(x: np.ndarray) -> bool:
    """True when the identity is a best alignment: sum_i x_ii >= sum_i x_sigma(i)i for all sigma."""
    x = np.asarray(x)
    perms = permutation_table(x.shape[0])
    cols = np.arange(x.shape[0])
    vals = x[perms, cols].sum(axis=1)
    return bool(np.trace(x) >= vals.max() - 1e-12)


# ---------------------------------------------------------------- grid oracle

@dataclass(frozen=True)
class SignaturePolytopeSpec:
    """Slice of the signature polytope: column sums 1, off-diagonal mass t, identity alignment.

    ``balanced`` adds unit row sums (doubly stochastic matrices).
    """

    k: int
    t: float
    balanced: bool = False

    def __post_init__(self):
        if self.k < 2:
            raise ParameterError(f"k must be >= 2, got {self.k}")
        if not (-_TOL <= self.t <= self.k - 1 + _TOL):
            raise ParameterError(f"t must lie in [0, k-1], got {self.t}")


@dataclass(frozen=True)
class GridMax:
    value: float
    maximizer: np.ndarray
    numerator: int          # value == numerator / resolution**2 exactly
    resolution: int
    feasible_count: int

    @property
    def exact(self) -> Fraction:
        return Fraction(self.numerator, self.resolution ** 2)


def _compositions(total: int, parts: int) -> np.ndarray:
    """All non-negative integer vectors of length ``parts`` summing to ``total``."""
    if parts == 0:
        return np.zeros((1 if total == 0 else 0, 0), dtype=np.int64)
    out = []
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, row = -1, []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        row.append(total + parts - 2 - prev)
        out.append(row)
    return np.array(out, dtype=np.int64).reshape(-1, parts)


def _diagonals(k: int, n_grid: int, diag_total: int):
    for diag in itertools.product(range(n_grid + 1), repeat=k - 1):
        last = diag_total - sum(diag)
        if 0 <= last <= n_grid:
            yield diag + (last,)


def _g_int(mats: np.ndarray) -> np.ndarray:
    """Integer g(X) * N^2 for integer matrices of shape (M, k, k)."""
    diff = mats[:, :, :, None] - mats[:, :, None, :]
    return (diff * diff).sum(axis=(1, 2, 3)) // 2


def grid_max_g(spec: SignaturePolytopeSpec, resolution: int,
               max_k: int = 4, max_resolution: int = 12) -> GridMax:
    """Exhaustive maximum of g over grid matrices (entries in {0, 1/N, ..., 1}) in the slice.

    The diagonal is enumerated first (its sum is fixed at ``k - t``), then the
    off-diagonal part of every column is a composition of what the diagonal
    leaves. In balanced mode the last column follows from the row sums.
    Candidates violating the identity-alignment constraint are dropped: any
    such matrix relabelled by its best alignment has a different off-diagonal
    mass, so it belongs to another slice.
    """
    k, n_grid = spec.k, int(resolution)
    if n_grid < 1:
        raise ParameterError("resolution must be a positive integer")
    if k > max_k or n_grid > max_resolution:
        raise ParameterError(
            f"grid budget exceeded (k={k} > {max_k} or N={n_grid} > {max_resolution})")
    t_scaled = spec.t * n_grid
    if abs(t_scaled - round(t_scaled)) > 1e-9:
        raise EmptyFeasibleError(f"t*N = {t_scaled} is not integral, slice has no grid points")
    off_total = int(round(t_scaled))
    diag_total = k * n_grid - off_total
    perms = permutation_table(k)
    cols = np.arange(k)
    off_mask = ~np.eye(k, dtype=bool)

    best_num, best_mat, count = -1, None, 0
    for diag in _diagonals(k, n_grid, diag_total):
        options = [_compositions(n_grid - diag[j], k - 1) for j in range(k)]
        free = k - 1 if spec.balanced else k
        idx = np.stack(np.meshgrid(*[np.arange(len(o)) for o in options[:free]],
                                   indexing="ij"), axis=-1).reshape(-1, free)
        mats = np.zeros((len(idx), k, k), dtype=np.int64)
        mats[:, cols, cols] = diag
        for j in range(free):
            rows = [i for i in range(k) if i != j]
            mats[:, rows, j] = options[j][idx[:, j]]
        if spec.balanced:
            j = k - 1
            rows = [i for i in range(k) if i != j]
            need = n_grid - mats[:, rows, :j].sum(axis=2) - mats[:, rows, j]
            mats[:, rows, j] = need
            ok = np.all(need >= 0, axis=1) & (need.sum(axis=1) == n_grid - diag[j])
            mats = mats[ok]
            if not len(mats):
                continue
            if np.any(mats.sum(axis=2) != n_grid) or np.any(mats.sum(axis=1) != n_grid):
                raise InvariantError("balanced enumeration produced a non doubly-stochastic matrix")
        # alignment: trace >= every permuted diagonal sum
        perm_sums = mats[:, perms, cols].sum(axis=2)
        mats = mats[perm_sums.max(axis=1) <= np.asarray(diag).sum()]
        if not len(mats):
            continue
        if np.any(mats[:, off_mask].sum(axis=1) != off_total):
            raise InvariantError("enumerated matrix left the off-diagonal slice")
        count += len(mats)
        vals = _g_int(mats)
        pos = int(np.argmax(vals))
        if vals[pos] > best_num:
            best_num, best_mat = int(vals[pos]), mats[pos]
    if best_mat is None:
        raise EmptyFeasibleError(f"no feasible grid matrix for {spec} at N={n_grid}")
    return GridMax(best_num / n_grid ** 2, best_mat / n_grid, best_num, n_grid, count)


def grid_balanced_curve(k: int, t_values, resolution: int, **kw) -> list[GridMax]:
    return [grid_max_g(SignaturePolytopeSpec(k, t, balanced=True), resolution, **kw)
            for t in t_values]


def near_optimal_radius(delta: float, k: int, prefactor: float) -> float:
    """delta' solving delta = prefactor * 2 delta'(1 - delta'(k-1)), smaller root.

    The smaller root is the one inside (0, 1/(k(k-1))), which requires
    ``0 < delta < prefactor * 2/k^2``.
    """
    if prefactor <= 0:
        raise ParameterError("prefactor must be positive")
    if not 0 < delta < prefactor * 2 / k ** 2:
        raise ParameterError(f"delta must lie in (0, {prefactor * 2 / k ** 2}), got {delta}")
    s = delta / prefactor
    return (1.0 - math.sqrt(1.0 - 2.0 * (k - 1) * s)) / (2.0 * (k - 1))
