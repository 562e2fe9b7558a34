from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ogp_modlab.errors import EmptyFeasibleError, ParameterError
from ogp_modlab.landscape.polytope import (SignaturePolytopeSpec, alignment_ok, closed_form_value,
                                           far_bound, g_frobenius, g_of_signature, g_pairwise,
                                           grid_max_g, h_curve, h_minimiser, max_g_closed_form,
                                           near_optimal_radius, optimizer_signature)


def _column_stochastic(rng, k):
    x = rng.random((k, k)) ** 3
    return x / x.sum(axis=0)


def _doubly_stochastic(rng, k, n_perm=4):
    weights = rng.dirichlet(np.ones(n_perm))
    x = np.zeros((k, k))
    for w in weights:
        x[np.arange(k), rng.permutation(k)] += w
    return x


def test_g_small_cases():
    assert g_pairwise(np.eye(3)) == 6
    assert g_pairwise(np.full((3, 3), 1 / 3)) == pytest.approx(0)
    assert g_of_signature(optimizer_signature(3, 0, 1, 1.0)) == pytest.approx(4)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10 ** 6), k=st.integers(2, 6))
def test_g_forms_agree_on_balanced(seed, k):
    x = _doubly_stochastic(np.random.default_rng(seed), k)
    assert g_pairwise(x) == pytest.approx(g_frobenius(x), abs=1e-9)
    assert 0 <= g_of_signature(x) <= k * (k - 1) + 1e-9


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10 ** 6), k=st.integers(2, 6))
def test_g_bounded_on_column_stochastic(seed, k):
    x = _column_stochastic(np.random.default_rng(seed), k)
    assert -1e-12 <= g_of_signature(x) <= k * (k - 1) + 1e-9


def test_h_values():
    assert h_curve(0, 4) == pytest.approx(0.75)
    assert h_curve(0.25, 4) == pytest.approx(0.625)
    assert h_curve(h_minimiser(4), 4) == pytest.approx(7 / 12)
    assert h_minimiser(3) == 0.25
    with pytest.raises(ParameterError):
        h_curve(0.3, 4)


@pytest.mark.parametrize("k", [2, 3, 4, 5, 8])
def test_h_is_closed_form_over_k_squared(k):
    for d in np.linspace(0, 1 / k, 9):
        assert h_curve(d, k) == pytest.approx(closed_form_value(k, k * d) / k ** 2)
    # convex, minimised at 1/(2(k-1))
    ds = np.linspace(0, 1 / k, 401)
    assert ds[np.argmin([h_curve(d, k) for d in ds])] == pytest.approx(h_minimiser(k), abs=1 / k / 400)


def test_closed_form_exact():
    assert closed_form_value(3, Fraction(0)) == 6
    assert closed_form_value(3, Fraction(1, 4)) == Fraction(19, 4)
    assert closed_form_value(3, Fraction(1, 2)) == 4
    assert closed_form_value(3, Fraction(1)) == 4 == far_bound(3)
    assert closed_form_value(4, Fraction(1, 3)) == Fraction(12) - Fraction(2, 3) * (4 - 1)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_closed_form_optimizers(k):
    for t in (0.0, 0.3, 1.0):
        value, opts = max_g_closed_form(k, t)
        assert len(opts) == (1 if t == 0 else k * (k - 1))
        for x in opts:
            assert g_pairwise(x) == pytest.approx(value)
            assert np.allclose(x.sum(axis=0), 1)
            assert alignment_ok(x)
    with pytest.raises(ParameterError):
        max_g_closed_form(3, 1.5)


@pytest.mark.parametrize("k,n_grid", [(2, 8), (3, 6)])
def test_grid_matches_closed_form(k, n_grid):
    for num in range(n_grid + 1):
        t = num / n_grid
        grid = grid_max_g(SignaturePolytopeSpec(k, t), n_grid)
        assert grid.exact == closed_form_value(k, Fraction(num, n_grid))


def test_grid_far_slice_below_bound():
    for num in range(7, 13):
        grid = grid_max_g(SignaturePolytopeSpec(3, num / 6), 6)
        assert grid.value < far_bound(3)


def test_grid_budget_and_empty_slice():
    with pytest.raises(ParameterError):
        grid_max_g(SignaturePolytopeSpec(5, 0.2), 4)
    with pytest.raises(EmptyFeasibleError):
        grid_max_g(SignaturePolytopeSpec(3, 0.25), 6)


def test_near_optimal_radius_inverts():
    k, pref = 3, 0.4
    for dp in (0.01, 0.05, 0.1):
        delta = pref * 2 * dp * (1 - dp * (k - 1))
        assert near_optimal_radius(delta, k, pref) == pytest.approx(dp)
    with pytest.raises(ParameterError):
        near_optimal_radius(pref * 2 / 9, k, pref)
