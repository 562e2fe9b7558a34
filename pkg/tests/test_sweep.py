import numpy as np
import pytest

from ogp_modlab.errors import InvariantError, ParameterError
from ogp_modlab.landscape.sweep import (CSV_HEADER, LandscapePoint, WORKERS_ENV, band_search,
                                        empirical_H_sweep, theory_point, worker_count)
from ogp_modlab.modularity import modularity
from ogp_modlab.partitions import distance, interpolated_partition
from ogp_modlab.sbm import BlockModelParams, generate_sbm

PARAMS = BlockModelParams(n=150, k=3, a=3, b=1, omega=30)


@pytest.fixture(scope="module")
def instance():
    return generate_sbm(PARAMS, 0)


def test_theory_point_endpoints():
    p0 = theory_point(PARAMS, 0.0)
    assert p0.h_value == pytest.approx(2 / 3)
    assert p0.modularity_theory == pytest.approx(PARAMS.prefactor * 2 / 3)
    p1 = theory_point(PARAMS, 1 / 3)
    assert p1.g_max_theory == pytest.approx(4)
    assert len(p1.csv_row()) == len(CSV_HEADER)


def test_point_consistency_is_checked():
    with pytest.raises(InvariantError):
        LandscapePoint(d=0.0, t=0.0, k=3, g_max_theory=5.0, h_value=2 / 3, modularity_theory=0.2)


def test_band_search_stays_in_band_and_improves(instance):
    g, planted = instance
    start = interpolated_partition(planted, 0, 1, 0.5)
    d0 = distance(start, planted).distance
    q = band_search(g, start, planted, d0 - 0.05, d0 + 0.05, 30)
    assert q >= modularity(g, start).score


def test_sweep_lower_bounds_and_workers(instance, monkeypatch):
    g, planted = instance
    ds = [0.0, 1 / 6, 1 / 3]
    serial = empirical_H_sweep(g, planted, PARAMS, ds, search_budget=20, seed=0, workers=1)
    for pt, d in zip(serial, ds):
        start = interpolated_partition(planted, 0, 1, d * 3)
        assert pt.H_empirical >= modularity(g, start).score - 1e-12
        assert pt.seed == 0
    parallel = empirical_H_sweep(g, planted, PARAMS, ds, search_budget=20, seed=0, workers=2)
    assert [p.H_empirical for p in parallel] == [p.H_empirical for p in serial]
    with pytest.raises(ParameterError):
        empirical_H_sweep(g, planted, PARAMS, [0.4])


def test_worker_env(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    assert worker_count() == 1
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert worker_count() == 3
    monkeypatch.setenv(WORKERS_ENV, "many")
    with pytest.raises(ParameterError):
        worker_count()
