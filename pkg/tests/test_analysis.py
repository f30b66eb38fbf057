from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from predeval.analysis import auroc, auroc_pairwise, build_report, pearson, roc_points
from predeval.core import PerformanceRecord


def test_pearson_examples():
    xs = np.array([1.0, 2.0, 3.0, 4.0, 7.0])
    assert pearson(xs, 2 * xs + 1) == pytest.approx(1.0, abs=1e-12)
    assert pearson(xs, -xs) == pytest.approx(-1.0, abs=1e-12)
    assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)


def test_pearson_errors():
    with pytest.raises(ValueError, match="degenerate series"):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=40, unique=True),
       st.floats(-50, 50).filter(lambda a: abs(a) > 1e-3), st.floats(-1e3, 1e3))
def test_pearson_affine_is_sign(xs, a, b):
    xs = np.array(xs)
    if np.ptp(xs) < 1e-3:
        return
    assert pearson(xs, a * xs + b) == pytest.approx(np.sign(a), abs=1e-12)


def test_auroc_examples():
    assert auroc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0
    assert auroc([0.9, 0.8, 0.3], [1, 0, 1]) == 0.5
    assert auroc([0.4] * 6, [1, 0, 1, 0, 0, 1]) == 0.5
    with pytest.raises(ValueError):
        auroc([0.1, 0.2], [1, 1])


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 1000), st.booleans())
def test_rank_auroc_equals_pairwise(seed, n, coarse):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    y[0], y[-1] = 0, 1
    s = rng.integers(0, 5, n).astype(float) if coarse else rng.normal(size=n)
    assert auroc(s, y) == auroc_pairwise(s, y)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 200))
def test_auroc_complement(seed, n):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    y[0], y[-1] = 0, 1
    s = rng.permutation(n).astype(float)
    assert auroc(s, y) + auroc(-s, y) == pytest.approx(1.0, abs=1e-12)


def test_roc_area_matches_trapezoid():
    rng = np.random.default_rng(0)
    s = rng.integers(0, 6, 200).astype(float)
    y = (rng.random(200) < 0.4).astype(int)
    pts = roc_points(s, y)
    assert pts[0].tolist() == [0.0, 0.0] and pts[-1].tolist() == [1.0, 1.0]
    assert np.trapezoid(pts[:, 1], pts[:, 0]) == pytest.approx(auroc(s, y), abs=1e-12)


def perf(overall):
    return PerformanceRecord(0.5, 1.0, 0.0, float(overall))


def test_report_sign_bookkeeping():
    ade = np.linspace(0.2, 3.0, 10)
    perfs = {(f"s{i}", "p"): perf(v) for i, v in enumerate(ade)}
    evals = {"-ADE": [(f"s{i}", "p", -v) for i, v in enumerate(ade)]}
    rep = build_report(evals, perfs)
    assert rep.cell("p", "-ADE").r["overall"] == pytest.approx(-1.0, abs=1e-12)
    assert rep.cell("p", "-ADE").auroc == 0.0


def test_report_duplicate_key():
    with pytest.raises(ValueError, match="duplicate evaluation key"):
        build_report({"m": [("s", "p", 1.0), ("s", "p", 2.0)]}, {("s", "p"): perf(0)})


def test_report_join_errors_and_order_invariance():
    rng = np.random.default_rng(1)
    keys = [(f"s{i}", p) for i in range(8) for p in ("p", "q")]
    perfs = {k: PerformanceRecord(*rng.uniform(0, 1, 3), rng.normal()) for k in keys}
    rows = [(s, p, float(rng.normal())) for s, p in keys]
    rep = build_report({"m": rows + [("extra", "p", 0.0)]}, perfs)
    assert any("extra" in e for e in rep.join_errors)
    shuffled = build_report({"m": [rows[i] for i in rng.permutation(len(rows))]}, dict(reversed(list(perfs.items()))))
    a = build_report({"m": rows}, perfs)
    for c1, c2 in itertools.zip_longest(a.cells, shuffled.cells):
        assert (c1.predictor_id, c1.method, c1.n, c1.r, c1.auroc) == (c2.predictor_id, c2.method, c2.n, c2.r, c2.auroc)
