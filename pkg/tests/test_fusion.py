from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from predeval.fusion import Ablation, FusionConfig, ed_eva_score, evaluate_predictor, normalize, predictor_means
from predeval.metrics import MetricRow


def test_normalize_examples():
    np.testing.assert_allclose(normalize([1, 2, 3]), [0, 0.5, 1])
    np.testing.assert_allclose(normalize([4, 4, 4]), [0, 0, 0])
    np.testing.assert_allclose(normalize([1, 2, 3], "zscore"), [-1.2247449, 0, 1.2247449], atol=1e-7)
    np.testing.assert_allclose(normalize([1, 2, 3], "raw"), [1, 2, 3])


def test_score_examples():
    assert ed_eva_score(1.0, 0.7, 0.3) == 0.7
    assert ed_eva_score(0.0, 0.7, 0.3) == -0.3
    assert ed_eva_score(0.5, 0.4, 0.2) == pytest.approx(0.1, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.001, 0.999), st.floats(0, 1), st.floats(0, 1), st.floats(1e-6, 0.5))
def test_score_monotone(pc, g, e, step):
    s = ed_eva_score(pc, g, e)
    assert ed_eva_score(pc, g + step, e) > s
    assert ed_eva_score(pc, g, e + step) < s


def rows(n=12, seed=0, pids=("A",)):
    rng = np.random.default_rng(seed)
    out = []
    for pid in pids:
        for i in range(n):
            errs = {v: float(x) for v, x in zip(("ADE", "FDE", "minADE", "minFDE", "aveADE", "aveFDE"),
                                                rng.uniform(0, 5, 6))}
            out.append(MetricRow(f"s{i:02d}", pid, float(rng.uniform(0, 3)), errs))
    return out


def test_error_only_is_negated_normalized_error():
    rs = rows()
    recs = evaluate_predictor(rs, None, FusionConfig(ablation=Ablation("error_only")))
    err = np.array([r.errors["ADE"] for r in sorted(rs, key=lambda r: r.scenario_id)])
    np.testing.assert_array_equal([r.score for r in recs], -normalize(err))


def test_fixed_half_is_mean_of_terms():
    recs = evaluate_predictor(rows(), None, FusionConfig(ablation=Ablation.parse("fixed_pc(0.5)")))
    for r in recs:
        assert r.score == pytest.approx(0.5 * (r.gad_norm - r.e_error_norm), abs=1e-15)


def test_full_requires_probabilities():
    with pytest.raises(ValueError, match="criticality"):
        evaluate_predictor(rows(), None)
    with pytest.raises(ValueError, match="missing criticality"):
        evaluate_predictor(rows(), {"s00": 0.5})


def test_lower_error_predictor_ranks_higher_for_any_pc():
    rng = np.random.default_rng(1)
    base = rows(10, seed=3)
    better = [MetricRow(r.scenario_id, "A", r.gad, {k: v * 0.5 for k, v in r.errors.items()}) for r in base]
    worse = [MetricRow(r.scenario_id, "B", r.gad, dict(r.errors)) for r in base]
    for grid in [np.zeros(10), np.ones(10), np.full(10, 0.5), rng.uniform(size=10), rng.uniform(size=10)]:
        pc = {f"s{i:02d}": float(v) for i, v in enumerate(grid)}
        means = predictor_means(evaluate_predictor(better + worse, pc))
        assert means["A"] >= means["B"] - 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.01, 100), st.floats(-100, 100), st.floats(0.05, 0.95))
def test_affine_map_on_gad_keeps_ranking(seed, a, b, pc):
    rs = rows(15, seed)
    mapped = [MetricRow(r.scenario_id, r.predictor_id, a * r.gad + b, r.errors) for r in rs]
    const = {r.scenario_id: pc for r in rs}
    s1 = [r.score for r in evaluate_predictor(rs, const)]
    s2 = [r.score for r in evaluate_predictor(mapped, const)]
    np.testing.assert_allclose(s1, s2, atol=1e-9)
    assert list(np.argsort(s1, kind="stable")) == list(np.argsort(np.round(s2, 9), kind="stable")) or \
        np.allclose(s1, s2, atol=1e-9)


def test_normalization_spans_whole_batch():
    rs = rows(5, pids=("A", "B"))
    recs = evaluate_predictor(rs, None, FusionConfig(ablation=Ablation("diversity_only")))
    g = np.array([r.gad_norm for r in recs])
    assert g.min() == 0.0 and g.max() == 1.0


def test_ablation_parse():
    assert Ablation.parse("fixed_pc(0.3)") == Ablation("fixed_pc", 0.3)
    assert Ablation.parse("error_only").label == "error_only"
    with pytest.raises(ValueError):
        Ablation.parse("nothing")
    with pytest.raises(ValueError):
        Ablation("fixed_pc", 1.5)
