import numpy as np
import pytest

from eyeaffect.corpus import AnnotationTrace
from eyeaffect.errors import ArgumentError, ShapeError, UndefinedStatisticError
from eyeaffect.eval import (EVAL_FIELDS, EvalReport, ccc, evaluate, human_baseline, pcc, read_eval_rows, sse,
                            wilcoxon_rank_sum, write_eval_rows)


def test_ccc_perfect_concordance():
    assert ccc([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)

def test_ccc_zero_covariance():
    assert ccc([0, 0, 0, 0], [1, -1, 1, -1]) == pytest.approx(0.0)

def test_ccc_population_moments():
    assert ccc([1, 2, 3, 4], [2, 3, 4, 6]) == pytest.approx(0.65)

def test_ccc_length_mismatch():
    with pytest.raises(ArgumentError):
        ccc([1, 2, 3], [1, 2])

def test_ccc_identical_constants_scores_zero():
    assert ccc([0.5, 0.5], [0.5, 0.5]) == 0.0

def test_ccc_properties(rng):
    for _ in range(1000):
        x = rng.normal(size=20)
        y = 0.5 * x + rng.normal(size=20) + rng.normal()
        assert ccc(x, y) == pytest.approx(ccc(y, x), abs=1e-12)
        assert abs(ccc(x, y)) <= abs(pcc(x, y)) + 1e-12

def test_ccc_affine_invariance(rng):
    x, y = rng.normal(size=100), rng.normal(size=100)
    assert ccc(3.0 * x + 2.0, 3.0 * y + 2.0) == pytest.approx(ccc(x, y), abs=1e-12)

def test_pcc_of_linear_map():
    y = np.array([0.1, 0.4, 0.3, 0.9])
    assert pcc(2 * y + 1, y) == pytest.approx(1.0)
    assert pcc([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

def test_pcc_constant_input():
    with pytest.raises(UndefinedStatisticError):
        pcc([1, 1, 1], [1, 2, 3])

def test_sse_of_identical_series():
    assert sse([0.1, 0.2], [0.1, 0.2]) == 0.0

def test_evaluate_scales_error_only():
    targets = np.array([0.2, 0.4, 0.1, 0.5])
    predictions = targets + 0.1
    report = evaluate(predictions, targets, "arousal", target_mean=0.3, target_sd=0.5)
    assert report.sse == pytest.approx(0.04)
    assert report.ccc == pytest.approx(ccc(predictions, targets))
    assert report.n_frames == 4
    assert report.system == "eye"

def test_evaluate_constant_predictions(caplog):
    report = evaluate([0.1, 0.1, 0.1], [0.0, 0.2, 0.4], "valence")
    assert report.pcc == 0.0

def test_human_baseline_identical_traces():
    traces = [AnnotationTrace("arousal", name, [0.1, 0.3, -0.2]) for name in ("A1", "A2")]
    assert human_baseline(traces) == pytest.approx(1.0)

def test_human_baseline_needs_two_traces():
    with pytest.raises(ArgumentError):
        human_baseline([AnnotationTrace("arousal", "A1", [0.1, 0.2])])

def test_human_baseline_is_mean_of_pairs(mocker):
    mocker.patch('eyeaffect.eval.ccc', side_effect=[0.2, 0.4, 0.6])
    traces = [AnnotationTrace("arousal", f"A{i}", [0.0, 0.1]) for i in range(3)]
    assert human_baseline(traces) == pytest.approx(0.4)

def test_human_baseline_length_mismatch():
    traces = [AnnotationTrace("arousal", "A1", [0.1, 0.2]), AnnotationTrace("arousal", "A2", [0.1])]
    with pytest.raises(ShapeError):
        human_baseline(traces)

def test_wilcoxon_exact_small_samples():
    w, p = wilcoxon_rank_sum([1, 2], [3, 4])
    assert w == 0
    assert p == pytest.approx(1 / 3)

def test_wilcoxon_identical_samples():
    _, p = wilcoxon_rank_sum([1, 2, 3, 4, 5], [1, 2, 3, 4, 5])
    assert p >= 0.99

def test_wilcoxon_shifted_samples(rng):
    b = rng.normal(size=8)
    _, p = wilcoxon_rank_sum(b + 1000, b)
    assert p < 0.001

def test_wilcoxon_swap(rng):
    a, b = rng.normal(size=7), rng.normal(size=9)
    w_ab, p_ab = wilcoxon_rank_sum(a, b)
    w_ba, p_ba = wilcoxon_rank_sum(b, a)
    assert w_ba == pytest.approx(7 * 9 - w_ab)
    assert p_ab == pytest.approx(p_ba)
    assert 0 < p_ab <= 1

def test_wilcoxon_empty_sample():
    with pytest.raises(ArgumentError):
        wilcoxon_rank_sum([], [1.0])

def test_eval_rows_append(tmp_path):
    path = str(tmp_path / "eval.csv")
    write_eval_rows([EvalReport("arousal", 0.5, 0.6, 0.7, 100)], path)
    write_eval_rows([EvalReport("valence", 0.2, 0.3, 0.9, 100, system="fused")], path)
    with open(path) as f:
        assert f.readline().strip() == ",".join(EVAL_FIELDS)
    rows = read_eval_rows(path)
    assert [row["system"] for row in rows] == ["eye", "fused"]
    assert rows[1]["ccc"] == 0.2
