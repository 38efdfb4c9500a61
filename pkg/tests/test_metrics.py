import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from published_tables import OVERALL_MIN_CDET, TABLE3, TABLE4
from strategies import build_grouped, grid_scores, partitioned, target_nontarget

from svfair.errors import DegeneratePopulationError, SubgroupMismatchError, UndefinedRatioError
from svfair.metrics import (
    DEFAULT_COSTS,
    FN_WEIGHTED,
    CostParams,
    FairnessReport,
    IndexMode,
    OverallMetrics,
    SubgroupMetrics,
    compare_models,
    compute_error_curve,
    cost_at_threshold,
    detection_cost,
    equal_error_rate,
    error_rate_ratios,
    evaluate,
    fairness_index,
    min_detection_cost,
    normalized_cost,
    subgroup_cdet_evaluation,
)
from svfair.synth import brute_force_eer, brute_force_min_cost

TAR = [2.0, 1.0, -0.5]
NON = [-2.0, -1.0, 0.5]


# --- error curve ----------------------------------------------------------------


def test_hand_counted_rates():
    curve = compute_error_curve(TAR, NON)
    assert curve.rates_at(1.0) == (1 / 3, 0.0)
    assert curve.rates_at(-math.inf) == (0.0, 1.0)
    assert curve.rates_at(math.inf) == (1.0, 0.0)
    assert curve.thresholds.tolist() == [-math.inf, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, math.inf]


def test_ties_are_accepted():
    curve = compute_error_curve([0.0], [0.0])
    assert curve.rates_at(0.0) == (0.0, 1.0)
    assert curve.rates_at(math.inf) == (1.0, 0.0)


@pytest.mark.parametrize("tar, non, side", [([], [1.0], "no target"), ([1.0], [], "no nontarget")])
def test_empty_side_named(tar, non, side):
    with pytest.raises(DegeneratePopulationError, match=side):
        compute_error_curve(tar, non)


def test_non_finite_scores_rejected():
    with pytest.raises(ValueError):
        compute_error_curve([np.nan], [0.0])


# --- cost ----------------------------------------------------------------------------


@pytest.mark.parametrize(
    "fnr, fpr, expected",
    [(0, 0, 0.0), (1, 0, 0.05), (0, 1, 0.95), (0.1, 0.2, 0.195)],
)
def test_detection_cost_examples(fnr, fpr, expected):
    assert detection_cost(fnr, fpr) == pytest.approx(expected, abs=1e-15)


def test_cost_params_validation():
    with pytest.raises(ValueError):
        CostParams(p_target=1.0)
    with pytest.raises(ValueError):
        CostParams(c_fn=-1.0)
    with pytest.raises(ValueError):
        CostParams(c_fn=0.0, c_fp=0.0)
    assert (FN_WEIGHTED.p_target, FN_WEIGHTED.c_fn, FN_WEIGHTED.c_fp) == (0.05, 10.0, 1.0)


def test_normalized_cost_divides_by_trivial_system():
    assert normalized_cost(0.05) == pytest.approx(1.0)
    assert DEFAULT_COSTS.max_cost == pytest.approx(1.0)


def test_min_cost_hand_example():
    theta, cost = min_detection_cost(compute_error_curve(TAR, NON))
    assert theta == 1.0
    assert cost == pytest.approx(0.05 / 3, abs=1e-15)


def test_min_cost_separable_is_zero():
    theta, cost = min_detection_cost(compute_error_curve([3.0, 4.0], [1.0, 2.0]))
    assert cost == 0.0 and theta == 3.0


def test_cost_at_threshold_piecewise_constant():
    curve = compute_error_curve(TAR, NON)
    assert cost_at_threshold(curve, 0.75) == cost_at_threshold(curve, 1.0)
    assert cost_at_threshold(curve, -100.0) == detection_cost(0.0, 1.0)
    costs = detection_cost(curve.fnr, curve.fpr)
    for i, theta in enumerate(curve.thresholds):
        assert cost_at_threshold(curve, theta) == costs[i]


# --- EER ------------------------------------------------------------------------------


def test_eer_exact_crossing():
    eer, theta = equal_error_rate(compute_error_curve(TAR, NON))
    assert eer == 1 / 3 and theta == 0.5


def test_eer_separable_and_inverted():
    assert equal_error_rate(compute_error_curve([3.0], [1.0]))[0] == 0.0
    eer, _ = equal_error_rate(compute_error_curve([0.0], [1.0]))
    assert eer == 1.0


def test_eer_interpolates_between_brackets():
    # (fpr, fnr) jumps from (1, 1/2) at theta=1 to (0, 1/2) at theta=2
    eer, theta = equal_error_rate(compute_error_curve([0.0, 2.0], [1.0]))
    assert eer == 0.5
    assert theta == 2.0  # equal distance to the diagonal: the later bracket
    # brackets (fpr 1, fnr 1/3) at 1.0 and (0, 1/3) at 2.0: the second is nearer
    eer, theta = equal_error_rate(compute_error_curve([0.0, 2.0, 3.0], [1.0]))
    assert eer == pytest.approx(1 / 3, abs=1e-15) and theta == 2.0


# --- ratios ----------------------------------------------------------------------------


def test_identity_subgroup_ratios():
    curve = compute_error_curve(TAR, NON)
    c = subgroup_cdet_evaluation(curve, curve)
    assert (c.ratio_overall_min, c.ratio_sg_min) == (1.0, 1.0)
    assert error_rate_ratios(curve, curve, 0.5) == (1.0, 1.0)


def test_zero_overall_min_is_undefined():
    curve = compute_error_curve([3.0], [1.0])
    with pytest.raises(UndefinedRatioError):
        subgroup_cdet_evaluation(curve, curve)


def test_zero_overall_rate_gives_none():
    curve = compute_error_curve(TAR, NON)
    # at theta = 2.5 nothing is accepted: overall fpr is 0
    fpr_ratio, fnr_ratio = error_rate_ratios(curve, curve, 2.5)
    assert fpr_ratio is None and fnr_ratio == 1.0


def test_table3_ratio_columns_match_their_costs():
    for name, (_, at_overall, at_sg, ratio, ratio_sg) in TABLE3.items():
        lo = (at_overall - 5e-5) / (OVERALL_MIN_CDET + 5e-5)
        hi = (at_overall + 5e-5) / (OVERALL_MIN_CDET - 5e-5)
        assert lo <= ratio <= hi, name
        lo = (at_sg - 5e-5) / (at_overall + 5e-5)
        hi = (at_sg + 5e-5) / (at_overall - 5e-5)
        assert lo <= ratio_sg <= hi, name
        assert ratio_sg <= 1.0 + 5e-5, name


def test_table4_reference_rows():
    assert TABLE4["usa_m"] == (1.0, 1.0)
    assert TABLE4["india_f"] == (13.0387, 1.2497)


# --- fairness index --------------------------------------------------------------------


def test_fairness_index_all_below_one():
    assert fairness_index([0.2, 1.0, 0.9], "literal") == 0.0
    assert fairness_index([0.2, 1.0, 0.9], "sum_of_ratios") == 0.0


def test_fairness_index_table3():
    ratios = [row[3] for row in TABLE3.values()]
    assert fairness_index(ratios) == pytest.approx(16.06, abs=0.01)
    assert fairness_index(ratios, IndexMode.LITERAL) == pytest.approx(6.06, abs=0.01)


def test_fairness_index_rejects_negative():
    with pytest.raises(ValueError):
        fairness_index([1.2, -0.1])


# --- evaluate / compare -----------------------------------------------------------------


def _report(name, ratios):
    rows = [
        SubgroupMetrics(sg, tuple(sg.split("_")), 1, 1, 1, r, r, r, 1.0, None, None)
        for sg, r in ratios.items()
    ]
    overall = OverallMetrics(0.01, 0.0, 0.1, 0.0, 1, 1)
    vals = list(ratios.values())
    return FairnessReport(name, DEFAULT_COSTS, overall, rows, fairness_index(vals, "literal"), fairness_index(vals))


def test_compare_models_table5_rows():
    a = _report("V2", {"india_f": 2.5766, "norway_m": 2.5720, "usa_m": 0.8357})
    b = _report("L", {"india_f": 3.2869, "norway_m": 2.1037, "usa_m": 0.8320})
    rows = compare_models(a, b)
    assert [r.name for r in rows] == ["india_f", "usa_m", "norway_m"]
    assert rows[0].difference == pytest.approx(-0.7103, abs=1e-12)
    assert rows[2].difference == pytest.approx(0.4683, abs=1e-12)


def test_compare_with_self_is_zero():
    a = _report("V2", {"india_f": 2.5766, "usa_m": 0.8357})
    assert all(r.difference == 0.0 for r in compare_models(a, a))


def test_compare_mismatch_lists_differences():
    a = _report("A", {"india_f": 1.0, "usa_m": 1.0})
    b = _report("B", {"india_f": 1.0, "uk_m": 1.0})
    with pytest.raises(SubgroupMismatchError, match="usa_m") as exc:
        compare_models(a, b)
    assert "uk_m" in str(exc.value)


def test_evaluate_small_dataset():
    grouped = build_grouped({("a",): ([2.0, 1.0], [-1.0, 0.5]), ("b",): ([-0.5, 1.5], [-2.0, 1.2])})
    ev = evaluate(grouped, model_name="m", settings={"group_by": ["g"]})
    rep = ev.report
    assert [s.name for s in rep.subgroups] == ["a", "b"]
    theta, cost = min_detection_cost(ev.overall_curve)
    assert rep.overall.min_cdet == cost and rep.overall.min_cdet_threshold == theta
    assert rep.overall.n_target_trials == 4 and rep.overall.n_nontarget_trials == 4
    assert rep.fairness_index_literal == rep.fairness_index_sum_of_ratios - sum(
        s.ratio_overall_min > 1 for s in rep.subgroups
    )
    assert rep.settings == {"group_by": ["g"]}


def test_evaluate_degenerate_subgroup_named():
    grouped = build_grouped({("a",): ([2.0, -2.0], [-1.0, 0.5]), ("b",): ([1.0], [])})
    with pytest.raises(DegeneratePopulationError, match="subgroup b"):
        evaluate(grouped)


# --- properties -------------------------------------------------------------------------


@given(target_nontarget())
@settings(max_examples=300)
def test_curve_monotone_with_sentinels(pair):
    curve = compute_error_curve(*pair)
    assert np.all(np.diff(curve.fnr) >= 0) and np.all(np.diff(curve.fpr) <= 0)
    assert (curve.fnr[0], curve.fpr[0]) == (0.0, 1.0)
    assert (curve.fnr[-1], curve.fpr[-1]) == (1.0, 0.0)


@given(target_nontarget(), st.sampled_from([DEFAULT_COSTS, FN_WEIGHTED, CostParams(0.3, 2.0, 0.5)]))
@settings(max_examples=300)
def test_min_cost_and_eer_match_oracle(pair, params):
    tar, non = pair
    curve = compute_error_curve(tar, non)
    theta, cost = min_detection_cost(curve, params)
    oracle_theta, oracle_cost = brute_force_min_cost(tar, non, params)
    assert cost == oracle_cost
    assert cost_at_threshold(curve, oracle_theta, params) == oracle_cost
    costs = detection_cost(curve.fnr, curve.fpr, params)
    assert np.all(costs[curve.thresholds < theta] > cost)
    assert abs(equal_error_rate(curve)[0] - brute_force_eer(tar, non)) <= 1e-12


@given(target_nontarget())
@settings(max_examples=200)
def test_cost_bounds(pair):
    curve = compute_error_curve(*pair)
    _, cost = min_detection_cost(curve)
    assert 0.0 <= cost <= DEFAULT_COSTS.default_cost + 1e-15
    eer, _ = equal_error_rate(curve)
    assert 0.0 <= eer <= 1.0


@given(partitioned())
@settings(max_examples=200)
def test_mixture_identity(groups):
    grouped = build_grouped(groups)
    overall = compute_error_curve(grouped.overall.target_scores(), grouped.overall.nontarget_scores())
    curves = [compute_error_curve(t, n) for t, n in groups.values()]
    n_tar = sum(c.n_target for c in curves)
    n_non = sum(c.n_nontarget for c in curves)
    for theta in overall.thresholds:
        fnr, fpr = overall.rates_at(theta)
        mix_fnr = sum(c.n_target / n_tar * c.rates_at(theta)[0] for c in curves)
        mix_fpr = sum(c.n_nontarget / n_non * c.rates_at(theta)[1] for c in curves)
        assert abs(fnr - mix_fnr) <= 1e-12 and abs(fpr - mix_fpr) <= 1e-12


@given(partitioned())
@settings(max_examples=200)
def test_ratio_sg_min_at_most_one(groups):
    grouped = build_grouped(groups)
    try:
        report = evaluate(grouped).report
    except UndefinedRatioError:
        return
    for sg in report.subgroups:
        assert sg.ratio_sg_min <= 1.0 + 1e-12
        assert sg.cdet_at_sg_min <= sg.cdet_at_overall_min


def _transformed(groups, f):
    return {k: ([f(x) for x in t], [f(x) for x in n]) for k, (t, n) in groups.items()}


@given(partitioned(), st.sampled_from([lambda x: x**3 + 2 * x, math.atan]))
@settings(max_examples=200)
def test_monotone_transform_invariance(groups, f):
    pooled = [x for t, n in groups.values() for x in t + n]
    moved = _transformed(groups, f)
    assert len({f(x) for x in pooled}) == len(set(pooled))
    try:
        a = evaluate(build_grouped(groups)).report
    except UndefinedRatioError:
        with pytest.raises(UndefinedRatioError):
            evaluate(build_grouped(moved))
        return
    b = evaluate(build_grouped(moved)).report
    assert a.overall.min_cdet == b.overall.min_cdet and a.overall.eer == b.overall.eer
    assert b.overall.min_cdet_threshold == f(a.overall.min_cdet_threshold) or math.isinf(
        a.overall.min_cdet_threshold
    )
    for x, y in zip(a.subgroups, b.subgroups):
        assert (x.ratio_overall_min, x.ratio_sg_min, x.fpr_ratio, x.fnr_ratio) == (
            y.ratio_overall_min,
            y.ratio_sg_min,
            y.fpr_ratio,
            y.fnr_ratio,
        )
    assert a.fairness_index_literal == b.fairness_index_literal
    assert a.fairness_index_sum_of_ratios == b.fairness_index_sum_of_ratios


ratio_lists = st.lists(st.floats(0.0, 10.0, allow_nan=False), min_size=0, max_size=30)


@given(ratio_lists, st.randoms(use_true_random=False), st.sampled_from(list(IndexMode)))
@settings(max_examples=300)
def test_fairness_index_permutation_invariant(ratios, rnd, mode):
    shuffled = list(ratios)
    rnd.shuffle(shuffled)
    assert fairness_index(ratios, mode) == fairness_index(shuffled, mode)


@given(ratio_lists, st.integers(0, 29), st.floats(0.0, 5.0, allow_nan=False), st.sampled_from(list(IndexMode)))
@settings(max_examples=300)
def test_fairness_index_monotone_in_each_ratio(ratios, i, bump, mode):
    if not ratios:
        return
    i %= len(ratios)
    raised = list(ratios)
    raised[i] += bump
    assert fairness_index(raised, mode) >= fairness_index(ratios, mode)


@given(ratio_lists)
@settings(max_examples=300)
def test_literal_is_sum_minus_count(ratios):
    count = sum(r > 1 for r in ratios)
    literal = fairness_index(ratios, "literal")
    assert literal == fairness_index(ratios, "sum_of_ratios") - count
    assert literal >= 0.0


@given(st.lists(grid_scores, min_size=1, max_size=30), st.lists(grid_scores, min_size=1, max_size=30))
@settings(max_examples=100)
def test_identity_subgroup_property(tar, non):
    curve = compute_error_curve(tar, non)
    if min_detection_cost(curve)[1] == 0:
        return
    c = subgroup_cdet_evaluation(curve, curve)
    assert (c.ratio_overall_min, c.ratio_sg_min) == (1.0, 1.0)


@given(
    ratio_lists,
    st.integers(0, 29),
    st.floats(1e-6, 5.0, allow_nan=False),
    st.sampled_from(list(IndexMode)),
)
@settings(max_examples=300)
def test_fairness_index_strictly_increasing_above_one(ratios, i, bump, mode):
    ratios = ratios + [1.5]
    i %= len(ratios)
    if not ratios[i] > 1:
        return
    raised = list(ratios)
    raised[i] += bump
    assert fairness_index(raised, mode) > fairness_index(ratios, mode)
