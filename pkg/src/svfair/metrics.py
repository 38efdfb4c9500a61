"""Error curves, detection cost, EER and subgroup fairness ratios.

All operating points use the acceptance rule ``score >= threshold``. Candidate
thresholds are the distinct observed scores plus ``-inf``/``+inf`` sentinels,
which makes every minimum below exact: FPR and FNR are constant between
consecutive candidates.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DegeneratePopulationError, SubgroupMismatchError, UndefinedRatioError
from .ingest import DatasetSummary, GroupedTrials, SubgroupKey, TrialList, subgroup_name


@dataclass(frozen=True)
class CostParams:
    p_target: float = 0.05
    c_fn: float = 1.0
    c_fp: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.p_target < 1.0:
            raise ValueError(f"p_target must lie in (0, 1), got {self.p_target}")
        if self.c_fn < 0 or self.c_fp < 0:
            raise ValueError("cost weights must be nonnegative")
        if not self.c_fn + self.c_fp > 0:
            raise ValueError("at least one cost weight must be positive")

    @property
    def max_cost(self) -> float:
        """Upper bound of the detection cost (all errors on both sides)."""
        return self.c_fn * self.p_target + self.c_fp * (1.0 - self.p_target)

    @property
    def default_cost(self) -> float:
        """Cost of the best trivial system (accept all or reject all)."""
        return min(self.c_fn * self.p_target, self.c_fp * (1.0 - self.p_target))


DEFAULT_COSTS = CostParams()
FN_WEIGHTED = CostParams(0.05, 10.0, 1.0)
FP_WEIGHTED = CostParams(0.05, 1.0, 10.0)


class IndexMode(str, Enum):
    LITERAL = "literal"
    SUM_OF_RATIOS = "sum_of_ratios"


@dataclass(frozen=True, eq=False)
class ErrorCurve:
    thresholds: np.ndarray
    fnr: np.ndarray
    fpr: np.ndarray
    n_target: int
    n_nontarget: int

    def index_at(self, theta: float) -> int:
        """Index of the smallest candidate threshold ``>= theta``.

        Under ``score >= theta`` the rates on ``(t[i-1], t[i]]`` are those at
        ``t[i]``, so this reproduces an exact recount at ``theta``.
        """
        if math.isnan(theta):
            raise ValueError("threshold must not be NaN")
        return int(np.searchsorted(self.thresholds, theta, side="left"))

    def rates_at(self, theta: float) -> tuple[float, float]:
        """``(fnr, fpr)`` at an arbitrary threshold."""
        i = self.index_at(theta)
        return float(self.fnr[i]), float(self.fpr[i])

    def __len__(self) -> int:
        return self.thresholds.shape[0]


def compute_error_curve(target_scores, nontarget_scores) -> ErrorCurve:
    """Exhaustive FNR/FPR operating points for one trial population."""
    tar = np.sort(np.asarray(target_scores, dtype=np.float64).ravel())
    non = np.sort(np.asarray(nontarget_scores, dtype=np.float64).ravel())
    if tar.size == 0 and non.size == 0:
        raise DegeneratePopulationError("no target and no nontarget trials")
    if tar.size == 0:
        raise DegeneratePopulationError("no target trials")
    if non.size == 0:
        raise DegeneratePopulationError("no nontarget trials")
    if not (np.isfinite(tar).all() and np.isfinite(non).all()):
        raise ValueError("scores must be finite")

    thresholds = np.concatenate(([-np.inf], np.unique(np.concatenate((tar, non))), [np.inf]))
    # score >= theta is accepted: misses are targets strictly below theta,
    # false alarms are nontargets at or above it
    n_miss = np.searchsorted(tar, thresholds, side="left")
    n_fa = non.size - np.searchsorted(non, thresholds, side="left")
    fnr = n_miss / tar.size
    fpr = n_fa / non.size
    for arr in (thresholds, fnr, fpr):
        arr.setflags(write=False)
    return ErrorCurve(thresholds, fnr, fpr, int(tar.size), int(non.size))


def curve_for(trials: TrialList) -> ErrorCurve:
    return compute_error_curve(trials.target_scores(), trials.nontarget_scores())


def detection_cost(fnr, fpr, params: CostParams = DEFAULT_COSTS):
    """Weighted sum of miss and false-alarm rates (unnormalized)."""
    return params.c_fn * params.p_target * fnr + params.c_fp * (1.0 - params.p_target) * fpr


def normalized_cost(cost: float, params: CostParams = DEFAULT_COSTS) -> float:
    """Cost divided by that of the best trivial system."""
    return cost / params.default_cost


def cost_curve(curve: ErrorCurve, params: CostParams = DEFAULT_COSTS) -> np.ndarray:
    return detection_cost(curve.fnr, curve.fpr, params)


def min_detection_cost(curve: ErrorCurve, params: CostParams = DEFAULT_COSTS) -> tuple[float, float]:
    """``(threshold, cost)`` at the smallest candidate achieving the minimum cost."""
    costs = cost_curve(curve, params)
    i = int(np.argmin(costs))
    return float(curve.thresholds[i]), float(costs[i])


def cost_at_threshold(curve: ErrorCurve, theta: float, params: CostParams = DEFAULT_COSTS) -> float:
    fnr, fpr = curve.rates_at(theta)
    return float(detection_cost(fnr, fpr, params))


def equal_error_rate(curve: ErrorCurve) -> tuple[float, float]:
    """``(eer, threshold)`` at the first sign change of FNR - FPR.

    Between the bracketing operating points the EER is the intersection of
    the straight segment joining them with the FNR = FPR diagonal. The
    threshold reported is whichever bracket has the smaller ``|FNR - FPR|``
    (the later one on a tie).
    """
    diff = curve.fnr - curve.fpr
    i = int(np.argmax(diff >= 0))  # fnr(+inf) - fpr(+inf) = 1, so always found
    if diff[i] == 0:
        return float(curve.fnr[i]), float(curve.thresholds[i])
    return _interpolated_crossing(
        float(curve.fpr[i - 1]), float(curve.fnr[i - 1]),
        float(curve.fpr[i]), float(curve.fnr[i]),
        float(curve.thresholds[i - 1]), float(curve.thresholds[i]),
    )


def _interpolated_crossing(fpr0, fnr0, fpr1, fnr1, theta0, theta1) -> tuple[float, float]:
    d0 = fnr0 - fpr0
    d1 = fnr1 - fpr1
    t = -d0 / (d1 - d0)
    eer = fpr0 + t * (fpr1 - fpr0)
    theta = theta0 if abs(d0) < abs(d1) else theta1
    return eer, theta


@dataclass(frozen=True)
class SubgroupCost:
    cdet_at_overall_min: float
    cdet_at_sg_min: float
    ratio_overall_min: float
    ratio_sg_min: float
    sg_min_threshold: float


def subgroup_cdet_evaluation(
    overall: ErrorCurve, subgroup: ErrorCurve, params: CostParams = DEFAULT_COSTS
) -> SubgroupCost:
    """Subgroup cost at the pooled optimum and at its own optimum, plus both ratios."""
    theta_star, overall_min = min_detection_cost(overall, params)
    if overall_min == 0:
        raise UndefinedRatioError(
            "overall minimum detection cost is 0; ratio to the overall minimum is undefined"
        )
    at_overall = cost_at_threshold(subgroup, theta_star, params)
    sg_theta, sg_min = min_detection_cost(subgroup, params)
    if at_overall == 0:
        # the subgroup minimum can only be 0 as well
        ratio_sg = 1.0
    else:
        ratio_sg = sg_min / at_overall
    return SubgroupCost(at_overall, sg_min, at_overall / overall_min, ratio_sg, sg_theta)


def error_rate_ratios(
    overall: ErrorCurve, subgroup: ErrorCurve, theta: float
) -> tuple[float | None, float | None]:
    """``(fpr_ratio, fnr_ratio)`` of subgroup to overall rates; ``None`` where the overall rate is 0."""
    o_fnr, o_fpr = overall.rates_at(theta)
    s_fnr, s_fpr = subgroup.rates_at(theta)
    fpr_ratio = s_fpr / o_fpr if o_fpr > 0 else None
    fnr_ratio = s_fnr / o_fnr if o_fnr > 0 else None
    return fpr_ratio, fnr_ratio


def fairness_index(ratios: Iterable[float], mode: IndexMode | str = IndexMode.SUM_OF_RATIOS) -> float:
    """Aggregate of the ratios above 1; 0 means no subgroup is worse than the pool.

    ``sum_of_ratios`` sums the ratios above 1; ``literal`` subtracts 1 from each
    of them first. The sum is correctly rounded, so it does not depend on the
    order of the subgroups, and ``literal == sum_of_ratios - count`` holds exactly.
    """
    mode = IndexMode(mode)
    ratios = [float(r) for r in ratios]
    if any(not r >= 0 for r in ratios):
        raise ValueError("ratios must be nonnegative")
    above = [r for r in ratios if r > 1]
    total = math.fsum(above)
    if mode is IndexMode.SUM_OF_RATIOS:
        return total
    return total - len(above)


@dataclass(frozen=True)
class OverallMetrics:
    min_cdet: float
    min_cdet_threshold: float
    eer: float
    eer_threshold: float
    n_target_trials: int
    n_nontarget_trials: int
    min_cdet_normalized: float | None = None


@dataclass(frozen=True)
class SubgroupMetrics:
    name: str
    key: SubgroupKey
    n_speakers: int
    n_target_trials: int
    n_nontarget_trials: int
    cdet_at_overall_min: float
    cdet_at_sg_min: float
    ratio_overall_min: float
    ratio_sg_min: float
    fpr_ratio: float | None
    fnr_ratio: float | None


@dataclass(frozen=True)
class FairnessReport:
    model_name: str
    cost_params: CostParams
    overall: OverallMetrics
    subgroups: list[SubgroupMetrics]
    fairness_index_literal: float
    fairness_index_sum_of_ratios: float
    excluded_trials: int = 0
    index_mode: IndexMode = IndexMode.SUM_OF_RATIOS
    settings: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def fairness_index(self) -> float:
        """Headline index in the configured mode."""
        if IndexMode(self.index_mode) is IndexMode.LITERAL:
            return self.fairness_index_literal
        return self.fairness_index_sum_of_ratios

    def subgroup(self, name: str) -> SubgroupMetrics:
        for sg in self.subgroups:
            if sg.name == name:
                return sg
        raise KeyError(name)


@dataclass(frozen=True, eq=False)
class Evaluation:
    """A report together with the curves it was computed from (needed for DET plots)."""

    report: FairnessReport
    overall_curve: ErrorCurve
    subgroup_curves: dict[SubgroupKey, ErrorCurve]


def evaluate(
    grouped: GroupedTrials,
    params: CostParams = DEFAULT_COSTS,
    *,
    model_name: str = "model",
    summary: DatasetSummary | None = None,
    index_mode: IndexMode | str = IndexMode.SUM_OF_RATIOS,
    normalized: bool = False,
    settings: Mapping | None = None,
) -> Evaluation:
    """Compute the full fairness report for one model's grouped trials.

    The pooled baseline is ``grouped.overall``: the trials that survived
    subgroup assignment.
    """
    try:
        overall_curve = curve_for(grouped.overall)
    except DegeneratePopulationError as exc:
        raise DegeneratePopulationError(f"overall: {exc}") from None
    theta_star, min_cdet = min_detection_cost(overall_curve, params)
    eer, eer_theta = equal_error_rate(overall_curve)
    overall = OverallMetrics(
        min_cdet,
        theta_star,
        eer,
        eer_theta,
        overall_curve.n_target,
        overall_curve.n_nontarget,
        normalized_cost(min_cdet, params) if normalized else None,
    )

    curves: dict[SubgroupKey, ErrorCurve] = {}
    rows: list[SubgroupMetrics] = []
    for key in sorted(grouped.by_subgroup):
        name = subgroup_name(key)
        try:
            curve = curve_for(grouped.by_subgroup[key])
        except DegeneratePopulationError as exc:
            raise DegeneratePopulationError(f"subgroup {name}: {exc}") from None
        curves[key] = curve
        cost = subgroup_cdet_evaluation(overall_curve, curve, params)
        fpr_ratio, fnr_ratio = error_rate_ratios(overall_curve, curve, theta_star)
        n_speakers = summary.subgroups[key].n_speakers if summary is not None else 0
        rows.append(
            SubgroupMetrics(
                name,
                tuple(key),
                n_speakers,
                curve.n_target,
                curve.n_nontarget,
                cost.cdet_at_overall_min,
                cost.cdet_at_sg_min,
                cost.ratio_overall_min,
                cost.ratio_sg_min,
                fpr_ratio,
                fnr_ratio,
            )
        )

    ratios = [r.ratio_overall_min for r in rows]
    report = FairnessReport(
        model_name=model_name,
        cost_params=params,
        overall=overall,
        subgroups=rows,
        fairness_index_literal=fairness_index(ratios, IndexMode.LITERAL),
        fairness_index_sum_of_ratios=fairness_index(ratios, IndexMode.SUM_OF_RATIOS),
        excluded_trials=grouped.excluded_count,
        index_mode=IndexMode(index_mode),
        settings=dict(settings or {}),
        warnings=list(summary.warnings) if summary is not None else [],
    )
    return Evaluation(report, overall_curve, curves)


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    n_speakers: int
    ratio_a: float
    ratio_b: float
    difference: float


def compare_models(report_a: FairnessReport, report_b: FairnessReport) -> list[ComparisonRow]:
    """Per-subgroup ``ratio_a - ratio_b``, sorted by difference ascending."""
    a = {sg.name: sg for sg in report_a.subgroups}
    b = {sg.name: sg for sg in report_b.subgroups}
    if a.keys() != b.keys():
        raise SubgroupMismatchError(a.keys() - b.keys(), b.keys() - a.keys())
    rows = [
        ComparisonRow(
            name,
            a[name].n_speakers or b[name].n_speakers,
            a[name].ratio_overall_min,
            b[name].ratio_overall_min,
            a[name].ratio_overall_min - b[name].ratio_overall_min,
        )
        for name in a
    ]
    rows.sort(key=lambda r: (r.difference, r.name))
    return rows

