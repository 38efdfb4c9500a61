"""Plot data, serialization and SVG rendering for fairness reports."""

from .plotdata import (
    DetCurvePoints,
    DetMarker,
    DistributionSummary,
    ScatterData,
    det_curve_points,
    format_rates,
    ratio_scatter,
    score_distribution,
)
from .probit import clamp_rate, probit, probit_array
from .serialize import (
    emit_comparison,
    emit_report,
    emit_table3,
    emit_table4,
    parse_report,
    parse_table,
)
from .svg import DetSeries, Style, render_det, render_distributions, render_ratio_chart, render_scatter, render_svg

__all__ = [
    "DetCurvePoints",
    "DetMarker",
    "DetSeries",
    "DistributionSummary",
    "ScatterData",
    "Style",
    "clamp_rate",
    "det_curve_points",
    "emit_comparison",
    "emit_report",
    "emit_table3",
    "emit_table4",
    "format_rates",
    "parse_report",
    "parse_table",
    "probit",
    "probit_array",
    "ratio_scatter",
    "render_det",
    "render_distributions",
    "render_ratio_chart",
    "render_scatter",
    "render_svg",
    "score_distribution",
]
