"""Report JSON and table CSV serialization.

Floats are written with their shortest round-trip representation, so
``parse_report(emit_report(r, "json")) == r``. Infinite thresholds (the
sentinels) are written as the strings ``"-inf"``/``"inf"``; undefined ratios
as ``null`` in JSON and as empty cells in CSV.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Sequence

from ..errors import SchemaError
from ..metrics import (
    ComparisonRow,
    CostParams,
    FairnessReport,
    IndexMode,
    OverallMetrics,
    SubgroupMetrics,
)

SCHEMA_VERSION = 1

TABLE3_COLUMNS = ("subgroup", "n_speakers", "cdet_overall_min", "cdet_sg_min", "ratio_overall_min", "ratio_sg_min")
TABLE4_COLUMNS = ("subgroup", "n_speakers", "fpr_ratio", "fnr_ratio")
TABLE5_COLUMNS = ("subgroup", "n_speakers", "ratio_a", "ratio_b", "difference")


def _threshold_out(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def report_to_dict(report: FairnessReport) -> dict:
    o = report.overall
    overall = {
        "min_cdet": o.min_cdet,
        "min_cdet_threshold": _threshold_out(o.min_cdet_threshold),
        "eer": o.eer,
        "eer_threshold": _threshold_out(o.eer_threshold),
        "n_target_trials": o.n_target_trials,
        "n_nontarget_trials": o.n_nontarget_trials,
    }
    if o.min_cdet_normalized is not None:
        overall["min_cdet_normalized"] = o.min_cdet_normalized
    return {
        "schema_version": SCHEMA_VERSION,
        "model_name": report.model_name,
        "cost_params": {
            "p_target": report.cost_params.p_target,
            "c_fn": report.cost_params.c_fn,
            "c_fp": report.cost_params.c_fp,
        },
        "overall": overall,
        "subgroups": [
            {
                "name": sg.name,
                "key": list(sg.key),
                "n_speakers": sg.n_speakers,
                "n_target_trials": sg.n_target_trials,
                "n_nontarget_trials": sg.n_nontarget_trials,
                "cdet_at_overall_min": sg.cdet_at_overall_min,
                "cdet_at_sg_min": sg.cdet_at_sg_min,
                "ratio_overall_min": sg.ratio_overall_min,
                "ratio_sg_min": sg.ratio_sg_min,
                "fpr_ratio": sg.fpr_ratio,
                "fnr_ratio": sg.fnr_ratio,
            }
            for sg in report.subgroups
        ],
        "fairness_index": {
            "literal": report.fairness_index_literal,
            "sum_of_ratios": report.fairness_index_sum_of_ratios,
            "mode": IndexMode(report.index_mode).value,
            "headline": report.fairness_index,
        },
        "excluded_trials": report.excluded_trials,
        "settings": report.settings,
        "warnings": list(report.warnings),
    }


def emit_report(report: FairnessReport, format: str = "json", *, table: str = "table3") -> bytes:
    """Serialize a report as JSON, or one of its tables (``table3``/``table4``) as CSV."""
    if format == "json":
        text = json.dumps(report_to_dict(report), indent=2, allow_nan=False, ensure_ascii=False)
        return (text + "\n").encode("utf-8")
    if format == "csv":
        if table == "table3":
            return emit_table3(report)
        if table == "table4":
            return emit_table4(report)
        raise ValueError(f"unknown table {table!r}")
    raise ValueError(f"unknown report format {format!r}")


def _csv_bytes(header: Sequence[str], rows) -> bytes:
    out = io.StringIO(newline="")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return out.getvalue().encode("utf-8")


def _ascending(value):
    return (value is None, value if value is not None else 0.0)


def emit_table3(report: FairnessReport) -> bytes:
    """Costs and ratios per subgroup, ordered by the ratio to the overall minimum."""
    rows = sorted(report.subgroups, key=lambda s: (s.ratio_overall_min, s.name))
    return _csv_bytes(
        TABLE3_COLUMNS,
        (
            (s.name, s.n_speakers, s.cdet_at_overall_min, s.cdet_at_sg_min, s.ratio_overall_min, s.ratio_sg_min)
            for s in rows
        ),
    )


def emit_table4(report: FairnessReport) -> bytes:
    """FPR/FNR ratios per subgroup, ordered by FPR ratio (undefined last)."""
    rows = sorted(report.subgroups, key=lambda s: (*_ascending(s.fpr_ratio), s.name))
    return _csv_bytes(TABLE4_COLUMNS, ((s.name, s.n_speakers, s.fpr_ratio, s.fnr_ratio) for s in rows))


def emit_comparison(rows: Sequence[ComparisonRow]) -> bytes:
    return _csv_bytes(TABLE5_COLUMNS, ((r.name, r.n_speakers, r.ratio_a, r.ratio_b, r.difference) for r in rows))


def parse_table(data: bytes | str) -> list[dict]:
    """Read a table CSV back; numeric cells become int/float, empty cells None."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    reader = csv.DictReader(io.StringIO(text, newline=""))
    out = []
    for row in reader:
        parsed = {}
        for k, v in row.items():
            if k == "subgroup":
                parsed[k] = v
            elif v == "":
                parsed[k] = None
            elif k == "n_speakers":
                parsed[k] = int(v)
            else:
                parsed[k] = float(v)
        out.append(parsed)
    return out


# --- parsing -----------------------------------------------------------------


def _get(obj, key, path):
    if not isinstance(obj, dict):
        raise SchemaError("expected an object", path or "<root>")
    if key not in obj:
        raise SchemaError("missing field", f"{path}.{key}" if path else key)
    return obj[key]


def _number(obj, key, path, *, nullable=False, threshold=False):
    value = _get(obj, key, path)
    where = f"{path}.{key}" if path else key
    if value is None and nullable:
        return None
    if threshold and value in ("inf", "-inf"):
        return float(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError("expected a number", where)
    return float(value)


def _int(obj, key, path):
    value = _get(obj, key, path)
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError("expected an integer", f"{path}.{key}" if path else key)
    return value


def _str(obj, key, path):
    value = _get(obj, key, path)
    if not isinstance(value, str):
        raise SchemaError("expected a string", f"{path}.{key}" if path else key)
    return value


def report_from_dict(doc: dict) -> FairnessReport:
    if not isinstance(doc, dict):
        raise SchemaError("report must be a JSON object")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema version {version!r}", "schema_version")

    cp = _get(doc, "cost_params", "")
    try:
        params = CostParams(
            _number(cp, "p_target", "cost_params"),
            _number(cp, "c_fn", "cost_params"),
            _number(cp, "c_fp", "cost_params"),
        )
    except ValueError as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(str(exc), "cost_params") from None

    ov = _get(doc, "overall", "")
    overall = OverallMetrics(
        _number(ov, "min_cdet", "overall"),
        _number(ov, "min_cdet_threshold", "overall", threshold=True),
        _number(ov, "eer", "overall"),
        _number(ov, "eer_threshold", "overall", threshold=True),
        _int(ov, "n_target_trials", "overall"),
        _int(ov, "n_nontarget_trials", "overall"),
        _number(ov, "min_cdet_normalized", "overall") if "min_cdet_normalized" in ov else None,
    )

    raw = _get(doc, "subgroups", "")
    if not isinstance(raw, list):
        raise SchemaError("expected a list", "subgroups")
    subgroups = []
    for i, sg in enumerate(raw):
        path = f"subgroups[{i}]"
        name = _str(sg, "name", path)
        key = sg.get("key", name.split("_")) if isinstance(sg, dict) else None
        if not isinstance(key, list) or not all(isinstance(k, str) for k in key):
            raise SchemaError("expected a list of strings", f"{path}.key")
        subgroups.append(
            SubgroupMetrics(
                name,
                tuple(key),
                _int(sg, "n_speakers", path),
                _int(sg, "n_target_trials", path),
                _int(sg, "n_nontarget_trials", path),
                _number(sg, "cdet_at_overall_min", path),
                _number(sg, "cdet_at_sg_min", path),
                _number(sg, "ratio_overall_min", path),
                _number(sg, "ratio_sg_min", path),
                _number(sg, "fpr_ratio", path, nullable=True),
                _number(sg, "fnr_ratio", path, nullable=True),
            )
        )

    fi = _get(doc, "fairness_index", "")
    mode = fi.get("mode", IndexMode.SUM_OF_RATIOS.value) if isinstance(fi, dict) else None
    try:
        mode = IndexMode(mode)
    except ValueError:
        raise SchemaError(f"unknown index mode {mode!r}", "fairness_index.mode") from None
    settings = doc.get("settings", {})
    if not isinstance(settings, dict):
        raise SchemaError("expected an object", "settings")
    warnings = doc.get("warnings", [])
    if not isinstance(warnings, list):
        raise SchemaError("expected a list", "warnings")

    return FairnessReport(
        model_name=_str(doc, "model_name", ""),
        cost_params=params,
        overall=overall,
        subgroups=subgroups,
        fairness_index_literal=_number(fi, "literal", "fairness_index"),
        fairness_index_sum_of_ratios=_number(fi, "sum_of_ratios", "fairness_index"),
        excluded_trials=_int(doc, "excluded_trials", ""),
        index_mode=mode,
        settings=settings,
        warnings=warnings,
    )


def parse_report(data: bytes | str) -> FairnessReport:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return report_from_dict(doc)
