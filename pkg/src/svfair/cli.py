"""Command-line interface: evaluate, compare, gate, plot and synth.

Exit codes: 0 success, 1 fairness gate violated, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .errors import SVFairError
from .ingest import (
    GroupedTrials,
    Metadata,
    Policy,
    assign_subgroups,
    parse_metadata,
    parse_scores,
    subgroup_name,
    validate_dataset,
    write_metadata,
    write_scores,
)
from .metrics import (
    CostParams,
    Evaluation,
    FairnessReport,
    IndexMode,
    compare_models,
    evaluate,
    min_detection_cost,
)
from .report.plotdata import det_curve_points, ratio_scatter, score_distribution, shape_attribute_values
from .report.serialize import emit_comparison, emit_report, emit_table3, emit_table4, parse_report
from .report.svg import DASHES, PALETTE, DetSeries, Style, render_det, render_distributions, render_ratio_chart, render_scatter
from .synth import RNG_ALGORITHM, generate_trials, load_specs

EXIT_OK = 0
EXIT_GATE = 1
EXIT_INPUT = 2

POLICIES = {
    "enroll": Policy.ENROLL_SPEAKER,
    "require-same": Policy.REQUIRE_SAME,
    "exclude-mixed": Policy.EXCLUDE_MIXED,
}
INDEX_MODES = {"literal": IndexMode.LITERAL, "sum-of-ratios": IndexMode.SUM_OF_RATIOS}


class InputError(Exception):
    """Bad user input detected by the CLI itself."""


@dataclass
class RunConfig:
    scores: list[Path]
    meta: Path | None
    group_by: list[str]
    policy: Policy
    params: CostParams
    index_mode: IndexMode
    out: Path
    scores_format: str
    min_speakers: int
    model_names: list[str]
    normalized: bool
    bins: int


def _read(path: Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except FileNotFoundError:
        raise InputError(f"{path}: file not found") from None
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def _with_source(path: Path, fn, *args):
    try:
        return fn(*args)
    except SVFairError as exc:
        raise InputError(f"{path}: {exc}") from None


def _config(args, n_scores: int | None) -> RunConfig:
    scores = [Path(p) for p in (args.scores or [])]
    if n_scores is not None and len(scores) != n_scores:
        raise InputError(f"{args.command} needs exactly {n_scores} --scores file(s), got {len(scores)}")
    try:
        params = CostParams(args.p_target, args.c_fn, args.c_fp)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.min_speakers < 1:
        raise InputError("--min-speakers must be >= 1")
    names = list(args.model_name or [])
    if len(names) > len(scores):
        raise InputError("more --model-name values than --scores files")
    names += [p.stem for p in scores[len(names):]]
    return RunConfig(
        scores=scores,
        meta=Path(args.meta) if args.meta else None,
        group_by=[a.strip() for a in args.group_by.split(",") if a.strip()],
        policy=POLICIES[args.policy],
        params=params,
        index_mode=INDEX_MODES[args.index_mode or "sum-of-ratios"],
        out=Path(args.out),
        scores_format=args.format,
        min_speakers=args.min_speakers,
        model_names=names,
        normalized=args.normalized_cdet,
        bins=args.bins,
    )


def _settings(cfg: RunConfig) -> dict:
    return {
        "group_by": list(cfg.group_by),
        "policy": cfg.policy.value,
        "min_speakers": cfg.min_speakers,
        "index_mode": cfg.index_mode.value,
        "scores_format": cfg.scores_format,
        "normalized_cdet": cfg.normalized,
    }


def _load_meta(cfg: RunConfig) -> Metadata:
    if cfg.meta is None:
        raise InputError("--meta is required")
    return _with_source(cfg.meta, parse_metadata, _read(cfg.meta))


def _evaluate_file(path: Path, name: str, meta: Metadata, cfg: RunConfig) -> tuple[Evaluation, GroupedTrials]:
    trials = _with_source(path, parse_scores, _read(path), cfg.scores_format)
    grouped = _with_source(path, assign_subgroups, trials, meta, cfg.group_by, cfg.policy)
    summary = _with_source(path, validate_dataset, grouped, meta, cfg.min_speakers)
    for w in summary.warnings:
        print(f"warning: {path}: {w}", file=sys.stderr)
    ev = _with_source(
        path,
        lambda: evaluate(
            grouped,
            cfg.params,
            model_name=name,
            summary=summary,
            index_mode=cfg.index_mode,
            normalized=cfg.normalized,
            settings=_settings(cfg),
        ),
    )
    return ev, grouped


def _write(path: Path, data: bytes | str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data.encode("utf-8") if isinstance(data, str) else data)


def _det_series(ev: Evaluation, dash: str | None = None, suffix: str = "", colors=None) -> list[DetSeries]:
    report = ev.report
    series = [
        DetSeries(
            det_curve_points(
                ev.overall_curve,
                {"overall_min": report.overall.min_cdet_threshold, "eer": 0.0},
                name="overall",
            ),
            f"overall{suffix}",
            color="#000",
            dash=dash,
            width=2.0,
        )
    ]
    theta_star = report.overall.min_cdet_threshold
    for i, sg in enumerate(report.subgroups):
        curve = ev.subgroup_curves[sg.key]
        sg_theta, _ = min_detection_cost(curve, report.cost_params)
        points = det_curve_points(curve, {"overall_min": theta_star, "sg_min": sg_theta}, name=sg.name)
        color = (colors or {}).get(sg.name, PALETTE[i % len(PALETTE)])
        series.append(DetSeries(points, f"{sg.name}{suffix}", color=color, dash=dash))
    return series


def _distribution_svg(ev: Evaluation, grouped: GroupedTrials, bins: int) -> str:
    panels = []
    for key, trials in grouped.by_subgroup.items():
        dists = [
            score_distribution(trials.nontarget_scores(), 0, key, bins),
            score_distribution(trials.target_scores(), 1, key, bins),
        ]
        panels.append((subgroup_name(key), dists))
    reference = [
        score_distribution(grouped.overall.nontarget_scores(), 0, ("overall",), bins),
        score_distribution(grouped.overall.target_scores(), 1, ("overall",), bins),
    ]
    return render_distributions(panels, Style(title=f"Score distributions: {ev.report.model_name}"), reference)


def _scatter_svg(report_a: FairnessReport, report_b: FairnessReport) -> str:
    rows = compare_models(report_a, report_b)
    keys = {sg.name: sg.key for sg in report_a.subgroups}
    shapes = shape_attribute_values(keys, report_a.settings.get("group_by", []))
    data = ratio_scatter(rows, label_a=report_a.model_name, label_b=report_b.model_name, shape_by=shapes)
    return render_scatter(data)


def _print_summary(report: FairnessReport) -> None:
    print(f"model: {report.model_name}")
    cp = report.cost_params
    print(f"cost params: p_target={cp.p_target:g} c_fn={cp.c_fn:g} c_fp={cp.c_fp:g}")
    o = report.overall
    print(
        f"overall: min C_Det={o.min_cdet:.4f} at {o.min_cdet_threshold:.6g}, "
        f"EER={100 * o.eer:.2f}% ({o.n_target_trials} target / {o.n_nontarget_trials} nontarget)"
    )
    header = f"{'subgroup':<18}{'spk':>5}{'C@overall':>11}{'C@sg':>9}{'ratio':>9}{'ratio_sg':>10}{'FPR x':>9}{'FNR x':>9}"
    print(header)

    def fmt(v):
        return "   undef" if v is None else f"{v:9.4f}"

    for sg in sorted(report.subgroups, key=lambda s: (s.ratio_overall_min, s.name)):
        print(
            f"{sg.name:<18}{sg.n_speakers:>5}{sg.cdet_at_overall_min:11.4f}{sg.cdet_at_sg_min:9.4f}"
            f"{sg.ratio_overall_min:9.4f}{sg.ratio_sg_min:10.4f}{fmt(sg.fpr_ratio)}{fmt(sg.fnr_ratio)}"
        )
    print(
        f"fairness index: {report.fairness_index_sum_of_ratios:.4f} (sum of ratios), "
        f"{report.fairness_index_literal:.4f} (literal); headline mode {IndexMode(report.index_mode).value}"
    )
    if report.excluded_trials:
        print(f"note: {report.excluded_trials} trial(s) excluded; the overall baseline uses assigned trials only")


def _write_evaluation(out: Path, ev: Evaluation, grouped: GroupedTrials, bins: int) -> None:
    report = ev.report
    _write(out / "report.json", emit_report(report, "json"))
    _write(out / "table3.csv", emit_table3(report))
    _write(out / "table4.csv", emit_table4(report))
    _write(out / "det.svg", render_det(_det_series(ev), Style(title=f"DET curves: {report.model_name}")))
    _write(out / "distributions.svg", _distribution_svg(ev, grouped, bins))
    _write(out / "ratios.svg", render_ratio_chart(report))


def cmd_evaluate(args) -> int:
    cfg = _config(args, 1)
    meta = _load_meta(cfg)
    ev, grouped = _evaluate_file(cfg.scores[0], cfg.model_names[0], meta, cfg)
    _write_evaluation(cfg.out, ev, grouped, cfg.bins)
    _print_summary(ev.report)
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config(args, 2)
    meta = _load_meta(cfg)
    evs = []
    for path, name in zip(cfg.scores, cfg.model_names):
        ev, _ = _evaluate_file(path, name, meta, cfg)
        evs.append(ev)
    a, b = evs[0].report, evs[1].report
    try:
        rows = compare_models(a, b)
    except SVFairError as exc:
        raise InputError(str(exc)) from None
    _write(cfg.out / "report_a.json", emit_report(a, "json"))
    _write(cfg.out / "report_b.json", emit_report(b, "json"))
    _write(cfg.out / "table5.csv", emit_comparison(rows))
    _write(cfg.out / "ratio_scatter.svg", _scatter_svg(a, b))
    colors = {sg.name: PALETTE[i % len(PALETTE)] for i, sg in enumerate(a.subgroups)}
    series = _det_series(evs[0], DASHES[0], f" ({a.model_name})", colors) + _det_series(
        evs[1], DASHES[1], f" ({b.model_name})", colors
    )
    _write(
        cfg.out / "det_compare.svg",
        render_det(series, Style(title=f"DET curves: {a.model_name} (solid) vs {b.model_name} (dashed)", width=820, margin_right=290)),
    )
    print(f"{'subgroup':<18}{'ratio_a':>10}{'ratio_b':>10}{'diff':>10}")
    for r in rows:
        print(f"{r.name:<18}{r.ratio_a:10.4f}{r.ratio_b:10.4f}{r.difference:10.4f}")
    for rep in (a, b):
        print(
            f"{rep.model_name}: fairness index {rep.fairness_index_sum_of_ratios:.4f} (sum of ratios), "
            f"{rep.fairness_index_literal:.4f} (literal)"
        )
    return EXIT_OK


def cmd_gate(args) -> int:
    if args.max_ratio is None and args.max_fairness_index is None:
        raise InputError("no gate criteria: give --max-ratio and/or --max-fairness-index")
    if args.report:
        if args.scores:
            raise InputError("give either --report or --scores, not both")
        path = Path(args.report)
        report = _with_source(path, parse_report, _read(path))
    else:
        cfg = _config(args, 1)
        meta = _load_meta(cfg)
        report = _evaluate_file(cfg.scores[0], cfg.model_names[0], meta, cfg)[0].report

    mode = INDEX_MODES[args.index_mode] if args.index_mode else IndexMode(report.index_mode)
    violations = []
    if args.max_ratio is not None:
        for sg in report.subgroups:
            if sg.ratio_overall_min > args.max_ratio:
                violations.append((sg.name, sg.ratio_overall_min, args.max_ratio))
    if args.max_fairness_index is not None:
        index = report.fairness_index_literal if mode is IndexMode.LITERAL else report.fairness_index_sum_of_ratios
        if index > args.max_fairness_index:
            violations.append((f"fairness_index[{mode.value}]", index, args.max_fairness_index))
    for name, value, limit in violations:
        print(f"{name}\t{value:.4f}\t{limit:g}")
    if violations:
        print(f"gate: FAIL ({len(violations)} violation(s))", file=sys.stderr)
        return EXIT_GATE
    print("gate: PASS", file=sys.stderr)
    return EXIT_OK


def cmd_plot(args) -> int:
    paths = [Path(p) for p in args.report]
    if len(paths) not in (1, 2):
        raise InputError("plot takes one or two --report files")
    reports = [_with_source(p, parse_report, _read(p)) for p in paths]
    out = Path(args.out)
    if len(reports) == 1:
        report = reports[0]
        _write(out / "ratios.svg", render_ratio_chart(report))
        _write(out / "table3.csv", emit_table3(report))
        _write(out / "table4.csv", emit_table4(report))
    else:
        try:
            rows = compare_models(*reports)
        except SVFairError as exc:
            raise InputError(str(exc)) from None
        _write(out / "ratio_scatter.svg", _scatter_svg(*reports))
        _write(out / "table5.csv", emit_comparison(rows))

    if args.scores:
        if len(args.scores) != len(reports):
            raise InputError("give one --scores file per --report to regenerate DET plots")
        if not args.meta:
            raise InputError("--meta is required to regenerate DET plots")
        meta_path = Path(args.meta)
        meta = _with_source(meta_path, parse_metadata, _read(meta_path))
        for i, (report, scores) in enumerate(zip(reports, args.scores)):
            s = report.settings
            cfg = RunConfig(
                scores=[Path(scores)],
                meta=meta_path,
                group_by=list(s.get("group_by", [])),
                policy=Policy(s.get("policy", Policy.ENROLL_SPEAKER.value)),
                params=report.cost_params,
                index_mode=IndexMode(report.index_mode),
                out=out,
                scores_format=args.format or s.get("scores_format", "csv"),
                min_speakers=int(s.get("min_speakers", 5)),
                model_names=[report.model_name],
                normalized=bool(s.get("normalized_cdet", False)),
                bins=args.bins,
            )
            if not cfg.group_by:
                raise InputError(f"{paths[i]}: report settings lack group_by; cannot regenerate DET plot")
            ev, grouped = _evaluate_file(cfg.scores[0], report.model_name, meta, cfg)
            suffix = "" if len(reports) == 1 else f"_{'ab'[i]}"
            _write(out / f"det{suffix}.svg", render_det(_det_series(ev), Style(title=f"DET curves: {report.model_name}")))
            _write(out / f"distributions{suffix}.svg", _distribution_svg(ev, grouped, cfg.bins))
    return EXIT_OK


def cmd_synth(args) -> int:
    spec_path = Path(args.spec)
    try:
        specs, attrs = load_specs(_read(spec_path))
    except ValueError as exc:
        raise InputError(f"{spec_path}: {exc}") from None
    trials, meta = generate_trials(specs, args.seed, attrs)
    out = Path(args.out)
    _write(out / "scores.csv", write_scores(trials))
    _write(out / "metadata.csv", write_metadata(meta))
    _write(
        out / "synth_info.json",
        json.dumps(
            {"seed": args.seed, "rng": RNG_ALGORITHM, "n_trials": len(trials), "attributes": list(attrs)},
            indent=2,
        )
        + "\n",
    )
    print(f"wrote {len(trials)} trials for {len(specs)} subgroup(s) to {out}")
    return EXIT_OK


def _add_eval_options(p: argparse.ArgumentParser, *, scores_required: bool = True) -> None:
    p.add_argument("--scores", action="append", metavar="PATH", required=scores_required, help="scores file")
    p.add_argument("--meta", metavar="PATH", help="speaker metadata CSV")
    p.add_argument("--group-by", default="nationality,sex", help="comma-separated attribute names")
    p.add_argument("--policy", choices=sorted(POLICIES), default="enroll")
    p.add_argument("--p-target", type=float, default=0.05)
    p.add_argument("--c-fn", type=float, default=1.0)
    p.add_argument("--c-fp", type=float, default=1.0)
    p.add_argument("--index-mode", choices=sorted(INDEX_MODES), default="sum-of-ratios")
    p.add_argument("--out", default="svfair_out", metavar="DIR")
    p.add_argument("--format", choices=("csv", "voxceleb"), default="csv", help="scores file format")
    p.add_argument("--min-speakers", type=int, default=5)
    p.add_argument("--model-name", action="append", help="display name per --scores file")
    p.add_argument("--normalized-cdet", action="store_true", help="also report the normalized min C_Det")
    p.add_argument("--bins", type=int, default=50, help="histogram bins for score distributions")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svfair", description="Fairness evaluation of speaker verification scores.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="compute a fairness report for one scores file")
    _add_eval_options(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="compare two models scored on the same trials")
    _add_eval_options(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gate", help="fail (exit 1) when fairness limits are exceeded")
    _add_eval_options(p, scores_required=False)
    p.add_argument("--report", metavar="PATH", help="gate on an existing report.json instead of scores")
    p.add_argument("--max-ratio", type=float)
    p.add_argument("--max-fairness-index", type=float)
    p.set_defaults(func=cmd_gate, index_mode=None)

    p = sub.add_parser("plot", help="regenerate plots and tables from saved reports")
    p.add_argument("--report", action="append", required=True, metavar="PATH")
    p.add_argument("--scores", action="append", metavar="PATH", help="scores file(s), needed for DET plots")
    p.add_argument("--meta", metavar="PATH")
    p.add_argument("--format", choices=("csv", "voxceleb"))
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--out", default="svfair_out", metavar="DIR")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("synth", help="write a seeded synthetic scores/metadata pair")
    p.add_argument("--spec", required=True, metavar="PATH", help="JSON subgroup score spec")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="svfair_synth", metavar="DIR")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, SVFairError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
