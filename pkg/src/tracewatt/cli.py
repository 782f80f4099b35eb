"""Command-line front end.

Commands:
    tracewatt analyze <revision_dir>   per-method and per-test records
    tracewatt evolve <root_dir>        cross-revision comparison report
    tracewatt synth <spec> <out_dir>   generate a synthetic fixture
    tracewatt report <evolve_out>      plot CSV + human-readable summary

Global flags (also settable through TRACEWATT_CONFIG, TRACEWATT_ALPHA,
TRACEWATT_JOBS and TRACEWATT_OUT environment variables; flags win):
    --config FILE   analysis configuration file
    --alpha X       significance level override
    --jobs N        worker threads for per-execution analysis
    --out DIR       output directory

Exit codes: 0 success; 2 layout/configuration errors; 3 parse errors;
4 attribution errors; 5 statistical degeneracy.
"""

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

from . import evolution, synth
from .config import AnalysisConfig, ConfigError, parse_config
from .energy import AttributionError, PowerFormatError
from .evolution import AnalysisError, ComparisonReport
from .ingest import LayoutError, RevisionAnalysis, analyze_revision
from .trace import TraceFormatError

EXIT_OK = 0
EXIT_LAYOUT = 2
EXIT_PARSE = 3
EXIT_ATTRIBUTION = 4
EXIT_STATS = 5

ENV_PREFIX = "TRACEWATT_"
REPORT_NAME = "report.json"
SUMMARIES_CSV = "revision_summaries.csv"


def _fmt(value) -> str:
    """Stable text form for CSV cells: shortest round-trip floats, empty
    string for absent values."""
    if value is None:
        return ""
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])


def _load_analysis_config(args) -> AnalysisConfig:
    if args.config is not None:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist")
        config = parse_config(path.read_text(encoding="utf-8"))
    else:
        config = AnalysisConfig()
    if args.alpha is not None:
        config = dataclasses.replace(config, alpha=args.alpha)
    return config


def _write_analysis(analysis: RevisionAnalysis, out_dir: Path) -> None:
    method_rows = []
    test_rows = []
    for ex in analysis.executions:
        for row in ex.method_rows:
            method_rows.append(
                [
                    row.test_name, row.sample_index, row.thread, row.depth,
                    row.t_start_ns, row.duration_ns, row.method.package,
                    row.method.class_name, row.method.method,
                    row.api_label, row.u_value,
                    row.energy_mj_inclusive, row.energy_mj_exclusive,
                    row.avg_power_mw,
                ]
            )
    for record in analysis.dataset.records:
        test_rows.append(
            [
                record.test_name, record.sample_index, record.energy_mj,
                record.avg_power_mw, record.duration_ms, record.root_uapi,
                record.api_interactions, record.ruapi,
            ]
        )
    _write_csv(
        out_dir / "methods.csv",
        [
            "test_name", "sample_index", "thread", "depth", "t_start_ns",
            "duration_ns", "package", "class", "method", "api_label",
            "u_value", "energy_mj_inclusive", "energy_mj_exclusive",
            "avg_power_mw",
        ],
        method_rows,
    )
    _write_csv(
        out_dir / "tests.csv",
        [
            "test_name", "sample_index", "energy_mj", "avg_power_mw",
            "duration_ms", "root_uapi", "api_interactions", "ruapi",
        ],
        test_rows,
    )


def _write_report_files(report: ComparisonReport, out_dir: Path) -> None:
    payload = evolution.report_to_json_dict(report)
    (out_dir / REPORT_NAME).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for metric, comparison in report.metrics.items():
        _write_csv(
            out_dir / f"pairwise_{metric}.csv",
            ["group_a", "group_b", "mean_diff", "q", "p_adj", "significant"],
            [
                [p.group_a, p.group_b, p.mean_diff, p.q, p.p_adj, p.significant]
                for p in comparison.pairs
            ],
        )
    _write_csv(
        out_dir / "proxy_scores.csv",
        ["target", "tp", "fp", "fn", "tn", "accuracy", "precision", "recall", "f1"],
        [
            [t, s.tp, s.fp, s.fn, s.tn, s.accuracy, s.precision, s.recall, s.f1]
            for t, s in report.proxy.items()
        ],
    )
    _write_summaries_csv(report, out_dir)


def _write_summaries_csv(report: ComparisonReport, out_dir: Path) -> None:
    _write_csv(
        out_dir / SUMMARIES_CSV,
        ["revision", "mean_energy_mj", "mean_power_mw", "sum_ruapi"],
        [
            [s.revision, s.mean_energy_mj, s.mean_power_mw, s.sum_ruapi]
            for s in report.summaries
        ],
    )


def _summary_text(report: ComparisonReport) -> str:
    lines = [
        f"revisions: {len(report.revisions)} ({', '.join(report.revisions)})",
        f"analyzed tests: {len(report.analysis_tests)}"
        f" of {len(report.aligned_tests)} aligned",
        f"observations per metric: {report.n_observations}"
        f" ({report.observation_unit})",
        f"alpha: {_fmt(report.alpha)}",
        "",
    ]
    if not report.metrics:
        lines.append("no comparisons (single revision)")
        lines.append("")
    else:
        lines.append(f"{'metric':<14} {'F':>14} {'p':>12} {'significant pairs':>18}")
        for metric, comparison in report.metrics.items():
            a = comparison.anova
            n_sig = sum(1 for p in comparison.pairs if p.significant)
            f_text = "degenerate" if a.degenerate else f"{a.F:.4g}"
            lines.append(
                f"{metric:<14} {f_text:>14} {a.p:>12.4g} "
                f"{n_sig:>10}/{len(comparison.pairs)}"
            )
        lines.append("")
        for target, score in report.proxy.items():
            parts = [
                f"accuracy {score.accuracy:.4g}",
                f"precision {score.precision:.4g}" if score.precision is not None else "precision n/a",
                f"recall {score.recall:.4g}" if score.recall is not None else "recall n/a",
                f"f1 {score.f1:.4g}" if score.f1 is not None else "f1 n/a",
            ]
            lines.append(
                f"ruapi proxy vs {target}: {', '.join(parts)} "
                f"(tp {score.tp} fp {score.fp} fn {score.fn} tn {score.tn})"
            )
        lines.append("")
    lines.append(f"{'revision':<16} {'mean_energy_mj':>16} {'mean_power_mw':>16} {'sum_ruapi':>12}")
    for s in report.summaries:
        lines.append(
            f"{s.revision:<16} {s.mean_energy_mj:>16.6g} "
            f"{s.mean_power_mw:>16.6g} {s.sum_ruapi:>12.6g}"
        )
    return "\n".join(lines) + "\n"


def cmd_analyze(args) -> int:
    config = _load_analysis_config(args)
    revision_dir = Path(args.revision_dir)
    if not revision_dir.is_dir():
        raise LayoutError(f"{revision_dir} is not a directory")
    analysis = analyze_revision(revision_dir.name, revision_dir, config, jobs=args.jobs)
    out_dir = Path(args.out if args.out is not None else "tracewatt-out")
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_analysis(analysis, out_dir)
    print(
        f"analyzed revision {analysis.revision}: "
        f"{len(analysis.executions)} executions -> {out_dir}"
    )
    return EXIT_OK


def cmd_evolve(args) -> int:
    config = _load_analysis_config(args)
    root = Path(args.root_dir)
    if not root.is_dir():
        raise LayoutError(f"{root} is not a directory")
    revision_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if len(revision_dirs) < 2:
        raise LayoutError(
            f"{root}: need at least 2 revision subdirectories, "
            f"found {len(revision_dirs)}"
        )
    datasets = []
    for rev_dir in revision_dirs:
        datasets.append(
            analyze_revision(rev_dir.name, rev_dir, config, jobs=args.jobs).dataset
        )
    report = evolution.compare(
        datasets,
        alpha=config.alpha,
        observation_unit=config.observation_unit,
        top_k_tests=config.top_k_tests,
        aggregation=config.aggregation,
    )
    out_dir = Path(args.out if args.out is not None else "tracewatt-out")
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_report_files(report, out_dir)
    print(_summary_text(report), end="")
    print(f"report written to {out_dir}")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec_path = Path(args.spec_file)
    if not spec_path.is_file():
        raise LayoutError(f"spec file {spec_path} does not exist")
    spec = synth.load_spec(spec_path.read_text(encoding="utf-8"))
    manifest = synth.generate(spec, args.out_dir)
    n_files = sum(len(entry["files"]) for entry in manifest["revisions"].values())
    print(
        f"generated {len(manifest['revisions'])} revisions, "
        f"{n_files} files -> {args.out_dir}"
    )
    return EXIT_OK


def cmd_report(args) -> int:
    in_dir = Path(args.evolve_dir)
    report_path = in_dir / REPORT_NAME
    if not report_path.is_file():
        raise LayoutError(f"{report_path} does not exist (run evolve first)")
    try:
        payload = json.loads(report_path.read_text(encoding="utf-8"))
        report = evolution.report_from_json_dict(payload)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"error: corrupt report file {report_path}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    out_dir = Path(args.out) if args.out is not None else in_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_summaries_csv(report, out_dir)
    text = _summary_text(report)
    (out_dir / "summary.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None)
    common.add_argument("--alpha", type=float, default=None,
                        help="significance level override")
    common.add_argument("--jobs", type=int, default=None,
                        help="worker threads for per-execution analysis")
    common.add_argument("--out", default=None)

    parser = argparse.ArgumentParser(
        prog="tracewatt",
        description=(
            "Mine API interactions from call traces, attribute measured power "
            "to methods, and compare software revisions statistically."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="analyze one revision directory")
    p.add_argument("revision_dir")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("evolve", parents=[common], help="compare revisions under a root directory")
    p.add_argument("root_dir")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic fixture")
    p.add_argument("spec_file")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", parents=[common], help="re-emit plot CSV and summary from evolve outputs")
    p.add_argument("evolve_dir")
    p.set_defaults(func=cmd_report)
    return parser


def _apply_env(args) -> None:
    """Fill flags left unset from TRACEWATT_* environment variables."""
    if args.config is None:
        args.config = os.environ.get(ENV_PREFIX + "CONFIG")
    if args.out is None:
        args.out = os.environ.get(ENV_PREFIX + "OUT")
    if args.alpha is None and ENV_PREFIX + "ALPHA" in os.environ:
        raw = os.environ[ENV_PREFIX + "ALPHA"]
        try:
            args.alpha = float(raw)
        except ValueError:
            raise ConfigError(f"{ENV_PREFIX}ALPHA = {raw!r} is not a number") from None
    if args.jobs is None:
        raw = os.environ.get(ENV_PREFIX + "JOBS", "1")
        try:
            args.jobs = int(raw)
        except ValueError:
            raise ConfigError(f"{ENV_PREFIX}JOBS = {raw!r} is not an integer") from None
    if args.jobs < 1:
        raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        _apply_env(args)
        return args.func(args)
    except (TraceFormatError, PowerFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except AttributionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ATTRIBUTION
    except AnalysisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STATS
    except (LayoutError, ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LAYOUT


if __name__ == "__main__":
    sys.exit(main())
