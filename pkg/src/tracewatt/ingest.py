"""Revision-directory ingestion: file discovery, per-execution analysis
and assembly of revision datasets.

A revision directory holds ``traces/`` and ``power/`` subdirectories with
files named ``<test_name>.<sample_index>.trace`` / ``.power``; every trace
must have its matching power file and vice versa.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .apimetric import ApiClassifier, uapi
from .callgraph import build_call_trees, node_intervals
from .config import AnalysisConfig
from .energy import attribute, integrate, parse_power, shift_profile
from .evolution import ExecutionRecord, RevisionDataset
from .trace import MethodId, parse_trace


class LayoutError(ValueError):
    """The on-disk revision layout is broken (missing or mispaired files)."""


@dataclass(frozen=True)
class MethodRow:
    """One per-occurrence output row of an analyzed execution."""

    test_name: str
    sample_index: int
    thread: int
    depth: int
    t_start_ns: int
    duration_ns: int
    method: MethodId
    api_label: Optional[str]
    u_value: int
    energy_mj_inclusive: float
    energy_mj_exclusive: float
    avg_power_mw: float


@dataclass
class ExecutionAnalysis:
    test_name: str
    sample_index: int
    energy_mj: float
    avg_power_mw: float
    duration_ms: float
    root_uapi: int
    api_interactions: int
    method_rows: list[MethodRow]


@dataclass
class RevisionAnalysis:
    revision: str
    executions: list[ExecutionAnalysis]
    dataset: RevisionDataset


def scan_revision_dir(path: "Path | str") -> list[tuple[str, int, Path, Path]]:
    """Discover (test_name, sample_index, trace_path, power_path) tuples.

    Raises LayoutError on missing subdirectories, unparseable file names,
    or traces and power files that do not pair up.
    """
    root = Path(path)
    traces_dir = root / "traces"
    power_dir = root / "power"
    if not traces_dir.is_dir():
        raise LayoutError(f"{root}: missing traces/ directory")
    if not power_dir.is_dir():
        raise LayoutError(f"{root}: missing power/ directory")

    def scan(directory: Path, suffix: str) -> dict[tuple[str, int], Path]:
        found = {}
        for entry in sorted(directory.iterdir()):
            if not entry.is_file():
                continue
            parts = entry.name.rsplit(".", 2)
            if len(parts) != 3 or parts[2] != suffix or not parts[1].isdigit():
                raise LayoutError(
                    f"{entry}: expected <test_name>.<sample_index>.{suffix}"
                )
            try:
                MethodId.from_canonical(parts[0])
            except ValueError as exc:
                raise LayoutError(f"{entry}: {exc}") from None
            found[(parts[0], int(parts[1]))] = entry
        return found

    traces = scan(traces_dir, "trace")
    powers = scan(power_dir, "power")
    if not traces:
        raise LayoutError(f"{root}: no trace files found")
    for key in sorted(traces.keys() - powers.keys()):
        raise LayoutError(
            f"{root}: trace for {key[0]} sample {key[1]} has no matching power file"
        )
    for key in sorted(powers.keys() - traces.keys()):
        raise LayoutError(
            f"{root}: power file for {key[0]} sample {key[1]} has no matching trace"
        )
    return [
        (name, sample, traces[(name, sample)], powers[(name, sample)])
        for name, sample in sorted(traces)
    ]


def analyze_execution(
    test_name: str,
    sample_index: int,
    trace_path: Path,
    power_path: Path,
    config: AnalysisConfig,
    classifier: Optional[ApiClassifier] = None,
) -> ExecutionAnalysis:
    """Analyze one (test, sample) execution: build the call tree, compute
    U values and attribute energy."""
    if classifier is None:
        classifier = ApiClassifier(config.api_rules)
    trace = parse_trace(trace_path.read_bytes())
    profile = parse_power(power_path.read_bytes())
    if trace.test_name != test_name or trace.sample_index != sample_index:
        raise LayoutError(
            f"{trace_path}: header names {trace.test_name} sample "
            f"{trace.sample_index}, expected {test_name} sample {sample_index}"
        )
    if profile.test_name != test_name or profile.sample_index != sample_index:
        raise LayoutError(
            f"{power_path}: header names {profile.test_name} sample "
            f"{profile.sample_index}, expected {test_name} sample {sample_index}"
        )
    offset = config.power_clock_offset_us.get(test_name, 0.0)
    profile = shift_profile(profile, offset)

    tree = build_call_trees(trace)
    metric = uapi(tree, classifier)
    pairs = node_intervals(tree)
    records = attribute([interval for _, interval in pairs], profile)

    rows = []
    for (node, interval), record in zip(pairs, records):
        rows.append(
            MethodRow(
                test_name,
                sample_index,
                interval.thread,
                interval.depth,
                interval.t_start_ns,
                interval.duration_ns,
                interval.method,
                classifier.classify(interval.method),
                metric.node_values.get(node, 0),
                record.energy_mj_inclusive,
                record.energy_mj_exclusive,
                record.avg_power_mw,
            )
        )

    if tree.roots:
        start_ns = min(r.t_start_ns for r in tree.roots)
        end_ns = max(r.t_end_ns for r in tree.roots)
    else:
        start_ns = end_ns = 0
    duration_ms = (end_ns - start_ns) / 1e6
    if end_ns > start_ns:
        energy_mj = integrate(profile, start_ns / 1000.0, end_ns / 1000.0)
        avg_power_mw = energy_mj / ((end_ns - start_ns) * 1e-9)
    else:
        energy_mj = 0.0
        avg_power_mw = 0.0
    return ExecutionAnalysis(
        test_name,
        sample_index,
        energy_mj,
        avg_power_mw,
        duration_ms,
        metric.root_uapi,
        metric.total_api_interactions,
        rows,
    )


def analyze_revision(
    revision: str, path: "Path | str", config: AnalysisConfig, jobs: int = 1
) -> RevisionAnalysis:
    """Analyze every execution of a revision directory.

    Executions are independent and run on up to ``jobs`` worker threads;
    results are ordered by (test_name, sample_index) regardless.  rU of an
    execution is its U value normalized by the total API interactions of
    the same sample run across all tests in this revision.
    """
    entries = scan_revision_dir(path)
    classifier = ApiClassifier(config.api_rules)

    def work(entry):
        name, sample, trace_path, power_path = entry
        return analyze_execution(name, sample, trace_path, power_path, config, classifier)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            executions = list(pool.map(work, entries))
    else:
        executions = [work(entry) for entry in entries]
    executions.sort(key=lambda e: (e.test_name, e.sample_index))

    n_by_sample: dict[int, int] = {}
    for ex in executions:
        n_by_sample[ex.sample_index] = (
            n_by_sample.get(ex.sample_index, 0) + ex.api_interactions
        )
    records = tuple(
        ExecutionRecord(
            ex.test_name,
            ex.sample_index,
            ex.energy_mj,
            ex.avg_power_mw,
            ex.duration_ms,
            ex.root_uapi,
            ex.api_interactions,
            ex.root_uapi / (n_by_sample[ex.sample_index] + 1),
        )
        for ex in executions
    )
    return RevisionAnalysis(revision, executions, RevisionDataset(revision, records))
