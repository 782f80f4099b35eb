"""Deterministic generator of multi-revision trace/power fixtures.

The power model is an additive step cost: a revision's stream sits at
``base_power_mw``, rises by ``api_cost_mw`` while an API call is active,
and carries seeded Gaussian noise on top.  API-call counts scale per
revision with ``api_call_multiplier`` (rounded per tree, largest-remainder
apportionment across call sites), so API utilization and energy are
correlated by construction when the cost is positive and decoupled when
it is zero.

Randomness comes from SplitMix64, a portable 64-bit generator
(state += 0x9E3779B97F4A7C15; output = xor-shift-multiply mix of state),
with one independent stream per generated artifact derived by hashing the
(revision, test, sample) coordinates with 64-bit FNV-1a.  Identical spec
and seed therefore reproduce byte-identical fixtures, independent of
generation order or platform.

All durations must be multiples of the power sampling period so that API
intervals start and end exactly on sample points; the trapezoidal
integral of a noise-free stream then equals the analytic step integral.
"""

import configparser
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .apimetric import ApiClassifier, ApiRule, uapi
from .callgraph import build_call_trees
from .energy import PowerFormatError, parse_power
from .trace import TraceFormatError, parse_trace

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "tracewatt-synth-manifest v1"

_API_PACKAGES = ("android.util", "android.os", "java.util", "java.io")
_API_RULES = (ApiRule("android.", "android"), ApiRule("java.", "java"))

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 pseudo-random generator (Steele, Lea & Flood's mixer)."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform in [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> 11) * 2.0**-53

    def below(self, n: int) -> int:
        return self.next_u64() % n

    def gauss(self, sigma: float) -> float:
        """Zero-mean Gaussian via Box-Muller (fresh pair every call)."""
        u1 = self.uniform()
        if u1 == 0.0:
            u1 = 2.0**-53
        u2 = self.uniform()
        return sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return h


def _stream(seed: int, *coordinates) -> SplitMix64:
    tag = "/".join(str(c) for c in coordinates)
    return SplitMix64(seed ^ _fnv1a64(tag))


@dataclass(frozen=True)
class RevisionSpec:
    label: str
    api_call_multiplier: float
    base_power_mw: float
    api_cost_mw: float
    noise_stddev_mw: float

    def __post_init__(self):
        if not self.label or "/" in self.label or any(c.isspace() for c in self.label):
            raise ValueError(f"bad revision label {self.label!r}")
        if self.api_call_multiplier <= 0:
            raise ValueError(
                f"revision {self.label}: api_call_multiplier must be > 0"
            )
        if self.base_power_mw < 0 or self.api_cost_mw < 0:
            raise ValueError(f"revision {self.label}: power levels must be >= 0")
        if self.noise_stddev_mw < 0:
            raise ValueError(f"revision {self.label}: noise_stddev_mw must be >= 0")


@dataclass(frozen=True)
class SynthSpec:
    seed: int
    revisions: tuple[RevisionSpec, ...]
    tests: int = 10
    samples_per_test: int = 5
    rate_hz: int = 20000
    tree_depth: int = 3
    branching: int = 2
    api_density: float = 0.35
    api_call_us: int = 400
    frame_pad_us: int = 100

    def __post_init__(self):
        if not self.revisions:
            raise ValueError("spec needs at least one revision")
        labels = [r.label for r in self.revisions]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate revision labels")
        for name in ("tests", "samples_per_test", "rate_hz", "tree_depth", "branching"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.api_density <= 1.0:
            raise ValueError("api_density must be in [0, 1]")
        if 1_000_000 % self.rate_hz != 0:
            raise ValueError(
                f"rate_hz must divide 1e6 evenly for an integer sample period, "
                f"got {self.rate_hz}"
            )
        period = 1_000_000 // self.rate_hz
        for name in ("api_call_us", "frame_pad_us"):
            value = getattr(self, name)
            if value < 1 or value % period != 0:
                raise ValueError(
                    f"{name} must be a positive multiple of the {period} us "
                    f"sample period, got {value}"
                )

    @property
    def sample_period_us(self) -> int:
        return 1_000_000 // self.rate_hz


def load_spec(text: str) -> SynthSpec:
    """Parse the synth spec file format (INI-style, see README)."""
    parser = configparser.RawConfigParser(
        delimiters=("=",), comment_prefixes=("#",), strict=True
    )
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValueError(f"bad synth spec: {exc}") from None
    if "synth" not in parser:
        raise ValueError("synth spec needs a [synth] section")

    def get(section, key, convert, default=None):
        if key not in parser[section]:
            if default is None:
                raise ValueError(f"[{section}] is missing {key}")
            return default
        raw = parser[section][key]
        try:
            return convert(raw)
        except ValueError:
            raise ValueError(f"[{section}] {key} = {raw!r} is not valid") from None

    revisions = []
    for section in parser.sections():
        if section == "synth":
            continue
        if not section.startswith("revision."):
            raise ValueError(f"unknown section [{section}]")
        label = section[len("revision.") :]
        revisions.append(
            RevisionSpec(
                label,
                get(section, "api_call_multiplier", float, 1.0),
                get(section, "base_power_mw", float, 100.0),
                get(section, "api_cost_mw", float, 50.0),
                get(section, "noise_stddev_mw", float, 0.0),
            )
        )
    allowed = {
        "seed", "tests", "samples_per_test", "rate_hz", "tree_depth",
        "branching", "api_density", "api_call_us", "frame_pad_us",
    }
    unknown = set(parser["synth"]) - allowed
    if unknown:
        raise ValueError(f"unknown [synth] keys: {sorted(unknown)}")
    return SynthSpec(
        seed=get("synth", "seed", int),
        revisions=tuple(revisions),
        tests=get("synth", "tests", int, 10),
        samples_per_test=get("synth", "samples_per_test", int, 5),
        rate_hz=get("synth", "rate_hz", int, 20000),
        tree_depth=get("synth", "tree_depth", int, 3),
        branching=get("synth", "branching", int, 2),
        api_density=get("synth", "api_density", float, 0.35),
        api_call_us=get("synth", "api_call_us", int, 400),
        frame_pad_us=get("synth", "frame_pad_us", int, 100),
    )


@dataclass
class _Frame:
    """Skeleton node: structure is shared by all revisions of one test."""

    depth: int
    base_api_calls: int
    children: list


def _build_skeleton(rng: SplitMix64, spec: SynthSpec, depth: int) -> _Frame:
    # Internal structure is the full branching-ary tree of the configured
    # depth, identical for every test; only API placement is drawn from the
    # per-test stream.  Keeping structure uniform bounds the cross-test
    # variance so injected revision-level shifts are the dominant effect.
    n_children = spec.branching if depth < spec.tree_depth else 0
    api_calls = sum(
        1 for _ in range(spec.branching) if rng.uniform() < spec.api_density
    )
    children = [_build_skeleton(rng, spec, depth + 1) for _ in range(n_children)]
    return _Frame(depth, api_calls, children)


def _frames_preorder(frame: _Frame) -> list[_Frame]:
    out = [frame]
    for child in frame.children:
        out.extend(_frames_preorder(child))
    return out


def _scale_api_counts(frames: "list[_Frame]", multiplier: float) -> dict[int, int]:
    """Per-frame API-call counts whose total is the per-tree rounded
    (half-up) multiple of the base total, apportioned by largest
    remainder."""
    base_total = sum(f.base_api_calls for f in frames)
    target = math.floor(base_total * multiplier + 0.5)
    ideals = [f.base_api_calls * multiplier for f in frames]
    counts = [math.floor(x) for x in ideals]
    remaining = target - sum(counts)
    order = sorted(
        range(len(frames)), key=lambda i: (-(ideals[i] - counts[i]), i)
    )
    pos = 0
    while remaining > 0 and order:
        counts[order[pos % len(order)]] += 1
        remaining -= 1
        pos += 1
    return {id(frames[i]): counts[i] for i in range(len(frames))}


def test_method_name(index: int) -> str:
    return f"com.fixture.suite.GeneratedSuite::test{index:03d}"


@dataclass
class _Materialized:
    trace_lines: list[str]
    api_intervals: list[tuple[int, int]]
    end_us: int
    api_calls: int


def _materialize(
    spec: SynthSpec, skeleton: _Frame, multiplier: float, test_method: str
) -> _Materialized:
    """Lay the skeleton out on the timeline for one revision; returns
    trace event lines (without header) plus API windows in microseconds."""
    counts = _scale_api_counts(_frames_preorder(skeleton), multiplier)
    pad = spec.frame_pad_us
    api_us = spec.api_call_us
    lines: list[str] = []
    intervals: list[tuple[int, int]] = []
    state = {"frame_ord": 0, "api_ord": 0}

    def emit(frame: _Frame, start_us: int, package: str, class_name: str, method: str) -> int:
        lines.append(f"E;1;{start_us * 1000};{package};{class_name};{method}")
        cursor = start_us + pad
        for child in frame.children:
            state["frame_ord"] += 1
            cursor = (
                emit(
                    child, cursor, "com.fixture.lib",
                    f"Helper{child.depth}", f"m{state['frame_ord']}",
                )
                + pad
            )
        for _ in range(counts[id(frame)]):
            ordinal = state["api_ord"]
            state["api_ord"] += 1
            api_pkg = _API_PACKAGES[ordinal % len(_API_PACKAGES)]
            lines.append(f"E;1;{cursor * 1000};{api_pkg};Api;call{ordinal}")
            lines.append(f"X;1;{(cursor + api_us) * 1000};{api_pkg};Api;call{ordinal}")
            intervals.append((cursor, cursor + api_us))
            cursor += api_us + pad
        lines.append(f"X;1;{cursor * 1000};{package};{class_name};{method}")
        return cursor

    end = emit(skeleton, 0, "com.fixture.suite", "GeneratedSuite", test_method)
    return _Materialized(lines, intervals, end, state["api_ord"])


def _render_power(
    spec: SynthSpec,
    rev: RevisionSpec,
    mat: _Materialized,
    test_name: str,
    sample_index: int,
    rng: SplitMix64,
) -> str:
    period = spec.sample_period_us
    n_samples = mat.end_us // period + 3
    lines = [
        f"#power v1;{test_name};{sample_index};{float(spec.rate_hz)!r}"
    ]
    interval_idx = 0
    active_until = -1
    for i in range(n_samples):
        t = i * period
        while interval_idx < len(mat.api_intervals) and mat.api_intervals[interval_idx][0] <= t:
            active_until = max(active_until, mat.api_intervals[interval_idx][1])
            interval_idx += 1
        power = rev.base_power_mw
        if t < active_until:
            power += rev.api_cost_mw
        if rev.noise_stddev_mw > 0:
            power += rng.gauss(rev.noise_stddev_mw)
        power = max(power, 0.0)
        lines.append(f"{float(t)!r};{power!r}")
    return "\n".join(lines) + "\n"


def generate(spec: SynthSpec, out_dir: "Path | str") -> dict:
    """Write the fixture tree and return the ground-truth manifest.

    Layout per revision: ``<label>/traces/<test>.<sample>.trace`` and
    ``<label>/power/<test>.<sample>.power``.  The manifest is also written
    to ``manifest.json`` in the output directory.
    """
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)

    skeletons = [
        _build_skeleton(_stream(spec.seed, "tree", i), spec, 0)
        for i in range(spec.tests)
    ]

    revision_entries: dict[str, dict] = {}
    expected_energy: dict[str, float] = {}
    api_totals: dict[str, int] = {}
    for rev in spec.revisions:
        traces_dir = root / rev.label / "traces"
        power_dir = root / rev.label / "power"
        traces_dir.mkdir(parents=True, exist_ok=True)
        power_dir.mkdir(parents=True, exist_ok=True)

        files: dict[str, dict] = {}
        total_api = 0
        energy_mj = 0.0
        for test_idx in range(spec.tests):
            test_name = test_method_name(test_idx)
            mat = _materialize(
                spec, skeletons[test_idx], rev.api_call_multiplier,
                f"test{test_idx:03d}",
            )
            body = "\n".join(mat.trace_lines)
            total_api += mat.api_calls
            api_time_us = sum(b - a for a, b in mat.api_intervals)
            energy_mj += (
                rev.base_power_mw * mat.end_us + rev.api_cost_mw * api_time_us
            ) * 1e-6
            for sample in range(spec.samples_per_test):
                trace_name = f"{test_name}.{sample}.trace"
                power_name = f"{test_name}.{sample}.power"
                header = f"#trace v1;{test_name};{sample}"
                content = header + "\n" + body + "\n" if body else header + "\n"
                (traces_dir / trace_name).write_text(content, encoding="utf-8")
                power_text = _render_power(
                    spec, rev, mat, test_name, sample,
                    _stream(spec.seed, "power", rev.label, test_idx, sample),
                )
                (power_dir / power_name).write_text(power_text, encoding="utf-8")
                files[f"{rev.label}/traces/{trace_name}"] = {
                    "kind": "trace",
                    "test": test_name,
                    "sample": sample,
                    "api_interactions": mat.api_calls,
                }
                files[f"{rev.label}/power/{power_name}"] = {
                    "kind": "power",
                    "test": test_name,
                    "sample": sample,
                }
        api_totals[rev.label] = total_api
        expected_energy[rev.label] = energy_mj
        revision_entries[rev.label] = {
            "api_call_multiplier": rev.api_call_multiplier,
            "base_power_mw": rev.base_power_mw,
            "api_cost_mw": rev.api_cost_mw,
            "noise_stddev_mw": rev.noise_stddev_mw,
            "total_api_interactions": total_api,
            "expected_energy_mj": energy_mj,
            "files": files,
        }

    labels = [rev.label for rev in spec.revisions]
    pairs = []
    for i in range(len(labels)):
        for j in range(i + 1, len(labels)):
            a, b = labels[i], labels[j]
            ea, eb = expected_energy[a], expected_energy[b]
            scale = max(abs(ea), abs(eb), 1e-12)
            pairs.append(
                {
                    "a": a,
                    "b": b,
                    "api_differs": api_totals[a] != api_totals[b],
                    "energy_differs": abs(ea - eb) / scale > 1e-12,
                }
            )

    manifest = {
        "format": MANIFEST_FORMAT,
        "seed": spec.seed,
        "rate_hz": spec.rate_hz,
        "tests": spec.tests,
        "samples_per_test": spec.samples_per_test,
        "api_rules": [{"prefix": r.prefix, "label": r.label} for r in _API_RULES],
        "revisions": revision_entries,
        "pairs": pairs,
    }
    (root / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def verify_fixture(fixture_dir: "Path | str", manifest: dict) -> list[str]:
    """Re-parse every generated file and recheck its ground-truth counts.

    Returns one violation string per mismatch; an empty list means the
    fixture is intact.
    """
    root = Path(fixture_dir)
    violations = []
    classifier = ApiClassifier(
        ApiRule(r["prefix"], r["label"]) for r in manifest["api_rules"]
    )
    for label, entry in sorted(manifest["revisions"].items()):
        seen_totals: dict[int, int] = {}
        for rel_path, info in sorted(entry["files"].items()):
            path = root / rel_path
            if not path.exists():
                violations.append(f"{rel_path}: file is missing")
                continue
            if info["kind"] == "trace":
                try:
                    trace = parse_trace(path.read_bytes())
                except TraceFormatError as exc:
                    violations.append(f"{rel_path}: {exc}")
                    continue
                profile = uapi(build_call_trees(trace), classifier)
                if profile.total_api_interactions != info["api_interactions"]:
                    violations.append(
                        f"{rel_path}: {profile.total_api_interactions} API "
                        f"interactions, manifest says {info['api_interactions']}"
                    )
                sample = info["sample"]
                seen_totals[sample] = (
                    seen_totals.get(sample, 0) + profile.total_api_interactions
                )
            else:
                try:
                    parse_power(path.read_bytes())
                except PowerFormatError as exc:
                    violations.append(f"{rel_path}: {exc}")
        for sample, total in sorted(seen_totals.items()):
            if total != entry["total_api_interactions"]:
                violations.append(
                    f"revision {label} sample {sample}: {total} API interactions, "
                    f"manifest says {entry['total_api_interactions']}"
                )
    return violations
