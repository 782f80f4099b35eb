"""Power-sample streams, energy integration and per-method attribution.

A power file is UTF-8 text with LF line endings:

    #power v1;<test_name>;<sample_index>;<nominal_rate_hz>
    <t_us>;<power_mw>

Timestamps are microseconds relative to test start (the same clock base
as trace timestamps) and must be strictly increasing.  Energy is the
trapezoidal integral of power over a time window: mW times seconds gives
millijoules.
"""

import statistics
from bisect import bisect_right
from dataclasses import dataclass

from .callgraph import MethodInterval
from .trace import MethodId

POWER_VERSION = "v1"
_HEADER_MAGIC = "#power"

MJ_PER_MW_US = 1e-6
NEGATIVE_EXCLUSIVE_TOL_MJ = 1e-9


class PowerFormatError(ValueError):
    """A power file violates the format or its invariants."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class AttributionError(ValueError):
    """Energy cannot be attributed: window outside the sampled range or
    inconsistent interval nesting."""


@dataclass(frozen=True)
class PowerSample:
    t_us: float
    power_mw: float


@dataclass(frozen=True)
class PowerProfile:
    test_name: str
    sample_index: int
    nominal_rate_hz: float
    samples: tuple[PowerSample, ...] = ()


@dataclass(frozen=True)
class MethodEnergyRecord:
    """Energy attributed to one call occurrence.

    Inclusive energy integrates the node's whole window; exclusive energy
    removes the windows of its direct children, so exclusive sums are free
    of nested double-counting.
    """

    method: MethodId
    t_start_ns: int
    duration_ns: int
    energy_mj_inclusive: float
    energy_mj_exclusive: float
    avg_power_mw: float


@dataclass(frozen=True)
class TestEnergyRecord:
    """Energy/power/duration of one test, averaged over its sample runs."""

    __test__ = False  # keep pytest from collecting the Test* name

    test_name: str
    revision: str
    energy_mj: float
    avg_power_mw: float
    duration_ms: float
    n_samples_averaged: int


def _parse_float(text: str, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"{what} must be a decimal number, got {text!r}") from None
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError(f"{what} must be finite, got {text!r}")
    return value


def parse_power(data: "bytes | str") -> PowerProfile:
    """Parse power-format text; rejects non-increasing timestamps and
    negative power with the offending line number."""
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise PowerFormatError(f"not valid UTF-8: {exc}") from None
    else:
        text = data

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise PowerFormatError("empty input, expected a header line", line=1)

    header = lines[0].split(";")
    magic_version = header[0].split(" ")
    if len(magic_version) != 2 or magic_version[0] != _HEADER_MAGIC:
        raise PowerFormatError(f"bad header {lines[0]!r}", line=1)
    if magic_version[1] != POWER_VERSION:
        raise PowerFormatError(f"unknown format version {magic_version[1]!r}", line=1)
    if len(header) != 4:
        raise PowerFormatError("header needs 4 ;-separated fields", line=1)
    try:
        test_name = header[1]
        MethodId.from_canonical(test_name)
        sample_index = int(header[2])
        if sample_index < 0:
            raise ValueError(f"sample_index must be >= 0, got {sample_index}")
        rate_hz = _parse_float(header[3], "nominal_rate_hz")
        if rate_hz <= 0:
            raise ValueError(f"nominal_rate_hz must be > 0, got {rate_hz}")
    except ValueError as exc:
        raise PowerFormatError(str(exc), line=1) from None

    samples = []
    prev_t = None
    for lineno, line in enumerate(lines[1:], start=2):
        if line.startswith("#"):
            continue
        fields = line.split(";")
        if len(fields) != 2:
            raise PowerFormatError(
                f"expected 2 ;-separated fields, got {len(fields)}", line=lineno
            )
        try:
            t_us = _parse_float(fields[0], "timestamp")
            power_mw = _parse_float(fields[1], "power")
        except ValueError as exc:
            raise PowerFormatError(str(exc), line=lineno) from None
        if power_mw < 0:
            raise PowerFormatError(f"negative power {power_mw}", line=lineno)
        if prev_t is not None and t_us <= prev_t:
            raise PowerFormatError(
                f"timestamp {t_us} not after {prev_t}", line=lineno
            )
        prev_t = t_us
        samples.append(PowerSample(t_us, power_mw))
    return PowerProfile(test_name, sample_index, rate_hz, tuple(samples))


def write_power(profile: PowerProfile) -> str:
    """Render to canonical power-format text; parse_power round-trips it."""
    out = [
        f"{_HEADER_MAGIC} {POWER_VERSION};{profile.test_name};"
        f"{profile.sample_index};{profile.nominal_rate_hz!r}"
    ]
    prev_t = None
    for s in profile.samples:
        if s.power_mw < 0:
            raise PowerFormatError(f"negative power {s.power_mw}")
        if prev_t is not None and s.t_us <= prev_t:
            raise PowerFormatError(f"timestamp {s.t_us} not after {prev_t}")
        prev_t = s.t_us
        out.append(f"{s.t_us!r};{s.power_mw!r}")
    return "\n".join(out) + "\n"


def shift_profile(profile: PowerProfile, offset_us: float) -> PowerProfile:
    """Shift the power clock by a constant, aligning it with the trace clock."""
    if offset_us == 0:
        return profile
    return PowerProfile(
        profile.test_name,
        profile.sample_index,
        profile.nominal_rate_hz,
        tuple(PowerSample(s.t_us + offset_us, s.power_mw) for s in profile.samples),
    )


def integrate(profile: PowerProfile, a_us: float, b_us: float) -> float:
    """Trapezoidal energy over [a_us, b_us] in millijoules.

    Power is linearly interpolated at the window edges; the window must
    lie within the sampled range.  Exact for piecewise-linear power.
    """
    if len(profile.samples) < 2:
        raise AttributionError(
            f"need at least 2 power samples to integrate, got {len(profile.samples)}"
        )
    if not a_us < b_us:
        raise AttributionError(f"bad window [{a_us}, {b_us}]")
    ts = [s.t_us for s in profile.samples]
    if a_us < ts[0] or b_us > ts[-1]:
        raise AttributionError(
            f"window [{a_us}, {b_us}] outside sampled range [{ts[0]}, {ts[-1]}]"
        )
    ps = [s.power_mw for s in profile.samples]

    def power_at(t: float, seg: int) -> float:
        t0, t1 = ts[seg], ts[seg + 1]
        frac = (t - t0) / (t1 - t0)
        return ps[seg] + (ps[seg + 1] - ps[seg]) * frac

    seg = min(bisect_right(ts, a_us) - 1, len(ts) - 2)
    seg = max(seg, 0)
    total_mw_us = 0.0
    t_lo = a_us
    p_lo = power_at(a_us, seg)
    while True:
        t_hi = min(ts[seg + 1], b_us)
        p_hi = power_at(t_hi, seg)
        total_mw_us += 0.5 * (p_lo + p_hi) * (t_hi - t_lo)
        if t_hi >= b_us:
            break
        seg += 1
        t_lo, p_lo = t_hi, p_hi
    return total_mw_us * MJ_PER_MW_US


def attribute(
    intervals: "list[MethodInterval]", profile: PowerProfile
) -> list[MethodEnergyRecord]:
    """Attribute energy to method intervals (one record per interval, in
    input order).

    Expects intervals as produced by method_intervals: time-ordered with
    parents before their children.  Inclusive energy integrates the
    interval's own window; exclusive subtracts the direct children.
    """
    inclusive = []
    for iv in intervals:
        if iv.duration_ns == 0:
            inclusive.append(0.0)
            continue
        a_us = iv.t_start_ns / 1000.0
        b_us = (iv.t_start_ns + iv.duration_ns) / 1000.0
        try:
            inclusive.append(integrate(profile, a_us, b_us))
        except AttributionError as exc:
            raise AttributionError(f"{iv.method.canonical()}: {exc}") from None

    child_sums = [0.0] * len(intervals)
    open_stack: dict[int, list[tuple[int, int]]] = {}  # thread -> [(depth, index)]
    for idx, iv in enumerate(intervals):
        stack = open_stack.setdefault(iv.thread, [])
        while stack and stack[-1][0] >= iv.depth:
            stack.pop()
        if stack and stack[-1][0] == iv.depth - 1:
            child_sums[stack[-1][1]] += inclusive[idx]
        stack.append((iv.depth, idx))

    records = []
    for idx, iv in enumerate(intervals):
        exclusive = inclusive[idx] - child_sums[idx]
        if exclusive < -NEGATIVE_EXCLUSIVE_TOL_MJ:
            raise AttributionError(
                f"{iv.method.canonical()}: children energy {child_sums[idx]} exceeds "
                f"inclusive energy {inclusive[idx]}"
            )
        exclusive = max(exclusive, 0.0)
        avg_power = (
            inclusive[idx] / (iv.duration_ns * 1e-9) if iv.duration_ns > 0 else 0.0
        )
        records.append(
            MethodEnergyRecord(
                iv.method, iv.t_start_ns, iv.duration_ns, inclusive[idx], exclusive, avg_power
            )
        )
    return records


def aggregate_samples(
    records: "list[TestEnergyRecord]", method: str = "mean"
) -> TestEnergyRecord:
    """Collapse repeated sample runs of one test into a single record."""
    if not records:
        raise ValueError("no records to aggregate")
    names = {r.test_name for r in records}
    if len(names) > 1:
        raise ValueError(f"mixed test names: {sorted(names)}")
    revisions = {r.revision for r in records}
    if len(revisions) > 1:
        raise ValueError(f"mixed revisions: {sorted(revisions)}")
    if method == "mean":
        agg = statistics.fmean
    elif method == "median":
        agg = statistics.median
    else:
        raise ValueError(f"unknown aggregation {method!r}")
    return TestEnergyRecord(
        records[0].test_name,
        records[0].revision,
        agg([r.energy_mj for r in records]),
        agg([r.avg_power_mw for r in records]),
        agg([r.duration_ms for r in records]),
        len(records),
    )
