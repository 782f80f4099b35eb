"""Call-trace event model and its line-oriented file format.

A trace file is UTF-8 text with LF line endings:

    #trace v1;<test_name>;<sample_index>
    E;<thread>;<t_ns>;<package>;<class>;<method>
    X;<thread>;<t_ns>;<package>;<class>;<method>

``E`` marks a method entry, ``X`` the matching exit.  Timestamps are
nanoseconds relative to test start.  Lines starting with ``#`` after the
header are comments.  Fields are ``;``-separated and identifiers may not
contain ``;``, ``:`` or whitespace, so no escaping is needed.
"""

from dataclasses import dataclass
from enum import Enum

TRACE_VERSION = "v1"
_HEADER_MAGIC = "#trace"
_DIGITS = frozenset("0123456789")


class TraceFormatError(ValueError):
    """A trace file or trace value violates the format or its invariants."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def _check_identifier(value: str, what: str, allow_dots: bool) -> None:
    if not value:
        raise ValueError(f"{what} must be non-empty")
    for ch in value:
        if ch == ";" or ch == ":" or ch.isspace():
            raise ValueError(f"{what} {value!r} contains forbidden character {ch!r}")
    if allow_dots:
        if any(not part for part in value.split(".")):
            raise ValueError(f"{what} {value!r} has an empty dot-separated component")
    elif "." in value:
        raise ValueError(f"{what} {value!r} may not contain '.'")


@dataclass(frozen=True)
class MethodId:
    """Fully qualified method identity: ``package.class::method``."""

    package: str
    class_name: str
    method: str

    def __post_init__(self):
        _check_identifier(self.package, "package", allow_dots=True)
        _check_identifier(self.class_name, "class", allow_dots=False)
        _check_identifier(self.method, "method", allow_dots=False)

    def canonical(self) -> str:
        return f"{self.package}.{self.class_name}::{self.method}"

    @classmethod
    def from_canonical(cls, text: str) -> "MethodId":
        qualified, sep, method = text.partition("::")
        if not sep:
            raise ValueError(f"method name {text!r} lacks '::'")
        package, sep, class_name = qualified.rpartition(".")
        if not sep:
            raise ValueError(f"method name {text!r} lacks a package prefix")
        return cls(package, class_name, method)


class EventKind(Enum):
    ENTER = "E"
    EXIT = "X"


@dataclass(frozen=True)
class TraceEvent:
    kind: EventKind
    method: MethodId
    thread: int
    t_ns: int

    def __post_init__(self):
        if self.thread < 0:
            raise ValueError(f"thread id must be >= 0, got {self.thread}")
        if self.t_ns < 0:
            raise ValueError(f"timestamp must be >= 0, got {self.t_ns}")


@dataclass(frozen=True)
class TestTrace:
    """All events recorded for one execution of one test.

    ``sample_index`` identifies which of the repeated executions of the
    test this trace belongs to.  Field-local invariants are enforced at
    construction; sequence-level invariants (per-thread timestamp order,
    balanced Enter/Exit nesting) are checked by :func:`validate_trace`
    and enforced by :func:`parse_trace`.
    """

    __test__ = False  # keep pytest from collecting the Test* name

    test_name: str
    sample_index: int
    events: tuple[TraceEvent, ...] = ()

    def __post_init__(self):
        MethodId.from_canonical(self.test_name)
        if self.sample_index < 0:
            raise ValueError(f"sample_index must be >= 0, got {self.sample_index}")


def _parse_uint(text: str, what: str) -> int:
    if not text or not all(c in _DIGITS for c in text):
        raise ValueError(f"{what} must be a non-negative decimal integer, got {text!r}")
    return int(text)


def parse_trace(data: "bytes | str") -> TestTrace:
    """Parse trace-format text into a TestTrace, enforcing all invariants.

    Raises TraceFormatError (with the offending line number) on malformed
    lines, unknown format versions, per-thread timestamp regressions and
    unbalanced or mismatched Enter/Exit nesting.  Never raises anything
    else on arbitrary input bytes.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TraceFormatError(f"not valid UTF-8: {exc}") from None
    else:
        text = data

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise TraceFormatError("empty input, expected a header line", line=1)

    header = lines[0].split(";")
    magic_version = header[0].split(" ")
    if len(magic_version) != 2 or magic_version[0] != _HEADER_MAGIC:
        raise TraceFormatError(f"bad header {lines[0]!r}", line=1)
    if magic_version[1] != TRACE_VERSION:
        raise TraceFormatError(f"unknown format version {magic_version[1]!r}", line=1)
    if len(header) != 3:
        raise TraceFormatError("header needs 3 ;-separated fields", line=1)
    try:
        test_name = header[1]
        MethodId.from_canonical(test_name)
        sample_index = _parse_uint(header[2], "sample_index")
    except ValueError as exc:
        raise TraceFormatError(str(exc), line=1) from None

    events = []
    last_t: dict[int, int] = {}
    stacks: dict[int, list[tuple[MethodId, int]]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if line.startswith("#"):
            continue
        fields = line.split(";")
        if len(fields) != 6:
            raise TraceFormatError(
                f"expected 6 ;-separated fields, got {len(fields)}", line=lineno
            )
        kind_code, thread_s, t_s, package, class_name, method_name = fields
        if kind_code == "E":
            kind = EventKind.ENTER
        elif kind_code == "X":
            kind = EventKind.EXIT
        else:
            raise TraceFormatError(f"unknown event kind {kind_code!r}", line=lineno)
        try:
            thread = _parse_uint(thread_s, "thread")
            t_ns = _parse_uint(t_s, "timestamp")
            method = MethodId(package, class_name, method_name)
        except ValueError as exc:
            raise TraceFormatError(str(exc), line=lineno) from None

        prev = last_t.get(thread)
        if prev is not None and t_ns < prev:
            raise TraceFormatError(
                f"timestamp {t_ns} before {prev} on thread {thread}", line=lineno
            )
        last_t[thread] = t_ns

        stack = stacks.setdefault(thread, [])
        if kind is EventKind.ENTER:
            stack.append((method, lineno))
        else:
            if not stack:
                raise TraceFormatError(
                    f"exit of {method.canonical()} with no open frame on thread {thread}",
                    line=lineno,
                )
            open_method, _ = stack.pop()
            if open_method != method:
                raise TraceFormatError(
                    f"exit of {method.canonical()} does not match open frame "
                    f"{open_method.canonical()} on thread {thread}",
                    line=lineno,
                )
        events.append(TraceEvent(kind, method, thread, t_ns))

    for thread, stack in stacks.items():
        if stack:
            method, lineno = stack[-1]
            raise TraceFormatError(
                f"unbalanced trace: {method.canonical()} entered on thread {thread} "
                f"is never exited",
                line=lineno,
            )
    return TestTrace(test_name, sample_index, tuple(events))


def write_trace(trace: TestTrace) -> str:
    """Render a TestTrace to canonical trace-format text.

    parse_trace(write_trace(t)) reproduces t field-for-field.  Raises
    TraceFormatError when the trace violates its sequence invariants.
    """
    violations = validate_trace(trace)
    if violations:
        raise TraceFormatError(f"invalid trace: {violations[0]}")
    out = [f"{_HEADER_MAGIC} {TRACE_VERSION};{trace.test_name};{trace.sample_index}"]
    for ev in trace.events:
        m = ev.method
        out.append(
            f"{ev.kind.value};{ev.thread};{ev.t_ns};{m.package};{m.class_name};{m.method}"
        )
    return "\n".join(out) + "\n"


def validate_trace(trace: TestTrace) -> list[str]:
    """Report every sequence-level invariant violation; empty means valid.

    Violations are data, not errors: the input is never mutated and this
    never raises.  Each message cites the 0-based event index.
    """
    violations = []
    last_t: dict[int, int] = {}
    stacks: dict[int, list[MethodId]] = {}
    for idx, ev in enumerate(trace.events):
        prev = last_t.get(ev.thread)
        if prev is not None and ev.t_ns < prev:
            violations.append(
                f"event {idx}: timestamp {ev.t_ns} before {prev} on thread {ev.thread}"
            )
        last_t[ev.thread] = ev.t_ns

        stack = stacks.setdefault(ev.thread, [])
        if ev.kind is EventKind.ENTER:
            stack.append(ev.method)
        elif not stack:
            violations.append(
                f"event {idx}: exit of {ev.method.canonical()} with no open frame "
                f"on thread {ev.thread}"
            )
        else:
            open_method = stack.pop()
            if open_method != ev.method:
                violations.append(
                    f"event {idx}: exit of {ev.method.canonical()} does not match "
                    f"open frame {open_method.canonical()} on thread {ev.thread}"
                )
    for thread, stack in stacks.items():
        for method in stack:
            violations.append(
                f"end of trace: {method.canonical()} entered on thread {thread} "
                f"is never exited"
            )
    return violations
