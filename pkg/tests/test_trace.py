import random

import pytest

from conftest import random_trace
from tracewatt.trace import (
    EventKind,
    MethodId,
    TestTrace,
    TraceEvent,
    TraceFormatError,
    parse_trace,
    validate_trace,
    write_trace,
)


def test_parse_header_and_single_event():
    text = "#trace v1;com.example.FooTest::testBar;3\nE;1;0;com.example.Foo;Foo;run\nX;1;4;com.example.Foo;Foo;run\n"
    trace = parse_trace(text)
    assert trace.test_name == "com.example.FooTest::testBar"
    assert trace.sample_index == 3
    assert trace.events[0] == TraceEvent(
        EventKind.ENTER, MethodId("com.example.Foo", "Foo", "run"), 1, 0
    )


def test_parse_accepts_bytes():
    trace = parse_trace(b"#trace v1;a.B::m;0\n")
    assert trace.events == ()


def test_empty_event_section():
    trace = parse_trace("#trace v1;com.example.FooTest::testBar;0\n")
    assert trace.events == ()


def test_exit_without_enter_names_line():
    text = "#trace v1;a.B::m;0\nX;1;5;p;C;m\n"
    with pytest.raises(TraceFormatError) as exc:
        parse_trace(text)
    assert exc.value.line == 2
    assert "no open frame" in str(exc.value)


def test_unknown_version_rejected():
    with pytest.raises(TraceFormatError, match="unknown format version"):
        parse_trace("#trace v2;a.B::m;0\n")


def test_bad_header_rejected():
    with pytest.raises(TraceFormatError):
        parse_trace("trace v1;a.B::m;0\n")
    with pytest.raises(TraceFormatError):
        parse_trace("#trace v1;a.B::m\n")


def test_malformed_event_line_names_line():
    text = "#trace v1;a.B::m;0\nE;1;0;p;C;m\nE;1;0;p;C\n"
    with pytest.raises(TraceFormatError) as exc:
        parse_trace(text)
    assert exc.value.line == 3


def test_non_monotone_timestamp_same_thread():
    text = "#trace v1;a.B::m;0\nE;1;5;p;C;m\nX;1;3;p;C;m\n"
    with pytest.raises(TraceFormatError, match="before"):
        parse_trace(text)


def test_timestamps_independent_across_threads():
    text = (
        "#trace v1;a.B::m;0\n"
        "E;1;10;p;C;m\n"
        "E;2;0;p;C;n\n"
        "X;2;1;p;C;n\n"
        "X;1;11;p;C;m\n"
    )
    assert len(parse_trace(text).events) == 4


def test_mismatched_exit_method():
    text = "#trace v1;a.B::m;0\nE;1;0;p;C;m\nX;1;2;p;C;other\n"
    with pytest.raises(TraceFormatError, match="does not match"):
        parse_trace(text)


def test_unbalanced_at_eof():
    text = "#trace v1;a.B::m;0\nE;1;0;p;C;m\n"
    with pytest.raises(TraceFormatError, match="never exited"):
        parse_trace(text)


def test_comments_ignored_after_header():
    text = "#trace v1;a.B::m;0\n# a comment\nE;1;0;p;C;m\nX;1;2;p;C;m\n"
    assert len(parse_trace(text).events) == 2


def test_nonnegative_integer_fields_strict():
    for bad in ("E;-1;0;p;C;m", "E;1;+3;p;C;m", "E;1;1_0;p;C;m", "E;x;0;p;C;m"):
        with pytest.raises(TraceFormatError):
            parse_trace(f"#trace v1;a.B::m;0\n{bad}\n")


def test_write_zero_events_is_header_only():
    trace = TestTrace("a.B::m", 5)
    assert write_trace(trace) == "#trace v1;a.B::m;5\n"


def test_write_rejects_invalid_nesting():
    trace = TestTrace(
        "a.B::m",
        0,
        (TraceEvent(EventKind.EXIT, MethodId("p", "C", "m"), 1, 0),),
    )
    with pytest.raises(TraceFormatError, match="invalid trace"):
        write_trace(trace)


def test_round_trip_random_traces():
    rng = random.Random(1234)
    for _ in range(200):
        trace = random_trace(rng, n_threads=rng.randrange(1, 4))
        assert parse_trace(write_trace(trace)) == trace


def test_parser_output_always_validates():
    rng = random.Random(99)
    for _ in range(100):
        trace = random_trace(rng, n_threads=2)
        assert validate_trace(parse_trace(write_trace(trace))) == []


def test_fuzz_mutations_never_crash():
    rng = random.Random(7)
    base = write_trace(random_trace(rng, max_events_per_thread=20)).encode()
    for _ in range(500):
        data = bytearray(base)
        for _ in range(rng.randrange(1, 6)):
            pos = rng.randrange(len(data))
            data[pos] = rng.randrange(256)
        try:
            trace = parse_trace(bytes(data))
        except TraceFormatError:
            continue
        assert validate_trace(trace) == []


def test_validate_balanced_pair_is_clean():
    trace = TestTrace(
        "a.B::m",
        0,
        (
            TraceEvent(EventKind.ENTER, MethodId("p", "C", "m"), 1, 0),
            TraceEvent(EventKind.EXIT, MethodId("p", "C", "m"), 1, 10),
        ),
    )
    assert validate_trace(trace) == []


def test_validate_exit_before_enter_cites_event_index():
    trace = TestTrace(
        "a.B::m",
        0,
        (TraceEvent(EventKind.EXIT, MethodId("p", "C", "m"), 1, 0),),
    )
    violations = validate_trace(trace)
    assert len(violations) == 1
    assert "event 0" in violations[0]


def test_validate_monotonicity_violation():
    m = MethodId("p", "C", "m")
    trace = TestTrace(
        "a.B::m",
        0,
        (
            TraceEvent(EventKind.ENTER, m, 1, 5),
            TraceEvent(EventKind.EXIT, m, 1, 3),
        ),
    )
    assert any("timestamp 3 before 5" in v for v in validate_trace(trace))


def test_validate_never_mutates():
    events = (TraceEvent(EventKind.ENTER, MethodId("p", "C", "m"), 1, 0),)
    trace = TestTrace("a.B::m", 0, events)
    validate_trace(trace)
    assert trace.events == events


class TestMethodId:
    def test_canonical_round_trip(self):
        m = MethodId("com.example.util", "LinkedList", "add")
        assert MethodId.from_canonical(m.canonical()) == m
        assert m.canonical() == "com.example.util.LinkedList::add"

    @pytest.mark.parametrize(
        "package,cls,method",
        [
            ("", "C", "m"),
            ("p q", "C", "m"),
            ("p;q", "C", "m"),
            ("p:q", "C", "m"),
            ("p..q", "C", "m"),
            ("p", "C.D", "m"),
            ("p", "C", "m.n"),
            ("p", "", "m"),
            ("p", "C", ""),
        ],
    )
    def test_invalid_components_rejected(self, package, cls, method):
        with pytest.raises(ValueError):
            MethodId(package, cls, method)

    def test_from_canonical_requires_separator(self):
        with pytest.raises(ValueError):
            MethodId.from_canonical("com.example.Foo.run")
        with pytest.raises(ValueError):
            MethodId.from_canonical("Foo::run")
