"""Per-test dynamic call trees built from enter/exit traces.

Every Enter event opens a node; the matching Exit closes it and fixes its
duration.  Each thread contributes one root: the actual top-level frame
when the thread ran exactly one, or a synthetic wrapper node (``method is
None``) spanning all of them otherwise.  Synthetic wrappers correspond to
no trace event and are skipped by node counts, intervals and metrics.
"""

from dataclasses import dataclass

from .trace import EventKind, MethodId, TestTrace, TraceFormatError, validate_trace


@dataclass(eq=False)
class CallNode:
    """One call occurrence. Identity (not structure) keyed, so repeated
    identical calls remain distinct nodes."""

    method: MethodId | None
    thread: int
    t_start_ns: int
    duration_ns: int
    children: tuple["CallNode", ...] = ()

    @property
    def synthetic(self) -> bool:
        return self.method is None

    @property
    def t_end_ns(self) -> int:
        return self.t_start_ns + self.duration_ns


@dataclass(eq=False)
class CallTree:
    test_name: str
    sample_index: int
    roots: tuple[CallNode, ...] = ()

    @property
    def node_count(self) -> int:
        """Number of real (non-synthetic) nodes; equals the Enter-event count."""
        count = 0
        stack = list(self.roots)
        while stack:
            node = stack.pop()
            if not node.synthetic:
                count += 1
            stack.extend(node.children)
        return count


@dataclass(frozen=True)
class MethodInterval:
    """Start/duration of one call occurrence, with its nesting depth."""

    method: MethodId
    thread: int
    t_start_ns: int
    duration_ns: int
    depth: int


def build_call_trees(trace: TestTrace) -> CallTree:
    """Build the per-test call tree forest from a balanced trace.

    Node order follows Enter order; a node's duration is the timestamp
    difference between its Exit and Enter events.  Roots are ordered by
    thread id.  Raises TraceFormatError if the trace violates its
    invariants.
    """
    violations = validate_trace(trace)
    if violations:
        raise TraceFormatError(f"invalid trace: {violations[0]}")

    open_frames: dict[int, list[tuple[MethodId, int, list[CallNode]]]] = {}
    top_level: dict[int, list[CallNode]] = {}
    for ev in trace.events:
        stack = open_frames.setdefault(ev.thread, [])
        if ev.kind is EventKind.ENTER:
            stack.append((ev.method, ev.t_ns, []))
        else:
            method, t_start, children = stack.pop()
            node = CallNode(method, ev.thread, t_start, ev.t_ns - t_start, tuple(children))
            if stack:
                stack[-1][2].append(node)
            else:
                top_level.setdefault(ev.thread, []).append(node)

    roots = []
    for thread in sorted(top_level):
        frames = top_level[thread]
        if len(frames) == 1:
            roots.append(frames[0])
        else:
            span_start = frames[0].t_start_ns
            span_end = max(f.t_end_ns for f in frames)
            roots.append(
                CallNode(None, thread, span_start, span_end - span_start, tuple(frames))
            )
    return CallTree(trace.test_name, trace.sample_index, tuple(roots))


def adjacency(node: CallNode) -> tuple[CallNode, ...]:
    """The calls issued directly by this node, as a multiset of occurrences.

    Repeated calls to the same method appear once per call event.
    """
    return node.children


def node_intervals(tree: CallTree) -> list[tuple[CallNode, MethodInterval]]:
    """Per-occurrence (node, interval) pairs ordered by start time.

    Depth counts real nesting from the top-level frame (depth 0); synthetic
    wrapper roots are omitted and add no depth.  Ties on t_start_ns keep
    parent-before-child (pre-order) ordering, which attribution relies on.
    """
    out: list[tuple[CallNode, MethodInterval]] = []
    stack = [(node, 0) for node in reversed(tree.roots)]
    while stack:
        node, depth = stack.pop()
        if node.synthetic:
            stack.extend((child, depth) for child in reversed(node.children))
            continue
        out.append(
            (
                node,
                MethodInterval(
                    node.method, node.thread, node.t_start_ns, node.duration_ns, depth
                ),
            )
        )
        stack.extend((child, depth + 1) for child in reversed(node.children))
    out.sort(key=lambda pair: pair[1].t_start_ns)
    return out


def method_intervals(tree: CallTree) -> list[MethodInterval]:
    """Flatten a tree into per-occurrence intervals ordered by start time."""
    return [interval for _, interval in node_intervals(tree)]
