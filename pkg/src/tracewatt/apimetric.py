"""API-interaction classification and the utilization metrics U and rU.

An API interaction is a traced call into a method whose package matches
one of the configured prefixes (e.g. ``android.``, ``java.``).  The U
value of a call-tree node counts the API interactions in its subtree plus
every internal frame that contributes at least one; rU normalizes a U
value by the total interaction count N of the run it belongs to.
"""

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .callgraph import CallNode, CallTree
from .trace import MethodId


@dataclass(frozen=True)
class ApiRule:
    """One package-prefix rule; the label names the API group it belongs to."""

    prefix: str
    label: str

    def __post_init__(self):
        if not self.prefix:
            raise ValueError("API rule prefix must be non-empty")
        if not self.label:
            raise ValueError("API rule label must be non-empty")


class ApiClassifier:
    """Longest-prefix-match classifier over dot-separated package names.

    Prefixes match on whole package components: ``java.`` matches packages
    ``java`` and ``java.util`` but not ``javafoo``.  Among rules matching
    the same method the longest prefix wins (so ``java.util.`` can carve a
    sub-API out of ``java.``); equal lengths keep the earlier rule.
    """

    def __init__(self, rules: Iterable[ApiRule]):
        self.rules = tuple(rules)
        if not self.rules:
            raise ValueError("classifier needs at least one rule")
        seen = set()
        for rule in self.rules:
            if rule.prefix in seen:
                raise ValueError(f"duplicate API rule prefix {rule.prefix!r}")
            seen.add(rule.prefix)
        # precomputed (normalized-prefix, label), longest first, input order on ties
        normalized = [
            (r.prefix if r.prefix.endswith(".") else r.prefix + ".", r.label)
            for r in self.rules
        ]
        self._matchers = sorted(
            enumerate(normalized), key=lambda item: (-len(item[1][0]), item[0])
        )

    def classify(self, method: MethodId) -> Optional[str]:
        """Label of the longest matching prefix rule, or None."""
        probe = method.package + "."
        for _, (prefix, label) in self._matchers:
            if probe.startswith(prefix):
                return label
        return None


def classify(method: MethodId, classifier: ApiClassifier) -> Optional[str]:
    return classifier.classify(method)


@dataclass
class UapiProfile:
    """Per-tree utilization results for one (test, sample) execution.

    ``node_values`` maps every traversed node (API subtrees are pruned, so
    frames inside an API call are absent) to its U value.  ``root_uapi``
    sums U over the thread roots and is 0 exactly when the tree contains
    no API interaction.
    """

    test_name: str
    sample_index: int
    root_uapi: int
    node_values: dict[CallNode, int] = field(default_factory=dict)
    total_api_interactions: int = 0
    api_distribution: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class RUapiValue:
    """A U value normalized by its run's total interaction count N."""

    value: float
    numerator: float
    denominator_base: int


def ruapi(u_value: float, n_base: int) -> RUapiValue:
    """Normalize a U value: rU = U / (N + 1)."""
    if n_base < 0:
        raise ValueError(f"total interaction count must be >= 0, got {n_base}")
    if u_value < 0:
        raise ValueError(f"U value must be >= 0, got {u_value}")
    return RUapiValue(u_value / (n_base + 1), u_value, n_base)


def uapi(tree: CallTree, classifier: ApiClassifier) -> UapiProfile:
    """Evaluate U over a call tree.

    Rules, applied per node: an API node is worth 1 and its subtree is
    pruned (its internals are below the interaction boundary); a node with
    no API interaction anywhere beneath it is worth 0; any other node is
    worth 1 plus the sum over its children.  Synthetic thread wrappers are
    transparent: they pass through the sum of their children and are never
    interactions themselves.
    """
    node_values: dict[CallNode, int] = {}
    distribution: dict[str, int] = {}
    total_api = 0

    # Iterative post-order so deeply recursive traces cannot overflow the
    # interpreter stack.
    for root in tree.roots:
        stack: list[tuple[CallNode, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if not expanded:
                label = None if node.synthetic else classifier.classify(node.method)
                if label is not None:
                    node_values[node] = 1
                    total_api += 1
                    distribution[label] = distribution.get(label, 0) + 1
                    continue
                stack.append((node, True))
                stack.extend((child, False) for child in node.children)
            else:
                child_sum = sum(node_values[child] for child in node.children)
                if node.synthetic:
                    node_values[node] = child_sum
                elif child_sum == 0:
                    node_values[node] = 0
                else:
                    node_values[node] = 1 + child_sum
    root_value = sum(node_values[root] for root in tree.roots)
    return UapiProfile(
        tree.test_name,
        tree.sample_index,
        root_value,
        node_values,
        total_api,
        distribution,
    )


def api_distribution(tree: CallTree, classifier: ApiClassifier) -> dict[str, int]:
    """Count API interactions per group label; nested API-under-API calls
    are pruned and not counted."""
    return uapi(tree, classifier).api_distribution
