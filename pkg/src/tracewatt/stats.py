"""Small-sample statistics kernel: one-way ANOVA, F-distribution tail
probabilities via the regularized incomplete beta function, the
studentized range distribution via nested Gauss-Legendre quadrature, and
Tukey HSD (Tukey-Kramer for unequal group sizes) post-hoc tests.

Everything here is pure and reentrant; no external numeric libraries.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

BETA_CF_MAX_ITER = 300
BETA_CF_REL_TOL = 1e-12
PTUKEY_ABS_TOL = 1e-6
PTUKEY_MAX_DOUBLINGS = 4
# Above this many error degrees of freedom the sample-scale distribution is
# numerically a point mass at 1 and the outer integral is skipped.
PTUKEY_LARGE_DF = 25000.0
_Z_LIM = 8.5
_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class ConvergenceError(ArithmeticError):
    """An iterative evaluation failed to reach its tolerance."""

    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} after {iterations} iterations")
        self.iterations = iterations


@dataclass(frozen=True)
class AnovaResult:
    F: float
    p: float
    df_between: int
    df_within: int
    ms_between: float
    ms_within: float
    degenerate: bool = False


@dataclass(frozen=True)
class TukeyPair:
    """One pairwise comparison; mean_diff is mean(group_b) - mean(group_a)."""

    group_a: str
    group_b: str
    mean_diff: float
    q: float
    p_adj: float
    significant: bool


@lru_cache(maxsize=None)
def _gauss_legendre(n: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Nodes and weights of n-point Gauss-Legendre quadrature on [-1, 1],
    by Newton iteration on the Legendre recurrence."""
    nodes, weights = [], []
    for i in range(1, n + 1):
        x = math.cos(math.pi * (i - 0.25) / (n + 0.5))
        dp = 0.0
        for _ in range(100):
            p0, p1 = 1.0, x
            for j in range(2, n + 1):
                p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
            dp = n * (x * p1 - p0) / (x * x - 1.0)
            dx = p1 / dp
            x -= dx
            if abs(dx) < 1e-15:
                break
        nodes.append(x)
        weights.append(2.0 / ((1.0 - x * x) * dp * dp))
    return tuple(nodes), tuple(weights)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta integral (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, BETA_CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < BETA_CF_REL_TOL:
            return h
    raise ConvergenceError(
        f"incomplete beta continued fraction did not converge for "
        f"a={a}, b={b}, x={x}",
        BETA_CF_MAX_ITER,
    )


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError(f"shape parameters must be > 0, got a={a}, b={b}")
    if x < 0 or x > 1:
        raise ValueError(f"x must be in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # evaluate on the side where the continued fraction converges fast
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def f_upper_tail(f_stat: float, df1: int, df2: int) -> float:
    """Upper-tail probability P(F > f) for the F(df1, df2) distribution."""
    if df1 < 1 or df2 < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got ({df1}, {df2})")
    if f_stat < 0:
        raise ValueError(f"F statistic must be >= 0, got {f_stat}")
    if f_stat == 0.0:
        return 1.0
    if math.isinf(f_stat):
        return 0.0
    x = df2 / (df2 + df1 * f_stat)
    return regularized_incomplete_beta(0.5 * df2, 0.5 * df1, x)


def _range_cdf_nodes(order: int, panels: int):
    """Precompute (z, weight*phi(z), Phi(z)) for the standard-normal range
    integral over [-Z_LIM, Z_LIM]."""
    xs, ws = _gauss_legendre(order)
    out = []
    h = 2.0 * _Z_LIM / panels
    for p in range(panels):
        mid = -_Z_LIM + (p + 0.5) * h
        half = 0.5 * h
        for x, w in zip(xs, ws):
            z = mid + half * x
            out.append(
                (z, w * half * _INV_SQRT_2PI * math.exp(-0.5 * z * z), normal_cdf(z))
            )
    return out


@lru_cache(maxsize=8)
def _range_cdf_nodes_cached(order: int, panels: int):
    return tuple(_range_cdf_nodes(order, panels))


def _range_cdf(w: float, k: int, order: int, panels: int) -> float:
    """P(range of k iid standard normals <= w)."""
    if w <= 0.0:
        return 0.0
    km1 = k - 1
    erfc = math.erfc
    total = 0.0
    for z, fw, cdf in _range_cdf_nodes_cached(order, panels):
        d = cdf - 0.5 * erfc((w - z) / _SQRT2)
        if d > 0.0:
            total += fw * d**km1
    return min(1.0, k * total)


def ptukey(q: float, k: int, df: float) -> float:
    """P(Q <= q) for the studentized range with k groups and df error
    degrees of freedom.

    Nested numerical integration: the outer integral runs over the scaled
    chi density of the sample standard deviation, the inner over the
    normal range probability, both on Gauss-Legendre panels.  Panel counts
    are doubled until two successive evaluations agree within 1e-6
    absolute; failure to stabilize raises ConvergenceError.
    """
    if q < 0:
        raise ValueError(f"q must be >= 0, got {q}")
    if k < 2:
        raise ValueError(f"need k >= 2 groups, got {k}")
    if df < 1:
        raise ValueError(f"df must be >= 1, got {df}")
    if q == 0.0:
        return 0.0
    if math.isinf(q):
        return 1.0
    order = 24
    inner_panels, outer_panels = 1, 4
    prev_value = None
    for _ in range(PTUKEY_MAX_DOUBLINGS + 1):
        if df > PTUKEY_LARGE_DF:
            current = _range_cdf(q, k, order, inner_panels)
        else:
            current = _ptukey_outer(q, k, df, order, inner_panels, outer_panels)
        if prev_value is not None and abs(current - prev_value) <= PTUKEY_ABS_TOL:
            return current
        prev_value = current
        inner_panels *= 2
        outer_panels *= 2
    raise ConvergenceError(
        f"studentized range quadrature did not stabilize for q={q}, k={k}, df={df}",
        PTUKEY_MAX_DOUBLINGS + 1,
    )


def _ptukey_outer(
    q: float, k: int, df: float, order: int, inner_panels: int, outer_panels: int
) -> float:
    # outer integrand: density of s = sqrt(chi2_df / df), which is
    # c * s^(df-1) * exp(-df s^2 / 2), times the conditional range CDF
    ln_const = (
        0.5 * df * math.log(df)
        - math.lgamma(0.5 * df)
        - (0.5 * df - 1.0) * math.log(2.0)
    )
    sd = 1.0 / math.sqrt(2.0 * df)
    lo = max(0.0, 1.0 - 12.0 * sd - 1.5 / df)
    hi = 1.0 + 12.0 * sd + 4.0 / math.sqrt(df) + 3.0 / df
    xs, ws = _gauss_legendre(order)
    h = (hi - lo) / outer_panels
    total = 0.0
    for p in range(outer_panels):
        mid = lo + (p + 0.5) * h
        half = 0.5 * h
        for x, w in zip(xs, ws):
            s = mid + half * x
            ln_density = ln_const + (df - 1.0) * math.log(s) - 0.5 * df * s * s
            if ln_density < -745.0:
                continue
            total += w * half * math.exp(ln_density) * _range_cdf(q * s, k, order, inner_panels)
    return min(1.0, total)


def anova(groups: Sequence[Sequence[float]]) -> AnovaResult:
    """One-way ANOVA over observation groups.

    Degenerate input (every observation identical) yields an explicit
    degenerate result with F=0 and p=1 instead of a 0/0 NaN.
    """
    if len(groups) < 2:
        raise ValueError(f"need at least 2 groups, got {len(groups)}")
    sizes = [len(g) for g in groups]
    if min(sizes) < 2:
        raise ValueError("every group needs at least 2 observations")
    k = len(groups)
    n_total = sum(sizes)
    df_between = k - 1
    df_within = n_total - k

    grand_mean = sum(sum(g) for g in groups) / n_total
    means = [sum(g) / len(g) for g in groups]
    ss_between = sum(n * (m - grand_mean) ** 2 for n, m in zip(sizes, means))
    ss_within = sum(
        sum((x - m) ** 2 for x in g) for g, m in zip(groups, means)
    )
    ms_between = ss_between / df_between
    ms_within = ss_within / df_within

    first = groups[0][0]
    if all(x == first for g in groups for x in g):
        return AnovaResult(0.0, 1.0, df_between, df_within, 0.0, 0.0, degenerate=True)
    if ms_within == 0.0:
        return AnovaResult(math.inf, 0.0, df_between, df_within, ms_between, 0.0)
    f_stat = ms_between / ms_within
    return AnovaResult(
        f_stat, f_upper_tail(f_stat, df_between, df_within),
        df_between, df_within, ms_between, ms_within,
    )


def tukey_hsd(
    groups: Sequence[Sequence[float]],
    alpha: float = 0.05,
    labels: Optional[Sequence[str]] = None,
) -> list[TukeyPair]:
    """All-pairs Tukey HSD comparisons at family-wise level alpha.

    Uses the Tukey-Kramer statistic q = |mean_i - mean_j| /
    sqrt((MSE/2) (1/n_i + 1/n_j)), which reduces to plain Tukey HSD for
    balanced groups, and adjusts p-values through the studentized range
    distribution.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    result = anova(groups)
    if labels is None:
        labels = [str(i) for i in range(len(groups))]
    elif len(labels) != len(groups):
        raise ValueError("labels must match groups one-to-one")

    k = len(groups)
    means = [sum(g) / len(g) for g in groups]
    pairs = []
    for i in range(k):
        for j in range(i + 1, k):
            diff = means[j] - means[i]
            if result.ms_within == 0.0:
                q = 0.0 if diff == 0.0 else math.inf
            else:
                se = math.sqrt(
                    0.5 * result.ms_within * (1.0 / len(groups[i]) + 1.0 / len(groups[j]))
                )
                q = abs(diff) / se
            p_adj = min(max(1.0 - ptukey(q, k, result.df_within), 0.0), 1.0)
            pairs.append(
                TukeyPair(labels[i], labels[j], diff, q, p_adj, p_adj < alpha)
            )
    return pairs
