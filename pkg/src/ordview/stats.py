"""Factorial comparison of experiment grids.

Balanced two-way ANOVA with interaction (method x view_config, seeds as
replicates), Tukey HSD post-hoc comparisons driven by a hand-integrated
studentized range distribution, and compact letter display subsets.

Only scipy.special primitives (normal CDF, incomplete beta/gamma) are used;
the studentized range CDF, its inversion, the ANOVA decomposition, and the
letter display are implemented here.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special as _sp

__all__ = [
    "ResultsTable",
    "AnovaRow",
    "AnovaTable",
    "TukeyGrouping",
    "anova2",
    "tukey_hsd",
    "studentized_range_cdf",
    "studentized_range_sf",
    "studentized_range_quantile",
    "f_sf",
]


# ---------------------------------------------------------------- containers


@dataclass(frozen=True)
class ResultsTable:
    """Long-format grid: one (method, view_config, seed, value) per row."""

    method: tuple[str, ...]
    view_config: tuple[str, ...]
    seed: tuple[int, ...]
    value: np.ndarray
    metric: str = "metric"

    def __post_init__(self):
        value = np.asarray(self.value, dtype=np.float64)
        n = len(self.method)
        if not (len(self.view_config) == len(self.seed) == value.size == n):
            raise ValueError("column lengths differ")
        if n == 0:
            raise ValueError("empty table")
        if not np.all(np.isfinite(value)):
            raise ValueError("metric values must be finite")
        value.flags.writeable = False
        object.__setattr__(self, "value", value)

    @classmethod
    def from_rows(cls, rows, metric: str = "metric") -> "ResultsTable":
        rows = list(rows)
        return cls(
            method=tuple(str(r[0]) for r in rows),
            view_config=tuple(str(r[1]) for r in rows),
            seed=tuple(int(r[2]) for r in rows),
            value=np.array([float(r[3]) for r in rows]),
            metric=metric,
        )

    def __len__(self) -> int:
        return len(self.method)

    def values_by(self, factor: str) -> dict[str, np.ndarray]:
        """Group metric values by one factor ('method' or 'view_config')."""
        if factor not in ("method", "view_config"):
            raise ValueError("factor must be 'method' or 'view_config'")
        keys = getattr(self, factor)
        out: dict[str, list[float]] = {}
        for key, v in zip(keys, self.value):
            out.setdefault(key, []).append(v)
        return {k: np.array(vs) for k, vs in sorted(out.items())}


@dataclass(frozen=True)
class AnovaRow:
    ss: float
    df: int
    f: float
    p: float


@dataclass(frozen=True)
class AnovaTable:
    method: AnovaRow
    view: AnovaRow
    interaction: AnovaRow
    residual: AnovaRow
    ss_total: float
    df_total: int
    degenerate: bool

    def rows(self) -> dict[str, AnovaRow]:
        return {
            "Method": self.method,
            "View": self.view,
            "Method:View": self.interaction,
            "Residual": self.residual,
        }


# ------------------------------------------------------------- distributions


def f_sf(f_stat: float, df_num: int, df_den: int) -> float:
    """Upper tail of the F distribution via the regularized incomplete beta."""
    if df_num < 1 or df_den < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if math.isnan(f_stat):
        return math.nan
    if f_stat <= 0.0:
        return 1.0
    if math.isinf(f_stat):
        return 0.0
    x = df_den / (df_den + df_num * f_stat)
    return float(_sp.betainc(0.5 * df_den, 0.5 * df_num, x))


@lru_cache(maxsize=8)
def _gauss_legendre(n: int, a: float, b: float):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * nodes, half * weights


def _normal_range_cdf(r: np.ndarray, k: int) -> np.ndarray:
    """P(range of k iid standard normals <= r), vectorized over r.

    F(r) = k * Integral phi(u) [Phi(u + r) - Phi(u)]**(k-1) du, integrated by
    Gauss-Legendre on [-13, 13] (the integrand is bounded by phi(u) outside).
    """
    u, w = _gauss_legendre(256, -13.0, 13.0)
    r = np.asarray(r, dtype=np.float64)
    out = np.zeros(r.shape)
    pos = r > 0
    if np.any(pos):
        rp = r[pos][:, None]
        phi_u = np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
        inner = _sp.ndtr(u[None, :] + rp) - _sp.ndtr(u)[None, :]
        out[pos] = k * np.sum(w * phi_u * inner ** (k - 1), axis=1)
    return np.clip(out, 0.0, 1.0)


@lru_cache(maxsize=64)
def _scale_quadrature(df: int):
    """Nodes, weights and density values for S = sqrt(chi2_df / df)."""
    half = 0.5 * df
    s_lo = math.sqrt(2.0 * float(_sp.gammaincinv(half, 1e-14)) / df)
    s_hi = math.sqrt(2.0 * float(_sp.gammaincinv(half, 1.0 - 1e-14)) / df)
    s, w = _gauss_legendre(400, s_lo, s_hi)
    log_pdf = (
        (1.0 - half) * math.log(2.0)
        + half * math.log(df)
        + (df - 1.0) * np.log(s)
        - 0.5 * df * s * s
        - math.lgamma(half)
    )
    return s, w * np.exp(log_pdf)


def studentized_range_cdf(q: float, k: int, df: int) -> float:
    """P(Q <= q) for the studentized range of k groups with df error dof.

    Integrates the normal-range CDF against the density of the scale factor
    S = sqrt(chi2_df / df): P(Q <= q) = E_S[ F_range(q S) ].
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if df < 1:
        raise ValueError("df must be >= 1")
    if not math.isfinite(q):
        return 1.0 if q > 0 else 0.0
    if q <= 0.0:
        return 0.0
    s, weighted = _scale_quadrature(int(df))
    vals = _normal_range_cdf(q * s, int(k))
    return float(min(1.0, max(0.0, np.sum(weighted * vals))))


def studentized_range_sf(q: float, k: int, df: int) -> float:
    return 1.0 - studentized_range_cdf(q, k, df)


def studentized_range_quantile(k: int, df: int, q: float) -> float:
    """Inverse CDF by bracketing plus bisection to 1e-6 absolute width."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie strictly inside (0, 1)")
    lo, hi = 0.0, 1.0
    for _ in range(80):
        if studentized_range_cdf(hi, k, df) > q:
            break
        lo, hi = hi, hi * 2.0
    else:
        raise RuntimeError("studentized range quantile failed to bracket")
    for _ in range(200):
        if hi - lo <= 1e-6:
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if studentized_range_cdf(mid, k, df) < q:
            lo = mid
        else:
            hi = mid
    raise RuntimeError("studentized range quantile failed to converge")


# -------------------------------------------------------------------- anova


def anova2(table: ResultsTable) -> AnovaTable:
    """Balanced two-way ANOVA with interaction.

    Standard balanced-factorial decomposition: with cell means over R
    replicates, SS_A = bR sum (mean_a - mean)^2, SS_B likewise, SS_AB the
    interaction contrast, SS_res the within-cell scatter. F = MS_effect /
    MS_res; p from the F upper tail. A zero residual mean square marks the
    table degenerate: F is +inf (p = 0) for effects with positive SS and NaN
    otherwise.
    """
    methods = np.asarray(table.method)
    views = np.asarray(table.view_config)
    y = table.value
    a_levels = np.unique(methods)
    b_levels = np.unique(views)
    a, b = a_levels.size, b_levels.size
    if a < 2 or b < 2:
        raise ValueError("both factors need at least 2 levels")

    cells = np.empty((a, b), dtype=object)
    r = None
    for i, av in enumerate(a_levels):
        for j, bv in enumerate(b_levels):
            vals = y[(methods == av) & (views == bv)]
            if r is None:
                r = vals.size
            elif vals.size != r:
                raise ValueError("unbalanced design: unequal cell counts")
            cells[i, j] = vals
    if r < 2:
        raise ValueError("need at least 2 replicates per cell")

    grand = float(y.mean())
    cell_means = np.array([[cells[i, j].mean() for j in range(b)] for i in range(a)])
    a_means = cell_means.mean(axis=1)
    b_means = cell_means.mean(axis=0)

    ss_a = b * r * float(((a_means - grand) ** 2).sum())
    ss_b = a * r * float(((b_means - grand) ** 2).sum())
    inter = cell_means - a_means[:, None] - b_means[None, :] + grand
    ss_ab = r * float((inter**2).sum())
    ss_res = float(
        sum(
            ((cells[i, j] - cell_means[i, j]) ** 2).sum()
            for i in range(a)
            for j in range(b)
        )
    )
    ss_total = float(((y - grand) ** 2).sum())

    df_a, df_b = a - 1, b - 1
    df_ab = df_a * df_b
    df_res = a * b * (r - 1)
    ms_res = ss_res / df_res
    degenerate = ms_res == 0.0

    def row(ss: float, df: int) -> AnovaRow:
        if degenerate:
            f_stat = math.inf if ss > 0.0 else math.nan
        else:
            f_stat = (ss / df) / ms_res
        return AnovaRow(ss=ss, df=df, f=f_stat, p=f_sf(f_stat, df, df_res))

    return AnovaTable(
        method=row(ss_a, df_a),
        view=row(ss_b, df_b),
        interaction=row(ss_ab, df_ab),
        residual=AnovaRow(ss=ss_res, df=df_res, f=math.nan, p=math.nan),
        ss_total=ss_total,
        df_total=y.size - 1,
        degenerate=degenerate,
    )


# -------------------------------------------------------------------- tukey


@dataclass(frozen=True)
class TukeyGrouping:
    """Tukey HSD outcome: means, pairwise p-values, and CLD subsets.

    levels are ordered by ascending mean; subsets are named S1..Sk in the
    same order and letters[level] lists the subsets containing that level.
    """

    levels: tuple[str, ...]
    means: np.ndarray
    pvalues: dict[tuple[str, str], float]
    subsets: tuple[tuple[str, ...], ...]
    letters: dict[str, tuple[str, ...]]
    alpha: float
    df: int
    q_critical: float


def _compact_letter_display(
    levels: list[str], significant: set[tuple[str, str]]
) -> list[list[str]]:
    """Insert-and-absorb: split every column containing a significant pair,
    then drop columns contained in another. Guarantees two levels share a
    column iff their pair is not significant."""
    columns: list[set[str]] = [set(levels)]
    for x, y_ in sorted(significant):
        split: list[set[str]] = []
        for col in columns:
            if x in col and y_ in col:
                split.append(col - {x})
                split.append(col - {y_})
            else:
                split.append(col)
        # absorb: drop columns contained in another (duplicates keep one copy)
        columns = []
        for i, col in enumerate(split):
            redundant = False
            for j, other in enumerate(split):
                if i == j:
                    continue
                if col < other or (col == other and j < i):
                    redundant = True
                    break
            if not redundant:
                columns.append(col)
    order = {name: i for i, name in enumerate(levels)}
    return [sorted(col, key=order.__getitem__) for col in columns]


def tukey_hsd(groups: dict[str, "np.ndarray"], alpha: float = 0.05) -> TukeyGrouping:
    """All-pairs Tukey HSD with pooled within-group variance.

    The pairwise statistic is |mean_a - mean_b| / sqrt(s2/2 (1/n_a + 1/n_b))
    (the Tukey-Kramer form; for equal n it reduces to the classic HSD), with
    p-values from the studentized range distribution at k = number of groups
    and df = total within-group degrees of freedom.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if len(groups) < 2:
        raise ValueError("need at least 2 groups")
    names = list(groups)
    data = {name: np.asarray(groups[name], dtype=np.float64) for name in names}
    for name, vals in data.items():
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError(f"group {name!r} needs at least 2 values")
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"group {name!r} has non-finite values")

    k = len(names)
    df = sum(v.size - 1 for v in data.values())
    pooled = sum(((v - v.mean()) ** 2).sum() for v in data.values()) / df
    if pooled <= 0.0:
        raise ValueError("degenerate pooled variance: all groups constant")

    means = {name: float(v.mean()) for name, v in data.items()}
    ordered = sorted(names, key=lambda name: (means[name], name))

    pvalues: dict[tuple[str, str], float] = {}
    significant: set[tuple[str, str]] = set()
    for x, y_ in itertools.combinations(ordered, 2):
        na, nb = data[x].size, data[y_].size
        se = math.sqrt(0.5 * pooled * (1.0 / na + 1.0 / nb))
        q_stat = abs(means[x] - means[y_]) / se
        p = studentized_range_sf(q_stat, k, df)
        pvalues[(x, y_)] = p
        if p < alpha:
            significant.add((x, y_))

    columns = _compact_letter_display(ordered, significant)
    columns.sort(key=lambda col: (min(means[m] for m in col), max(means[m] for m in col), col[0]))
    subset_names = [f"S{i + 1}" for i in range(len(columns))]
    letters = {
        name: tuple(
            subset_names[i] for i, col in enumerate(columns) if name in col
        )
        for name in ordered
    }
    return TukeyGrouping(
        levels=tuple(ordered),
        means=np.array([means[name] for name in ordered]),
        pvalues=pvalues,
        subsets=tuple(tuple(col) for col in columns),
        letters=letters,
        alpha=alpha,
        df=df,
        q_critical=studentized_range_quantile(k, df, 1.0 - alpha),
    )
