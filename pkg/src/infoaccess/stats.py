"""Tests relating cluster membership to external node attributes."""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import gammaincc, gammaln
from scipy.stats import rankdata

FISHER_REL_TOL = 1e-7


@dataclass(frozen=True)
class TestResult:
    test_name: str
    statistic: float
    p_value: float
    correction_factor: int = 1
    df: int | None = None
    n_used: int | None = None
    n_missing: int | None = None

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p_value outside [0, 1]: {self.p_value}")
        if self.correction_factor < 1:
            raise ValueError("correction_factor must be >= 1")

    @property
    def corrected_p(self) -> float:
        return bonferroni(self.p_value, self.correction_factor)

    def with_correction(self, factor: int) -> "TestResult":
        d = asdict(self)
        d["correction_factor"] = int(factor)
        return TestResult(**d)

    def to_json(self) -> dict:
        return {
            "test": self.test_name,
            "statistic": _json_float(self.statistic),
            "df": self.df,
            "p": self.p_value,
            "corrected_p": self.corrected_p,
            "n_used": self.n_used,
            "n_missing": self.n_missing,
        }


def _json_float(x):
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return None
    return x


def chi2_sf(x: float, df: int) -> float:
    """Upper tail of the chi-squared distribution (regularized upper gamma)."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if x <= 0:
        return 1.0
    return float(gammaincc(df / 2.0, x / 2.0))


def bonferroni(p: float, m: int) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p outside [0, 1]: {p}")
    if m < 1:
        raise ValueError("m must be >= 1")
    return p * m


def format_corrected(p: float) -> str:
    """Render a corrected p-value the way the report tables do."""
    if p > 1:
        return ">1"
    if p < 1e-7:
        return "<1e-7"
    return f"{p:.3g}"


def kruskal_wallis(groups) -> TestResult:
    groups = [np.asarray(g, dtype=np.float64).ravel() for g in groups]
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    if any(len(g) == 0 for g in groups):
        raise ValueError("every group must be nonempty")
    values = np.concatenate(groups)
    n = len(values)
    if n < 3:
        raise ValueError("need at least three observations")
    df = len(groups) - 1
    ranks = rankdata(values)  # mid-ranks for ties
    _, tie_counts = np.unique(values, return_counts=True)
    tie_corr = 1.0 - float((tie_counts ** 3 - tie_counts).sum()) / (n ** 3 - n)
    if tie_corr == 0.0:
        return TestResult("kruskal_wallis", 0.0, 1.0, df=df, n_used=n)
    h = 0.0
    start = 0
    for g in groups:
        r = ranks[start:start + len(g)].sum()
        h += r * r / len(g)
        start += len(g)
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    h /= tie_corr
    h = max(h, 0.0)
    return TestResult("kruskal_wallis", h, chi2_sf(h, df), df=df, n_used=n)


def _as_table(table) -> np.ndarray:
    t = np.asarray(table)
    if t.ndim != 2:
        raise ValueError("contingency table must be 2-D")
    if (t < 0).any() or not np.allclose(t, np.round(t)):
        raise ValueError("contingency table needs non-negative integer counts")
    return np.round(t).astype(np.int64)


def _log_hypergeom(a, r0, c0, n):
    """log P(top-left = a) for a 2x2 table with first row sum r0, first
    column sum c0 and total n."""
    return (gammaln(r0 + 1) + gammaln(n - r0 + 1) + gammaln(c0 + 1) + gammaln(n - c0 + 1)
            - gammaln(n + 1) - gammaln(a + 1) - gammaln(r0 - a + 1)
            - gammaln(c0 - a + 1) - gammaln(n - r0 - c0 + a + 1))


def fisher_exact_2x2(table) -> TestResult:
    t = _as_table(table)
    if t.shape != (2, 2):
        raise ValueError(f"expected a 2x2 table, got shape {t.shape}")
    (a, b), (c, d) = t
    n = int(t.sum())
    if b * c == 0:
        odds = math.inf if a * d > 0 else math.nan
    else:
        odds = float(a * d) / float(b * c)
    r0, c0 = a + b, a + c
    if min(r0, c + d, c0, b + d) == 0:
        return TestResult("fisher_exact", odds, 1.0, n_used=n)
    lo, hi = max(0, r0 + c0 - n), min(r0, c0)
    support = np.arange(lo, hi + 1)
    logp = _log_hypergeom(support, r0, c0, n)
    observed = logp[a - lo]
    keep = logp <= observed + math.log1p(FISHER_REL_TOL)
    p = float(np.exp(logp[keep]).sum())
    return TestResult("fisher_exact", odds, min(p, 1.0), n_used=n)


def _log_table_prob(t, row_term, col_term, n_term):
    return row_term + col_term - n_term - gammaln(t + 1).sum(axis=(-2, -1))


def fisher_exact_rxc(table, mc_trials: int = 10_000, master_seed: int = 0) -> TestResult:
    """Exact for 2x2; otherwise a Monte Carlo p-value over tables with the
    observed margins, drawn by permuting category labels."""
    t = _as_table(table)
    r, c = t.shape
    if r < 2 or c < 2:
        raise ValueError(f"need at least a 2x2 table, got shape {t.shape}")
    if (r, c) == (2, 2):
        return fisher_exact_2x2(t)
    if mc_trials < 1:
        raise ValueError("mc_trials must be >= 1")
    n = int(t.sum())
    rows, cols = t.sum(axis=1), t.sum(axis=0)
    row_term = gammaln(rows + 1).sum()
    col_term = gammaln(cols + 1).sum()
    n_term = gammaln(n + 1)
    observed = _log_table_prob(t, row_term, col_term, n_term)

    row_lab = np.repeat(np.arange(r), rows)
    col_lab = np.repeat(np.arange(c), cols)
    digest = hashlib.sha256(t.astype("<i8").tobytes() + bytes(t.shape)).digest()
    rng = np.random.default_rng([int(master_seed) & 0xFFFFFFFF, int.from_bytes(digest[:8], "little")])
    hits = 0
    batch = max(1, min(mc_trials, 2_000_000 // max(n, 1)))
    done = 0
    while done < mc_trials:
        b = min(batch, mc_trials - done)
        perm = rng.permuted(np.broadcast_to(col_lab, (b, n)), axis=1)
        flat = row_lab[None, :] * c + perm
        counts = np.zeros((b, r * c), dtype=np.int64)
        np.add.at(counts, (np.repeat(np.arange(b), n), flat.ravel()), 1)
        logp = _log_table_prob(counts.reshape(b, r, c), row_term, col_term, n_term)
        hits += int((logp <= observed + math.log1p(FISHER_REL_TOL)).sum())
        done += b
    p = (1.0 + hits) / (1.0 + mc_trials)
    return TestResult("fisher_exact_mc", float(observed), p, n_used=n)


def chi_squared_independence(table) -> TestResult:
    """Pearson chi-squared test without continuity correction."""
    t = _as_table(table).astype(np.float64)
    r, c = t.shape
    if r < 2 or c < 2:
        raise ValueError(f"need at least a 2x2 table, got shape {t.shape}")
    n = t.sum()
    expected = np.outer(t.sum(axis=1), t.sum(axis=0)) / n if n else np.zeros_like(t)
    zero = np.argwhere(expected <= 0)
    if len(zero):
        i, j = zero[0]
        raise ValueError(f"expected count is zero at cell ({i}, {j})")
    stat = float(((t - expected) ** 2 / expected).sum())
    df = (r - 1) * (c - 1)
    return TestResult("chi_squared", stat, chi2_sf(stat, df), df=df, n_used=int(n))


def attribute_table(labels, values, k=None):
    """Cluster x category contingency table plus category names."""
    labels = np.asarray(labels)
    cats = sorted({v for v in values}, key=str)
    index = {v: i for i, v in enumerate(cats)}
    k = int(labels.max()) + 1 if k is None else k
    table = np.zeros((k, len(cats)), dtype=np.int64)
    for lab, v in zip(labels, values):
        table[lab, index[v]] += 1
    return table, cats
