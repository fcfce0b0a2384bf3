"""Segment-level meta-evaluation against human ratings.

Kendall tau-b and Pearson correlation per domain (plus ``Overall``), and
Williams' test for the difference between two metrics' correlations with the
same human ratings.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

OVERALL = "Overall"


class MetaEvalError(ValueError):
    pass


class LengthMismatch(MetaEvalError):
    pass


class DegenerateVector(MetaEvalError):
    pass


class DomainError(MetaEvalError):
    pass


class JoinError(MetaEvalError):
    def __init__(self, metric: str, missing: list[str], extra: list[str]):
        self.metric, self.missing, self.extra = metric, missing, extra
        super().__init__(f"{metric}: {len(missing)} rated segments without a score, "
                         f"{len(extra)} scores without a rating")

    def to_dict(self) -> dict:
        return {"error": "JoinError", "metric": self.metric,
                "missing_scores": self.missing[:20], "unrated_scores": self.extra[:20],
                "n_missing": len(self.missing), "n_unrated": len(self.extra)}


def _vectors(x: Sequence[float], y: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise LengthMismatch(f"vectors of shape {x.shape} and {y.shape}")
    if x.size < 2:
        raise LengthMismatch("need at least two points")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise MetaEvalError("scores must be finite")
    return x, y


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> float:
    x, y = _vectors(x, y)
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateVector("tau-b undefined when one vector is constant")
    tau = stats.kendalltau(x, y, variant="b").statistic
    return float(min(1.0, max(-1.0, tau)))


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x, y = _vectors(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateVector("Pearson undefined for zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


@dataclass(frozen=True)
class WilliamsResult:
    t: float
    p: float

    def to_dict(self) -> dict:
        return {"t": self.t, "p": self.p}


def williams_test(r12: float, r13: float, r23: float, n: int) -> WilliamsResult:
    """Two-sided Williams test of r12 vs r13, which share variable 1.

    Variable 1 is the human rating, 2 and 3 the two metrics, so ``r23`` is the
    correlation between the metrics. Degrees of freedom are ``n - 3``.
    """
    for name, r in (("r12", r12), ("r13", r13), ("r23", r23)):
        if not math.isfinite(r) or abs(r) >= 1:
            raise DomainError(f"{name}={r} outside (-1, 1)")
    if n < 4:
        raise DomainError(f"n={n} < 4 leaves no degrees of freedom")
    k = 1 - r12 ** 2 - r13 ** 2 - r23 ** 2 + 2 * r12 * r13 * r23
    if k <= 0:
        raise DomainError(f"correlation matrix is not positive definite (K={k})")
    num = (r12 - r13) * math.sqrt((n - 1) * (1 + r23))
    den = math.sqrt(2 * k * (n - 1) / (n - 3) + ((r12 + r13) ** 2 / 4) * (1 - r23) ** 3)
    t = num / den
    p = min(1.0, 2.0 * float(stats.t.sf(abs(t), n - 3)))
    return WilliamsResult(t, p)


@dataclass
class SegmentScores:
    metric_name: str
    scores: dict[str, float]

    def __post_init__(self):
        for k, v in self.scores.items():
            if not math.isfinite(v):
                raise MetaEvalError(f"{self.metric_name}: non-finite score for {k}")


@dataclass(frozen=True)
class Correlation:
    tau_b: float
    pearson: float
    n: int

    def to_dict(self) -> dict:
        return {"tau_b": self.tau_b, "pearson": self.pearson, "n": self.n}


@dataclass
class CorrelationReport:
    domains: list[str]
    correlations: dict[str, dict[str, Correlation]] = field(default_factory=dict)
    # (metric_a, metric_b) -> domain -> Williams result on Pearson correlations
    significance: dict[tuple[str, str], dict[str, WilliamsResult]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "domains": self.domains,
            "correlations": {m: {d: c.to_dict() for d, c in per.items()}
                             for m, per in self.correlations.items()},
            "significance": [
                {"metric_a": a, "metric_b": b,
                 "by_domain": {d: w.to_dict() for d, w in per.items()}}
                for (a, b), per in self.significance.items()
            ],
        }

    def render_table(self, digits: int = 3) -> str:
        head = ["Metric"] + [f"{d} {s}" for d in self.domains for s in ("tau", "rho")]
        rows = [head]
        for metric, per in self.correlations.items():
            row = [metric]
            for d in self.domains:
                c = per.get(d)
                row += ([f"{c.tau_b:.{digits}f}", f"{c.pearson:.{digits}f}"] if c
                        else ["-", "-"])
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
        lines = ["  ".join(cell.ljust(w) if i == 0 else cell.rjust(w)
                           for i, (cell, w) in enumerate(zip(r, widths))) for r in rows]
        lines.insert(1, "-" * len(lines[0]))
        return "\n".join(lines)


def _check_join(metric: SegmentScores, ratings: Mapping[str, float]) -> None:
    missing = sorted(set(ratings) - set(metric.scores))
    extra = sorted(set(metric.scores) - set(ratings))
    if missing or extra:
        raise JoinError(metric.metric_name, missing, extra)


def meta_evaluate(metrics: Sequence[SegmentScores], ratings: Mapping[str, float],
                  domain_of: Mapping[str, str] | None = None,
                  significance: bool = True) -> CorrelationReport:
    """Correlate each metric with ``ratings`` per domain and overall.

    Every metric must score exactly the rated segments. Williams tests are run
    for every metric pair in each domain with at least four segments.
    """
    domain_of = domain_of or {}
    for m in metrics:
        _check_join(m, ratings)
    ids_by_domain: dict[str, list[str]] = {}
    for iid in sorted(ratings):
        d = domain_of.get(iid)
        if d:
            ids_by_domain.setdefault(d, []).append(iid)
    domains = sorted(ids_by_domain) + [OVERALL]
    ids_by_domain[OVERALL] = sorted(ratings)

    report = CorrelationReport(domains)
    for m in metrics:
        per = {}
        for d in domains:
            ids = ids_by_domain[d]
            x = [m.scores[i] for i in ids]
            y = [ratings[i] for i in ids]
            per[d] = Correlation(kendall_tau_b(x, y), pearson(x, y), len(ids))
        report.correlations[m.metric_name] = per

    if significance:
        for a, b in itertools.combinations(metrics, 2):
            per_w = {}
            for d in domains:
                ids = ids_by_domain[d]
                if len(ids) < 4:
                    continue
                human = [ratings[i] for i in ids]
                sa = [a.scores[i] for i in ids]
                sb = [b.scores[i] for i in ids]
                per_w[d] = williams_test(pearson(human, sa), pearson(human, sb),
                                         pearson(sa, sb), len(ids))
            report.significance[(a.metric_name, b.metric_name)] = per_w
    return report
