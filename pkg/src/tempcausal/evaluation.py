"""Scoring of discovered graphs and multi-seed summary reports."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from .graph import CausalGraph


@dataclass
class EvalResult:
    precision: float
    recall: float
    f1: float
    pod: float | None         # None: no true positives, so the delay precision is undefined
    tp: int
    fp: int
    fn: int
    seed: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _ratio(a: int, b: int) -> float:
    return a / b if b else 0.0


def edge_diff(pred: CausalGraph, truth: CausalGraph, self_loops: bool = True):
    """``(tp, fp, fn)`` as sorted lists of ordered ``(src, dst)`` pairs, delays ignored."""
    if pred.n != truth.n:
        raise ValueError(f"vertex count mismatch: predicted {pred.n}, truth {truth.n}")
    p, t = pred.pairs(self_loops), truth.pairs(self_loops)
    key = lambda e: (e[1], e[0])
    return sorted(p & t, key=key), sorted(p - t, key=key), sorted(t - p, key=key)


def pod(pred: CausalGraph, truth: CausalGraph, self_loops: bool = True) -> float | None:
    """Fraction of true-positive edges whose delay matches exactly; None without true positives."""
    tp, _, _ = edge_diff(pred, truth, self_loops)
    if not tp:
        return None
    hits = sum(pred.edges[k].delay == truth.edges[k].delay for k in tp)
    return hits / len(tp)


def prf1(pred: CausalGraph, truth: CausalGraph, self_loops: bool = True, seed: int | None = None) -> EvalResult:
    tp, fp, fn = edge_diff(pred, truth, self_loops)
    P = _ratio(len(tp), len(tp) + len(fp))
    R = _ratio(len(tp), len(tp) + len(fn))
    f1 = 2 * P * R / (P + R) if P + R > 0 else 0.0
    return EvalResult(P, R, f1, pod(pred, truth, self_loops), len(tp), len(fp), len(fn), seed)


# -- multi-seed summaries ----------------------------------------------------

METRICS = ("precision", "recall", "f1", "pod")


def mean_std(values: list[float]) -> tuple[float | None, float | None]:
    """Mean and sample standard deviation; std is None below two values."""
    if not values:
        return None, None
    mu = math.fsum(values) / len(values)
    if len(values) < 2:
        return mu, None
    var = math.fsum((v - mu) ** 2 for v in values) / (len(values) - 1)
    return mu, math.sqrt(var)


@dataclass
class SeedOutcome:
    seed: int
    result: EvalResult | None = None
    error: str | None = None


@dataclass
class BenchRow:
    name: str
    outcomes: list[SeedOutcome] = field(default_factory=list)

    @property
    def failed(self) -> list[int]:
        return [o.seed for o in self.outcomes if o.result is None]

    def summary(self) -> dict:
        doc = {"name": self.name, "seeds": [o.seed for o in self.outcomes],
               "failed_seeds": self.failed, "partial": bool(self.failed)}
        ok = [o.result for o in self.outcomes if o.result is not None]
        for m in METRICS:
            vals = [getattr(r, m) for r in ok if getattr(r, m) is not None]
            mu, sd = mean_std(vals)
            doc[m] = {"mean": mu, "std": sd, "n": len(vals)}
        doc["runs"] = [
            {"seed": o.seed, **(o.result.to_dict() if o.result else {}), **({"error": o.error} if o.error else {})}
            for o in self.outcomes
        ]
        return doc


def report_json(rows: list[BenchRow], extra: dict | None = None) -> str:
    doc = {"rows": [r.summary() for r in rows]}
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _fmt(cell: dict) -> str:
    if cell["mean"] is None:
        return "undefined"
    if cell["std"] is None:
        return f"{cell['mean']:.3f}"
    return f"{cell['mean']:.3f} ± {cell['std']:.3f}"


def report_table(rows: list[BenchRow]) -> str:
    """Aligned plain-text table, one line per row."""
    header = ["dataset", *METRICS, "seeds", "failed"]
    body = []
    for r in rows:
        s = r.summary()
        body.append([r.name, *(_fmt(s[m]) for m in METRICS), str(len(s["seeds"])),
                     ",".join(map(str, s["failed_seeds"])) or "-"])
    widths = [max(len(x[c]) for x in [header] + body) for c in range(len(header))]
    lines = ["  ".join(x[c].ljust(widths[c]) for c in range(len(header))).rstrip() for x in [header] + body]
    return "\n".join(lines) + "\n"


def multi_seed_report(jobs, seeds: list[int], run) -> list[BenchRow]:
    """Run ``run(job, seed) -> (pred, truth)`` for every job and seed.

    ``jobs`` is a list of ``(name, job)``; failures are recorded per seed
    and do not abort the report.
    """
    if len(seeds) < 2:
        raise ValueError("a multi-seed report needs at least 2 seeds")
    rows = []
    for name, job in jobs:
        row = BenchRow(name)
        for seed in seeds:
            try:
                pred, truth = run(job, seed)
                row.outcomes.append(SeedOutcome(seed, prf1(pred, truth, seed=seed)))
            except Exception as exc:           # recorded, not fatal
                row.outcomes.append(SeedOutcome(seed, error=f"{type(exc).__name__}: {exc}"))
        rows.append(row)
    return rows
