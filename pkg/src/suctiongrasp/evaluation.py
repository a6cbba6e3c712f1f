"""Online precision of ranked grasps, score-map MSE and seal-model comparison."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .annotation import ScoreMap
from .cup import CupModel
from .policy import RankedGrasp

# bucket name -> percent of the ranked list (None = single best)
BUCKETS = (("top1", None), ("top1pct", 1), ("top5pct", 5), ("top10pct", 10))


def bucket_size(n: int, percent) -> int:
    """``ceil(percent% of n)``, at least 1; exact integer arithmetic."""
    if percent is None:
        return 1
    return max(1, -(-percent * n // 100))


@dataclass(frozen=True)
class PrecisionReport:
    top1: float
    top1pct: float
    top5pct: float
    top10pct: float
    n_evaluated: dict = field(default_factory=dict)
    n_positive: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        return {name: getattr(self, name) for name, _ in BUCKETS}

    def to_text(self) -> str:
        lines = [f"{'bucket':<10}{'n':>6}{'tp':>6}{'precision':>12}"]
        for name, _ in BUCKETS:
            lines.append(f"{name:<10}{self.n_evaluated[name]:>6}{self.n_positive[name]:>6}"
                         f"{getattr(self, name):>12.4f}")
        return "\n".join(lines)


def _as_bit(v) -> int:
    q = getattr(v, "q", v)
    if isinstance(q, dict):
        q = q["q"]
    return int(q)


def online_precision(ranked: Sequence[RankedGrasp], oracle: Callable) -> PrecisionReport:
    """Fraction of true positives (oracle Q == 1) in each top bucket.

    ``ranked`` must already be in rank order. The oracle receives a candidate
    and returns an evaluation record, a dict with key ``q`` or a 0/1 value; it
    is called at most once per candidate and only for candidates inside the
    largest bucket.
    """
    ranked = list(ranked)
    n = len(ranked)
    if n == 0:
        raise ValueError("ranked list is empty")
    largest = max(bucket_size(n, p) for _, p in BUCKETS)
    bits = [_as_bit(oracle(g.candidate)) for g in ranked[:largest]]
    cum = np.concatenate([[0], np.cumsum(bits)])
    vals, n_eval, n_pos = {}, {}, {}
    for name, p in BUCKETS:
        k = bucket_size(n, p)
        n_eval[name] = k
        n_pos[name] = int(cum[k])
        vals[name] = cum[k] / k
    return PrecisionReport(n_evaluated=n_eval, n_positive=n_pos, **vals)


def batch_oracle(records) -> Callable:
    """Oracle backed by precomputed records keyed by candidate id."""
    table = {}
    for r in records:
        cid = r["candidate_id"] if isinstance(r, dict) else r.candidate_id
        table[cid] = r
    return lambda cand: table[cand.candidate_id]


def aggregate_reports(reports: Sequence[PrecisionReport]) -> dict:
    """Scene-averaged precision and pooled precision (total tp / total n)."""
    if not reports:
        raise ValueError("no reports")
    out = {"mean": {}, "pooled": {}}
    for name, _ in BUCKETS:
        out["mean"][name] = float(np.mean([getattr(r, name) for r in reports]))
        tp = sum(r.n_positive[name] for r in reports)
        n = sum(r.n_evaluated[name] for r in reports)
        out["pooled"][name] = tp / n
    return out


def mse_score(predicted, truth) -> float:
    """Mean squared difference between two score maps."""
    a = predicted.scores if isinstance(predicted, ScoreMap) else np.asarray(predicted, dtype=np.float64)
    b = truth.scores if isinstance(truth, ScoreMap) else np.asarray(truth, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty score maps")
    return float(np.mean((a - b) ** 2))


@dataclass(frozen=True)
class ModelComparison:
    rows: list
    disagreements: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["case", "expected_960", "full_960", "expected_8", "perimeter_8",
                    "full_spread", "perimeter_spread", "full_hits", "foreign_hits", "agree"])
        for r in self.rows:
            w.writerow([r["case"], int(r["expected_960"]), int(r["full_960"]),
                        int(r["expected_8"]), int(r["perimeter_8"]),
                        _fmt(r["full_spread"]), _fmt(r["perimeter_spread"]),
                        r["full_hits"], r["foreign_hits"], int(r["full_960"] == r["perimeter_8"])])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"rows": [{k: (v if not isinstance(v, float) or np.isfinite(v) else None)
                          for k, v in r.items()} for r in self.rows],
                "disagreements": self.disagreements}


def _fmt(x: float) -> str:
    return f"{x:.6g}" if np.isfinite(x) else "inf"


def model_comparison_report(cases=None, cup: CupModel = None) -> ModelComparison:
    """Run both seal models over the test-board cases.

    ``cases`` defaults to :func:`suctiongrasp.fixtures.make_board` for ``cup``.
    """
    from .fixtures import make_board
    from .geometry.bvh import SceneIndex
    from .seal import evaluate_seal, evaluate_seal_8vertex

    cup = cup or CupModel()
    cases = make_board(cup) if cases is None else cases
    rows, dis = [], []
    for case in cases:
        index = SceneIndex(case.scene)
        full = evaluate_seal(index, cup, case.candidate)
        per = evaluate_seal_8vertex(index, cup, case.candidate)
        rows.append({"case": case.name, "expected_960": case.expected_960,
                     "full_960": full.passed, "expected_8": case.expected_8,
                     "perimeter_8": per.passed, "full_spread": full.spread,
                     "perimeter_spread": per.spread, "full_hits": full.hit_count,
                     "foreign_hits": full.foreign_hits})
        if full.passed != per.passed:
            dis.append({"case": case.name, "full_960": full.passed, "perimeter_8": per.passed,
                        "kind": "perimeter_false_positive" if per.passed else "perimeter_false_negative"})
    return ModelComparison(rows, dis)
