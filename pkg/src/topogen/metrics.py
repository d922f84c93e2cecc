"""Prediction scoring: MAE, MSE, volume-fraction and compliance errors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fem
from .dataset import SampleRecord
from .domain import DesignDomain, ProblemSpec
from .errors import DegenerateGroundTruth, IdMismatch, ShapeMismatch


def _pair(y, y_hat):
    a = np.asarray(y, dtype=np.float64)
    b = np.asarray(y_hat, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes {a.shape} vs {b.shape}")
    return a, b


def mae(y, y_hat) -> float:
    a, b = _pair(y, y_hat)
    return float(np.abs(a - b).mean())


def mse(y, y_hat) -> float:
    a, b = _pair(y, y_hat)
    return float(((a - b) ** 2).mean())


def volume_fraction(y) -> float:
    return float(np.asarray(y, dtype=np.float64).mean())


def re_vf(y, y_hat) -> float:
    """Signed relative volume error: sum(y_hat - y) / sum(y)."""
    a, b = _pair(y, y_hat)
    denom = a.sum()
    if denom <= 0.0:
        raise DegenerateGroundTruth("ground truth has zero volume")
    return float((b - a).sum() / denom)


def re_c(y, y_hat, spec: ProblemSpec, domain: DesignDomain, penal: float,
         binarize_prediction: bool = False) -> float:
    """Relative compliance error (C(y_hat) - C(y)) / C(y).

    Both densities are re-analyzed under the sample's own loads and supports
    at the given penalty. ``binarize_prediction`` thresholds the prediction
    at 0.5 before analysis; the default scores the grayscale field directly.
    The Emin stiffness floor keeps disconnected predictions finite.
    """
    a, b = _pair(y, y_hat)
    if binarize_prediction:
        b = (b >= 0.5).astype(np.float64)
    u_true = fem.assemble_and_solve(a, spec, domain, penal)
    c_true = fem.compliance(a, u_true, domain, penal)
    if c_true <= 0.0:
        raise DegenerateGroundTruth(f"ground-truth compliance {c_true} is not positive")
    u_pred = fem.assemble_and_solve(b, spec, domain, penal)
    c_pred = fem.compliance(b, u_pred, domain, penal)
    return float((c_pred - c_true) / c_true)


@dataclass
class MetricsReport:
    """Per-sample metric rows plus their plain means and histogram summaries."""

    split: str | None
    sample_count: int
    aggregates: dict[str, float]
    per_sample: list[dict]
    histograms: dict[str, dict] = field(default_factory=dict)

    def sorted_series(self, metric: str) -> list[float]:
        vals = [row[metric] for row in self.per_sample if row.get(metric) is not None]
        return sorted(vals)

    def summary_text(self) -> str:
        lines = [f"samples: {self.sample_count}"
                 + (f"  split: {self.split}" if self.split else "")]
        for key in ("mae", "mse", "re_vf", "re_c"):
            if key in self.aggregates:
                lines.append(f"{key:>6}: {self.aggregates[key]:.6e}")
        return "\n".join(lines)

    def export_csv(self, path) -> None:
        keys = ["id", "mae", "mse", "re_vf", "re_c"]
        with open(path, "w") as fh:
            fh.write(",".join(keys) + "\n")
            for row in self.per_sample:
                fh.write(",".join(
                    "" if row.get(k) is None else repr(row[k]) for k in keys
                ) + "\n")

    def export_json(self, path) -> None:
        import json
        with open(path, "w") as fh:
            json.dump({
                "split": self.split,
                "sample_count": self.sample_count,
                "aggregates": self.aggregates,
                "per_sample": self.per_sample,
                "histograms": self.histograms,
                "sorted_re_vf": self.sorted_series("re_vf"),
                "sorted_re_c": self.sorted_series("re_c"),
            }, fh, sort_keys=True, indent=1)
            fh.write("\n")


def _histogram(values: list[float], bins: int) -> dict:
    counts, edges = np.histogram(np.asarray(values, dtype=np.float64), bins=bins)
    return {"counts": counts.tolist(), "bin_edges": edges.tolist()}


def evaluate_batch(predictions: dict[int, SampleRecord],
                   truths: dict[int, SampleRecord],
                   domain: DesignDomain, penal: float,
                   with_compliance: bool = True,
                   binarize_prediction: bool = False,
                   split: str | None = None,
                   histogram_bins: int = 20) -> MetricsReport:
    """Score a prediction set against ground truth, id by id.

    Prediction ids must all exist in the ground-truth set (a subset is fine,
    so split-restricted exports score directly). Aggregates are means of the
    per-sample values; row order is ascending id, and the aggregates are
    order-invariant by construction.
    """
    missing = sorted(set(predictions) - set(truths))
    if missing:
        raise IdMismatch(f"prediction ids absent from ground truth: {missing[:5]}")
    if not predictions:
        raise IdMismatch("empty prediction set")

    rows: list[dict] = []
    for sid in sorted(predictions):
        pred = predictions[sid].target
        truth_rec = truths[sid]
        truth = truth_rec.target
        row = {
            "id": sid,
            "mae": mae(truth, pred),
            "mse": mse(truth, pred),
            "re_vf": re_vf(truth, pred),
        }
        # densities live in [0,1], so per-element e^2 <= |e| must hold
        assert row["mse"] <= row["mae"] + 1e-12
        if with_compliance:
            row["re_c"] = re_c(truth, pred, truth_rec.spec(), domain, penal,
                               binarize_prediction=binarize_prediction)
        else:
            row["re_c"] = None
        rows.append(row)

    aggregates = {}
    for key in ("mae", "mse", "re_vf", "re_c"):
        vals = [r[key] for r in rows if r[key] is not None]
        if vals:
            aggregates[key] = float(np.mean(vals))
    histograms = {}
    for key in ("re_vf", "re_c"):
        vals = [r[key] for r in rows if r[key] is not None]
        if vals:
            histograms[key] = _histogram(vals, histogram_bins)
    return MetricsReport(split=split, sample_count=len(rows),
                         aggregates=aggregates, per_sample=rows,
                         histograms=histograms)
