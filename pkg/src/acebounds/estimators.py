"""Plug-in ACE estimators: theta_hat = mean of m(X_i, eta) over the sample.

One estimator per influence function plus the naive difference in means.
`se_hat` is the sample standard deviation of the m values divided by sqrt(n)
(for NAIVE, the usual two-sample standard error).  Cross-fitted nuisances are
supported by evaluating each fold's rows with the nuisances fitted off-fold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .fitting import Dataset, FoldedNuisances
from .influence import MODEL_TAGS, evaluate_m

__all__ = ["ESTIMATOR_TAGS", "EstimationResult", "estimate", "estimate_all", "naive_difference"]

ESTIMATOR_TAGS = ("NAIVE",) + MODEL_TAGS


@dataclass(frozen=True)
class EstimationResult:
    tag: str
    theta_hat: float
    se_hat: float
    n: int
    clipped: int
    manifest: dict

    def __post_init__(self):
        if self.se_hat < 0:
            raise DomainError("se_hat must be non-negative")

    def to_dict(self):
        return {
            "tag": self.tag,
            "theta_hat": self.theta_hat,
            "se_hat": self.se_hat,
            "n": self.n,
            "clipped": self.clipped,
            "manifest": self.manifest,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    CSV_HEADER = ("tag", "theta_hat", "se_hat", "n", "clipped")

    def csv_row(self):
        return (self.tag, self.theta_hat, self.se_hat, self.n, self.clipped)


def naive_difference(data: Dataset):
    """Difference of treated and control outcome means, with its standard error."""
    sel_star = data.a == data.pair.a_star
    sel_ref = data.a == data.pair.a_ref
    y_star, y_ref = data.y[sel_star], data.y[sel_ref]
    diff = float(y_star.mean() - y_ref.mean())
    se = float(
        np.sqrt(
            y_star.var(ddof=1) / y_star.size + y_ref.var(ddof=1) / y_ref.size
        )
    )
    return diff, se


def _clip_total(eta) -> int:
    if isinstance(eta, FoldedNuisances):
        return sum(_clip_total(fold_eta) for _, fold_eta in eta.folds)
    return int(eta.manifest.get("clip_events", {}).get("total", 0))


def _m_values(data: Dataset, eta, tag: str) -> np.ndarray:
    if isinstance(eta, FoldedNuisances):
        out = np.empty(data.n)
        for idx, fold_eta in eta.folds:
            out[idx] = evaluate_m(tag, data.c[idx], data.a[idx], data.z[idx], data.y[idx], fold_eta, data.pair)
        return out
    return evaluate_m(tag, data.c, data.a, data.z, data.y, eta, data.pair)


def estimate(data: Dataset, eta, tag: str, td_reduced: bool = False) -> EstimationResult:
    """One plug-in estimate.

    `td_reduced` switches the TD tag to the reduced two-door estimating
    function (outcome model E(Y|Z,C), mediator law p(Z|A)).
    """
    if tag == "NAIVE":
        theta_hat, se = naive_difference(data)
        return EstimationResult("NAIVE", theta_hat, se, data.n, 0, {"estimator": "difference-in-means"})
    if tag not in MODEL_TAGS:
        raise DomainError(f"unknown estimator tag {tag!r}; expected one of {ESTIMATOR_TAGS}")
    eval_tag = "TD_REDUCED" if (tag == "TD" and td_reduced) else tag
    before = _clip_total(eta)
    m = _m_values(data, eta, eval_tag)
    clipped = _clip_total(eta) - before
    summary = {
        "estimator": eval_tag,
        "slots": eta.manifest.get("slots", {}),
    }
    theta_hat = float(m.mean())
    se_hat = float(m.std(ddof=1) / np.sqrt(data.n))
    return EstimationResult(tag, theta_hat, se_hat, data.n, clipped, summary)


def estimate_all(data: Dataset, eta, tags=ESTIMATOR_TAGS, td_reduced: bool = False):
    """Batch wrapper sharing one fitted NuisanceSet across tags."""
    return [estimate(data, eta, tag, td_reduced=td_reduced) for tag in tags]
