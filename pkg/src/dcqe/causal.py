"""Propensity-score estimation and treatment-effect estimators.

Propensity scores come from a ridge-stabilized logistic regression on either
raw covariates or collaborative representations. Effects are estimated by
one-to-one nearest-neighbor matching with replacement (PSM) or by
self-normalized inverse-probability weighting (IPW).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLabelsError, DimensionError, InvalidDataError
from .numerics import ensure_matrix, ensure_vector, logistic_fit, logistic_predict

PROPENSITY_CLIP = (1e-6, 1.0 - 1e-6)
SCORE_SOURCES = ("true", "centralized", "individual", "dcqe")
ESTIMANDS = ("ATE", "ATT")

# Row-block size for the vectorised nearest-neighbor scan, bounding memory.
_MATCH_BLOCK = 512


@dataclass(frozen=True, eq=False)
class PropensityScores:
    """Estimated treatment probabilities, clipped strictly inside (0, 1)."""

    values: np.ndarray
    source: str = "dcqe"

    def __post_init__(self):
        values = ensure_vector(self.values, "propensity scores")
        if np.any(values <= 0.0) or np.any(values >= 1.0):
            raise InvalidDataError("propensity scores must lie strictly inside (0, 1)")
        if self.source not in SCORE_SOURCES:
            raise InvalidDataError(f"unknown propensity source {self.source!r}")
        object.__setattr__(self, "values", values)


def estimate_propensity(features, treatments, source: str = "dcqe") -> PropensityScores:
    """Fit a logistic model with constant term and return clipped probabilities."""
    x = ensure_matrix(features, "features")
    model = logistic_fit(x, treatments)
    probs = logistic_predict(model, x)
    return PropensityScores(np.clip(probs, *PROPENSITY_CLIP), source)


@dataclass(frozen=True, eq=False)
class MatchingResult:
    """Nearest-neighbor match (with replacement) for every subject.

    ``pairs[i]`` is the opposite-group subject closest to ``i`` in propensity
    score, ties resolved by the smallest index. Matches may repeat.
    """

    pairs: np.ndarray
    treated: np.ndarray
    control: np.ndarray

    @property
    def subject_count(self) -> int:
        return self.pairs.shape[0]


def _score_values(scores) -> np.ndarray:
    if isinstance(scores, PropensityScores):
        return scores.values
    return ensure_vector(scores, "scores")


def _treatment_groups(treatments, length: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    z = np.asarray(treatments)
    if z.ndim != 1 or z.shape[0] != length:
        raise DimensionError("treatments must be a vector matching the score length")
    z = z.astype(np.int64)
    treated = np.flatnonzero(z == 1)
    control = np.flatnonzero(z == 0)
    if treated.size == 0 or control.size == 0:
        raise DegenerateLabelsError("matching needs at least one subject in each group")
    return z, treated, control


def _nearest(queries: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Index of the closest candidate for every query; first index wins ties."""
    out = np.empty(queries.shape[0], dtype=np.intp)
    for start in range(0, queries.shape[0], _MATCH_BLOCK):
        stop = start + _MATCH_BLOCK
        gaps = np.abs(queries[start:stop, None] - candidates[None, :])
        out[start:stop] = np.argmin(gaps, axis=1)
    return out


def match_pairs(scores, treatments) -> MatchingResult:
    """Match every subject to its nearest opposite-group subject, with replacement."""
    values = _score_values(scores)
    _, treated, control = _treatment_groups(treatments, values.shape[0])
    pairs = np.empty(values.shape[0], dtype=np.intp)
    pairs[treated] = control[_nearest(values[treated], values[control])]
    pairs[control] = treated[_nearest(values[control], values[treated])]
    return MatchingResult(pairs=pairs, treated=treated, control=control)


@dataclass(frozen=True)
class EffectEstimate:
    """A point estimate of a treatment effect in outcome units."""

    estimand: str
    method: str
    value: float


def estimate_psm(matching: MatchingResult, outcomes, estimand: str) -> EffectEstimate:
    """Average matched outcome differences.

    ATT averages ``y_i - y_pair(i)`` over treated subjects. ATE additionally
    averages ``y_pair(i) - y_i`` over controls and divides by the full subject
    count, so multiply-matched subjects count once per occurrence.
    """
    if estimand not in ESTIMANDS:
        raise InvalidDataError(f"unknown estimand {estimand!r}")
    y = ensure_vector(outcomes, "outcomes", length=matching.subject_count)
    t, c = matching.treated, matching.control
    treated_diffs = y[t] - y[matching.pairs[t]]
    if estimand == "ATT":
        value = float(np.mean(treated_diffs))
    else:
        control_diffs = y[matching.pairs[c]] - y[c]
        value = float((treated_diffs.sum() + control_diffs.sum()) / matching.subject_count)
    return EffectEstimate(estimand=estimand, method="PSM", value=value)


def ipw_weights(scores, treatments, estimand: str) -> np.ndarray:
    """Inverse-probability weights for the given estimand.

    ATE weights are 1/e for treated and 1/(1-e) for controls; ATT weights are
    1 for treated and e/(1-e) for controls.
    """
    if estimand not in ESTIMANDS:
        raise InvalidDataError(f"unknown estimand {estimand!r}")
    e = _score_values(scores)
    z, _, _ = _treatment_groups(treatments, e.shape[0])
    if estimand == "ATE":
        return np.where(z == 1, 1.0 / e, 1.0 / (1.0 - e))
    return np.where(z == 1, 1.0, e / (1.0 - e))


def estimate_ipw(scores, treatments, outcomes, estimand: str) -> EffectEstimate:
    """Self-normalized inverse-probability-weighted difference of outcome means."""
    if estimand not in ESTIMANDS:
        raise InvalidDataError(f"unknown estimand {estimand!r}")
    e = _score_values(scores)
    z, _, _ = _treatment_groups(treatments, e.shape[0])
    y = ensure_vector(outcomes, "outcomes", length=e.shape[0])
    zf = z.astype(float)
    if estimand == "ATE":
        wt = zf / e
        wc = (1.0 - zf) / (1.0 - e)
    else:
        wt = zf
        wc = (1.0 - zf) * e / (1.0 - e)
    value = float((wt @ y) / wt.sum() - (wc @ y) / wc.sum())
    return EffectEstimate(estimand=estimand, method="IPW", value=value)


def matched_sample(matching: MatchingResult, estimand: str) -> tuple[np.ndarray, np.ndarray]:
    """Subject indices (with multiplicity) forming the matched sample.

    Returns the treated-side and control-side index arrays: for ATT the
    treated subjects and their matched controls; for ATE every subject plus
    its match, each occurrence kept.
    """
    if estimand not in ESTIMANDS:
        raise InvalidDataError(f"unknown estimand {estimand!r}")
    t, c = matching.treated, matching.control
    if estimand == "ATT":
        return t.copy(), matching.pairs[t].copy()
    treated_rows = np.concatenate([t, matching.pairs[c]])
    control_rows = np.concatenate([matching.pairs[t], c])
    return treated_rows, control_rows
