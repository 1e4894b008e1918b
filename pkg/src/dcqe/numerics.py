"""Dense linear-algebra and statistics kernels used by the rest of the package.

Everything in this module is deterministic: sign conventions are fixed, no
randomized solvers are used, and identical inputs give bit-identical outputs.
All matrices are plain 2-d float64 ``numpy`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLabelsError, DimensionError, InvalidDataError

# Type alias used throughout the package for 2-d float arrays.
Matrix = np.ndarray

# Relative cutoff below which singular values are treated as zero.
SINGULAR_VALUE_CUTOFF = 1e-12

# Column standard deviations below this are replaced by 1.0 when standardizing.
DEGENERATE_STDDEV = 1e-12

# Ridge penalty on logistic coefficients (never on the intercept).
LOGISTIC_RIDGE = 1e-6
LOGISTIC_TOL = 1e-8
LOGISTIC_MAX_ITER = 100


def ensure_matrix(data, name: str = "data") -> np.ndarray:
    """Validate and return ``data`` as a finite, non-empty 2-d float array."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2:
        raise InvalidDataError(f"{name} must be 2-dimensional, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidDataError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidDataError(f"{name} contains non-finite entries")
    return arr


def ensure_vector(data, name: str = "data", length: int | None = None) -> np.ndarray:
    """Validate and return ``data`` as a finite 1-d float array."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 1:
        raise InvalidDataError(f"{name} must be 1-dimensional, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidDataError(f"{name} contains non-finite entries")
    if length is not None and arr.shape[0] != length:
        raise DimensionError(f"{name} must have length {length}, got {arr.shape[0]}")
    return arr


def ensure_binary_labels(labels, name: str = "labels", length: int | None = None) -> np.ndarray:
    """Validate 0/1 labels containing at least one example of each class."""
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise InvalidDataError(f"{name} must be 1-dimensional")
    if length is not None and arr.shape[0] != length:
        raise DimensionError(f"{name} must have length {length}, got {arr.shape[0]}")
    values = arr.astype(float)
    if not np.all(np.isin(values, (0.0, 1.0))):
        raise InvalidDataError(f"{name} must contain only 0 and 1")
    out = values.astype(np.int64)
    if out.min() == out.max():
        raise DegenerateLabelsError(f"{name} contain a single class")
    return out


def sigmoid(eta) -> np.ndarray:
    """Numerically stable logistic function 1 / (1 + exp(-eta))."""
    eta = np.asarray(eta, dtype=float)
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    ex = np.exp(eta[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _orient_columns(primary: np.ndarray, partner: np.ndarray | None = None) -> None:
    """Flip column signs in place so each column's largest-magnitude entry is >= 0.

    ``partner`` columns are flipped together with ``primary`` so that factor
    products are preserved. Ties pick the first index, so the convention is
    deterministic.
    """
    if primary.shape[1] == 0:
        return
    lead = np.argmax(np.abs(primary), axis=0)
    flip = primary[lead, np.arange(primary.shape[1])] < 0.0
    primary[:, flip] *= -1.0
    if partner is not None:
        partner[:, flip] *= -1.0


@dataclass(frozen=True, eq=False)
class StandardizationParams:
    """Column means and standard deviations fitted on a matrix."""

    means: np.ndarray
    stddevs: np.ndarray

    def __post_init__(self):
        if self.means.shape != self.stddevs.shape or self.means.ndim != 1:
            raise DimensionError("means and stddevs must be 1-d and equally long")
        if np.any(self.stddevs <= 0):
            raise InvalidDataError("stddevs must be strictly positive")


def standardize_fit(data: Matrix) -> StandardizationParams:
    """Fit column means and sample standard deviations.

    Columns whose standard deviation falls below ``DEGENERATE_STDDEV`` get a
    divisor of 1.0 so downstream transforms never divide by zero.
    """
    arr = ensure_matrix(data)
    means = arr.mean(axis=0)
    if arr.shape[0] >= 2:
        stddevs = arr.std(axis=0, ddof=1)
    else:
        stddevs = np.zeros(arr.shape[1])
    stddevs = np.where(stddevs < DEGENERATE_STDDEV, 1.0, stddevs)
    return StandardizationParams(means, stddevs)


def standardize_apply(params: StandardizationParams, data: Matrix) -> np.ndarray:
    """Center and scale ``data`` with previously fitted parameters."""
    arr = ensure_matrix(data)
    if arr.shape[1] != params.means.shape[0]:
        raise DimensionError(
            f"data has {arr.shape[1]} columns, parameters were fitted on {params.means.shape[0]}"
        )
    return (arr - params.means) / params.stddevs


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Standardization parameters plus orthonormal principal directions."""

    params: StandardizationParams
    components: np.ndarray
    explained_variance: np.ndarray

    def __post_init__(self):
        if np.any(self.explained_variance < -1e-12):
            raise InvalidDataError("explained variances must be non-negative")
        if np.any(np.diff(self.explained_variance) > 1e-12):
            raise InvalidDataError("explained variances must be non-increasing")

    @property
    def input_dim(self) -> int:
        return self.components.shape[0]

    @property
    def output_dim(self) -> int:
        return self.components.shape[1]


def pca_fit(data: Matrix, target_dim: int) -> PcaModel:
    """Fit a PCA with ``target_dim`` components on standardized ``data``.

    Components are the top right singular vectors of the standardized matrix
    (equivalently the leading eigenvectors of its sample covariance), with the
    sign convention that each component's largest-magnitude entry is
    non-negative.
    """
    arr = ensure_matrix(data)
    n, m = arr.shape
    if n < 2:
        raise InvalidDataError("pca_fit needs at least two rows")
    if not 1 <= target_dim <= m:
        raise DimensionError(f"target_dim must be in [1, {m}], got {target_dim}")
    params = standardize_fit(arr)
    standardized = standardize_apply(params, arr)
    # Thin SVD is enough unless more components than rows are requested.
    full = target_dim > min(n, m)
    _, svals, vt = np.linalg.svd(standardized, full_matrices=full)
    components = vt[:target_dim].T.copy()
    _orient_columns(components)
    padded = np.zeros(target_dim)
    count = min(target_dim, svals.shape[0])
    padded[:count] = svals[:count] ** 2 / (n - 1)
    return PcaModel(params, components, padded)


def pca_transform(model: PcaModel, data: Matrix) -> np.ndarray:
    """Project ``data`` onto the model's principal directions."""
    arr = ensure_matrix(data)
    if arr.shape[1] != model.input_dim:
        raise DimensionError(
            f"data has {arr.shape[1]} columns, model expects {model.input_dim}"
        )
    return standardize_apply(model.params, arr) @ model.components


@dataclass(frozen=True, eq=False)
class TruncatedSvd:
    """Leading singular triplets of a matrix, zeros removed."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if np.any(self.sigma <= 0):
            raise InvalidDataError("singular values must be strictly positive")
        if np.any(np.diff(self.sigma) > 0):
            raise InvalidDataError("singular values must be non-increasing")

    @property
    def rank(self) -> int:
        return self.sigma.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


def svd_truncated(data: Matrix, rank: int) -> TruncatedSvd:
    """Best rank-``rank`` singular value decomposition of ``data``.

    Singular values at or below ``SINGULAR_VALUE_CUTOFF`` times the largest
    one are dropped, so the returned rank can be smaller than requested.
    """
    arr = ensure_matrix(data)
    n, m = arr.shape
    if not 1 <= rank <= min(n, m):
        raise DimensionError(f"rank must be in [1, {min(n, m)}], got {rank}")
    u, s, vt = np.linalg.svd(arr, full_matrices=False)
    positive = int(np.count_nonzero(s > SINGULAR_VALUE_CUTOFF * s[0])) if s[0] > 0 else 0
    keep = min(rank, positive)
    u1 = u[:, :keep].copy()
    v1 = vt[:keep].T.copy()
    _orient_columns(v1, u1)
    return TruncatedSvd(u1, s[:keep].copy(), v1)


def pseudoinverse(data: Matrix) -> np.ndarray:
    """Moore-Penrose inverse via SVD with a relative singular-value cutoff."""
    arr = ensure_matrix(data)
    u, s, vt = np.linalg.svd(arr, full_matrices=False)
    inv = np.zeros_like(s)
    if s.shape[0] and s[0] > 0:
        # Values whose reciprocal would overflow are treated as zero too,
        # keeping the result finite for subnormal inputs.
        mask = (s > SINGULAR_VALUE_CUTOFF * s[0]) & (s >= 1.0 / np.finfo(float).max)
        inv[mask] = 1.0 / s[mask]
    return (vt.T * inv) @ u.T


@dataclass(frozen=True, eq=False)
class LogisticModel:
    """Intercept and coefficients of a binary logistic regression."""

    intercept: float
    coefficients: np.ndarray
    converged: bool = True
    n_iter: int = 0
    loglik_trace: np.ndarray | None = None

    def __post_init__(self):
        if not np.isfinite(self.intercept) or not np.all(np.isfinite(self.coefficients)):
            raise InvalidDataError("logistic parameters must be finite")


def _penalized_loglik(design: np.ndarray, labels: np.ndarray, theta: np.ndarray,
                      penalty: np.ndarray) -> float:
    eta = design @ theta
    ll = float(np.sum(labels * eta - np.logaddexp(0.0, eta)))
    return ll - 0.5 * float(penalty @ (theta * theta))


def logistic_fit(features: Matrix, labels) -> LogisticModel:
    """Fit a ridge-penalized logistic regression by reweighted least squares.

    The Bernoulli log-likelihood with an L2 penalty of ``LOGISTIC_RIDGE`` on
    the coefficients (not the intercept) is maximized by Newton steps with
    step halving, which keeps the recorded likelihood trace non-decreasing.
    Convergence is declared when the largest parameter change drops below
    ``LOGISTIC_TOL``; after ``LOGISTIC_MAX_ITER`` iterations the best iterate
    is returned with ``converged`` set to False.
    """
    x = ensure_matrix(features, "features")
    y = ensure_binary_labels(labels, "labels", length=x.shape[0]).astype(float)
    n, m = x.shape
    design = np.hstack([np.ones((n, 1)), x])
    penalty = np.full(m + 1, LOGISTIC_RIDGE)
    penalty[0] = 0.0

    theta = np.zeros(m + 1)
    trace = [_penalized_loglik(design, y, theta, penalty)]
    converged = False
    iterations = 0
    for iterations in range(1, LOGISTIC_MAX_ITER + 1):
        prob = sigmoid(design @ theta)
        weight = prob * (1.0 - prob)
        grad = design.T @ (y - prob) - penalty * theta
        hess = (design * weight[:, None]).T @ design
        hess[np.diag_indices_from(hess)] += penalty
        try:
            delta = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(hess, grad, rcond=None)[0]

        step = 1.0
        candidate = theta + delta
        value = _penalized_loglik(design, y, candidate, penalty)
        while value < trace[-1] - 1e-12 and step > 1e-12:
            step *= 0.5
            candidate = theta + step * delta
            value = _penalized_loglik(design, y, candidate, penalty)

        change = float(np.max(np.abs(candidate - theta)))
        theta = candidate
        trace.append(value)
        if change < LOGISTIC_TOL:
            converged = True
            break

    return LogisticModel(
        intercept=float(theta[0]),
        coefficients=theta[1:].copy(),
        converged=converged,
        n_iter=iterations,
        loglik_trace=np.asarray(trace),
    )


def logistic_predict(model: LogisticModel, features: Matrix) -> np.ndarray:
    """Predicted probabilities, kept strictly inside (0, 1)."""
    x = ensure_matrix(features, "features")
    if x.shape[1] != model.coefficients.shape[0]:
        raise DimensionError(
            f"features have {x.shape[1]} columns, model expects {model.coefficients.shape[0]}"
        )
    prob = sigmoid(model.intercept + x @ model.coefficients)
    info = np.finfo(float)
    return np.clip(prob, info.tiny, 1.0 - info.epsneg)
