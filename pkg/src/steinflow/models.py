"""Priors, observation operators, and exact log-posterior gradient pieces.

The log-posterior gradient splits as

    grad log p(x | y) = grad log p(x) + grad_H(x)^T R^{-1} (y - H(x)),

where grad_H may come from the analytic operator derivative or from one of
the sample-based estimators in :mod:`steinflow.obsgrad`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

OPERATORS = ("linear", "quadratic", "absolute")
BACKENDS = ("exact", "rkhs", "rkhs_normalized", "ensemble_space")


def _vector(v, name: str) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {v.shape}")
    return v


def _spd_matrix(m, name: str) -> np.ndarray:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {m.shape}")
    if not np.allclose(m, m.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise ValueError(f"{name} must be positive definite") from None
    return m


@dataclass(frozen=True)
class GaussianPrior:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _vector(self.mean, "mean"))
        object.__setattr__(self, "covariance", _spd_matrix(self.covariance, "covariance"))
        if self.covariance.shape[0] != self.mean.shape[0]:
            raise ValueError("mean and covariance dimensions disagree")


@dataclass(frozen=True)
class UniformPrior:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", _vector(self.lower, "lower"))
        object.__setattr__(self, "upper", _vector(self.upper, "upper"))
        if self.lower.shape != self.upper.shape:
            raise ValueError("lower and upper dimensions disagree")
        if not np.all(self.lower < self.upper):
            raise ValueError("lower must be strictly below upper componentwise")


@dataclass(frozen=True)
class KdePrior:
    """Gaussian-mixture density centered on a sample, with a shared bandwidth.

    Used as an alternative forecast-prior representation in sequential runs.
    """

    centers: np.ndarray
    bandwidth: float

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        object.__setattr__(self, "centers", c)
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")


PriorSpec = Union[GaussianPrior, UniformPrior, KdePrior]


@dataclass(frozen=True)
class ObservationModel:
    """Observation operator, Gaussian error covariance R, and gradient backend."""

    operator: str
    R: np.ndarray
    backend: str = "exact"
    A: np.ndarray | None = None

    def __post_init__(self):
        if self.operator not in OPERATORS:
            raise ValueError(
                f"operator {self.operator!r} is not one of {'|'.join(OPERATORS)}"
            )
        if self.backend not in BACKENDS:
            raise ValueError(
                f"backend {self.backend!r} is not one of {'|'.join(BACKENDS)}"
            )
        object.__setattr__(self, "R", _spd_matrix(self.R, "R"))
        if self.operator == "linear":
            if self.A is None:
                raise ValueError("linear operator requires a matrix A")
            a = np.atleast_2d(np.asarray(self.A, dtype=float))
            object.__setattr__(self, "A", a)
            if a.shape[0] != self.R.shape[0]:
                raise ValueError("A output dimension must match R")
        elif self.A is not None:
            raise ValueError(f"operator {self.operator!r} takes no matrix A")

    @property
    def n_y(self) -> int:
        return self.R.shape[0]

    def with_backend(self, backend: str) -> "ObservationModel":
        return ObservationModel(operator=self.operator, R=self.R, backend=backend, A=self.A)

    def solve_R(self, v: np.ndarray) -> np.ndarray:
        """R^{-1} v for a vector or a batch with observations on the last axis."""
        v = np.asarray(v, dtype=float)
        return np.linalg.solve(self.R, v[..., None])[..., 0]


def apply_operator(model: ObservationModel, x) -> np.ndarray:
    """Evaluate H(x). Accepts a single state vector or an (n, n_x) batch."""
    x = np.asarray(x, dtype=float)
    if model.operator == "linear":
        if x.shape[-1] != model.A.shape[1]:
            raise ValueError(
                f"state dimension {x.shape[-1]} does not match operator input {model.A.shape[1]}"
            )
        return x @ model.A.T
    if x.shape[-1] != model.n_y:
        raise ValueError(
            f"componentwise operator maps dimension {x.shape[-1]} but R is {model.n_y}x{model.n_y}"
        )
    if model.operator == "quadratic":
        return x**2
    return np.abs(x)


def exact_grad_operator(model: ObservationModel, x) -> np.ndarray:
    """Analytic operator Jacobian grad H(x), shape (n_y, n_x).

    Quadratic: diag(2x).  Absolute: diag(sign(x)) with sign(0) = 0 (minimal-norm
    subgradient).  Linear: the matrix A.
    """
    x = _vector(x, "x")
    if model.operator == "linear":
        return model.A.copy()
    d = 2.0 * x if model.operator == "quadratic" else np.sign(x)
    return np.diag(d)


def exact_grad_operator_batch(model: ObservationModel, states: np.ndarray) -> np.ndarray:
    """Stack of analytic Jacobians for an (n_p, n_x) ensemble."""
    states = np.asarray(states, dtype=float)
    n_p, n_x = states.shape
    if model.operator == "linear":
        return np.broadcast_to(model.A, (n_p,) + model.A.shape)
    d = 2.0 * states if model.operator == "quadratic" else np.sign(states)
    out = np.zeros((n_p, n_x, n_x))
    idx = np.arange(n_x)
    out[:, idx, idx] = d
    return out


def grad_log_prior(prior: PriorSpec, x) -> np.ndarray:
    """Gradient of the log prior density at x (single vector or batch).

    Gaussian: -Sigma^{-1} (x - mu).  Uniform: zero in the interior; points
    outside the support violate the contract and raise.  KdePrior: mixture
    score with kernel-responsibility weights.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if isinstance(prior, GaussianPrior):
        out = -np.linalg.solve(prior.covariance, (pts - prior.mean).T).T
    elif isinstance(prior, UniformPrior):
        if np.any(pts < prior.lower) or np.any(pts > prior.upper):
            raise ValueError("state outside the uniform prior support")
        out = np.zeros_like(pts)
    elif isinstance(prior, KdePrior):
        h2 = prior.bandwidth**2
        diff = pts[:, None, :] - prior.centers[None, :, :]
        logk = -np.sum(diff**2, axis=-1) / (2.0 * h2)
        logk -= logk.max(axis=1, keepdims=True)
        w = np.exp(logk)
        w /= w.sum(axis=1, keepdims=True)
        out = -np.einsum("pj,pjx->px", w, diff) / h2
    else:
        raise TypeError(f"unknown prior: {prior!r}")
    return out[0] if single else out


def grad_log_likelihood(model: ObservationModel, grad_H: np.ndarray, x, y) -> np.ndarray:
    """grad_H^T R^{-1} (y - H(x)) for any supplied grad_H, shape (n_x,)."""
    grad_H = np.atleast_2d(np.asarray(grad_H, dtype=float))
    x = _vector(x, "x")
    y = _vector(y, "y")
    if grad_H.shape[0] != model.n_y:
        raise ValueError("grad_H row count must match the observation dimension")
    innov = y - apply_operator(model, x)
    return grad_H.T @ model.solve_R(innov)


def sample_prior(prior: PriorSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw an (n, n_x) iid sample from the prior."""
    if isinstance(prior, GaussianPrior):
        chol = np.linalg.cholesky(prior.covariance)
        z = rng.standard_normal((n, prior.mean.shape[0]))
        return prior.mean + z @ chol.T
    if isinstance(prior, UniformPrior):
        return rng.uniform(prior.lower, prior.upper, size=(n, prior.lower.shape[0]))
    if isinstance(prior, KdePrior):
        idx = rng.integers(0, prior.centers.shape[0], size=n)
        return prior.centers[idx] + prior.bandwidth * rng.standard_normal(
            (n, prior.centers.shape[1])
        )
    raise TypeError(f"unknown prior: {prior!r}")
