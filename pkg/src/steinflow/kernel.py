"""Gaussian RBF kernel machinery: evaluation, gradients, Gram matrices, bandwidth selection.

The kernel is the isotropic Gaussian

    K(a, b) = exp(-||a - b||^2 / (2 gamma^2)),

shared by the particle flow (attraction/repulsion weights) and the
kernel-embedded observation-gradient estimators.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class Fixed:
    """Bandwidth policy: use a constant gamma."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"Fixed bandwidth gamma must be > 0, got {self.gamma}")


@dataclass(frozen=True)
class TraceFraction:
    """Bandwidth policy: gamma^2 = fraction * trace(sample covariance) / N_x.

    With 0 < fraction < 1 the squared bandwidth stays below the trace of the
    sample covariance, which keeps the kernel narrower than the ensemble spread.
    """

    fraction: float

    def __post_init__(self):
        if not 0.0 < self.fraction < 1.0:
            raise ValueError(
                f"TraceFraction fraction must be in (0, 1), got {self.fraction}"
            )


BandwidthPolicy = Union[Fixed, TraceFraction]


@dataclass(frozen=True)
class KernelConfig:
    """RBF bandwidth plus the policy used to (re)select it.

    ``gamma`` is the bandwidth actually used by kernel evaluations.  When
    ``bandwidth_policy`` is a :class:`TraceFraction`, ``resolved`` recomputes
    gamma from an ensemble; for ``Fixed`` (or ``None``) gamma never changes.
    """

    gamma: float = 1.0
    bandwidth_policy: BandwidthPolicy | None = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"kernel gamma must be > 0, got {self.gamma}")

    @classmethod
    def fixed(cls, gamma: float) -> "KernelConfig":
        return cls(gamma=gamma, bandwidth_policy=Fixed(gamma))

    @classmethod
    def trace_fraction(cls, fraction: float) -> "KernelConfig":
        return cls(gamma=1.0, bandwidth_policy=TraceFraction(fraction))

    def resolved(self, states: np.ndarray) -> "KernelConfig":
        """Return a config whose gamma realizes the policy on ``states``."""
        if self.bandwidth_policy is None:
            return self
        gamma = select_bandwidth(states, self.bandwidth_policy)
        if gamma == self.gamma:
            return self
        return KernelConfig(gamma=gamma, bandwidth_policy=self.bandwidth_policy)


def _as_state(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    if x.ndim != 1:
        raise ValueError(f"expected a state vector, got shape {x.shape}")
    return x


def kernel_eval(x, x_prime, cfg: KernelConfig) -> float:
    """K(x, x') = exp(-||x - x'||^2 / (2 gamma^2)), in (0, 1]."""
    x = _as_state(x)
    x_prime = _as_state(x_prime)
    if x.shape != x_prime.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x_prime.shape}")
    d = x - x_prime
    return float(np.exp(-np.dot(d, d) / (2.0 * cfg.gamma**2)))


def kernel_grad(x, x_prime, cfg: KernelConfig) -> np.ndarray:
    """Gradient of K with respect to the first argument x.

    Equals -(x - x') / gamma^2 * K(x, x'); zero at coincident points.
    """
    x = _as_state(x)
    x_prime = _as_state(x_prime)
    if x.shape != x_prime.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x_prime.shape}")
    d = x - x_prime
    k = np.exp(-np.dot(d, d) / (2.0 * cfg.gamma**2))
    return -d / cfg.gamma**2 * k


def gram(states: np.ndarray, cfg: KernelConfig) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise kernel matrix and kernel-gradient tensor for an ensemble.

    Returns ``(K, G)`` with ``K[l, j] = kernel_eval(x_l, x_j)`` (symmetric PSD,
    unit diagonal) and ``G[l, j, :] = kernel_grad(x_l, x_j)``, the gradient in
    the first (row) particle.  G is antisymmetric under swapping l and j.
    """
    states = np.asarray(states, dtype=float)
    if states.ndim != 2 or states.shape[0] < 1:
        raise ValueError(f"expected an (n_p, n_x) ensemble, got shape {states.shape}")
    diff = states[:, None, :] - states[None, :, :]
    sq = np.sum(diff**2, axis=-1)
    k = np.exp(-sq / (2.0 * cfg.gamma**2))
    grads = -diff / cfg.gamma**2 * k[..., None]
    return k, grads


def select_bandwidth(states: np.ndarray, policy: BandwidthPolicy) -> float:
    """Realize a bandwidth policy on an ensemble."""
    if isinstance(policy, Fixed):
        return policy.gamma
    if not isinstance(policy, TraceFraction):
        raise TypeError(f"unknown bandwidth policy: {policy!r}")
    states = np.asarray(states, dtype=float)
    if states.ndim != 2 or states.shape[0] < 2:
        raise ValueError("TraceFraction bandwidth needs at least 2 particles")
    n_x = states.shape[1]
    centered = states - states.mean(axis=0)
    trace = float(np.sum(centered**2)) / (states.shape[0] - 1)
    if trace <= 0.0:
        raise ValueError("degenerate ensemble: zero sample covariance trace")
    return float(np.sqrt(policy.fraction * trace / n_x))
