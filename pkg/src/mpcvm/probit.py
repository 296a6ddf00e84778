"""Multinomial-probit expectations evaluated by Gauss-Hermite quadrature.

Every expectation here is over a single standard-normal variable ``eps``:

* class probability   ``p_i = E[prod_{j != i} Psi(eps + y_i - y_j)]``
* loser posterior     ``zbar_j = y_j - E[N(eps | y_j - y_i, 1) prod_{k != i, j} Psi(.)] / p_i``
* winner posterior    ``zbar_i = y_i + sum_{j != i} (y_j - zbar_j)``

Products of ``Psi`` are accumulated as sums of ``log Psi`` and quadrature sums
are taken with ``logsumexp``, so nothing underflows for many classes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import log_ndtr, logsumexp

DEFAULT_NODES = 64
LOG_DENOMINATOR_FLOOR = np.log(1e-300)
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
# caps the (rows x C x C x K) temporaries of the batched evaluators
_CHUNK_ELEMENTS = 2_000_000


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights with ``E[f(eps)] ~= sum(weights * f(nodes))`` for ``eps ~ N(0, 1)``."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def log_weights(self) -> np.ndarray:
        return np.log(self.weights)

    def expect(self, f) -> float:
        return float(np.sum(self.weights * f(self.nodes)))


@lru_cache(maxsize=16)
def gauss_hermite(k: int = DEFAULT_NODES) -> QuadratureRule:
    if not 2 <= k <= 256:
        raise ValueError(f"node count must lie in 2..256, got {k}")
    x, w = np.polynomial.hermite_e.hermegauss(k)
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    w = w / w.sum()
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(x, w)


def log_norm_cdf(x):
    """``log Psi(x)``; stays finite and accurate far into the left tail."""
    return log_ndtr(x)


def _log_norm_pdf(x):
    return -0.5 * x * x - _LOG_SQRT_2PI


def _chunks(n_rows, per_row):
    step = max(1, _CHUNK_ELEMENTS // max(per_row, 1))
    for start in range(0, n_rows, step):
        yield slice(start, min(start + step, n_rows))


def log_class_probabilities(potentials, rule: QuadratureRule) -> np.ndarray:
    """Unnormalized ``log p_i`` for every row of an ``N x C`` potential matrix."""
    y = np.atleast_2d(np.asarray(potentials, dtype=float))
    n, c = y.shape
    nodes, logw = rule.nodes, rule.log_weights
    off_diag = ~np.eye(c, dtype=bool)
    out = np.empty((n, c))
    for sl in _chunks(n, c * c * nodes.size):
        gaps = y[sl, :, None] - y[sl, None, :]                         # (r, i, j)
        lp = log_norm_cdf(gaps[..., None] + nodes)                     # (r, i, j, k)
        s = np.sum(lp * off_diag[None, :, :, None], axis=2)            # (r, i, k)
        out[sl] = logsumexp(s + logw, axis=-1)
    return out


def class_probabilities_batch(potentials, rule: QuadratureRule) -> np.ndarray:
    logp = log_class_probabilities(potentials, rule)
    p = np.exp(logp - logsumexp(logp, axis=1, keepdims=True))
    return p / p.sum(axis=1, keepdims=True)


def class_probabilities(y_row, rule: QuadratureRule) -> np.ndarray:
    y = np.asarray(y_row, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise ValueError("y_row must be a vector with at least 2 classes")
    return class_probabilities_batch(y[None, :], rule)[0]


def expected_z_batch(potentials, labels, rule: QuadratureRule) -> np.ndarray:
    """Posterior means of the latent potentials given labels ``1..C`` per row."""
    y = np.atleast_2d(np.asarray(potentials, dtype=float))
    n, c = y.shape
    idx = np.asarray(labels, dtype=int).reshape(-1) - 1
    if idx.shape != (n,) or idx.min() < 0 or idx.max() >= c:
        raise ValueError("labels must be one value in 1..C per row")
    nodes, logw = rule.nodes, rule.log_weights
    zbar = np.empty_like(y)
    for sl in _chunks(n, c * nodes.size):
        ys, ii = y[sl], idx[sl]
        rows = np.arange(ys.shape[0])
        gaps = ys[rows, ii][:, None] - ys                              # y_i - y_j
        lp = log_norm_cdf(gaps[..., None] + nodes)                     # (r, j, k)
        lp[rows, ii, :] = 0.0
        s = lp.sum(axis=1)                                             # (r, k)
        log_den = np.maximum(logsumexp(s + logw, axis=-1), LOG_DENOMINATOR_FLOOR)
        log_num = logsumexp(_log_norm_pdf(nodes + gaps[..., None])
                            + (s[:, None, :] - lp) + logw, axis=-1)     # (r, j)
        shift = np.exp(log_num - log_den[:, None])
        shift[rows, ii] = 0.0
        z = ys - shift
        z[rows, ii] = ys[rows, ii] + shift.sum(axis=1)
        zbar[sl] = z
    return zbar


def expected_z(y_row, label: int, rule: QuadratureRule) -> np.ndarray:
    y = np.asarray(y_row, dtype=float)
    if not 1 <= label <= y.size:
        raise ValueError(f"label must lie in 1..{y.size}")
    return expected_z_batch(y[None, :], [label], rule)[0]
