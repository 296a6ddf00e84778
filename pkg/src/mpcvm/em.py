"""Top-down EM training to the MAP estimate (mPCVM1).

Every training point starts as a basis function of every class. Each iteration
solves for the weights and biases given the current latent and precision
expectations (M step), drops entries whose precision expectation has reached
the pruning threshold, then refreshes the expectations (E step). A weight whose
sign disagrees with its point's class membership gets an infinite precision and
is pruned on the next pass, so the surviving model obeys the sign principle.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from ._linalg import spd_solve
from .dataset import Dataset, StandardizationParams
from .kernel import BasisMatrix, KernelConfig, gram
from .model import TrainReport, build_artifact
from .probit import DEFAULT_NODES, expected_z_batch, gauss_hermite


@dataclass(frozen=True)
class EmConfig:
    u1: float = 1e-6
    v1: float = 1e-6
    u2: float = 1e-6
    v2: float = 1e-6
    # must stay below the largest reachable precision (2 u1 + 1) / (2 v1)
    prune_threshold: float = 1e5
    alpha_init: float = 1e-3
    max_iter: int = 500
    tol: float = 1e-4
    seed: int = 0
    quad_nodes: int = DEFAULT_NODES

    def __post_init__(self):
        if min(self.u1, self.v1, self.u2, self.v2) < 0:
            raise ValueError("Gamma hyper-parameters must be nonnegative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.prune_threshold > 1:
            raise ValueError("prune_threshold must exceed 1")
        if not 0 < self.alpha_init < self.prune_threshold:
            raise ValueError("alpha_init must lie in (0, prune_threshold)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass(frozen=True)
class EmState:
    W: np.ndarray
    b: np.ndarray
    abar: np.ndarray
    bbar: np.ndarray
    zbar: np.ndarray
    active: np.ndarray
    sign_mask: np.ndarray

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.sign_mask, axis=1) + 1


def sign_mask_for(labels, class_count: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    return np.where(labels[:, None] == np.arange(1, class_count + 1)[None, :], 1.0, -1.0)


def init_state(data: Dataset, basis: BasisMatrix, config: EmConfig) -> EmState:
    n, c = data.n_samples, data.class_count
    if basis.values.shape != (n, n):
        raise ValueError(f"basis must be the {n}x{n} training gram, got {basis.values.shape}")
    rng = np.random.default_rng(config.seed)
    return EmState(
        W=np.zeros((n, c)),
        b=np.zeros(c),
        abar=np.full((n, c), float(config.alpha_init)),
        bbar=np.ones(c),
        zbar=rng.standard_normal((n, c)),
        active=np.ones((n, c), dtype=bool),
        sign_mask=sign_mask_for(data.labels, c),
    )


def _solve_set(state: EmState) -> np.ndarray:
    return state.active & np.isfinite(state.abar)


def m_step(state: EmState, basis: BasisMatrix, config: EmConfig, phtph=None) -> EmState:
    """Maximize the expected log-posterior jointly over ``(w_c, b_c)`` per class.

    The returned pair satisfies both stationarity conditions at once, i.e. the
    weight equation is solved with the returned bias and vice versa.
    """
    phi = basis.values
    n = phi.shape[0]
    if phtph is None:
        phtph = phi.T @ phi
    col_sums = phi.sum(axis=0)
    W = np.zeros_like(state.W)
    b = np.zeros_like(state.b)
    solve_set = _solve_set(state)
    for c in range(state.W.shape[1]):
        idx = np.flatnonzero(solve_set[:, c])
        z = state.zbar[:, c]
        m = idx.size
        h = np.empty((m + 1, m + 1))
        h[:m, :m] = phtph[np.ix_(idx, idx)]
        h[np.arange(m), np.arange(m)] += state.abar[idx, c]
        h[:m, m] = h[m, :m] = col_sums[idx]
        h[m, m] = n + state.bbar[c]
        rhs = np.append(phi[:, idx].T @ z, z.sum())
        sol = spd_solve(h, rhs)
        W[idx, c] = sol[:m]
        b[c] = sol[m]
    return replace(state, W=W, b=b)


def prune(state: EmState, config: EmConfig) -> EmState:
    active = state.active & (state.abar < config.prune_threshold)
    return replace(state, active=active, W=np.where(active, state.W, 0.0))


def e_step(state: EmState, basis: BasisMatrix, config: EmConfig) -> EmState:
    y = basis.values @ state.W + state.b[None, :]
    zbar = expected_z_batch(y, state.labels, gauss_hermite(config.quad_nodes))
    legal = state.sign_mask * state.W > 0
    with np.errstate(divide="ignore"):
        abar = np.where(legal, (2 * config.u1 + 1) / (state.W ** 2 + 2 * config.v1), np.inf)
    bbar = (2 * config.u2 + 1) / (state.b ** 2 + 2 * config.v2)
    return replace(state, zbar=zbar, abar=abar, bbar=bbar)


def q_function(W, b, state: EmState, basis: BasisMatrix) -> float:
    """Expected log-posterior (up to constants) at ``(W, b)`` for ``state``'s expectations.

    Only the finite-precision entries of ``state.abar`` enter the weight penalty.
    """
    phi = basis.values
    y = phi @ W + b[None, :]
    abar = np.where(np.isfinite(state.abar), state.abar, 0.0)
    return float(-np.sum(state.bbar * b ** 2)
                 + np.sum(2.0 * state.zbar * y - y * y)
                 - np.sum(abar * W ** 2))


def q_gradients(W, b, state: EmState, basis: BasisMatrix):
    """Analytic ``(dQ/dW, dQ/db)``."""
    phi = basis.values
    n = phi.shape[0]
    abar = np.where(np.isfinite(state.abar), state.abar, 0.0)
    resid = state.zbar - phi @ W
    gW = 2.0 * phi.T @ resid - 2.0 * np.outer(phi.sum(axis=0), b) - 2.0 * abar * W
    gb = 2.0 * resid.sum(axis=0) - 2.0 * n * b - 2.0 * state.bbar * b
    return gW, gb


def train_mpcvm1(data: Dataset, config: EmConfig = EmConfig(),
                 kernel: KernelConfig = KernelConfig(),
                 standardizer: StandardizationParams | None = None):
    """Fit on already-standardized ``data``; returns ``(ModelArtifact, TrainReport)``."""
    t0 = time.perf_counter()
    basis = gram(kernel, data.features)
    phtph = basis.values.T @ basis.values
    state = init_state(data, basis, config)
    converged, it = False, 0
    history = []
    for it in range(1, config.max_iter + 1):
        w_old, b_old = state.W, state.b
        state = m_step(state, basis, config, phtph)
        state = prune(state, config)
        state = e_step(state, basis, config)
        delta = max(np.max(np.abs(state.W - w_old)), np.max(np.abs(state.b - b_old)))
        history.append(float(delta))
        if delta < config.tol:
            converged = True
            break

    state = prune(state, config)
    keep = state.active & (state.sign_mask * state.W > 0)
    dropped = int(np.count_nonzero(state.active & ~keep & (state.W != 0)))
    W = np.where(keep, state.W, 0.0)
    counts = [int(v) for v in np.count_nonzero(W, axis=0)]
    report = TrainReport("mpcvm1", it, converged, [int(v) for v in state.active.sum(axis=0)],
                         counts, history, dropped)
    standardizer = standardizer or StandardizationParams.identity(data.n_features)
    model = build_artifact(data.features, data.labels, W, state.b, data.class_count, kernel,
                           standardizer, data.label_map,
                           {"trainer": "mpcvm1", "seed": int(config.seed),
                            "quad_nodes": int(config.quad_nodes)})
    report.wall_time = time.perf_counter() - t0
    return model, report
