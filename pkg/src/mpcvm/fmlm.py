"""Bottom-up training by fast marginal-likelihood maximization (mPCVM2).

Every class keeps its own precision per training point. Starting from an empty
model, each epoch lets every class add, re-estimate or delete one basis
function, choosing the move from the sparsity and quality factors of all
candidates; then the sign-gated MAP weights and the latent expectations are
refreshed. The bias is fixed at zero.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ._linalg import spd_factor, spd_logdet
from .dataset import Dataset, StandardizationParams
from .kernel import BasisMatrix, KernelConfig, gram
from .model import TrainReport, build_artifact
from .probit import DEFAULT_NODES, expected_z_batch, gauss_hermite
from scipy.linalg import cho_solve, solve_triangular

ADD, REESTIMATE, DELETE = "add", "reestimate", "delete"
_LOG_2PI = np.log(2.0 * np.pi)


class InconsistentStateError(FloatingPointError):
    """The active set implies an invalid covariance (``alpha <= S`` for an active basis)."""


@dataclass(frozen=True)
class FmlmConfig:
    max_epochs: int = 1000
    tol: float | None = None        # None -> 1e-6 * N
    seed: int = 0
    quad_nodes: int = DEFAULT_NODES

    def __post_init__(self):
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be positive")


@dataclass
class FactorTable:
    """Sparsity/quality factors and precisions; ``alpha`` is ``inf`` off the active sets."""

    s: np.ndarray
    q: np.ndarray
    alpha: np.ndarray

    @property
    def active(self) -> list[np.ndarray]:
        return [np.flatnonzero(np.isfinite(self.alpha[:, c])) for c in range(self.alpha.shape[1])]


def _gram_products(basis: BasisMatrix, phtph):
    return basis.values.T @ basis.values if phtph is None else phtph


def _posterior(phtph, alpha_c, idx):
    h = phtph[np.ix_(idx, idx)].copy()
    h[np.arange(idx.size), np.arange(idx.size)] += alpha_c[idx]
    return spd_factor(h)


def compute_factors(basis: BasisMatrix, zbar, alpha, c: int, phtph=None):
    """``(s, q)`` for class ``c``, each point measured against the covariance without itself.

    ``S = phi' C^-1 phi`` and ``Q = phi' C^-1 z`` are formed once from the active
    set. For active members the de-inflation ``s = a S / (a - S)``,
    ``q = a Q / (a - S)`` is evaluated in the equivalent form ``s = 1 / Sigma_nn - a``,
    ``q = mu_n / Sigma_nn``, which avoids the cancellation in ``a - S`` when the
    basis is nearly collinear.
    """
    phi = basis.values
    phtph = _gram_products(basis, phtph)
    z = np.asarray(zbar)[:, c]
    a = np.asarray(alpha)[:, c]
    idx = np.flatnonzero(np.isfinite(a))
    if idx.size and not np.all(a[idx] > 0):
        raise InconsistentStateError(f"class {c + 1}: non-positive precision in the active set")
    S = np.diag(phtph).copy()
    Q = phi.T @ z
    if not idx.size:
        return S, Q
    factor = _posterior(phtph, a, idx)
    L = factor[0]
    T = solve_triangular(L, phtph[idx, :], lower=True)                 # (M, N)
    rhs = phi[:, idx].T @ z
    u = solve_triangular(L, rhs, lower=True)
    S -= np.sum(T * T, axis=0)
    Q -= T.T @ u
    l_inv = solve_triangular(L, np.eye(idx.size), lower=True)
    sigma_diag = np.sum(l_inv * l_inv, axis=0)
    if not np.all(sigma_diag > 0):
        raise InconsistentStateError(f"class {c + 1}: posterior covariance lost definiteness")
    mu = cho_solve(factor, rhs)
    S[idx] = np.maximum(1.0 / sigma_diag - a[idx], 0.0)
    Q[idx] = mu / sigma_diag
    return S, Q


def all_factors(basis: BasisMatrix, zbar, alpha, phtph=None) -> FactorTable:
    phtph = _gram_products(basis, phtph)
    cols = [compute_factors(basis, zbar, alpha, c, phtph) for c in range(alpha.shape[1])]
    return FactorTable(np.column_stack([s for s, _ in cols]),
                       np.column_stack([q for _, q in cols]), np.array(alpha, dtype=float))


def optimal_alpha(s, q):
    """Maximizer of the marginal likelihood in one precision: ``s^2 / (q^2 - s)`` or ``inf``."""
    s = np.asarray(s, dtype=float)
    theta = np.asarray(q, dtype=float) ** 2 - s
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(theta > 0, s * s / np.where(theta > 0, theta, 1.0), np.inf)
    return out[()] if out.ndim == 0 else out


def alpha_contribution(alpha, s, q):
    """``l(alpha) = (log a - log(a + s) + q^2 / (a + s)) / 2``; zero at ``a = inf``."""
    if not np.isfinite(alpha):
        return 0.0
    return 0.5 * (np.log(alpha) - np.log(alpha + s) + q * q / (alpha + s))


def select_candidate(factors: FactorTable, c: int, epoch: int, rng):
    """Pick ``(n, action)`` for class ``c``, or ``None`` when the class has nothing to do."""
    s, q = factors.s[:, c], factors.q[:, c]
    theta = q * q - s
    active = np.isfinite(factors.alpha[:, c])
    if epoch == 1:
        n = int(np.argmax(theta))
        if active[n]:
            return (n, REESTIMATE) if theta[n] > 0 else (n, DELETE)
        return (n, ADD) if theta[n] > 0 else None
    addable = ~active & (theta > 0)
    if addable.any():
        cand = np.flatnonzero(addable)
        return int(cand[np.argmax(theta[cand])]), ADD
    deletable = active & (theta < 0)
    if deletable.any():
        cand = np.flatnonzero(deletable)
        return int(cand[np.argmin(theta[cand])]), DELETE
    if active.any():
        n = int(rng.choice(np.flatnonzero(active)))
        return (n, REESTIMATE) if theta[n] > 0 else (n, DELETE)
    return None


def apply_action(alpha, c: int, n: int, action: str, s_n: float, q_n: float) -> None:
    alpha[n, c] = np.inf if action == DELETE else optimal_alpha(s_n, q_n)


def fmlm_step(basis: BasisMatrix, zbar, alpha, c: int, epoch: int, rng, phtph=None):
    """One factor computation, selection and precision update for class ``c``, in place."""
    s, q = compute_factors(basis, zbar, alpha, c, phtph)
    table = FactorTable(s[:, None], q[:, None], alpha[:, [c]])
    choice = select_candidate(table, 0, epoch, rng)
    if choice is None:
        return None
    n, action = choice
    apply_action(alpha, c, n, action, s[n], q[n])
    return n, action


def map_weights(basis: BasisMatrix, zbar, alpha, labels, phtph=None) -> np.ndarray:
    """Per-class posterior-mean weights, zeroed where the sign disagrees with the point's class."""
    phi = basis.values
    phtph = _gram_products(basis, phtph)
    alpha = np.asarray(alpha, dtype=float)
    labels = np.asarray(labels, dtype=int)
    W = np.zeros(alpha.shape)
    for c in range(alpha.shape[1]):
        idx = np.flatnonzero(np.isfinite(alpha[:, c]))
        if not idx.size:
            continue
        w = cho_solve(_posterior(phtph, alpha[:, c], idx), phi[:, idx].T @ zbar[:, c])
        f = np.where(labels[idx] == c + 1, 1.0, -1.0)
        W[idx, c] = np.where(f * w > 0, w, 0.0)
    return W


def marginal_log_likelihood(basis: BasisMatrix, zbar, alpha, phtph=None) -> float:
    """Sum over classes of ``log N(z_c | 0, I + Phi A_c^-1 Phi')`` via the active-set form."""
    phi = basis.values
    phtph = _gram_products(basis, phtph)
    zbar = np.asarray(zbar, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    n = phi.shape[0]
    total = 0.0
    for c in range(alpha.shape[1]):
        z = zbar[:, c]
        idx = np.flatnonzero(np.isfinite(alpha[:, c]))
        logdet, quad = 0.0, float(z @ z)
        if idx.size:
            factor = _posterior(phtph, alpha[:, c], idx)
            u = solve_triangular(factor[0], phi[:, idx].T @ z, lower=True)
            logdet = spd_logdet(factor) - float(np.sum(np.log(alpha[idx, c])))
            quad -= float(u @ u)
        total += -0.5 * (n * _LOG_2PI + logdet + quad)
    return float(total)


def train_mpcvm2(data: Dataset, config: FmlmConfig = FmlmConfig(),
                 kernel: KernelConfig = KernelConfig(),
                 standardizer: StandardizationParams | None = None):
    """Fit on already-standardized ``data``; returns ``(ModelArtifact, TrainReport)``."""
    t0 = time.perf_counter()
    n, c_count = data.n_samples, data.class_count
    tol = config.tol if config.tol is not None else 1e-6 * n
    rule = gauss_hermite(config.quad_nodes)
    basis = gram(kernel, data.features)
    phtph = basis.values.T @ basis.values
    rng = np.random.default_rng(config.seed)
    zbar = rng.standard_normal((n, c_count))
    alpha = np.full((n, c_count), np.inf)
    W = np.zeros((n, c_count))
    history: list[float] = []
    converged, epoch = False, 0
    for epoch in range(1, config.max_epochs + 1):
        structural = False
        for c in range(c_count):
            step = fmlm_step(basis, zbar, alpha, c, epoch, rng, phtph)
            if step is not None and step[1] != REESTIMATE:
                structural = True
        W = map_weights(basis, zbar, alpha, data.labels, phtph)
        zbar = expected_z_batch(basis.values @ W, data.labels, rule)
        history.append(marginal_log_likelihood(basis, zbar, alpha, phtph))
        if (epoch > 1 and not structural and abs(history[-1] - history[-2]) < tol):
            converged = True
            break

    report = TrainReport("mpcvm2", epoch, converged,
                         [int(v) for v in np.isfinite(alpha).sum(axis=0)],
                         [int(v) for v in np.count_nonzero(W, axis=0)], history)
    standardizer = standardizer or StandardizationParams.identity(data.n_features)
    model = build_artifact(data.features, data.labels, W, np.zeros(c_count), c_count, kernel,
                           standardizer, data.label_map,
                           {"trainer": "mpcvm2", "seed": int(config.seed),
                            "quad_nodes": int(config.quad_nodes)})
    report.wall_time = time.perf_counter() - t0
    return model, report
