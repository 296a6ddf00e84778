"""Symmetric positive-definite solves with escalating diagonal jitter."""

from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve


class SingularSystemError(np.linalg.LinAlgError):
    """Factorization still failed at the largest jitter level."""


JITTER_START = 1e-10
JITTER_MAX = 1e-4


def spd_factor(h: np.ndarray):
    """Cholesky factor of ``h``, adding ``lam * I`` (1e-10 .. 1e-4, x10 steps) on failure."""
    try:
        return cho_factor(h, lower=True, check_finite=True)
    except LinAlgError:
        pass
    eye = np.eye(h.shape[0])
    lam = JITTER_START
    while lam <= JITTER_MAX * (1 + 1e-9):
        try:
            return cho_factor(h + lam * eye, lower=True)
        except LinAlgError:
            lam *= 10.0
    raise SingularSystemError(f"matrix of order {h.shape[0]} is not positive definite "
                              f"even with jitter {JITTER_MAX:g}")


def spd_solve(h: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return cho_solve(spd_factor(h), rhs)


def spd_logdet(factor) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
