"""Error rate, Hand-Till generalized AUC, Friedman test and Bonferroni-Dunn post-hoc."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincc
from scipy.stats import rankdata

# two-tailed Bonferroni-Dunn critical values q_alpha for k compared classifiers
BONFERRONI_DUNN_Q = {
    0.05: {2: 1.960, 3: 2.241, 4: 2.394, 5: 2.498, 6: 2.576, 7: 2.638, 8: 2.690, 9: 2.734,
           10: 2.773},
    0.10: {2: 1.645, 3: 1.960, 4: 2.128, 5: 2.241, 6: 2.326, 7: 2.394, 8: 2.450, 9: 2.498,
           10: 2.539},
}


@dataclass(frozen=True)
class EvalReport:
    err: float
    auc: float
    confusion: np.ndarray

    def to_dict(self) -> dict:
        return {"err": self.err, "auc": self.auc, "confusion": self.confusion.tolist()}


@dataclass(frozen=True)
class RankTable:
    k: int
    n_datasets: int
    avg_ranks: np.ndarray
    names: tuple = field(default=())

    def __post_init__(self):
        r = np.asarray(self.avg_ranks, dtype=float)
        object.__setattr__(self, "avg_ranks", r)
        if r.shape != (self.k,):
            raise ValueError(f"expected {self.k} average ranks, got {r.shape}")

    def check(self, atol: float = 1e-9) -> None:
        expected = self.k * (self.k + 1) / 2.0
        if abs(self.avg_ranks.sum() - expected) > atol:
            raise ValueError(f"average ranks sum to {self.avg_ranks.sum():.6g}, "
                             f"expected k(k+1)/2 = {expected:g}")


def error_rate(predictions, truth) -> float:
    p, t = np.asarray(predictions), np.asarray(truth)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("empty input")
    return 100.0 * float(np.mean(p != t))


def _rank_auc(pos_scores, neg_scores) -> float:
    """Mann-Whitney estimate of P(pos > neg) with midranks for ties."""
    n1, n0 = len(pos_scores), len(neg_scores)
    ranks = rankdata(np.concatenate([pos_scores, neg_scores]))
    return (ranks[:n1].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0)


def generalized_auc(scores, truth, classes=None) -> float:
    """Average pairwise separability over all class pairs, as a percentage.

    ``scores[:, c]`` is the score of class ``classes[c]`` (default ``1..C``).
    """
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth)
    n_cls = scores.shape[1]
    classes = np.arange(1, n_cls + 1) if classes is None else np.asarray(classes)
    masks = [truth == cls for cls in classes]
    for cls, m in zip(classes, masks):
        if not m.any():
            raise ValueError(f"class {cls} has no samples in truth")
    total = 0.0
    for i in range(n_cls):
        for j in range(i + 1, n_cls):
            a_ij = _rank_auc(scores[masks[i], i], scores[masks[j], i])
            a_ji = _rank_auc(scores[masks[j], j], scores[masks[i], j])
            total += 0.5 * (a_ij + a_ji)
    return 100.0 * total * 2.0 / (n_cls * (n_cls - 1))


def confusion_matrix(predictions, truth, classes) -> np.ndarray:
    lookup = {v: k for k, v in enumerate(classes)}
    out = np.zeros((len(classes), len(classes)), dtype=int)
    for p, t in zip(predictions, truth):
        out[lookup[t], lookup[p]] += 1
    return out


def evaluate(predictions, truth, scores, classes) -> EvalReport:
    return EvalReport(error_rate(predictions, truth), generalized_auc(scores, truth, classes),
                      confusion_matrix(predictions, truth, classes))


def average_ranks(score_table, direction: str = "lower", names=()) -> RankTable:
    """Rank algorithms (columns) within every dataset (row); rank 1 is best."""
    table = np.asarray(score_table, dtype=float)
    if table.ndim != 2 or not np.all(np.isfinite(table)):
        raise ValueError("score table must be a finite 2-D matrix")
    if direction not in ("lower", "higher"):
        raise ValueError("direction must be 'lower' or 'higher'")
    signed = table if direction == "lower" else -table
    ranks = np.vstack([rankdata(row) for row in signed])
    return RankTable(table.shape[1], table.shape[0], ranks.mean(axis=0), tuple(names))


def friedman_q(ranks: RankTable) -> float:
    ranks.check()
    k, n, r = ranks.k, ranks.n_datasets, ranks.avg_ranks
    return 12.0 * n / (k * (k + 1)) * (float(np.sum(r * r)) - k * (k + 1) ** 2 / 4.0)


def chi_square_sf(q: float, dof: int) -> float:
    """Upper tail ``P(X >= q)`` of a chi-square variable with ``dof`` degrees of freedom."""
    if q < 0 or dof < 1:
        raise ValueError("need q >= 0 and dof >= 1")
    return float(gammaincc(dof / 2.0, q / 2.0))


def rank_scale(k: int, n_datasets: int) -> float:
    return float(np.sqrt(k * (k + 1) / (6.0 * n_datasets)))


def critical_difference(k: int, n_datasets: int, q_alpha: float) -> float:
    return q_alpha * rank_scale(k, n_datasets)


def q_alpha(k: int, alpha: float = 0.10) -> float:
    try:
        return BONFERRONI_DUNN_Q[alpha][k]
    except KeyError:
        raise ValueError(f"no Bonferroni-Dunn critical value for k={k}, alpha={alpha}") from None


def bonferroni_dunn(ranks: RankTable, control: int, qa: float | None = None,
                    alpha: float = 0.10) -> list[dict]:
    """Standardized rank differences of every algorithm against ``control``.

    A difference is significant when it reaches ``q_alpha``, i.e. when the raw
    rank gap reaches the critical difference.
    """
    if not 0 <= control < ranks.k:
        raise ValueError(f"control index {control} out of range")
    qa = q_alpha(ranks.k, alpha) if qa is None else qa
    scale = rank_scale(ranks.k, ranks.n_datasets)
    out = []
    for j in range(ranks.k):
        if j == control:
            continue
        diff = (ranks.avg_ranks[j] - ranks.avg_ranks[control]) / scale
        out.append({"index": j, "name": ranks.names[j] if ranks.names else str(j),
                    "difference": float(diff), "significant": bool(diff >= qa)})
    return out
