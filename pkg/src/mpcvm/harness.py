"""Resampling protocol: kernel-width tuning, repeated partitions, class-curriculum sweeps.

Partition ``i`` of a run with base seed ``s`` is split with seed ``s + i``.
Partitions ``0..tune_partitions-1`` pick the kernel width; the following
``partitions`` evaluate it. Standardization is re-fit on each training half.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dataset import (Dataset, SplitSpec, apply_standardizer, filter_first_k_classes,
                      fit_standardizer, split)
from .em import EmConfig, train_mpcvm1
from .fmlm import FmlmConfig, train_mpcvm2
from .kernel import KernelConfig
from .metrics import evaluate
from .model import predict_class, predict_proba

log = logging.getLogger(__name__)

TRAINERS = ("mpcvm1", "mpcvm2")


@dataclass(frozen=True)
class TrainerSettings:
    """Trainer hyper-parameters other than the kernel width."""

    em: EmConfig = field(default_factory=EmConfig)
    fmlm: FmlmConfig = field(default_factory=FmlmConfig)

    def with_seed(self, seed: int) -> "TrainerSettings":
        from dataclasses import replace
        return TrainerSettings(replace(self.em, seed=seed), replace(self.fmlm, seed=seed))


def fit(trainer: str, train: Dataset, theta: float, settings: TrainerSettings = TrainerSettings()):
    """Standardize ``train`` on itself and fit; returns ``(model, report)``."""
    params = fit_standardizer(train)
    std = apply_standardizer(params, train)
    kernel = KernelConfig(theta)
    if trainer == "mpcvm1":
        return train_mpcvm1(std, settings.em, kernel, params)
    if trainer == "mpcvm2":
        return train_mpcvm2(std, settings.fmlm, kernel, params)
    raise ValueError(f"unknown trainer {trainer!r}; choose from {TRAINERS}")


def run_partition(data: Dataset, trainer: str, theta: float, seed: int, train_count: int,
                  settings: TrainerSettings = TrainerSettings()) -> dict:
    """Train on one seeded partition and score its test half. Failures are recorded, not raised."""
    row = {"seed": seed, "trainer": trainer, "theta": theta}
    try:
        tr, te = split(data, SplitSpec(train_count, seed))
        model, report = fit(trainer, tr, theta, settings.with_seed(seed))
        pred = predict_class(model, te.features)
        proba = predict_proba(model, te.features)
        ev = evaluate(pred, te.original_labels(), proba, model.label_map)
        row.update(ok=True, err=ev.err, auc=ev.auc, iterations=report.iterations,
                   converged=report.converged, nonzero=int(sum(report.nonzero_counts)),
                   error="")
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        log.warning("partition seed=%d trainer=%s theta=%g failed: %s", seed, trainer, theta, exc)
        row.update(ok=False, err=float("nan"), auc=float("nan"), iterations=0,
                   converged=False, nonzero=0, error=f"{type(exc).__name__}: {exc}")
    return row


def tune(data: Dataset, trainer: str, grid, train_count: int, seed: int = 0,
         partitions: int = 5, settings: TrainerSettings = TrainerSettings()):
    """Mean test-half accuracy per width over the tuning partitions.

    Returns ``(best_theta, rows)``; ties go to the smaller width and widths
    whose every partition failed are skipped.
    """
    rows = []
    best = None
    for theta in sorted(float(t) for t in grid):
        cells = [run_partition(data, trainer, theta, seed + i, train_count, settings)
                 for i in range(partitions)]
        ok = [c for c in cells if c["ok"]]
        acc = float(np.mean([100.0 - c["err"] for c in ok])) if ok else float("nan")
        rows.append({"theta": theta, "mean_accuracy": acc, "succeeded": len(ok),
                     "failed": len(cells) - len(ok)})
        if ok and (best is None or acc > best[1]):
            best = (theta, acc)
    if best is None:
        raise ArithmeticError("every tuning cell failed")
    return best[0], rows


def summarize(rows) -> dict:
    ok = [r for r in rows if r["ok"]]
    errs = np.array([r["err"] for r in ok])
    aucs = np.array([r["auc"] for r in ok])

    def fmt(v):
        if not v.size:
            return "nan(nan)"
        sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
        return f"{float(np.mean(v)):.3f}({sd:.3f})"

    return {
        "partitions": len(rows),
        "failed": len(rows) - len(ok),
        "err_mean": float(errs.mean()) if errs.size else float("nan"),
        "auc_mean": float(aucs.mean()) if aucs.size else float("nan"),
        "err": fmt(errs),
        "auc": fmt(aucs),
    }


def benchmark(data: Dataset, trainer: str, train_count: int, seed: int = 0,
              theta: float | None = None, grid=None, partitions: int = 45,
              tune_partitions: int = 5, settings: TrainerSettings = TrainerSettings()) -> dict:
    """Tune (unless ``theta`` is given) then evaluate on the following partitions."""
    tuning = []
    if theta is None:
        if grid is None:
            raise ValueError("give either theta or a tuning grid")
        theta, tuning = tune(data, trainer, grid, train_count, seed, tune_partitions, settings)
    rows = [run_partition(data, trainer, theta, seed + tune_partitions + i, train_count, settings)
            for i in range(partitions)]
    summary = summarize(rows)
    if summary["failed"]:
        log.warning("%d of %d partitions failed and were excluded", summary["failed"], len(rows))
    return {"trainer": trainer, "theta": theta, "tuning": tuning, "rows": rows,
            "summary": summary}


def class_curriculum(data: Dataset, trainer: str, ks, train_count: int,
                     theta: float | None = None, grid=None, seed: int = 0, partitions: int = 45,
                     tune_partitions: int = 5,
                     settings: TrainerSettings = TrainerSettings()) -> list[dict]:
    """Benchmark on the first ``k`` classes for every ``k`` in ``ks``.

    With ``theta`` fixed every subset uses it; otherwise each subset is tuned on ``grid``.

    The training share stays at ``train_count / N`` of the retained samples.
    """
    out = []
    fraction = train_count / data.n_samples
    for k in ks:
        sub = filter_first_k_classes(data, k)
        count = min(max(int(round(fraction * sub.n_samples)), k), sub.n_samples - k)
        res = benchmark(sub, trainer, count, seed, theta=theta, grid=grid, partitions=partitions,
                        tune_partitions=tune_partitions, settings=settings)
        out.append({"k": k, "train_count": count, **res})
    return out
