import numpy as np
import pytest

from mpcvm import harness
from mpcvm.dataset import gen_overclass
from mpcvm.em import EmConfig
from mpcvm.fmlm import FmlmConfig

FAST = harness.TrainerSettings(EmConfig(max_iter=40), FmlmConfig(max_epochs=40))


def test_run_partition_reports(iris):
    row = harness.run_partition(iris, "mpcvm2", 1.0, 3, 120, FAST)
    assert row["ok"] and 0 <= row["err"] <= 100 and 50 <= row["auc"] <= 100


def test_failures_recorded(iris):
    row = harness.run_partition(iris, "mpcvm2", 1.0, 0, 150, FAST)
    assert not row["ok"] and "train_count" in row["error"]


def test_unknown_trainer(iris):
    with pytest.raises(ValueError):
        harness.fit("svm", iris, 1.0)


def test_tune_single_width(iris):
    best, rows = harness.tune(iris, "mpcvm2", [0.8], 120, partitions=2, settings=FAST)
    assert best == 0.8 and rows[0]["succeeded"] == 2


def test_tune_ties_prefer_smaller(iris):
    # at huge widths both fits are identical, so mean accuracies tie
    best, rows = harness.tune(iris, "mpcvm2", [2e3, 1e3], 120, partitions=1, settings=FAST)
    assert rows[0]["mean_accuracy"] == rows[1]["mean_accuracy"]
    assert best == 1e3


def test_benchmark_seeding(iris):
    res = harness.benchmark(iris, "mpcvm2", 120, seed=10, theta=1.0, partitions=3,
                            tune_partitions=5, settings=FAST)
    assert [r["seed"] for r in res["rows"]] == [15, 16, 17]
    assert res["summary"]["partitions"] == 3
    again = harness.benchmark(iris, "mpcvm2", 120, seed=10, theta=1.0, partitions=3,
                              tune_partitions=5, settings=FAST)
    assert again["rows"] == res["rows"]


def test_benchmark_requires_width(iris):
    with pytest.raises(ValueError):
        harness.benchmark(iris, "mpcvm2", 120)


def test_summary_format():
    rows = [{"ok": True, "err": e, "auc": 99.0} for e in (2.0, 4.0)] + [{"ok": False}]
    s = harness.summarize(rows)
    assert s["err"] == f"3.000({np.std([2.0, 4.0], ddof=1):.3f})"
    assert s["failed"] == 1 and s["auc"] == "99.000(0.000)"


def test_class_curriculum():
    out = harness.class_curriculum(gen_overclass(0), "mpcvm2", [2, 3], 100, theta=1.0,
                                   partitions=1, tune_partitions=0, settings=FAST)
    assert [o["k"] for o in out] == [2, 3]
    assert out[0]["train_count"] == round(100 / 127 * 50)
