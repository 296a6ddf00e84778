"""The deployable sparse classifier: prediction, probabilities, sparsity, persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import StandardizationParams
from .kernel import KernelConfig, cross
from .probit import DEFAULT_NODES, QuadratureRule, class_probabilities_batch, gauss_hermite

SCHEMA = "mpcvm/1"


class ModelFormatError(ValueError):
    """Unreadable model file or unsupported schema version."""


@dataclass
class TrainReport:
    trainer: str
    iterations: int
    converged: bool
    active_counts: list
    nonzero_counts: list
    history: list = field(default_factory=list)
    dropped_sign_violations: int = 0
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "trainer": self.trainer,
            "iterations": self.iterations,
            "converged": self.converged,
            "active_counts": list(self.active_counts),
            "nonzero_counts": list(self.nonzero_counts),
            "dropped_sign_violations": self.dropped_sign_violations,
            "wall_time": self.wall_time,
            "history": list(self.history),
        }


@dataclass(frozen=True)
class ModelArtifact:
    """Per-class relevant vectors and weights, in standardized feature space.

    ``basis_labels[c][m]`` is the training class (1..C) of basis point ``m`` of
    class ``c + 1``; stored weights are positive for own-class points and
    negative otherwise.
    """

    kernel: KernelConfig
    standardizer: StandardizationParams
    class_count: int
    label_map: tuple
    basis: tuple
    weights: tuple
    basis_labels: tuple
    biases: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def quad_nodes(self) -> int:
        return int(self.metadata.get("quad_nodes", DEFAULT_NODES))

    @property
    def trainer(self) -> str:
        return str(self.metadata.get("trainer", ""))

    def sign_consistent(self) -> bool:
        for c in range(self.class_count):
            f = np.where(self.basis_labels[c] == c + 1, 1.0, -1.0)
            if np.any(f * self.weights[c] <= 0):
                return False
        return True


def build_artifact(points, labels, W, b, class_count, kernel, standardizer,
                   label_map, metadata) -> ModelArtifact:
    """Collect the nonzero entries of an ``N x C`` weight matrix into an artifact."""
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels, dtype=int)
    basis, weights, blabels = [], [], []
    for c in range(class_count):
        keep = np.flatnonzero(W[:, c] != 0.0)
        basis.append(points[keep].copy())
        weights.append(np.asarray(W[keep, c], dtype=float).copy())
        blabels.append(labels[keep].copy())
    return ModelArtifact(kernel, standardizer, class_count, tuple(label_map), tuple(basis),
                         tuple(weights), tuple(blabels), np.asarray(b, dtype=float).copy(),
                         dict(metadata))


def predict_potentials(model: ModelArtifact, points) -> np.ndarray:
    x = model.standardizer.transform(np.atleast_2d(np.asarray(points, dtype=float)))
    y = np.tile(model.biases, (x.shape[0], 1))
    for c in range(model.class_count):
        if model.weights[c].size:
            y[:, c] += cross(model.kernel, x, model.basis[c]).values @ model.weights[c]
    return y


def predict_class(model: ModelArtifact, points) -> np.ndarray:
    """Original label values of ``argmax_c y_c``; ties go to the lowest class index."""
    idx = np.argmax(predict_potentials(model, points), axis=1)
    return np.asarray(model.label_map)[idx]


def predict_proba(model: ModelArtifact, points, rule: QuadratureRule | None = None) -> np.ndarray:
    rule = rule or gauss_hermite(model.quad_nodes)
    return class_probabilities_batch(predict_potentials(model, points), rule)


@dataclass(frozen=True)
class SparsityReport:
    relevant_vectors: list
    nonzero_weights: list
    union_relevant_vectors: int

    def format_row(self) -> list[str]:
        return [f"{v}({w})" for v, w in zip(self.relevant_vectors, self.nonzero_weights)]


def sparsity_report(model: ModelArtifact) -> SparsityReport:
    vectors, nonzero, seen = [], [], set()
    for c in range(model.class_count):
        rows = {tuple(p) for p in model.basis[c]}
        seen |= rows
        vectors.append(len(rows))
        nonzero.append(int(np.count_nonzero(model.weights[c])))
    return SparsityReport(vectors, nonzero, len(seen))


def to_dict(model: ModelArtifact) -> dict:
    return {
        "schema": SCHEMA,
        "kernel": {"kind": model.kernel.kind, "theta": float(model.kernel.theta)},
        "standardizer": {"mean": model.standardizer.mean.tolist(),
                         "scale": model.standardizer.scale.tolist()},
        "classes": model.class_count,
        "labels": [int(v) for v in model.label_map],
        "per_class": [
            {"basis": model.basis[c].tolist(),
             "weights": model.weights[c].tolist(),
             "label_of_basis": [int(v) for v in model.basis_labels[c]]}
            for c in range(model.class_count)
        ],
        "biases": model.biases.tolist(),
        "metadata": model.metadata,
    }


def from_dict(doc: dict) -> ModelArtifact:
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    schema = doc.get("schema")
    if schema != SCHEMA:
        raise ModelFormatError(f"unsupported model schema {schema!r} (expected {SCHEMA!r})")
    try:
        c = int(doc["classes"])
        dim = len(doc["standardizer"]["mean"])
        per_class = doc["per_class"]
        if len(per_class) != c:
            raise ModelFormatError("per_class length does not match class count")
        return ModelArtifact(
            kernel=KernelConfig(theta=float(doc["kernel"]["theta"]), kind=doc["kernel"]["kind"]),
            standardizer=StandardizationParams(np.array(doc["standardizer"]["mean"], dtype=float),
                                               np.array(doc["standardizer"]["scale"], dtype=float)),
            class_count=c,
            label_map=tuple(int(v) for v in doc["labels"]),
            basis=tuple(np.array(p["basis"], dtype=float).reshape(-1, dim) for p in per_class),
            weights=tuple(np.array(p["weights"], dtype=float) for p in per_class),
            basis_labels=tuple(np.array(p["label_of_basis"], dtype=int) for p in per_class),
            biases=np.array(doc["biases"], dtype=float),
            metadata=dict(doc.get("metadata", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"corrupt model document: {exc}") from exc


def save(model: ModelArtifact, path) -> None:
    # float repr is the shortest round-tripping decimal, so reloads are bit-exact
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_dict(model), fh, indent=1)
        fh.write("\n")


def load(path) -> ModelArtifact:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
    return from_dict(doc)
