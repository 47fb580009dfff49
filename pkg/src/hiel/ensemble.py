"""Bagged hybrid-inducer ensemble.

Every inducer ``j`` is trained on ``T`` bootstrap samples of the training
set, giving ``|I| * T`` experts.  The bootstrap draw and the inducer's own
initialisation for expert ``(j, t)`` come from ``SeedSequence(seed,
spawn_key=(j, t))``, so an ensemble with ``T=5`` is literally the first five
columns of the ``T=10`` ensemble built from the same seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import ModuleRecord, as_arrays
from .inducers import Classifier, InducerSpec, default_inducers, fit_arrays

FORMAT_VERSION = 1


@dataclass(frozen=True)
class EnsembleConfig:
    inducers: tuple[InducerSpec, ...] = field(default_factory=lambda: tuple(default_inducers()))
    T: int = 10
    sample_size: int | None = None  # None: same size as the training set
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "inducers", tuple(self.inducers))
        if not self.inducers:
            raise ValueError("at least one inducer is required")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.sample_size is not None and self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")

    @property
    def size(self) -> int:
        return len(self.inducers) * self.T

    def to_dict(self) -> dict:
        return {
            "inducers": [s.to_dict() for s in self.inducers],
            "T": self.T,
            "sample_size": self.sample_size,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleConfig":
        inducers = d.get("inducers")
        specs = tuple(InducerSpec.from_dict(s) for s in inducers) if inducers else tuple(default_inducers())
        return cls(specs, int(d.get("T", 10)), d.get("sample_size"), int(d.get("seed", 0)))


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    classifiers: tuple[tuple[Classifier, ...], ...]  # [j][t]
    config: EnsembleConfig

    def __post_init__(self):
        shape = (len(self.classifiers), {len(row) for row in self.classifiers})
        if shape != (len(self.config.inducers), {self.config.T}):
            raise ValueError("classifier grid does not match |I| x T")

    def experts(self) -> list[Classifier]:
        """Classifiers in (j, t) row-major order."""
        return [c for row in self.classifiers for c in row]

    def __len__(self):
        return self.config.size

    def save(self, path) -> None:
        doc = {
            "format": "hiel-ensemble",
            "version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "classifiers": [[c.to_dict() for c in row] for row in self.classifiers],
        }
        Path(path).write_text(json.dumps(doc), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "EnsembleModel":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("format") != "hiel-ensemble":
            raise ValueError(f"{path}: not an ensemble file")
        if doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported ensemble format version {doc.get('version')}")
        grid = tuple(tuple(Classifier.from_dict(c) for c in row) for row in doc["classifiers"])
        return cls(grid, EnsembleConfig.from_dict(doc["config"]))


@dataclass(frozen=True)
class PredictionMatrix:
    labels: np.ndarray  # (|I|, T, |V|) int
    scores: np.ndarray  # (|I|, T, |V|) float
    truth: np.ndarray   # (|V|,) int

    def __post_init__(self):
        if self.labels.shape != self.scores.shape or self.labels.ndim != 3:
            raise ValueError("labels and scores must share an (|I|, T, |V|) shape")
        if self.labels.shape[2] != self.truth.shape[0]:
            raise ValueError("instance dimension differs from the number of true labels")

    @property
    def n_experts(self) -> int:
        return self.labels.shape[0] * self.labels.shape[1]

    def flat_labels(self) -> np.ndarray:
        """Expert-by-instance labels with experts in (j, t) row-major order."""
        return self.labels.reshape(self.n_experts, -1)

    def flat_scores(self) -> np.ndarray:
        return self.scores.reshape(self.n_experts, -1)

    def subset(self, n: int) -> "PredictionMatrix":
        """Keep ``n`` experts.

        When ``n`` is a multiple of the inducer count the first ``n / |I|``
        samples of every inducer are kept (the ensemble a smaller ``T`` would
        have produced); otherwise the first ``n`` experts in row-major order,
        returned as a ``(1, n, |V|)`` matrix.
        """
        n_ind, T, _ = self.labels.shape
        if not 1 <= n <= n_ind * T:
            raise ValueError(f"subset size {n} outside 1..{n_ind * T}")
        if n % n_ind == 0:
            t = n // n_ind
            return PredictionMatrix(self.labels[:, :t], self.scores[:, :t], self.truth)
        return PredictionMatrix(self.flat_labels()[None, :n], self.flat_scores()[None, :n], self.truth)


def expert_seed(seed: int, j: int, t: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(j, t))


def bootstrap_indices(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ValueError("cannot bootstrap an empty training set")
    if k < 1:
        raise ValueError("sample size must be >= 1")
    return rng.integers(0, n, size=k)


def bootstrap_sample(S: Sequence[ModuleRecord], k: int, rng: np.random.Generator) -> list[ModuleRecord]:
    """Draw ``k`` records uniformly with replacement."""
    idx = bootstrap_indices(len(S), k, rng)
    return [S[i] for i in idx]


def _train_expert(spec, X, y, k, seed, j, t):
    draw_seq, fit_seq = expert_seed(seed, j, t).spawn(2)
    idx = bootstrap_indices(X.shape[0], k, np.random.default_rng(draw_seq))
    try:
        return fit_arrays(spec, X[idx], y[idx], fit_seq)
    except Exception as e:
        raise RuntimeError(f"training expert (j={j}, t={t}, {spec.kind.value}) failed: {e}") from e


def generate_ensemble(S: Sequence[ModuleRecord], config: EnsembleConfig, n_jobs: int = 1) -> EnsembleModel:
    """Train the ``|I| x T`` experts.

    ``n_jobs > 1`` trains them in worker processes; results are placed by
    their ``(j, t)`` index so the model does not depend on scheduling.
    """
    if not S:
        raise ValueError("empty training set")
    X, y, _ = as_arrays(S)
    k = config.sample_size or X.shape[0]
    jobs = [(spec, j, t) for j, spec in enumerate(config.inducers) for t in range(config.T)]
    if n_jobs == 1:
        flat = [_train_expert(spec, X, y, k, config.seed, j, t) for spec, j, t in jobs]
    else:
        from joblib import Parallel, delayed

        flat = Parallel(n_jobs=n_jobs)(delayed(_train_expert)(spec, X, y, k, config.seed, j, t) for spec, j, t in jobs)
    grid = tuple(tuple(flat[j * config.T:(j + 1) * config.T]) for j in range(len(config.inducers)))
    return EnsembleModel(grid, config)


def predict_matrix(model: EnsembleModel, V: Sequence[ModuleRecord]) -> PredictionMatrix:
    if not V:
        raise ValueError("empty validation set")
    X, y, _ = as_arrays(V)
    n_ind, T = len(model.classifiers), model.config.T
    scores = np.empty((n_ind, T, X.shape[0]))
    for j, row in enumerate(model.classifiers):
        for t, clf in enumerate(row):
            scores[j, t] = clf.predict_scores(X)
    labels = (scores >= 0.5).astype(np.int64)
    return PredictionMatrix(labels, scores, y)
