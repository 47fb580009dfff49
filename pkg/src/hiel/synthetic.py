"""Seeded synthetic defect repository with a planted signal.

Modules get six log-normal size/complexity metrics; each project shifts the
metric distributions a little, and defect-proneness follows a logistic
model of the log metrics.  The bundled ``datasets/synthetic`` directory was
written by :func:`write_repository` with the default arguments.
"""

from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

import numpy as np

METRICS = ("wmc", "cbo", "rfc", "lcom", "dit", "loc")
DEFAULT_RELEASES = (
    ("alpha", "1.0", 300),
    ("beta", "2.0", 300),
    ("gamma", "0.5", 300),
)
SCHEMA = {"label_column": "bug", "loc_column": "loc", "id_columns": ["name"], "feature_columns": "auto",
          "exclusions": []}


def _release_rows(project_shift, n, rng, prefix):
    base_log_mean = np.array([2.0, 1.5, 3.0, 2.5, 0.8, 5.5]) + project_shift
    z = rng.normal(size=(n, len(METRICS)))
    # size drives the other metrics
    z[:, :5] += 0.6 * z[:, 5:6]
    logs = base_log_mean + 0.6 * z
    values = np.exp(logs)
    values[:, :5] = np.round(values[:, :5])
    values[:, 5] = np.maximum(1, np.round(values[:, 5]))
    logit = -1.4 + 1.6 * z[:, 0] + 1.1 * z[:, 1] + 0.9 * z[:, 5] - 0.5 * z[:, 4]
    defective = rng.random(n) < 1.0 / (1.0 + np.exp(-logit))
    bugs = np.where(defective, 1 + rng.poisson(0.8, size=n), 0)
    rows = []
    for i in range(n):
        rows.append([f"{prefix}.M{i:04d}", *(int(v) for v in values[i]), int(bugs[i])])
    return rows


def write_repository(out_dir, seed: int = 20240611, releases=DEFAULT_RELEASES) -> list[Path]:
    """Write one CSV per release plus ``schema.json`` and ``config.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    shifts = {}
    paths = []
    for project, release, n in releases:
        if project not in shifts:
            shifts[project] = rng.normal(0.0, 0.25, size=len(METRICS))
        rows = _release_rows(shifts[project], n, rng, f"{project}.{release}")
        path = out / f"{project}-{release}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["name", *METRICS, "bug"])
            w.writerows(rows)
        paths.append(path)
    (out / "schema.json").write_text(json.dumps(SCHEMA, indent=2) + "\n", encoding="utf-8")
    config = {
        "seed": 11,
        "repositories": [{"name": "synthetic", "schema": "schema.json", "directory": "."}],
        "targets": "all",
        "ensemble": {"T": 10},
        "pwmv": {"beta": 0.1, "mode": "deterministic", "online": True},
        "cost": {"delta": 100},
        "output_dir": "out",
    }
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    return paths


def bundled_path() -> Path:
    """Directory of the bundled synthetic repository."""
    return Path(str(resources.files("hiel") / "datasets" / "synthetic"))
