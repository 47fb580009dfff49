"""Per-release defect datasets and the leave-one-target-project-out split.

One CSV file holds one release: a header row, then one row per module.
The :class:`SchemaConfig` names the label (defect count), LoC and identifier
columns; every other column is a metric unless ``feature_columns`` lists
them explicitly.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)


class DataError(ValueError):
    """Raised for malformed datasets, schemas and splits."""


class SchemaError(DataError):
    pass


@dataclass(frozen=True)
class SchemaConfig:
    label_column: str = "bug"
    loc_column: str = "loc"
    id_columns: tuple[str, ...] = ("name",)
    feature_columns: tuple[str, ...] | str = "auto"
    exclusions: tuple[str, ...] = ()
    # "error" aborts the load on the first unparseable row; "skip" drops and logs
    bad_rows: str = "error"

    def __post_init__(self):
        if self.bad_rows not in ("error", "skip"):
            raise SchemaError(f"bad_rows must be 'error' or 'skip', got {self.bad_rows!r}")
        object.__setattr__(self, "id_columns", tuple(self.id_columns))
        object.__setattr__(self, "exclusions", tuple(self.exclusions))
        if self.feature_columns != "auto":
            object.__setattr__(self, "feature_columns", tuple(self.feature_columns))

    @classmethod
    def from_dict(cls, d: dict) -> "SchemaConfig":
        known = {"label_column", "loc_column", "id_columns", "feature_columns", "exclusions", "bad_rows"}
        unknown = set(d) - known
        if unknown:
            raise SchemaError(f"unknown schema keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "SchemaConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        fc = self.feature_columns
        return {
            "label_column": self.label_column,
            "loc_column": self.loc_column,
            "id_columns": list(self.id_columns),
            "feature_columns": fc if fc == "auto" else list(fc),
            "exclusions": list(self.exclusions),
            "bad_rows": self.bad_rows,
        }


@dataclass(frozen=True, eq=False)
class ModuleRecord:
    id: str
    features: np.ndarray
    loc: int
    label: int
    project: str = ""
    release: str = ""

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        if self.loc < 0:
            raise DataError(f"module {self.id!r}: negative loc {self.loc}")
        if self.label not in (0, 1):
            raise DataError(f"module {self.id!r}: label must be 0 or 1, got {self.label}")

    def __eq__(self, other):
        if not isinstance(other, ModuleRecord):
            return NotImplemented
        return (
            self.id == other.id
            and self.loc == other.loc
            and self.label == other.label
            and self.project == other.project
            and self.release == other.release
            and np.array_equal(self.features, other.features)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ProjectRelease:
    project_name: str
    release_id: str
    modules: tuple[ModuleRecord, ...]
    metric_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "modules", tuple(self.modules))
        object.__setattr__(self, "metric_names", tuple(self.metric_names))
        if not self.modules:
            raise DataError(f"{self.target_id}: empty release")
        d = len(self.metric_names)
        for m in self.modules:
            if m.features.shape != (d,):
                raise DataError(
                    f"{self.target_id}: module {m.id!r} has {m.features.shape[0]} features, expected {d}"
                )

    def __eq__(self, other):
        if not isinstance(other, ProjectRelease):
            return NotImplemented
        return (
            self.project_name == other.project_name
            and self.release_id == other.release_id
            and self.metric_names == other.metric_names
            and self.modules == other.modules
        )

    __hash__ = None

    @property
    def target_id(self) -> str:
        return format_target(self.project_name, self.release_id)

    @property
    def defect_count(self) -> int:
        return sum(m.label for m in self.modules)

    @property
    def percent_defects(self) -> float:
        return 100.0 * self.defect_count / len(self.modules)

    @property
    def total_loc(self) -> int:
        return sum(m.loc for m in self.modules)

    def project(self, names: Sequence[str]) -> "ProjectRelease":
        """Return a copy whose feature vectors follow the order of ``names``."""
        index = {n: i for i, n in enumerate(self.metric_names)}
        try:
            cols = [index[n] for n in names]
        except KeyError as e:
            raise DataError(f"{self.target_id}: metric {e.args[0]!r} not present") from None
        modules = tuple(
            ModuleRecord(m.id, m.features[cols], m.loc, m.label, m.project, m.release) for m in self.modules
        )
        return ProjectRelease(self.project_name, self.release_id, modules, tuple(names))


@dataclass(frozen=True)
class Repository:
    name: str
    releases: tuple[ProjectRelease, ...]
    aligned_metrics: tuple[str, ...]

    def projects(self) -> dict[str, list[ProjectRelease]]:
        out: dict[str, list[ProjectRelease]] = {}
        for r in self.releases:
            out.setdefault(r.project_name, []).append(r)
        return out

    def targets(self) -> list[tuple[str, str]]:
        return [(r.project_name, r.release_id) for r in self.releases]

    def find(self, target) -> ProjectRelease:
        project, release = parse_target(target, self) if isinstance(target, str) else target
        for r in self.releases:
            if r.project_name == project and r.release_id == release:
                return r
        raise DataError(f"unknown target {format_target(project, release)!r} in repository {self.name!r}")


@dataclass(frozen=True)
class SplitPair:
    training: tuple[ModuleRecord, ...]
    validation: tuple[ModuleRecord, ...]
    target: tuple[str, str]
    metric_names: tuple[str, ...] = field(default=())

    @property
    def target_id(self) -> str:
        return format_target(*self.target)


def format_target(project: str, release: str) -> str:
    return f"{project}-{release}" if release else project


def parse_target(text: str, repo: Repository | None = None) -> tuple[str, str]:
    """Split ``"Ant-1.3"`` into ``("Ant", "1.3")``.

    With a repository at hand the id is matched against its releases, so
    project names containing dashes resolve correctly.
    """
    if repo is not None:
        for r in repo.releases:
            if r.target_id == text:
                return r.project_name, r.release_id
        raise DataError(f"unknown target {text!r} in repository {repo.name!r}")
    project, sep, release = text.rpartition("-")
    if not sep:
        return text, ""
    return project, release


def _parse_float(cell: str) -> float:
    v = float(cell)
    if not math.isfinite(v):
        raise ValueError(cell)
    return v


def load_project_csv(path, schema: SchemaConfig, project_name: str | None = None,
                     release_id: str | None = None) -> ProjectRelease:
    """Load one release from a header-labelled CSV file.

    The label column holds defect counts and is binarised as ``count > 0``.
    When ``project_name``/``release_id`` are omitted they are taken from the
    file stem, split on its last dash (``ant-1.3.csv`` -> ``ant``, ``1.3``).
    """
    path = Path(path)
    if project_name is None:
        project_name, inferred_release = parse_target(path.stem)
        if release_id is None:
            release_id = inferred_release
    release_id = release_id or ""
    tid = format_target(project_name, release_id)

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)

    col = {h: i for i, h in enumerate(header)}
    required = [schema.label_column, schema.loc_column, *schema.id_columns]
    if schema.feature_columns != "auto":
        required += list(schema.feature_columns)
    for name in required:
        if name not in col:
            raise SchemaError(f"{path}: missing column {name!r}")

    if schema.feature_columns == "auto":
        skip = {schema.label_column, *schema.id_columns}
        feature_names = [h for h in header if h not in skip]
    else:
        feature_names = list(schema.feature_columns)
    feature_names = [h for h in feature_names if h not in set(schema.exclusions)]
    if not feature_names:
        raise SchemaError(f"{path}: no feature columns left")
    feat_idx = [col[h] for h in feature_names]

    modules = []
    for rowno, row in enumerate(rows, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            if len(row) != len(header):
                raise ValueError(f"expected {len(header)} cells, got {len(row)}")
            feats = [_parse_float(row[i]) for i in feat_idx]
            loc_v = _parse_float(row[col[schema.loc_column]])
            bugs = _parse_float(row[col[schema.label_column]])
            if loc_v < 0 or loc_v != int(loc_v):
                raise ValueError(f"loc must be a nonnegative integer, got {row[col[schema.loc_column]]!r}")
        except ValueError as e:
            msg = f"{path}: row {rowno}: unparseable cell ({e})"
            if schema.bad_rows == "skip":
                log.warning("%s; row skipped", msg)
                continue
            raise DataError(msg) from None
        ident = "/".join(row[col[c]].strip() for c in schema.id_columns) or str(rowno)
        modules.append(ModuleRecord(ident, np.array(feats), int(loc_v), int(bugs > 0), project_name, release_id))

    if not modules:
        raise DataError(f"{tid}: empty release")
    return ProjectRelease(project_name, release_id, tuple(modules), tuple(feature_names))


def align_common_metrics(releases: Sequence[ProjectRelease], exclusions: Sequence[str] = (),
                         name: str = "repository") -> Repository:
    """Re-project every release onto the metrics they all share.

    The aligned order is the first release's column order.
    """
    if not releases:
        raise DataError("no releases to align")
    common = set(releases[0].metric_names)
    for r in releases[1:]:
        common &= set(r.metric_names)
    if not common:
        raise DataError("releases share no metrics")
    drop = set(exclusions)
    aligned = tuple(m for m in releases[0].metric_names if m in common and m not in drop)
    if not aligned:
        raise DataError("exclusions remove every common metric")
    return Repository(name, tuple(r.project(aligned) for r in releases), aligned)


def build_cross_project_split(repo: Repository, target) -> SplitPair:
    """Train on every other project; test on the one target release.

    Releases of the target project other than the test release are left out
    of the training set as well.
    """
    release = repo.find(target)
    training = tuple(m for r in repo.releases if r.project_name != release.project_name for m in r.modules)
    if not training:
        raise DataError("no source projects")
    return SplitPair(training, release.modules, (release.project_name, release.release_id), repo.aligned_metrics)


def as_arrays(modules: Sequence[ModuleRecord]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack records into ``(X, y, loc)`` arrays."""
    X = np.vstack([m.features for m in modules])
    y = np.fromiter((m.label for m in modules), dtype=np.int64, count=len(modules))
    loc = np.fromiter((m.loc for m in modules), dtype=np.int64, count=len(modules))
    return X, y, loc
