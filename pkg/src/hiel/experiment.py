"""Configuration-driven experiment runs.

A run evaluates every selected target release: split, ensemble, expert
predictions, weighted-majority combination, then the classification and
cost measures.  Everything is derived from the config file and its seed;
output files carry no timestamps, so identical configs give byte-identical
outputs.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import metrics
from .data import (
    DataError,
    Repository,
    SchemaConfig,
    align_common_metrics,
    build_cross_project_split,
    load_project_csv,
    parse_target,
)
from .ensemble import EnsembleConfig, PredictionMatrix, generate_ensemble, predict_matrix
from .metrics import CostConfig, NotApplicable
from .pwmv import PwmvConfig, mistake_bound, run_pwmv, write_trace_csv
from .stats import footer_table, summarize_comparison

log = logging.getLogger(__name__)

DEFAULT_BETAS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
DEFAULT_SIZES = (10, 20, 30, 40, 50, 60)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RepositorySource:
    name: str
    schema: SchemaConfig
    releases: tuple[tuple[Path, str, str], ...]  # (path, project, release)
    exclusions: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "schema": self.schema.to_dict(),
            "releases": [{"path": str(p), "project": pr, "release": r} for p, pr, r in self.releases],
            "exclusions": list(self.exclusions),
        }


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    repositories: tuple[RepositorySource, ...]
    targets: tuple[str, ...] | str = "all"
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    pwmv: PwmvConfig = field(default_factory=PwmvConfig)
    cost: CostConfig = field(default_factory=CostConfig)
    baselines: dict = field(default_factory=dict)  # model name -> Path
    output_dir: Path = Path("out")
    n_jobs: int = 1

    def to_dict(self) -> dict:
        ens = self.ensemble.to_dict()
        ens.pop("seed")
        return {
            "seed": self.seed,
            "repositories": [r.to_dict() for r in self.repositories],
            "targets": self.targets if isinstance(self.targets, str) else list(self.targets),
            "ensemble": ens,
            "pwmv": self.pwmv.to_dict(),
            "cost": {"delta": self.cost.delta},
            "baselines": {k: str(v) for k, v in self.baselines.items()},
            "output_dir": str(self.output_dir),
            "n_jobs": self.n_jobs,
        }

    def with_overrides(self, *, beta=None, seed=None, targets=None, output_dir=None) -> "ExperimentConfig":
        from dataclasses import replace

        cfg = self
        if beta is not None:
            cfg = replace(cfg, pwmv=replace(cfg.pwmv, beta=beta))
        if seed is not None:
            cfg = replace(cfg, seed=seed, ensemble=replace(cfg.ensemble, seed=seed),
                          pwmv=replace(cfg.pwmv, seed=seed))
        if targets is not None:
            cfg = replace(cfg, targets=tuple(targets))
        if output_dir is not None:
            cfg = replace(cfg, output_dir=Path(output_dir))
        return cfg


def _resolve(base: Path, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else (base / p)


def _repository_from_dict(d: dict, base: Path) -> RepositorySource:
    if "name" not in d:
        raise ConfigError("repository entry needs a name")
    schema = d.get("schema", {})
    if isinstance(schema, str):
        schema_path = _resolve(base, schema)
        if not schema_path.exists():
            raise ConfigError(f"schema file not found: {schema_path}")
        schema = SchemaConfig.from_json(schema_path)
    else:
        schema = SchemaConfig.from_dict(schema)
    releases = []
    for r in d.get("releases", []):
        path = _resolve(base, r["path"])
        if "project" in r:
            project, release = r["project"], r.get("release", "")
        else:
            project, release = parse_target(path.stem)
        releases.append((path, project, release))
    if "directory" in d:
        directory = _resolve(base, d["directory"])
        if not directory.is_dir():
            raise ConfigError(f"repository directory not found: {directory}")
        for path in sorted(directory.glob("*.csv")):
            project, release = parse_target(path.stem)
            releases.append((path, project, release))
    if not releases:
        raise ConfigError(f"repository {d['name']!r} lists no releases")
    for path, _, _ in releases:
        if not path.exists():
            raise ConfigError(f"dataset file not found: {path}")
    return RepositorySource(d["name"], schema, tuple(releases), tuple(d.get("exclusions", ())))


def config_from_dict(d: dict, base: Path = Path(".")) -> ExperimentConfig:
    """Build and validate a config; relative paths resolve against ``base``."""
    if "config" in d and "rows" in d:  # a run report: re-run from its echo
        d = d["config"]
    if "seed" not in d:
        raise ConfigError("config must set a seed")
    seed = int(d["seed"])
    if not d.get("repositories"):
        raise ConfigError("config lists no repositories")
    repos = tuple(_repository_from_dict(r, base) for r in d["repositories"])
    targets = d.get("targets", "all")
    if isinstance(targets, str) and targets != "all":
        targets = (targets,)
    elif not isinstance(targets, str):
        targets = tuple(targets)
    ens = dict(d.get("ensemble", {}))
    ens["seed"] = seed
    pw = dict(d.get("pwmv", {}))
    pw.setdefault("seed", seed)
    baselines = {}
    for name, path in d.get("baselines", {}).items():
        p = _resolve(base, path)
        if not p.exists():
            raise ConfigError(f"baseline file not found: {p}")
        baselines[name] = p
    try:
        return ExperimentConfig(
            seed=seed,
            repositories=repos,
            targets=targets,
            ensemble=EnsembleConfig.from_dict(ens),
            pwmv=PwmvConfig.from_dict(pw),
            cost=CostConfig(float(d.get("cost", {}).get("delta", 100.0))),
            baselines=baselines,
            output_dir=_resolve(base, d.get("output_dir", "out")),
            n_jobs=int(d.get("n_jobs", 1)),
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return config_from_dict(d, path.parent)


def load_repository(src: RepositorySource) -> Repository:
    releases = [load_project_csv(p, src.schema, project, release) for p, project, release in src.releases]
    return align_common_metrics(releases, src.exclusions, name=src.name)


def load_repositories(config: ExperimentConfig) -> list[Repository]:
    repos = [load_repository(s) for s in config.repositories]
    seen = {}
    for repo in repos:
        for r in repo.releases:
            if r.target_id in seen:
                raise DataError(f"target {r.target_id!r} appears in both {seen[r.target_id]!r} and {repo.name!r}")
            seen[r.target_id] = repo.name
    return repos


def select_targets(config: ExperimentConfig, repos: list[Repository]) -> list[tuple[Repository, str]]:
    everything = [(repo, r.target_id) for repo in repos for r in repo.releases]
    if config.targets == "all":
        return everything
    index = {tid: (repo, tid) for repo, tid in everything}
    missing = [t for t in config.targets if t not in index]
    if missing:
        raise DataError(f"unknown targets: {missing}")
    return [index[t] for t in config.targets]


def _safe(fn, *args):
    try:
        return fn(*args)
    except NotApplicable:
        return None


@dataclass
class TargetOutcome:
    row: dict
    matrix: PredictionMatrix
    combined_labels: np.ndarray


def evaluate_target(repo: Repository, target: str, config: ExperimentConfig) -> TargetOutcome:
    """The full pipeline for one target release."""
    split = build_cross_project_split(repo, target)
    model = generate_ensemble(split.training, config.ensemble, n_jobs=config.n_jobs)
    matrix = predict_matrix(model, split.validation)
    result = run_pwmv(matrix, config.pwmv)
    truth = matrix.truth
    cm = metrics.confusion(result.labels, truth)
    cost = metrics.cost_report(result.labels, split.validation, config.cost)
    expert_f = [_safe(metrics.f_measure, metrics.confusion(lab, truth)) for lab in matrix.flat_labels()]
    expert_f = [f for f in expert_f if f is not None]
    state = result.state
    n_ind, T = len(config.ensemble.inducers), config.ensemble.T
    row = {
        "repository": repo.name,
        "target": split.target_id,
        "modules": int(truth.size),
        "tp": cm.tp, "fp": cm.fp, "fn": cm.fn, "tn": cm.tn,
        "f_measure": _safe(metrics.f_measure, cm),
        "auc": _safe(metrics.auc, result.scores, truth),
        "ppc": cost.ppc,
        "pnpc": cost.pnpc,
        "for": cost.for_rate,
        **{k: v for k, v in cost.as_dict().items() if k not in ("ppc", "pnpc", "for_rate")},
        "n_experts": matrix.n_experts,
        "combined_mistakes": int((result.labels != truth).sum()),
        "expected_mistakes": state.expected_mistakes if config.pwmv.online else None,
        "best_expert_mistakes": state.best_expert_mistakes if config.pwmv.online else None,
        "mistake_bound": (mistake_bound(n_ind, T, config.pwmv.beta, state.best_expert_mistakes)
                          if config.pwmv.online else None),
        "expert_f_median": float(np.median(expert_f)) if expert_f else None,
        "expert_f_max": float(np.max(expert_f)) if expert_f else None,
    }
    return TargetOutcome(row, matrix, result.labels)


def run_target(config: ExperimentConfig, target: str, repos: list[Repository] | None = None) -> dict:
    repos = repos if repos is not None else load_repositories(config)
    for repo in repos:
        if any(r.target_id == target for r in repo.releases):
            return evaluate_target(repo, target, config).row
    raise DataError(f"unknown target {target!r}")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_json(path, obj) -> None:
    def default(o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        raise TypeError(type(o))

    text = json.dumps(obj, indent=2, default=default, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _json_clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def run_experiment(config: ExperimentConfig, write: bool = True, save_traces: bool = True) -> dict:
    """Run every selected target and (optionally) write the report files.

    Returns the report dict: ``config`` echo, ``seed``, ``rows`` and
    ``errors`` (one structured diagnostic per failed target).
    """
    repos = load_repositories(config)
    targets = select_targets(config, repos)
    out = Path(config.output_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)
        if save_traces:
            (out / "traces").mkdir(exist_ok=True)
    rows, errors = [], []
    for repo, tid in targets:
        log.info("target %s", tid)
        try:
            outcome = evaluate_target(repo, tid, config)
        except Exception as e:  # one bad target must not sink the rest
            errors.append({"target": tid, "error": type(e).__name__, "message": str(e),
                           "where": traceback.extract_tb(e.__traceback__)[-1].name})
            continue
        rows.append({k: _json_clean(v) for k, v in outcome.row.items()})
        if write and save_traces and config.pwmv.online:
            write_trace_csv(out / "traces" / f"{tid}.csv", outcome.matrix.flat_labels(), outcome.matrix.truth,
                            config.pwmv.beta)
    report = {"config": config.to_dict(), "seed": config.seed, "rows": rows, "errors": errors}
    if write:
        write_report_files(report, out)
    return report


def write_report_files(report: dict, out: Path) -> None:
    rows = report["rows"]
    write_json(out / "report.json", report)
    if rows:
        header = list(rows[0])
        write_csv(out / "run_report.csv", header, ([r[h] for h in header] for r in rows))
    cost_rows = [
        [r["target"], r["total_loc"], r["defects"], r["saved_budget"], r["remaining_service_time"],
         r["project_hours"], r["original_editing_rate"], r["editing_rate"], r["decreased_editing_rate"]]
        for r in rows
    ]
    write_csv(out / "cost_table.csv", metrics.TABLE_COLUMNS, cost_rows)
    measure_rows = [
        [r["target"], r["percent_saved_budget"] * 100, r["percent_remaining_edits"] * 100,
         None if r["for"] is None else r["for"] * 100]
        for r in rows
    ]
    write_csv(out / "proposed_measures.csv", ["Project", "PSB (%)", "PRE (%)", "FOR (%)"], measure_rows)


def beta_sweep(config: ExperimentConfig, betas=DEFAULT_BETAS, set_sizes=DEFAULT_SIZES, write: bool = True) -> list:
    """F-measure of the combined prediction per (beta, set size, target).

    The ensemble is trained once per target; a set of ``s`` experts is the
    ``PredictionMatrix.subset(s)`` of the full matrix.
    """
    betas = [float(b) for b in betas]
    for b in betas:
        if not 0 < b < 1:
            raise ValueError(f"beta {b} outside (0, 1)")
    size = config.ensemble.size
    for s in set_sizes:
        if not 1 <= s <= size:
            raise ValueError(f"set size {s} exceeds the ensemble of {size}")
    repos = load_repositories(config)
    rows = []
    from dataclasses import replace

    for repo, tid in select_targets(config, repos):
        split = build_cross_project_split(repo, tid)
        model = generate_ensemble(split.training, config.ensemble, n_jobs=config.n_jobs)
        full = predict_matrix(model, split.validation)
        for b in betas:
            for s in set_sizes:
                res = run_pwmv(full.subset(s), replace(config.pwmv, beta=b))
                f = _safe(metrics.f_measure, metrics.confusion(res.labels, full.truth))
                rows.append([tid, b, s, f])
    if write:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "sweep.csv", ["target", "beta", "set_size", "f_measure"], rows)
    return rows


def read_scores_csv(path) -> dict[str, dict[str, float]]:
    """Per-target scores from a CSV with a ``target`` column (``project`` also accepted)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty score file")
        key = next((k for k in ("target", "project", "Project") if k in reader.fieldnames), None)
        if key is None:
            raise DataError(f"{path}: needs a 'target' column")
        out = {}
        for i, row in enumerate(reader, start=1):
            scores = {}
            for k, v in row.items():
                if k == key or v is None or v.strip() == "":
                    continue
                try:
                    scores[k] = float(v)
                except ValueError:
                    raise DataError(f"{path}: row {i}: non-numeric score {v!r} in column {k!r}") from None
            out[row[key]] = scores
    return out


COMPARABLE = ("f_measure", "auc", "ppc", "pnpc", "for")


def compare_models(report: dict, baselines: dict[str, Any]) -> dict:
    """Compare HIEL's per-target scores with each baseline score file.

    Returns ``{metric: {model: ComparisonRow}}`` plus, under ``"_per_target"``,
    the aligned per-target scores and under ``"_excluded"`` the unmatched
    target ids per model.
    """
    hiel = {r["target"]: r for r in report["rows"]}
    tables: dict[str, dict] = {}
    per_target: dict[str, dict] = {}
    excluded: dict[str, list] = {}
    for model, src in baselines.items():
        scores = src if isinstance(src, dict) else read_scores_csv(src)
        unmatched = sorted(set(scores) ^ set(hiel))
        if unmatched:
            log.warning("%s: targets without a counterpart excluded: %s", model, unmatched)
            excluded[model] = unmatched
        common = [t for t in hiel if t in scores]  # HIEL report order
        if not common:
            raise DataError(f"{model}: no targets in common with the run report")
        metrics_here = [m for m in COMPARABLE if all(m in scores[t] for t in common)]
        for m in metrics_here:
            pairs = [(t, hiel[t][m], scores[t][m]) for t in common if hiel[t][m] is not None]
            if not pairs:
                continue
            h = [p[1] for p in pairs]
            o = [p[2] for p in pairs]
            tables.setdefault(m, {})[model] = summarize_comparison(h, o)
            pt = per_target.setdefault(m, {})
            for t, hv, ov in pairs:
                pt.setdefault(t, {"HIEL": hv})[model] = ov
    if not tables:
        raise DataError("no metric shared between the run report and the baselines")
    return {**tables, "_per_target": per_target, "_excluded": excluded}


def write_comparison(result: dict, out) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for metric, table in result.items():
        if metric.startswith("_"):
            continue
        footer = footer_table(table)
        write_csv(out / f"comparison_{metric}.csv", footer[0], footer[1:])
        pt = result["_per_target"][metric]
        models = list(table)
        write_csv(out / f"comparison_{metric}_per_target.csv", ["target", *models, "HIEL"],
                  ([t, *(pt[t].get(m) for m in models), pt[t]["HIEL"]] for t in pt))
        summary[metric] = {
            m: {
                "hiel_avg": row.hiel_avg,
                "other_avg": row.other_avg,
                "improvement_percent": row.improvement_percent,
                "wins": row.wins, "ties": row.ties, "losses": row.losses,
                "p_value": row.p_value,
                "wilcoxon_method": row.wilcoxon.method,
                "wilcoxon_degenerate": row.wilcoxon.degenerate,
                "cliffs_delta": row.cliffs.delta,
                "effect": row.cliffs.category,
            }
            for m, row in table.items()
        }
    write_json(out / "comparison.json", {"tables": summary, "excluded": result["_excluded"]})
