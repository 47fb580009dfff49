"""Hybrid-inducer ensemble learning for cross-project defect prediction."""

from .data import (
    DataError,
    ModuleRecord,
    ProjectRelease,
    Repository,
    SchemaConfig,
    SplitPair,
    align_common_metrics,
    build_cross_project_split,
    load_project_csv,
)
from .ensemble import EnsembleConfig, EnsembleModel, PredictionMatrix, bootstrap_sample, generate_ensemble, predict_matrix
from .inducers import InducerSpec, Kind, default_inducers, predict, train
from .metrics import CostConfig, CostReport, NotApplicable, auc, confusion, cost_report, f_measure, for_rate, pnpc, ppc
from .pwmv import PwmvConfig, PwmvState, mistake_bound, pwmv_step, run_pwmv
from .stats import cliffs_delta, summarize_comparison, wilcoxon_one_sample

__version__ = "0.1.0"
