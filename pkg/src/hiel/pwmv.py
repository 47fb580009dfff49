"""(Probabilistic) weighted majority voting over the ensemble's experts.

Each expert starts with weight 1 and has it multiplied by ``beta`` whenever
it mislabels an instance, so after ``eps[e]`` mistakes its weight is exactly
``beta ** eps[e]``.  The state stores the mistake counts and derives the
weights from them, which keeps weights exact and lets the vote be evaluated
on weights rescaled by the best expert (long streams would otherwise
underflow every weight to zero).
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .ensemble import PredictionMatrix

MODES = ("deterministic", "probabilistic")


@dataclass(frozen=True)
class PwmvConfig:
    beta: float = 0.1
    mode: str = "deterministic"
    online: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    def to_dict(self) -> dict:
        return {"beta": self.beta, "mode": self.mode, "online": self.online, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "PwmvConfig":
        return cls(float(d.get("beta", 0.1)), d.get("mode", "deterministic"), bool(d.get("online", True)),
                   int(d.get("seed", 0)))


@functools.lru_cache(maxsize=32)
def _power_table(beta: float, size: int) -> np.ndarray:
    # scalar libm pow; numpy's vectorised pow can differ in the last bit
    return np.array([math.pow(beta, k) for k in range(size)])


def _powers(beta, exponents):
    e = np.asarray(exponents, dtype=np.int64)
    top = int(e.max()) + 1 if e.size else 1
    return _power_table(beta, 1 << (top - 1).bit_length())[e]


@dataclass(frozen=True, eq=False)
class PwmvState:
    beta: float
    mistakes: np.ndarray              # eps[e], per-expert mistake counts
    trial: int = 0
    expected_mistakes: float = 0.0    # M = sum of F_i
    last_wrong_fraction: float | None = None  # F_i of the latest online trial

    @classmethod
    def initial(cls, n: int, beta: float) -> "PwmvState":
        if n < 1:
            raise ValueError("need at least one expert")
        return cls(beta, np.zeros(n, dtype=np.int64))

    @property
    def n_experts(self) -> int:
        return self.mistakes.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return _powers(self.beta, self.mistakes)

    @property
    def total_weight(self) -> float:
        return math.fsum(self.weights)

    def relative_weights(self) -> np.ndarray:
        """Weights divided by the best expert's weight; the largest is 1."""
        return _powers(self.beta, self.mistakes - self.mistakes.min())

    @property
    def best_expert_mistakes(self) -> int:
        return int(self.mistakes.min())


@dataclass(frozen=True)
class CombinedPrediction:
    label: int
    class_weight_fraction: float  # defective-class weight / total weight


@dataclass
class PwmvResult:
    labels: np.ndarray
    scores: np.ndarray
    state: PwmvState
    trace: list = field(default_factory=list)  # F_i per trial (empty offline)


def pwmv_step(state: PwmvState, expert_labels, true_label=None, config: PwmvConfig = PwmvConfig(),
              rng: np.random.Generator | None = None) -> tuple[CombinedPrediction, PwmvState]:
    """Combine one instance's expert labels and, online, penalise the mistaken experts.

    Online, the weight fraction on wrong labels is added to
    ``expected_mistakes`` and kept as ``last_wrong_fraction``.
    """
    labels = np.asarray(expert_labels)
    if labels.shape != (state.n_experts,):
        raise ValueError(f"expected {state.n_experts} expert labels, got shape {labels.shape}")
    if config.online and true_label is None:
        raise ValueError("online mode needs the true label")

    w = state.relative_weights()
    total = math.fsum(w)
    w1 = math.fsum(w[labels == 1])
    w0 = math.fsum(w[labels != 1])
    frac = w1 / total
    if config.mode == "deterministic":
        label = int(w1 >= w0)
    else:
        if rng is None:
            raise ValueError("probabilistic mode needs a random generator")
        label = int(rng.random() < frac)
    pred = CombinedPrediction(label, frac)

    if not config.online:
        return pred, replace(state, trial=state.trial + 1, last_wrong_fraction=None)
    wrong = labels != true_label
    f_i = (w1 if true_label == 0 else w0) / total
    new_state = replace(
        state,
        mistakes=state.mistakes + wrong,
        trial=state.trial + 1,
        expected_mistakes=state.expected_mistakes + f_i,
        last_wrong_fraction=f_i,
    )
    return pred, new_state


def run_pwmv(matrix: PredictionMatrix | np.ndarray, config: PwmvConfig = PwmvConfig(), truth=None) -> PwmvResult:
    """Run the combiner over the instances in dataset order.

    ``matrix`` is a :class:`PredictionMatrix` or a plain experts-by-instances
    label array (``truth`` is then required for online mode).
    """
    if isinstance(matrix, PredictionMatrix):
        labels, truth = matrix.flat_labels(), matrix.truth
    else:
        labels = np.asarray(matrix)
        if labels.ndim != 2:
            raise ValueError("expected an experts x instances array")
    n, m = labels.shape
    if n == 0 or m == 0:
        raise ValueError("empty prediction stream")
    if config.online and truth is None:
        raise ValueError("online mode needs true labels")

    rng = np.random.default_rng(config.seed) if config.mode == "probabilistic" else None
    state = PwmvState.initial(n, config.beta)
    out_labels = np.empty(m, dtype=np.int64)
    out_scores = np.empty(m)
    trace = []
    for i in range(m):
        y = int(truth[i]) if config.online else None
        pred, state = pwmv_step(state, labels[:, i], y, config, rng)
        out_labels[i], out_scores[i] = pred.label, pred.class_weight_fraction
        if config.online:
            trace.append(state.last_wrong_fraction)
    return PwmvResult(out_labels, out_scores, state, trace)


def mistake_bound(n_inducers: int, T: int, beta: float, epsilon: int) -> float:
    """Upper bound on the expected mistakes of the online combiner.

    ``(eps * ln(1/beta) + ln(n_inducers) + ln(T)) / (1 - beta)``, natural logs.
    """
    if n_inducers < 1 or T < 1:
        raise ValueError("n_inducers and T must be >= 1")
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    return (epsilon * math.log(1.0 / beta) + math.log(n_inducers) + math.log(T)) / (1.0 - beta)


def trace_rows(labels: np.ndarray, truth, beta: float):
    """Yield ``(trial, F_i, M_cumulative, bound_at_trial)`` for an online run.

    The bound uses the best expert's mistake count after each trial and
    treats all ``n`` experts as one inducer with ``T = n``.
    """
    labels = np.asarray(labels)
    state = PwmvState.initial(labels.shape[0], beta)
    cfg = PwmvConfig(beta=beta, online=True)
    for i in range(labels.shape[1]):
        _, state = pwmv_step(state, labels[:, i], int(truth[i]), cfg)
        bound = mistake_bound(1, state.n_experts, beta, state.best_expert_mistakes)
        yield i + 1, state.last_wrong_fraction, state.expected_mistakes, bound


def write_trace_csv(path, labels, truth, beta: float) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "F_i", "M_cumulative", "bound_at_trial"])
        for trial, f_i, m, bound in trace_rows(labels, truth, beta):
            w.writerow([trial, repr(f_i), repr(m), repr(bound)])
