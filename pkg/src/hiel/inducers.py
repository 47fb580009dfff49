"""The six base inducers of the hybrid ensemble.

Every inducer standardises its own training sample (z-score, zero-variance
columns keep a unit scale) and exposes a defect probability in ``[0, 1]``;
the hard label is ``score >= 0.5``.  A sample holding a single class always
yields a constant predictor.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.special import expit

from .data import ModuleRecord, as_arrays


class Kind(str, enum.Enum):
    LR = "LogisticRegression"
    KNN = "KNearestNeighbours"
    SVM = "LinearSVM"
    NB = "NaiveBayes"
    NN = "NeuralNetwork"
    DT = "DecisionTree"


DEFAULTS: dict[Kind, dict[str, Any]] = {
    Kind.LR: {"max_iter": 5000, "tol": 1e-6, "l2": 1e-6},
    Kind.KNN: {"k": 11},
    Kind.SVM: {"C": 1.0, "n_iter": 2000, "eta0": 1.0},
    Kind.NB: {"laplace": 1.0, "var_smoothing": 1e-9},
    Kind.NN: {
        "hidden": (10, 5),
        "max_steps": 100_000,
        "threshold": 0.5,
        "eta_plus": 1.2,
        "eta_minus": 0.5,
        "delta0": 0.1,
        "delta_min": 1e-6,
        "delta_max": 50.0,
    },
    Kind.DT: {"min_leaf": 5, "max_depth": 30},
}


@dataclass(frozen=True)
class InducerSpec:
    kind: Kind
    params: dict = field(default_factory=dict)
    standardize: bool = True

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        unknown = set(self.params) - set(DEFAULTS[kind])
        if unknown:
            raise ValueError(f"{kind.value}: unknown hyperparameters {sorted(unknown)}")
        merged = {**DEFAULTS[kind], **self.params}
        if kind is Kind.NN:
            merged["hidden"] = tuple(int(h) for h in merged["hidden"])
            if len(merged["hidden"]) != 2:
                raise ValueError("NeuralNetwork needs exactly two hidden layer sizes")
        if kind is Kind.KNN and merged["k"] < 1:
            raise ValueError("k must be positive")
        object.__setattr__(self, "params", merged)

    def to_dict(self) -> dict:
        params = {k: list(v) if isinstance(v, tuple) else v for k, v in self.params.items()}
        return {"kind": self.kind.value, "params": params, "standardize": self.standardize}

    @classmethod
    def from_dict(cls, d: dict) -> "InducerSpec":
        return cls(Kind(d["kind"]), dict(d.get("params", {})), bool(d.get("standardize", True)))


def default_inducers() -> list[InducerSpec]:
    """LR, k-NN, SVM, NB, NN and DT with their default settings."""
    return [InducerSpec(k) for k in (Kind.LR, Kind.KNN, Kind.SVM, Kind.NB, Kind.NN, Kind.DT)]


@dataclass(frozen=True)
class Prediction:
    label: int
    score: float


# --------------------------------------------------------------------------
# Models.  Each works on standardised arrays and returns P(defective).
# --------------------------------------------------------------------------


class ConstantModel:
    name = "constant"

    def __init__(self, p: float):
        self.p = float(p)

    def scores(self, X):
        return np.full(X.shape[0], self.p)

    def state(self):
        return {"p": self.p}

    @classmethod
    def from_state(cls, s):
        return cls(s["p"])


def logistic_loss_grad(theta, X, y, l2):
    """Mean negative log-likelihood of a logit model plus an L2 term.

    ``theta`` is ``[w_1..w_d, b]``; the intercept is not penalised.
    """
    w, b = theta[:-1], theta[-1]
    z = X @ w + b
    # log(1 + exp(z)) - y z, evaluated stably
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w)
    r = expit(z) - y
    grad = np.empty_like(theta)
    grad[:-1] = X.T @ r / X.shape[0] + l2 * w
    grad[-1] = r.mean()
    return loss, grad


class LogisticModel:
    name = "logistic"

    def __init__(self, coef, intercept, n_iter=0):
        self.coef = np.asarray(coef, dtype=float)
        self.intercept = float(intercept)
        self.n_iter = n_iter

    @classmethod
    def fit(cls, X, y, rng, max_iter, tol, l2):
        theta = np.zeros(X.shape[1] + 1)
        f, g = logistic_loss_grad(theta, X, y, l2)
        step = 1.0
        it = 0
        for it in range(1, max_iter + 1):
            if np.max(np.abs(g)) < tol:
                break
            gg = g @ g
            step = min(step * 2.0, 1e6)
            while True:
                cand = theta - step * g
                fc, gc = logistic_loss_grad(cand, X, y, l2)
                if fc <= f - 1e-4 * step * gg or step < 1e-12:
                    break
                step *= 0.5
            theta, f, g = cand, fc, gc
        return cls(theta[:-1], theta[-1], it)

    def scores(self, X):
        return expit(X @ self.coef + self.intercept)

    def state(self):
        return {"coef": self.coef.tolist(), "intercept": self.intercept, "n_iter": self.n_iter}

    @classmethod
    def from_state(cls, s):
        return cls(s["coef"], s["intercept"], s.get("n_iter", 0))


class KNNModel:
    name = "knn"

    def __init__(self, X, y, k):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=np.int64)
        self.k = int(k)

    @classmethod
    def fit(cls, X, y, rng, k):
        return cls(X.copy(), y.copy(), k)

    def scores(self, X, chunk=256):
        k = min(self.k, self.X.shape[0])
        out = np.empty(X.shape[0])
        for start in range(0, X.shape[0], chunk):
            q = X[start:start + chunk]
            d2 = ((q[:, None, :] - self.X[None, :, :]) ** 2).sum(axis=2)
            # stable sort: equal distances keep training-row order
            nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
            out[start:start + chunk] = self.y[nearest].mean(axis=1)
        return out

    def state(self):
        return {"X": self.X.tolist(), "y": self.y.tolist(), "k": self.k}

    @classmethod
    def from_state(cls, s):
        X = np.asarray(s["X"], dtype=float).reshape(len(s["y"]), -1)
        return cls(X, s["y"], s["k"])


def svm_objective(w, b, X, ys, lam):
    margins = ys * (X @ w + b)
    return 0.5 * lam * (w @ w) + np.mean(np.maximum(0.0, 1.0 - margins))


class LinearSVMModel:
    """Primal soft-margin linear SVM.

    Minimises ``lam/2 |w|^2 + mean(hinge)`` with ``lam = 1/(C n)``, the
    usual ``1/2 |w|^2 + C sum(hinge)`` objective divided by ``C n``.
    Full-batch subgradient steps of size ``eta0/sqrt(t)``; the iterate with
    the lowest objective is kept.
    """

    name = "svm"

    def __init__(self, coef, intercept):
        self.coef = np.asarray(coef, dtype=float)
        self.intercept = float(intercept)

    @classmethod
    def fit(cls, X, y, rng, C, n_iter, eta0):
        n, d = X.shape
        ys = 2.0 * y - 1.0
        lam = 1.0 / (C * n)
        w, b = np.zeros(d), 0.0
        best = (svm_objective(w, b, X, ys, lam), w.copy(), b)
        for t in range(1, n_iter + 1):
            active = ys * (X @ w + b) < 1.0
            gw = lam * w - (ys[active] @ X[active]) / n
            gb = -ys[active].sum() / n
            eta = eta0 / np.sqrt(t)
            w = w - eta * gw
            b = b - eta * gb
            obj = svm_objective(w, b, X, ys, lam)
            if obj < best[0]:
                best = (obj, w.copy(), b)
        return cls(best[1], best[2])

    def margin(self, X):
        return X @ self.coef + self.intercept

    def scores(self, X):
        return expit(self.margin(X))

    def state(self):
        return {"coef": self.coef.tolist(), "intercept": self.intercept}

    @classmethod
    def from_state(cls, s):
        return cls(s["coef"], s["intercept"])


class GaussianNBModel:
    """Gaussian class-conditionals with Laplace-smoothed class priors."""

    name = "nb"

    def __init__(self, log_prior, mean, var):
        self.log_prior = np.asarray(log_prior, dtype=float)
        self.mean = np.asarray(mean, dtype=float)
        self.var = np.asarray(var, dtype=float)

    @classmethod
    def fit(cls, X, y, rng, laplace, var_smoothing):
        n = X.shape[0]
        counts = np.array([(y == 0).sum(), (y == 1).sum()], dtype=float)
        prior = (counts + laplace) / (n + 2 * laplace)
        eps = max(var_smoothing * float(np.var(X, axis=0).max()), 1e-12)
        mean = np.vstack([X[y == c].mean(axis=0) for c in (0, 1)])
        var = np.vstack([X[y == c].var(axis=0) for c in (0, 1)]) + eps
        return cls(np.log(prior), mean, var)

    def log_joint(self, X):
        ll = -0.5 * (np.log(2 * np.pi * self.var)[None] + (X[:, None, :] - self.mean[None]) ** 2 / self.var[None])
        return self.log_prior[None, :] + ll.sum(axis=2)

    def scores(self, X):
        lj = self.log_joint(X)
        return np.exp(lj[:, 1] - np.logaddexp(lj[:, 0], lj[:, 1]))

    def state(self):
        return {"log_prior": self.log_prior.tolist(), "mean": self.mean.tolist(), "var": self.var.tolist()}

    @classmethod
    def from_state(cls, s):
        return cls(s["log_prior"], s["mean"], s["var"])


def _unpack(theta, sizes):
    mats, pos = [], 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = theta[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = theta[pos:pos + fan_out]
        pos += fan_out
        mats.append((W, b))
    return mats


def n_weights(sizes):
    return sum((a + 1) * b for a, b in zip(sizes[:-1], sizes[1:]))


def network_forward(theta, X, sizes):
    a = X
    for W, b in _unpack(theta, sizes):
        a = expit(a @ W + b)
    return a[:, 0]


def network_error_grad(theta, X, y, sizes):
    """Sum-of-squares error ``0.5 * sum((out - y)^2)`` and its gradient."""
    layers = _unpack(theta, sizes)
    acts = [X]
    for W, b in layers:
        acts.append(expit(acts[-1] @ W + b))
    out = acts[-1][:, 0]
    diff = out - y
    err = 0.5 * (diff @ diff)
    grads = []
    delta = (diff * out * (1.0 - out))[:, None]
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        grads.append((acts[i].T @ delta, delta.sum(axis=0)))
        if i:
            a = acts[i]
            delta = (delta @ W.T) * a * (1.0 - a)
    grad = np.concatenate([np.concatenate([gW.ravel(), gb]) for gW, gb in reversed(grads)])
    return err, grad


class NeuralNetModel:
    """Two-hidden-layer logistic network trained with iRprop+.

    Training stops when every partial derivative of the error is below
    ``threshold`` in magnitude, or after ``max_steps`` updates.
    """

    name = "nn"

    def __init__(self, theta, sizes, steps=0, converged=False):
        self.theta = np.asarray(theta, dtype=float)
        self.sizes = tuple(int(s) for s in sizes)
        self.steps = steps
        self.converged = converged

    @classmethod
    def fit(cls, X, y, rng, hidden, max_steps, threshold, eta_plus, eta_minus, delta0, delta_min, delta_max):
        sizes = (X.shape[1], *hidden, 1)
        theta = np.concatenate([
            np.concatenate([rng.normal(0.0, 1.0, size=a * b), np.zeros(b)])
            for a, b in zip(sizes[:-1], sizes[1:])
        ])
        yf = y.astype(float)
        delta = np.full(theta.size, delta0)
        step = np.zeros(theta.size)
        g_prev = np.zeros(theta.size)
        err_prev = np.inf
        converged = False
        steps = 0
        for steps in range(max_steps):
            err, g = network_error_grad(theta, X, yf, sizes)
            if np.max(np.abs(g)) < threshold:
                converged = True
                break
            s = g * g_prev
            up, down = s > 0, s < 0
            delta[up] = np.minimum(delta[up] * eta_plus, delta_max)
            delta[down] = np.maximum(delta[down] * eta_minus, delta_min)
            new_step = -np.sign(g) * delta
            if err > err_prev:
                # weight backtracking on sign flips when the error went up
                new_step[down] = -step[down]
            else:
                new_step[down] = 0.0
            g = g.copy()
            g[down] = 0.0
            theta = theta + new_step
            step, g_prev, err_prev = new_step, g, err
        return cls(theta, sizes, steps, converged)

    def scores(self, X):
        return network_forward(self.theta, X, self.sizes)

    def state(self):
        return {"theta": self.theta.tolist(), "sizes": list(self.sizes), "steps": self.steps,
                "converged": self.converged}

    @classmethod
    def from_state(cls, s):
        return cls(s["theta"], s["sizes"], s.get("steps", 0), s.get("converged", False))


def _gini_score(pos, n):
    # sum of squared class counts over n; larger means purer
    neg = n - pos
    return (pos * pos + neg * neg) / n


class DecisionTreeModel:
    """CART classifier on Gini impurity.

    Nodes live in parallel arrays; ``feature == -1`` marks a leaf whose
    ``value`` is the fraction of defective training rows reaching it.
    Samples with ``x[feature] <= threshold`` go left.
    """

    name = "dt"

    def __init__(self, feature, threshold, left, right, value, n_node):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)
        self.n_node = np.asarray(n_node, dtype=np.int64)

    @staticmethod
    def best_split(X, y, min_leaf):
        """Return ``(feature, threshold, gain)`` of the best split, or None.

        Ties go to the lowest feature index, then the lowest threshold.
        """
        n, d = X.shape
        if n < 2 * min_leaf:
            return None
        total_pos = int(y.sum())
        parent = _gini_score(total_pos, n)
        best_score, best = parent + 1e-12, None
        lo, hi = min_leaf - 1, n - min_leaf - 1  # left-size index range
        for f in range(d):
            order = np.argsort(X[:, f], kind="stable")
            xs = X[order, f]
            cpos = np.cumsum(y[order])
            idx = np.arange(lo, hi + 1)
            idx = idx[xs[idx] < xs[idx + 1]]
            if idx.size == 0:
                continue
            nl = idx + 1
            pl = cpos[idx]
            score = _gini_score(pl, nl) + _gini_score(total_pos - pl, n - nl)
            i = int(np.argmax(score))
            if score[i] > best_score:
                a, b = xs[idx[i]], xs[idx[i] + 1]
                thr = 0.5 * (a + b)
                if not (a <= thr < b):
                    thr = a
                best_score, best = float(score[i]), (f, float(thr), float(score[i] - parent) / n)
        return best

    @classmethod
    def fit(cls, X, y, rng, min_leaf, max_depth):
        feature, threshold, left, right, value, n_node = [], [], [], [], [], []

        def grow(rows, depth):
            node = len(feature)
            yr = y[rows]
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(float(yr.mean()))
            n_node.append(len(rows))
            pure = yr.min() == yr.max()
            if pure or depth >= max_depth:
                return node
            split = cls.best_split(X[rows], yr, min_leaf)
            if split is None:
                return node
            f, thr, _ = split
            mask = X[rows, f] <= thr
            feature[node], threshold[node] = f, thr
            left[node] = grow(rows[mask], depth + 1)
            right[node] = grow(rows[~mask], depth + 1)
            return node

        grow(np.arange(X.shape[0]), 0)
        return cls(feature, threshold, left, right, value, n_node)

    def apply(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def scores(self, X):
        return self.value[self.apply(X)]

    def state(self):
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value", "n_node")}

    @classmethod
    def from_state(cls, s):
        return cls(s["feature"], s["threshold"], s["left"], s["right"], s["value"], s["n_node"])


_MODELS = {
    Kind.LR: LogisticModel,
    Kind.KNN: KNNModel,
    Kind.SVM: LinearSVMModel,
    Kind.NB: GaussianNBModel,
    Kind.NN: NeuralNetModel,
    Kind.DT: DecisionTreeModel,
}
_BY_NAME = {m.name: m for m in (*_MODELS.values(), ConstantModel)}


@dataclass(frozen=True, eq=False)
class Classifier:
    spec: InducerSpec
    model: Any
    mean: np.ndarray
    scale: np.ndarray

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        return (X - self.mean) / self.scale

    def predict_scores(self, X) -> np.ndarray:
        s = self.model.scores(self.transform(X))
        return np.clip(s, 0.0, 1.0)

    def predict_labels(self, X) -> np.ndarray:
        return (self.predict_scores(X) >= 0.5).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "model": self.model.name,
            "state": self.model.state(),
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Classifier":
        model = _BY_NAME[d["model"]].from_state(d["state"])
        return cls(InducerSpec.from_dict(d["spec"]), model, np.asarray(d["mean"], float), np.asarray(d["scale"], float))


def fit_arrays(spec: InducerSpec, X, y, seed) -> Classifier:
    """Train on plain arrays; see :func:`train`."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("empty training sample")
    if X.shape[1] == 0:
        raise ValueError("training sample has no features")
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y lengths differ")
    if spec.standardize:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
    else:
        mean, scale = np.zeros(X.shape[1]), np.ones(X.shape[1])
    Z = (X - mean) / scale
    if y.min() == y.max():
        model = ConstantModel(float(y[0]))
    else:
        rng = np.random.default_rng(seed)
        model = _MODELS[spec.kind].fit(Z, y, rng, **spec.params)
    return Classifier(spec, model, mean, scale)


def train(spec: InducerSpec, sample: Sequence[ModuleRecord], seed) -> Classifier:
    """Fit one inducer on a sample of modules.

    Deterministic in ``(spec, sample, seed)``.
    """
    if not sample:
        raise ValueError("empty training sample")
    X, y, _ = as_arrays(sample)
    return fit_arrays(spec, X, y, seed)


def predict(classifier: Classifier, features) -> Prediction:
    x = np.asarray(features, dtype=float)
    if x.ndim != 1:
        raise ValueError("predict takes a single feature vector")
    score = float(classifier.predict_scores(x[None, :])[0])
    return Prediction(int(score >= 0.5), score)
