"""Acceptance criteria, one test each; the terminal summary prints PASS/FAIL per criterion."""

import json
import math
import subprocess
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest

from hiel.ensemble import EnsembleConfig, bootstrap_indices, generate_ensemble
from hiel.inducers import InducerSpec, Kind, default_inducers, fit_arrays, logistic_loss_grad, n_weights, network_error_grad
from hiel.metrics import auc, confusion, cost_from_sums, cost_report, f_measure, for_rate, pnpc, ppc
from hiel.pwmv import PwmvConfig, run_pwmv
from hiel.stats import cliff_category, cliffs_delta, summarize_comparison, wilcoxon_one_sample
from hiel.synthetic import bundled_path

from conftest import make_blobs, make_xor, records
from test_inducers import central_difference, relative_error
from test_metrics import auc_all_pairs, modules, published_cost_rows
from test_pwmv import random_stream
from test_stats import PUBLISHED_AVG, PUBLISHED_HIEL, PUBLISHED_IMPROVEMENT, brute_force_cliff, brute_force_p

pytestmark = pytest.mark.acceptance


@contextmanager
def within(seconds):
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    assert elapsed < seconds, f"took {elapsed:.2f}s, limit {seconds}s"


def test_cost_identities():
    """Cost identity suite: Ant-1.3 plus every other supplementary-table row to 0.01 (<1 s)"""
    with within(1.0):
        got = cost_from_sums(37699, 24755, 20, 100)
        for g, want in zip(got, (129.44, 1884.95, 647.20, 1237.75)):
            assert abs(g - want) <= 0.01
        rows = published_cost_rows()
        assert len(rows) >= 6
        for row in rows:
            got = cost_from_sums(int(row["total_loc"]), int(row["saved_budget"]), int(row["defects"]), 100)
            printed = [float(row[k]) for k in ("project_hours", "original_editing_rate", "editing_rate", "decreased")]
            assert all(abs(g - p) <= 0.01 for g, p in zip(got, printed)), row["project"]


def test_mistake_bound_suite():
    """Mistake bound suite: 200 streams per beta in {0.1,0.3,0.5,0.9}, zero violations, exact weights (<10 s)"""
    with within(10.0):
        rng = np.random.default_rng(2024)
        violations = 0
        for beta in (0.1, 0.3, 0.5, 0.9):
            for _ in range(200):
                n, m = int(rng.integers(1, 65)), int(rng.integers(1, 501))
                labels, truth = random_stream(rng, n, m)
                state = run_pwmv(labels, PwmvConfig(beta=beta), truth).state
                eps = state.best_expert_mistakes
                if state.expected_mistakes > (eps * math.log(1 / beta) + math.log(n)) / (1 - beta):
                    violations += 1
                assert np.array_equal(state.mistakes, (labels != truth).sum(axis=1))
                assert all(w == beta ** int(e) for w, e in zip(state.weights, state.mistakes))
        assert violations == 0


def test_combiner_oracle():
    """Combiner oracle: offline weighted vote equals majority (tie->1) for every matrix with n*|V| <= 12 (<5 s)"""
    cfg = PwmvConfig(online=False)
    checked = 0
    with within(5.0):
        for n in range(1, 13):
            for m in range(1, 12 // n + 1):
                k = n * m
                every = ((np.arange(2 ** k)[:, None] >> np.arange(k)) & 1).reshape(-1, n, m)
                majority = (2 * every.sum(axis=1) >= n).astype(np.int64)
                for labels, want in zip(every, majority):
                    assert np.array_equal(run_pwmv(labels, cfg).labels, want)
                    checked += 1
    assert checked == sum(2 ** (n * m) for n in range(1, 13) for m in range(1, 12 // n + 1))


def test_statistics_oracles():
    """Statistics oracles: exact signed-rank p vs 2^n enumeration, Cliff's delta vs brute force, bands (<10 s)"""
    with within(10.0):
        assert wilcoxon_one_sample([1, 2, 3, 4, 5]).p_value == 0.0625
        rng = np.random.default_rng(7)
        done = 0
        while done < 200:
            values = rng.integers(-6, 7, size=int(rng.integers(1, 11))).astype(float)
            r = wilcoxon_one_sample(values)
            if r.degenerate:
                continue
            assert r.p_value == brute_force_p(values)
            done += 1
        for _ in range(200):
            x = rng.integers(0, 10, size=int(rng.integers(1, 30)))
            y = rng.integers(0, 10, size=int(rng.integers(1, 30)))
            assert cliffs_delta(x, y).delta == brute_force_cliff(x, y)
        bands = [(0.146, "Negligible"), (0.147, "Small"), (0.329, "Small"), (0.330, "Medium"),
                 (0.473, "Medium"), (0.474, "Strong")]
        assert all(cliff_category(d) == c and cliff_category(-d) == c for d, c in bands)


def test_metric_properties():
    """Metric properties: 1000 random (prediction, truth, LoC) triples satisfy every identity (<5 s)"""
    rng = np.random.default_rng(11)
    with within(5.0):
        for _ in range(1000):
            n = int(rng.integers(1, 60))
            pred, truth = rng.integers(0, 2, n), rng.integers(0, 2, n)
            loc = rng.integers(1, 2000, n)
            score = np.round(rng.random(n), 1)  # ties included
            cm = confusion(pred, truth)
            assert abs(ppc(cm) + pnpc(cm) - 1.0) < 1e-12
            r = cost_report(pred, modules(loc, truth))
            assert r.saved_budget + r.remaining_service_time == r.total_loc == int(loc.sum())
            if cm.tn + cm.fn:
                assert 0.0 <= for_rate(cm) <= 1.0
            if cm.tp + cm.fp + cm.fn:
                assert f_measure(cm) == pytest.approx(2 * cm.tp / (2 * cm.tp + cm.fp + cm.fn), abs=1e-12)
            if 0 < truth.sum() < n:
                assert auc(score, truth) == pytest.approx(auc_all_pairs(score, truth), abs=1e-12)


def test_inducer_suite():
    """Inducer suite: six inducers >= 0.90 on blobs, DT/NN >= 0.90 on XOR, LR/NN gradients to 1e-4 (<60 s)"""
    with within(60.0):
        for seed in range(5):
            X, y = make_blobs(seed, n=300, sigma=0.7)
            for kind in Kind:
                clf = fit_arrays(InducerSpec(kind), X[:200], y[:200], seed)
                assert (clf.predict_labels(X[200:]) == y[200:]).mean() >= 0.90, (kind, seed)
            X, y = make_xor(seed, n=500)
            for kind in (Kind.DT, Kind.NN):
                clf = fit_arrays(InducerSpec(kind), X[:400], y[:400], seed)
                assert (clf.predict_labels(X[400:]) == y[400:]).mean() >= 0.90, (kind, seed)
        rng = np.random.default_rng(0)
        X = rng.normal(size=(50, 4))
        y = (rng.random(50) < 0.5).astype(float)
        theta = rng.normal(size=5)
        g = logistic_loss_grad(theta, X, y, 1e-6)[1]
        assert relative_error(g, central_difference(lambda t: logistic_loss_grad(t, X, y, 1e-6)[0], theta)) < 1e-4
        sizes = (4, 10, 5, 1)
        theta = rng.normal(size=n_weights(sizes))
        g = network_error_grad(theta, X, y, sizes)[1]
        assert relative_error(g, central_difference(lambda t: network_error_grad(t, X, y, sizes)[0], theta)) < 1e-4


def test_ensemble_suite():
    """Ensemble suite: 60 classifiers, T=5 is the prefix of T=10, bootstrap distinct fraction in [0.62, 0.645] (<60 s)"""
    with within(60.0):
        X, y = make_blobs(1, n=150, sigma=1.5)
        S = records(X, y)
        full = generate_ensemble(S, EnsembleConfig(default_inducers(), T=10, seed=42))
        assert len(full.experts()) == 60
        half = generate_ensemble(S, EnsembleConfig(default_inducers(), T=5, seed=42))
        for j in range(6):
            for t in range(5):
                assert full.classifiers[j][t].to_dict() == half.classifiers[j][t].to_dict()
        rng = np.random.default_rng(0)
        frac = np.mean([np.unique(bootstrap_indices(1000, 1000, rng)).size / 1000 for _ in range(1000)])
        assert 0.62 <= frac <= 0.645


def _run_cli(config, out):
    cmd = [sys.executable, "-m", "hiel", "run", "--config", str(config), "--beta", "0.1", "--out", str(out)]
    subprocess.run(cmd, check=True, capture_output=True)


def test_end_to_end(tmp_path):
    """End-to-end: combined F >= median expert F on every synthetic target; two runs byte-identical (<5 min)"""
    config = bundled_path() / "config.json"
    out = tmp_path / "out"
    with within(300.0):
        _run_cli(config, out)
        first = {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}
        _run_cli(config, out)
        second = {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}
    assert first == second and len(first) >= 5
    report = json.loads((out / "report.json").read_text())
    assert report["errors"] == []
    assert len(report["rows"]) == 3
    for row in report["rows"]:
        assert row["n_experts"] == 60
        assert row["f_measure"] >= row["expert_f_median"], row["target"]


def test_improvement_cross_check():
    """Improvement cross-check: table averages reproduce the five printed improvements within 2% (<1 s)"""
    with within(1.0):
        for model, other in PUBLISHED_AVG.items():
            row = summarize_comparison([PUBLISHED_HIEL], [other])
            printed = PUBLISHED_IMPROVEMENT[model]
            assert abs(row.improvement_percent - printed) <= 0.02 * printed, model
