import csv

import numpy as np
import pytest

from hiel.data import ModuleRecord, ProjectRelease, Repository

_acceptance = []


def pytest_runtest_makereport(item, call):
    if call.when != "call" or item.get_closest_marker("acceptance") is None:
        return
    doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
    _acceptance.append((doc, call.excinfo is None, call.duration))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for doc, ok, dur in _acceptance:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {doc}  ({dur:.2f}s)")


def make_blobs(seed, n=200, sigma=0.5, centers=((0.0, 0.0), (3.0, 3.0))):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    X = np.asarray(centers)[y] + rng.normal(scale=sigma, size=(n, 2))
    return X, y


def make_xor(seed, n=200, sigma=0.5):
    rng = np.random.default_rng(seed)
    c = rng.integers(0, 4, n)
    centers = np.array([[0.0, 0.0], [3.0, 3.0], [0.0, 3.0], [3.0, 0.0]])
    X = centers[c] + rng.normal(scale=sigma, size=(n, 2))
    return X, (c >= 2).astype(np.int64)


def records(X, y, project="p", release="1", loc=None):
    loc = np.full(len(y), 10) if loc is None else loc
    return [ModuleRecord(f"{project}{release}.{i}", X[i], int(loc[i]), int(y[i]), project, release)
            for i in range(len(y))]


def release(project, rel, n, seed, d=3):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = (X[:, 0] > 0).astype(int)
    return ProjectRelease(project, rel, tuple(records(X, y, project, rel)), tuple(f"m{i}" for i in range(d)))


@pytest.fixture
def small_repo():
    rels = (release("A", "1", 8, 0), release("A", "2", 6, 1), release("B", "1", 5, 2), release("C", "1", 4, 3))
    return Repository("toy", rels, rels[0].metric_names)


@pytest.fixture
def write_csv(tmp_path):
    def _write(name, header, rows):
        path = tmp_path / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        return path
    return _write
