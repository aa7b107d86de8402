import numpy as np
import pytest

from jitlab.dataset import METRICS, Dataset

HEADER = "ns,nd,nf,entropy,la,ld,lt,fix,ndev,age,nuc,exp,rexp,sexp,label"


@pytest.fixture
def write_csv(tmp_path):
    def _write(text, name="data.csv"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write


def make_dataset(n_pos, n_neg, seed=0, columns=METRICS, project="p"):
    rng = np.random.default_rng(seed)
    n = n_pos + n_neg
    values = 1.0 + rng.integers(0, 50, size=(n, len(columns))).astype(float)
    labels = np.array([1] * n_pos + [0] * n_neg)
    return Dataset(tuple(columns), values, labels, project)


@pytest.fixture
def small():
    return make_dataset(20, 80)


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one acceptance line: ``verdict(n, ok, detail)``; ``ok=None`` means skipped."""
    store = request.config.stash.setdefault(_VERDICTS, [])

    def _record(number, ok, detail):
        tag = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        store.append((number, f"criterion {number:>2}: {tag}  {detail}"))

    return _record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_VERDICTS, [])
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(store, key=lambda t: t[0]):
        terminalreporter.write_line(line)
