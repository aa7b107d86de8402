import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jitlab.dataset import METRICS, NON_NEGATIVE, dataset_to_csv, parse_dataset
from jitlab.errors import SpecError
from jitlab.preprocess import TransformPlan, log_transform
from jitlab.synth import SynthSpec, generate


def test_shape_and_labels():
    d = generate(SynthSpec(n_rows=500, defect_fraction=0.3, seed=1))
    assert d.columns == METRICS
    assert d.n_rows == 500
    assert int(d.labels.sum()) == 150


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), frac=st.floats(0.05, 0.95), sep=st.floats(0, 5))
def test_output_is_a_valid_dataset(seed, frac, sep):
    d = generate(SynthSpec(200, frac, ("lt", "age"), sep, seed))
    assert np.all(np.isfinite(d.values))
    for i, name in enumerate(d.columns):
        if name in NON_NEGATIVE:
            assert d.values[:, i].min() >= 0
    assert set(np.unique(d.column("fix"))) <= {0.0, 1.0}
    assert np.all(d.column("entropy") <= np.log2(d.column("nf")) + 1e-12)
    # survives the strict log transform and a text round trip
    log_transform(d, TransformPlan())
    back = parse_dataset(dataset_to_csv(d), project=d.project)
    assert np.array_equal(back.values, d.values)


def test_deterministic():
    spec = SynthSpec(300, 0.4, ("lt",), 2.0, seed=7)
    assert dataset_to_csv(generate(spec)) == dataset_to_csv(generate(spec))
    other = SynthSpec(300, 0.4, ("lt",), 2.0, seed=8)
    assert dataset_to_csv(generate(spec)) != dataset_to_csv(generate(other))


def test_signal_direction():
    d = generate(SynthSpec(2000, 0.5, ("lt", "age"), 1.0, seed=3))
    pos, neg = d.labels == 1, d.labels == 0
    for f in ("lt", "age"):
        x = np.log(d.column(f))
        assert x[pos].mean() > x[neg].mean()
    x = np.log(d.column("exp"))
    assert abs(x[pos].mean() - x[neg].mean()) < 0.15


@pytest.mark.parametrize("kwargs", [
    {"defect_fraction": 1.2},
    {"defect_fraction": 0.0},
    {"n_rows": 1},
    {"separation": -1.0},
    {"signal_features": ("bogus",)},
    {"n_rows": 3, "defect_fraction": 0.01},
])
def test_bad_specs(kwargs):
    with pytest.raises(SpecError):
        SynthSpec(**kwargs)
