import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jitlab.dataset import METRICS, Dataset
from jitlab.errors import (
    EmptyError,
    LogDomainError,
    MissingParamsError,
    OneClassError,
    SpecError,
    TooSmallError,
)
from jitlab.preprocess import (
    NormalizationParams,
    SplitSpec,
    TransformPlan,
    apply_minmax,
    combine,
    fit_minmax,
    format_plan_text,
    log_transform,
    parse_plan_text,
    prepare,
    split,
    undersample,
)

from conftest import make_dataset


def column_frame(values, name="exp"):
    return Dataset((name,), np.array(values, dtype=float).reshape(-1, 1), np.zeros(len(values)))


class TestUndersample:
    def test_reduces_majority(self):
        out = undersample(make_dataset(100, 400), seed=1)
        assert np.sum(out.labels == 1) == 100
        assert np.sum(out.labels == 0) == 100

    def test_minority_rows_all_kept(self):
        d = make_dataset(30, 300, seed=5)
        out = undersample(d, seed=2)
        pos_rows = {tuple(r) for r in d.values[d.labels == 1]}
        assert {tuple(r) for r in out.values[out.labels == 1]} == pos_rows

    def test_balanced_input_unchanged_counts(self):
        out = undersample(make_dataset(50, 50), seed=0)
        assert out.n_rows == 100

    def test_one_class(self):
        with pytest.raises(OneClassError):
            undersample(make_dataset(0, 400), seed=0)

    def test_deterministic(self):
        d = make_dataset(40, 160, seed=9)
        a, b = undersample(d, 3), undersample(d, 3)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, undersample(d, 4).values)


class TestLog:
    def test_strict_one_is_zero(self):
        out = log_transform(column_frame([1.0, math.e]), TransformPlan(log_columns=("exp",)))
        assert out.values[:, 0].tolist() == pytest.approx([0.0, 1.0])

    def test_strict_zero_lists_every_offender(self):
        with pytest.raises(LogDomainError) as info:
            log_transform(column_frame([1.0, 0.0, 3.0, 0.0]), TransformPlan(log_columns=("exp",)))
        assert info.value.offenders == [(1, "exp"), (3, "exp")]

    def test_log1p_zero(self):
        plan = TransformPlan(log_columns=("exp",), log_mode="log1p")
        assert log_transform(column_frame([0.0]), plan).values[0, 0] == 0.0

    def test_other_columns_untouched(self, small):
        out = log_transform(small, TransformPlan())
        for c in METRICS:
            if c not in TransformPlan().log_columns:
                assert np.array_equal(out.column(c), small.column(c))
        assert np.allclose(out.column("exp"), np.log(small.column("exp")))

    def test_unknown_mode(self):
        with pytest.raises(SpecError):
            TransformPlan(log_mode="log10")


class TestMinMax:
    def test_fit(self):
        p = fit_minmax(column_frame([2, 4, 6]))
        assert (p.mins, p.maxs) == ((2.0,), (6.0,))

    def test_constant(self):
        p = fit_minmax(column_frame([5, 5]))
        assert p.mins == p.maxs == (5.0,)
        assert apply_minmax(column_frame([5, 5]), p).values[:, 0].tolist() == [0, 0]

    def test_empty(self):
        with pytest.raises(EmptyError):
            fit_minmax(column_frame([]))

    def test_apply(self):
        d = column_frame([2, 4, 6])
        assert apply_minmax(d, fit_minmax(d)).values[:, 0].tolist() == [0, 0.5, 1]

    def test_unclamped(self):
        p = NormalizationParams(("exp",), (2.0,), (6.0,))
        assert apply_minmax(column_frame([8]), p).values[0, 0] == 1.5

    def test_missing_params(self):
        p = NormalizationParams(("lt",), (0.0,), (1.0,))
        with pytest.raises(MissingParamsError):
            apply_minmax(column_frame([1]), p)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=40))
    def test_fitting_data_in_unit_interval(self, xs):
        d = column_frame(xs)
        out = apply_minmax(d, fit_minmax(d)).values[:, 0]
        assert np.all((out >= 0) & (out <= 1))


class TestSplit:
    def test_sizes(self):
        train, test = split(make_dataset(50, 50), SplitSpec(0.9, seed=1))
        assert (train.n_rows, test.n_rows) == (90, 10)

    def test_floor_remainder_to_test(self):
        train, test = split(make_dataset(5, 6), SplitSpec(0.5, seed=1))
        assert (train.n_rows, test.n_rows) == (5, 6)

    def test_partition_and_determinism(self):
        d = make_dataset(30, 70, seed=4)
        marked = d.with_values(np.column_stack([np.arange(100), d.values[:, 1:]]))
        a_train, a_test = split(marked, SplitSpec(0.9, seed=8))
        b_train, _ = split(marked, SplitSpec(0.9, seed=8))
        ids = np.concatenate([a_train.values[:, 0], a_test.values[:, 0]])
        assert sorted(ids.tolist()) == list(range(100))
        assert np.array_equal(a_train.values, b_train.values)

    def test_too_small(self):
        with pytest.raises(TooSmallError):
            split(make_dataset(1, 0), SplitSpec())

    def test_bad_fraction(self):
        with pytest.raises(SpecError):
            SplitSpec(1.0)


class TestCombine:
    def test_equal_contribution(self):
        a = make_dataset(100, 300, seed=1, project="bug")
        b = make_dataset(500, 900, seed=2, project="moz")
        out = combine([a, b], seed=0)
        assert out.n_rows == 400
        assert np.sum(out.sources == "bug") == 200
        assert np.sum(out.sources == "moz") == 200
        assert np.mean(out.labels) == 0.5
        for tag in ("bug", "moz"):
            assert np.mean(out.labels[out.sources == tag]) == 0.5

    def test_identical_sources_keep_full_balanced_sets(self):
        a = make_dataset(60, 100, seed=1, project="x")
        b = make_dataset(60, 100, seed=1, project="y")
        out = combine([a, b], seed=3)
        assert out.n_rows == 240

    def test_one_class_source(self):
        with pytest.raises(OneClassError):
            combine([make_dataset(10, 10), make_dataset(0, 10)], seed=0)

    def test_needs_two(self):
        with pytest.raises(SpecError):
            combine([make_dataset(10, 10)], seed=0)


def test_plan_text_round_trip():
    plan = TransformPlan(log_columns=("ns", "exp"), log_mode="log1p", normalize=False)
    assert parse_plan_text(format_plan_text(plan)) == plan


def test_plan_text_rejects_unknown_key():
    with pytest.raises(SpecError):
        parse_plan_text("colour = blue\n")


def test_prepare_touches_only_training_side():
    d = make_dataset(40, 160, seed=11)
    held = make_dataset(5, 45, seed=12)
    prep = prepare(d, held, ("lt", "exp"), TransformPlan(), seed=0)
    assert prep.train.n_rows == 80
    assert prep.held_out.n_rows == 50
    assert np.array_equal(prep.held_out.labels, held.labels)
    # held-out side scaled with training bounds
    raw = np.log(held.column("exp"))
    j = prep.params.columns.index("exp")
    lo, hi = prep.params.mins[j], prep.params.maxs[j]
    assert np.allclose(prep.held_out.column("exp"), (raw - lo) / (hi - lo))
