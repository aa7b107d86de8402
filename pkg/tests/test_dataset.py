import numpy as np
import pytest

from jitlab.dataset import (
    METRICS,
    ColumnSchema,
    Dataset,
    audit_dataset,
    dataset_to_csv,
    load_dataset,
    parse_dataset,
    select_features,
    summarize,
)
from jitlab.errors import LabelError, ParseError, SchemaError, UnknownFeatureError

from conftest import HEADER, make_dataset

KAMEI_HEADER = "commitdate,transactionid,ns,nm,nf,Entrophy,la,ld,lt,fix,ndev,pd,npt,exp,rexp,sexp,bug"


def kamei_row(i, bug="1", fix="FALSE", lt="10"):
    return f"2004-01-0{i},t{i},1,1,2,0.5,0.1,0.2,{lt},{fix},3,4.5,1,12,3.5,6,{bug}"


class TestLoad:
    def test_aliases_are_canonicalized(self, write_csv):
        path = write_csv("\n".join([KAMEI_HEADER, kamei_row(1), kamei_row(2, "0", "TRUE")]) + "\n")
        d = load_dataset(path)
        assert d.columns == METRICS
        assert d.column("nd").tolist() == [1, 1]
        assert d.column("age").tolist() == [4.5, 4.5]
        assert d.column("nuc").tolist() == [1, 1]
        assert d.labels.tolist() == [1, 0]
        assert d.column("fix").tolist() == [0, 1]
        assert d.project == "data"

    def test_extra_columns_kept_as_metadata(self, write_csv):
        d = load_dataset(write_csv(KAMEI_HEADER + "\n" + kamei_row(1) + "\n"))
        assert set(d.meta) == {"commitdate", "transactionid"}
        assert d.meta["transactionid"].tolist() == ["t1"]
        assert "transactionid" not in d.columns

    def test_row_order_preserved(self, write_csv):
        text = HEADER + "\n" + "\n".join(
            f"{i},1,1,0,0,0,1,0,1,{i},1,1,1,1,{i % 2}" for i in range(1, 4)) + "\n"
        d = load_dataset(write_csv(text))
        assert d.n_rows == 3
        assert d.column("ns").tolist() == [1, 2, 3]

    def test_case_insensitive_header(self):
        d = parse_dataset(HEADER.upper() + "\n1,1,1,0,0,0,1,1,1,1,1,1,1,1,True\n")
        assert d.labels.tolist() == [1]

    def test_missing_label_names_it(self):
        header = HEADER.replace(",label", "")
        with pytest.raises(SchemaError, match="bug/label"):
            parse_dataset(header + "\n" + "1," * 13 + "1\n")

    def test_non_numeric_cell(self):
        with pytest.raises(ParseError, match=r"row 0, column 'lt'"):
            parse_dataset(HEADER + "\n1,1,1,0,0,0,abc,0,1,1,1,1,1,1,0\n")

    def test_non_finite_cell(self):
        with pytest.raises(ParseError):
            parse_dataset(HEADER + "\n1,1,1,0,0,0,inf,0,1,1,1,1,1,1,0\n")

    @pytest.mark.parametrize("bad", ["2", "yes", "0.5", ""])
    def test_bad_label(self, bad):
        with pytest.raises(LabelError):
            parse_dataset(HEADER + f"\n1,1,1,0,0,0,1,0,1,1,1,1,1,1,{bad}\n")

    def test_extended_alias(self):
        schema = ColumnSchema().with_aliases({"contains_bug": "label"})
        text = HEADER.replace("label", "contains_bug") + "\n1,1,1,0,0,0,1,0,1,1,1,1,1,1,false\n"
        assert parse_dataset(text, schema).labels.tolist() == [0]

    def test_new_alias_replaces_old_one(self):
        schema = ColumnSchema().with_aliases({"x": "nd"})
        assert schema.canonical("x") == "nd"
        assert schema.canonical("nm") == "nm"

    def test_alias_map_must_be_injective(self):
        with pytest.raises(SchemaError):
            ColumnSchema(aliases={"a": "nd", "b": "nd"})


def test_round_trip_is_byte_stable(write_csv):
    text = HEADER + "\n1,2,3,0.25,0.1,0.05,50,1,4,3.5,2,12,1.25,7,1\n2,1,1,0,0,0,0,0,1,0,1,1,1,1,0\n"
    d = load_dataset(write_csv(text))
    assert dataset_to_csv(d) == text
    again = parse_dataset(dataset_to_csv(d))
    assert np.array_equal(again.values, d.values)


def test_kamei_file_reemits_with_canonical_names(write_csv):
    d = load_dataset(write_csv(KAMEI_HEADER + "\n" + kamei_row(1) + "\n"))
    out = dataset_to_csv(d)
    assert out.splitlines()[0] == HEADER + ",commitdate,transactionid"
    assert dataset_to_csv(parse_dataset(out)) == out


class TestSummarize:
    def test_counts(self):
        s = summarize(make_dataset(5, 5))
        assert (s.n_changes, s.n_defective, s.pct_defect) == (10, 5, 0.5)

    def test_all_clean(self):
        assert summarize(make_dataset(0, 7)).pct_defect == 0

    def test_empty_is_undefined(self):
        s = summarize(Dataset(METRICS, np.empty((0, 14)), np.empty(0)))
        assert s.n_changes == 0
        assert s.pct_defect is None
        assert "undefined" in s.format()

    def test_column_stats(self):
        d = make_dataset(3, 3)
        s = summarize(d)
        assert s.columns["lt"].max == d.column("lt").max()
        assert s.columns["lt"].mean == pytest.approx(d.column("lt").mean())


class TestSelect:
    def test_two_features(self, small):
        d = select_features(small, ["LT", "PD"])
        assert d.columns == ("lt", "age")
        assert np.array_equal(d.labels, small.labels)
        assert np.array_equal(d.values[:, 0], small.column("lt"))

    def test_all(self, small):
        d = select_features(small, METRICS)
        assert np.array_equal(d.values, small.values)

    def test_unknown(self, small):
        with pytest.raises(UnknownFeatureError, match="XYZ"):
            select_features(small, ["XYZ"])


class TestAudit:
    def frame(self, rows):
        cols = ("la", "ld", "lt", "exp")
        return Dataset(cols, np.array(rows, dtype=float), np.zeros(len(rows)))

    def test_raw_churn_flagged(self):
        rep = audit_dataset(self.frame([[12, 3, 0, 1], [0, 0, 0, 1], [0.1, 0.2, 40, 1]]), ["exp"])
        assert rep.raw_churn_rows == [0]

    def test_zero_counts(self):
        rep = audit_dataset(self.frame([[0, 0, 1, 0], [0, 0, 1, 5], [0, 0, 1, 0]]), ["exp"])
        assert rep.zero_value_counts == {"exp": 2}
        assert rep.has_findings

    def test_every_flag_satisfies_predicate(self):
        d = make_dataset(30, 30, seed=3)
        vals = np.array(d.values)
        vals[::4, METRICS.index("lt")] = 0
        vals[::8, METRICS.index("la")] = 0
        vals[::8, METRICS.index("ld")] = 0
        d = d.with_values(vals)
        rep = audit_dataset(d)
        lt, la, ld = d.column("lt"), d.column("la"), d.column("ld")
        expected = [i for i in range(d.n_rows) if lt[i] == 0 and (la[i] > 0 or ld[i] > 0)]
        assert rep.raw_churn_rows == expected
        assert audit_dataset(d) == rep
