import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weibull_count.data import (
    ColumnBindings,
    CountDataset,
    DataError,
    dataset_to_csv,
    parse_dataset,
    parse_text,
)
from weibull_count.regression import Observation


def test_three_row_example():
    ds = parse_text("births,educ\n2,10\n0,12\n4,8\n", ColumnBindings("births", ("educ",)))
    assert len(ds) == 3 and ds.n_covariates == 1
    assert ds.counts.tolist() == [2, 0, 4]
    assert ds.covariates[:, 0].tolist() == [10.0, 12.0, 8.0]
    assert np.all(ds.exposure == 1.0) and np.all(ds.weights == 1.0)


def test_non_integer_count_names_row_and_column():
    with pytest.raises(DataError, match=r"row 1, column 'births'.*integer"):
        parse_text("births,educ\n2.5,10\n", ColumnBindings("births", ("educ",)))


def test_missing_cell_lists_rows():
    with pytest.raises(DataError, match=r"row 2: educ.*row 3: educ"):
        parse_text("births,educ\n1,10\n0,\n3,\n", ColumnBindings("births", ("educ",)))


@pytest.mark.parametrize("text, bindings, pattern", [
    ("births,educ\n1,abc\n", ColumnBindings("births", ("educ",)), r"row 1, column 'educ': malformed"),
    ("births,educ\n1,2\n", ColumnBindings("kids"), "unknown column"),
    ("births,t\n1,0\n", ColumnBindings("births", exposure="t"), "exposure must be positive"),
    ("births,t\n1,-2\n", ColumnBindings("births", exposure="t"), "exposure must be positive"),
    ("births\n-1\n", ColumnBindings("births"), "negative count"),
    ("births,w\n1,-1\n", ColumnBindings("births", weight="w"), "negative weight"),
    ("births\n", ColumnBindings("births"), "no data rows"),
    ("", ColumnBindings("births"), "empty file"),
    ("births,educ\n1,nan\n", ColumnBindings("births", ("educ",)), "non-finite"),
])
def test_parse_errors(text, bindings, pattern):
    with pytest.raises(DataError, match=pattern):
        parse_text(text, bindings)


def test_duplicate_binding():
    with pytest.raises(DataError):
        ColumnBindings("births", ("births",))


def test_exposure_weights_and_row_order(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("id,births,t,w,x\na,3,2.5,1,0.5\nb,1,1.0,0,-1\n\nc,0,0.5,2,2\n", encoding="utf-8")
    ds = parse_dataset(path, ColumnBindings("births", ("x",), "t", "w"))
    assert ds.counts.tolist() == [3, 1, 0]
    assert ds.exposure.tolist() == [2.5, 1.0, 0.5]
    assert ds.weights.tolist() == [1.0, 0.0, 2.0]
    assert ds.source_path == str(path)
    rows = ds.rows
    assert rows[0] == Observation(3, (0.5,), 2.5, 1.0)


def test_expanded_and_select():
    ds = CountDataset.from_arrays([1, 2], [[0.5, 1.0], [1.5, 2.0]], weights=[2, 1])
    big = ds.expanded()
    assert big.counts.tolist() == [1, 1, 2] and np.all(big.weights == 1)
    assert ds.select(["x2"]).covariates[:, 0].tolist() == [1.0, 2.0]
    with pytest.raises(DataError):
        ds.with_weights([0.5, 1.0]).expanded()


def test_dataset_validation():
    with pytest.raises(DataError):
        CountDataset.from_arrays([1, -2])
    with pytest.raises(DataError):
        CountDataset.from_arrays([1, 2], exposure=[1.0, 0.0])
    with pytest.raises(DataError):
        CountDataset(np.array([1]), np.zeros((1, 1)), 1.0, 1.0, ("a", "b"))


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 50), st.floats(-1e6, 1e6, allow_nan=False),
                          st.floats(1e-3, 1e3)), min_size=1, max_size=30))
def test_csv_roundtrip_lossless(rows):
    counts, xs, ts = zip(*rows)
    ds = CountDataset.from_arrays(list(counts), np.array(xs)[:, None], exposure=list(ts), covariate_names=("x",))
    back = parse_text(dataset_to_csv(ds), ColumnBindings("count", ("x",), "t"))
    assert np.array_equal(back.counts, ds.counts)
    assert np.array_equal(back.covariates, ds.covariates)
    assert np.array_equal(back.exposure, ds.exposure)
