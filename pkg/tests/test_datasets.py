import numpy as np
import pytest
from numpy.testing import assert_allclose

from envhuber.datasets import (DataError, ingest_csv, load_statex77,
                               standardize_predictors, statex77_path)


def _write(tmp_path, text):
    f = tmp_path / "t.csv"
    f.write_text(text)
    return str(f)


def test_ingest_basic(tmp_path):
    path = _write(tmp_path, "a,b,y\n1,2,3\n4,5,6\n")
    tab = ingest_csv(path, "y")
    assert_allclose(tab.y, [3.0, 6.0])
    assert_allclose(tab.X, [[1.0, 2.0], [4.0, 5.0]])
    assert tab.features == ["a", "b"]
    assert tab.response == "y"


def test_ingest_response_anywhere(tmp_path):
    path = _write(tmp_path, "y,a,b\n3,1,2\n")
    tab = ingest_csv(path, "y")
    assert_allclose(tab.X, [[1.0, 2.0]])
    assert tab.features == ["a", "b"]


def test_ingest_skips_blank_lines(tmp_path):
    path = _write(tmp_path, "a,y\n\n1,2\n\n3,4\n")
    tab = ingest_csv(path, "y")
    assert_allclose(tab.y, [2.0, 4.0])


def test_ingest_missing_file(tmp_path):
    with pytest.raises(DataError, match="cannot read"):
        ingest_csv(str(tmp_path / "absent.csv"), "y")


def test_ingest_missing_response(tmp_path):
    path = _write(tmp_path, "a,b\n1,2\n")
    with pytest.raises(DataError, match="'y' not found"):
        ingest_csv(path, "y")


def test_ingest_duplicate_columns(tmp_path):
    path = _write(tmp_path, "a,a,y\n1,2,3\n")
    with pytest.raises(DataError, match="duplicate column names"):
        ingest_csv(path, "y")


def test_ingest_ragged_row(tmp_path):
    path = _write(tmp_path, "a,y\n1,2\n3\n")
    with pytest.raises(DataError, match="row 3 has 1 fields"):
        ingest_csv(path, "y")


def test_ingest_non_numeric_names_cell(tmp_path):
    path = _write(tmp_path, "a,y\n1,2\nx,4\n")
    with pytest.raises(DataError, match="row 3, column 'a'.*'x'"):
        ingest_csv(path, "y")


def test_ingest_header_only(tmp_path):
    path = _write(tmp_path, "a,y\n")
    with pytest.raises(DataError, match="at least one data row"):
        ingest_csv(path, "y")


def test_standardize_predictors():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((40, 3)) * np.array([1.0, 10.0, 0.1])
    Xs, s = standardize_predictors(X)
    assert_allclose(Xs.std(axis=0, ddof=1), np.ones(3), rtol=1e-12)
    assert_allclose(Xs * s, X, rtol=1e-12)
    # columns are scaled, not centered
    assert_allclose(Xs.mean(axis=0), X.mean(axis=0) / s, rtol=1e-12)


def test_standardize_rejects_constant_column():
    X = np.ones((10, 2))
    X[:, 0] = np.arange(10.0)
    with pytest.raises(DataError, match=r"\[1\]"):
        standardize_predictors(X)


def test_statex77_shape_and_values():
    tab = load_statex77()
    assert tab.y.shape == (50,)
    assert tab.X.shape == (50, 7)
    assert tab.response == "Murder"
    assert tab.features == ["Population", "Income", "Illiteracy", "LifeExp",
                            "HSGrad", "Frost", "Area"]
    # first row is Alabama, values as in R's state.x77: Population 3615,
    # Income 3624, Illiteracy 2.1, Life Exp 69.05, Murder 15.1,
    # HS Grad 41.3, Frost 20, Area 50708.
    assert_allclose(tab.y[0], 15.1)
    assert_allclose(tab.X[0], [3615.0, 3624.0, 2.1, 69.05, 41.3, 20.0, 50708.0])
    # murder rates are per 100k and bounded
    assert tab.y.min() > 0.5 and tab.y.max() < 16.0


def test_statex77_alternate_response():
    tab = load_statex77(response="Income")
    assert "Murder" in tab.features
    assert tab.X.shape == (50, 7)


def test_statex77_states_file():
    import pathlib
    states = pathlib.Path(statex77_path()).with_name("statex77_states.txt")
    lines = [ln.strip() for ln in states.read_text().splitlines()]
    names = [ln for ln in lines if ln and not ln.startswith("#")]
    assert len(names) == 50
    assert names[0] == "Alabama" and names[-1] == "Wyoming"
    assert names == sorted(names)
