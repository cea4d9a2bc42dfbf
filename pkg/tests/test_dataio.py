import json
import math
import os
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_array_equal

from comgbii import dataio
from comgbii.dataio import ColumnSpec, Dataset, Schema
from comgbii.errors import DataError


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def claims_csv(tmp_path):
    return write(
        tmp_path / "claims.csv",
        "amount,Gender,ClaimType,Age\n"
        "1.5,male,MTD,30\n"
        "2.25,female,MTA,41\n"
        "0.75,female,other,29\n"
        "4.0,male,MTA,55\n",
    )


CLAIMS_SCHEMA = Schema.from_dict(
    {
        "response": "amount",
        "covariates": [
            {"name": "Gender", "type": "categorical"},
            {"name": "ClaimType", "type": "categorical"},
            "Age",
        ],
    }
)


class TestReadCsv:
    def test_three_rows(self, tmp_path):
        p = write(tmp_path / "a.csv", "loss\n1.0\n2.5\n0.3134\n")
        ds = dataio.read_csv(p)
        assert ds.n == 3
        assert_array_equal(ds.y, [1.0, 2.5, 0.3134])

    def test_schema_typing(self, claims_csv):
        ds = dataio.read_csv(claims_csv, CLAIMS_SCHEMA)
        assert ds.response_name == "amount"
        assert ds.levels == {"Gender": ["female", "male"], "ClaimType": ["MTA", "MTD", "other"]}
        assert ds.columns["Age"].dtype == float

    def test_inferred_typing(self, claims_csv):
        ds = dataio.read_csv(claims_csv)
        assert set(ds.levels) == {"Gender", "ClaimType"}
        assert "Age" in ds.columns and "Age" not in ds.levels

    def test_zero_response_names_row(self, tmp_path):
        p = write(tmp_path / "a.csv", "loss\n1.0\n0\n3.0\n")
        with pytest.raises(DataError, match="row 2"):
            dataio.read_csv(p)

    def test_negative_response(self, tmp_path):
        p = write(tmp_path / "a.csv", "loss\n1.0\n2.0\n-3.0\n")
        with pytest.raises(DataError, match="row 3"):
            dataio.read_csv(p)

    def test_unparsable_cell_names_row_and_column(self, tmp_path):
        p = write(tmp_path / "a.csv", "loss,age\n1.0,30\n2.0,abc\n")
        schema = Schema("loss", (ColumnSpec("age"),))
        with pytest.raises(DataError, match=r"row 2, column 'age'"):
            dataio.read_csv(p, schema)

    def test_missing_cell(self, tmp_path):
        p = write(tmp_path / "a.csv", "loss,age\n1.0,\n")
        with pytest.raises(DataError, match="missing value"):
            dataio.read_csv(p, Schema("loss", (ColumnSpec("age"),)))

    def test_missing_columns(self, claims_csv):
        with pytest.raises(DataError, match="response column 'loss'"):
            dataio.read_csv(claims_csv, Schema("loss"))
        with pytest.raises(DataError, match="'Height'"):
            dataio.read_csv(claims_csv, Schema("amount", (ColumnSpec("Height"),)))

    def test_ragged_row(self, tmp_path):
        p = write(tmp_path / "a.csv", "loss,age\n1.0,3\n2.0\n")
        with pytest.raises(DataError, match="row 2"):
            dataio.read_csv(p)

    def test_non_finite(self, tmp_path):
        p = write(tmp_path / "a.csv", "loss\n1.0\ninf\n")
        with pytest.raises(DataError, match="not finite"):
            dataio.read_csv(p)

    def test_empty_file(self, tmp_path):
        with pytest.raises(DataError, match="empty"):
            dataio.read_csv(write(tmp_path / "a.csv", ""))

    def test_absent_file(self, tmp_path):
        with pytest.raises(DataError):
            dataio.read_csv(tmp_path / "nope.csv")

    def test_bad_column_type(self):
        with pytest.raises(DataError):
            ColumnSpec("x", "ordinal")


class TestRoundTrip:
    def test_write_then_read(self, claims_csv, tmp_path):
        ds = dataio.read_csv(claims_csv, CLAIMS_SCHEMA)
        out = tmp_path / "copy.csv"
        dataio.write_csv(ds, out)
        back = dataio.read_csv(out, CLAIMS_SCHEMA)
        assert_array_equal(back.y, ds.y)
        for name in ds.columns:
            assert_array_equal(back.columns[name], ds.columns[name])
        assert back.levels == ds.levels

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(1e-300, 1e300, allow_nan=False), min_size=1, max_size=20))
    def test_floats_survive_exactly(self, values):
        import tempfile

        ds = Dataset("y", np.array(values), {"x": np.array(values[::-1])})
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "r.csv")
            dataio.write_csv(ds, path)
            back = dataio.read_csv(path)
        assert_array_equal(back.y, ds.y)
        assert_array_equal(back.columns["x"], ds.columns["x"])

    def test_schema_dict_roundtrip(self):
        assert Schema.from_dict(CLAIMS_SCHEMA.to_dict()) == CLAIMS_SCHEMA


class TestConfig:
    def test_json_and_toml(self, tmp_path):
        doc = {"response": "loss", "covariates": [{"name": "age", "type": "numeric"}]}
        j = write(tmp_path / "c.json", json.dumps(doc))
        t = write(tmp_path / "c.toml", 'response = "loss"\n[[covariates]]\nname = "age"\ntype = "numeric"\n')
        assert dataio.load_config(j) == dataio.load_config(t) == doc

    def test_invalid(self, tmp_path):
        with pytest.raises(DataError, match="invalid JSON"):
            dataio.load_config(write(tmp_path / "c.json", "{"))
        with pytest.raises(DataError, match="invalid TOML"):
            dataio.load_config(write(tmp_path / "c.toml", "= 1"))

    def test_schema_requires_response(self):
        with pytest.raises(DataError):
            Schema.from_dict({"covariates": []})


class TestDataset:
    def test_invariants(self):
        with pytest.raises(DataError, match="row 2"):
            Dataset("y", [1.0, 0.0])
        with pytest.raises(DataError, match="rows"):
            Dataset("y", [1.0, 2.0], {"x": np.zeros(3)})

    def test_summary(self):
        s = Dataset("y", [1.0, 2.0, 3.0, 10.0]).summary()
        assert (s["n"], s["min"], s["mean"], s["median"], s["max"]) == (4, 1.0, 4.0, 2.5, 10.0)
        assert s["sd"] == pytest.approx(math.sqrt(np.var([1, 2, 3, 10], ddof=1)))

    @pytest.mark.requires_danish_csv
    def test_danish_summary(self, danish_csv):
        s = dataio.read_csv(danish_csv).summary()
        assert s["n"] == 2492
        assert round(s["min"], 4) == 0.3134
        assert round(s["mean"], 4) == 3.0630
        assert round(s["sd"], 4) == 7.9767


class TestFormula:
    def test_parse(self):
        assert dataio.parse_formula("loss ~ 1") == ("loss", [])
        assert dataio.parse_formula(" amount ~ Gender + Age ") == ("amount", ["Gender", "Age"])

    @pytest.mark.parametrize("bad", ["loss", "~ a", "loss ~ log(a)", "loss ~ a*b"])
    def test_rejects(self, bad):
        with pytest.raises(DataError):
            dataio.parse_formula(bad)


class TestDesignMatrix:
    def test_binary_categorical(self, claims_csv):
        ds = dataio.read_csv(claims_csv, CLAIMS_SCHEMA)
        dm = dataio.design_matrix(ds, ["Gender"])
        # lexicographic reference: "female" < "male", so the dummy is for male
        assert dm.names == ["(Intercept)", "Gender_male"]
        assert_array_equal(dm.matrix[:, 1], [1, 0, 0, 1])

    def test_binary_female_dummy(self, tmp_path):
        # levels "Male"/"female" sort with the uppercase first, making female the dummy
        p = write(tmp_path / "g.csv", "y,Gender\n1,Male\n2,female\n3,female\n")
        ds = dataio.read_csv(p)
        dm = dataio.design_matrix(ds, ["Gender"])
        assert dm.names == ["(Intercept)", "Gender_female"]
        assert_array_equal(dm.matrix[:, 1], [0, 1, 1])

    def test_three_levels(self, claims_csv):
        ds = dataio.read_csv(claims_csv, CLAIMS_SCHEMA)
        dm = dataio.design_matrix(ds, ["ClaimType"])
        assert dm.names == ["(Intercept)", "ClaimType_MTD", "ClaimType_other"]
        assert dm.encoding == {"ClaimType": ["MTA", "MTD", "other"]}
        assert_array_equal(dm.matrix[:, 1:], [[1, 0], [0, 0], [0, 1], [0, 0]])

    def test_numeric_passthrough(self, claims_csv):
        ds = dataio.read_csv(claims_csv, CLAIMS_SCHEMA)
        dm = dataio.design_matrix(ds, ["Age"])
        assert dm.k == 1
        assert_array_equal(dm.matrix, [[1, 30], [1, 41], [1, 29], [1, 55]])

    def test_intercept_only(self, claims_csv):
        dm = dataio.design_matrix(dataio.read_csv(claims_csv, CLAIMS_SCHEMA))
        assert dm.matrix.shape == (4, 1) and np.all(dm.matrix == 1)

    def test_byte_identical(self, claims_csv):
        ds = dataio.read_csv(claims_csv, CLAIMS_SCHEMA)
        a = dataio.design_matrix(ds, ["Gender", "ClaimType", "Age"])
        b = dataio.design_matrix(dataio.read_csv(claims_csv, CLAIMS_SCHEMA), ["Gender", "ClaimType", "Age"])
        assert a.matrix.tobytes() == b.matrix.tobytes()
        assert a.names == b.names

    def test_encoding_reuse(self, claims_csv):
        ds = dataio.read_csv(claims_csv, CLAIMS_SCHEMA)
        enc = dataio.design_matrix(ds, ["ClaimType"]).encoding
        sub = ds.subset([1, 3])  # only MTA rows
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            dm = dataio.design_matrix(sub, ["ClaimType"], encoding=enc)
        assert dm.names == ["(Intercept)", "ClaimType_MTD", "ClaimType_other"]

    def test_unknown_level(self, claims_csv):
        ds = dataio.read_csv(claims_csv, CLAIMS_SCHEMA)
        with pytest.raises(DataError, match="not in the encoding"):
            dataio.design_matrix(ds, ["ClaimType"], encoding={"ClaimType": ["MTA", "MTD"]})

    def test_unknown_covariate(self, claims_csv):
        with pytest.raises(DataError, match="unknown covariate"):
            dataio.design_matrix(dataio.read_csv(claims_csv, CLAIMS_SCHEMA), ["Height"])

    def test_constant_column_warns(self):
        ds = Dataset("y", [1.0, 2.0, 3.0], {"x": np.full(3, 4.0)})
        with pytest.warns(UserWarning, match="rank deficient"):
            dataio.design_matrix(ds, ["x"])


class TestSplit:
    def test_sizes(self):
        ds = Dataset("y", np.arange(1.0, 11.0))
        train, test = dataio.split(ds, 0.6, seed=4)
        assert (train.n, test.n) == (6, 4)

    def test_ceiling(self):
        tr, te = dataio.split_indices(7, 0.6, seed=0)
        assert (tr.size, te.size) == (5, 2)

    def test_deterministic(self):
        assert all(np.array_equal(a, b) for a, b in zip(dataio.split_indices(50, 0.6, 9), dataio.split_indices(50, 0.6, 9)))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 300), st.floats(0.01, 0.99), st.integers(0, 2**31))
    def test_partition(self, n, ratio, seed):
        tr, te = dataio.split_indices(n, ratio, seed)
        assert np.intersect1d(tr, te).size == 0
        assert_array_equal(np.union1d(tr, te), np.arange(n))
        assert tr.size == math.ceil(ratio * n)

    def test_uniform(self):
        counts = np.zeros(10)
        for s in range(2000):
            tr, _ = dataio.split_indices(10, 0.6, s)
            counts[tr] += 1
        # each row lands in training with probability 0.6; sd of a count is about 22
        assert np.all(np.abs(counts - 1200) < 110)

    @pytest.mark.parametrize("ratio", [0.0, 1.0, -0.5, 1.5])
    def test_bad_ratio(self, ratio):
        with pytest.raises(DataError):
            dataio.split_indices(10, ratio)


class TestSimulateMixture:
    def test_shape_and_names(self):
        ds = dataio.simulate_mixture(seed=1)
        assert ds.n == 2000
        assert sorted(ds.columns) == ["x1", "x2"]
        assert np.all(ds.y > 0)

    def test_gpd_rows_exceed_location(self):
        ds = dataio.simulate_mixture(seed=2)
        X = np.column_stack([np.ones(ds.n), ds.columns["x1"], ds.columns["x2"]])
        loc = np.exp(X[1800:] @ np.array(dataio.MIXTURE_DESIGN["beta_loc"]))
        assert np.all(ds.y[1800:] >= loc)

    def test_gpd_block_distribution(self):
        from scipy import stats

        ds = dataio.simulate_mixture(n=20_001, n_tail=20_000, seed=5)
        X = np.column_stack([np.ones(ds.n), ds.columns["x1"], ds.columns["x2"]])[1:]
        loc = np.exp(X @ np.array(dataio.MIXTURE_DESIGN["beta_loc"]))
        scale = np.exp(X @ np.array(dataio.MIXTURE_DESIGN["beta_scale"]))
        u = stats.genpareto.cdf(ds.y[1:], 1.5, loc=loc, scale=scale)
        assert stats.kstest(u, "uniform").pvalue > 0.01

    def test_reproducible(self):
        a = dataio.simulate_mixture(seed=7)
        b = dataio.simulate_mixture(seed=7)
        assert_array_equal(a.y, b.y)
        assert not np.array_equal(a.y, dataio.simulate_mixture(seed=8).y)

    def test_gamma_block_means(self):
        beta = np.array(dataio.MIXTURE_DESIGN["beta_body"])
        ds = dataio.simulate_mixture(n=100_001, n_tail=1, seed=11)
        x1, x2 = ds.columns["x1"][:-1], ds.columns["x2"][:-1]
        y = ds.y[:-1]
        mean = np.exp(beta[0] + beta[1] * x1 + beta[2] * x2)
        # four bins per covariate; within each, the average of y / E[y | x] should be 1
        for x in (x1, x2):
            edges = np.quantile(x, [0.25, 0.5, 0.75])
            bins = np.digitize(x, edges)
            for b in range(4):
                sel = bins == b
                assert abs(np.mean(y[sel] / mean[sel]) - 1.0) < 0.05

    def test_gamma_dispersion(self):
        beta = np.array(dataio.MIXTURE_DESIGN["beta_body"])
        ds = dataio.simulate_mixture(n=100_001, n_tail=1, seed=12)
        X = np.column_stack([np.ones(ds.n), ds.columns["x1"], ds.columns["x2"]])[:-1]
        ratio = ds.y[:-1] / np.exp(X @ beta)
        # y / mean is Gamma(shape 1/phi, scale phi), so its variance is phi
        assert np.var(ratio) == pytest.approx(1.5, rel=0.05)

    def test_bad_sizes(self):
        with pytest.raises(DataError):
            dataio.simulate_mixture(n=10, n_tail=10)
        with pytest.raises(DataError):
            dataio.simulate_mixture(beta_body=(1.0, 2.0))


class TestSimulateComposite:
    def test_location_scaling(self):
        alpha = np.log([1.5, 1.0, 2.0, 1.5, 2.0, 1.5])
        a = dataio.simulate_composite(500, [0.0, 0.0], alpha, seed=3)
        b = dataio.simulate_composite(500, [math.log(4.0), 0.0], alpha, seed=3)
        np.testing.assert_allclose(b.y, 4.0 * a.y, rtol=1e-13)
        assert_array_equal(a.columns["x1"], b.columns["x1"])
