import json

import numpy as np
import pytest

from sier import DataError, Dataset, RandomStream, cross_validate, predict
from sier import io as sio
from sier.cli import main


def write_xy(tmp_path, seed=0, n=30, p=6, q=2, noise=0.1, header=False):
    g = RandomStream(seed).generator()
    x = g.standard_normal((n, p))
    b = np.zeros((p, q))
    b[0, 0] = 1.0
    b[1, 1] = -0.8
    y = x @ b + noise * g.standard_normal((n, q))
    xp, yp = tmp_path / "x.csv", tmp_path / "y.csv"
    hx = [f"x{i}" for i in range(p)] if header else None
    hy = [f"y{i}" for i in range(q)] if header else None
    sio.write_csv(str(xp), x, hx)
    sio.write_csv(str(yp), y, hy)
    return xp, yp, x, y


class TestCsv:
    def test_roundtrip_bits(self, tmp_path, rs):
        vals = rs.generator().standard_normal((7, 4)) * np.logspace(-140, 140, 4)
        path = str(tmp_path / "vals.csv")
        sio.write_csv(path, vals, ["a", "b", "c", "d"])
        back, header = sio.read_csv(path)
        assert header == ["a", "b", "c", "d"]
        assert np.array_equal(back, vals)

    def test_headerless(self, tmp_path):
        path = str(tmp_path / "v.csv")
        (tmp_path / "v.csv").write_text("1,2\n3,4\n")
        arr, header = sio.read_csv(path)
        assert header is None
        assert np.array_equal(arr, [[1.0, 2.0], [3.0, 4.0]])

    def test_parse_error_location(self, tmp_path):
        (tmp_path / "bad.csv").write_text("a,b\n1,2\n3,oops\n")
        with pytest.raises(DataError, match=r"line 3, column 2"):
            sio.read_csv(str(tmp_path / "bad.csv"))

    def test_ragged_row(self, tmp_path):
        (tmp_path / "r.csv").write_text("1,2\n3\n")
        with pytest.raises(DataError, match="line 2"):
            sio.read_csv(str(tmp_path / "r.csv"))

    def test_empty_and_header_only(self, tmp_path):
        (tmp_path / "e.csv").write_text("\n")
        with pytest.raises(DataError, match="no data"):
            sio.read_csv(str(tmp_path / "e.csv"))
        (tmp_path / "h.csv").write_text("a,b\n")
        with pytest.raises(DataError, match="header only"):
            sio.read_csv(str(tmp_path / "h.csv"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            sio.read_csv(str(tmp_path / "nope.csv"))


class TestModelFile:
    def _fit(self, with_dropped=False):
        g = RandomStream(14).generator()
        x = g.standard_normal((30, 5))
        if with_dropped:
            x[:, 3] = 2.5
        y = x[:, :2] @ np.array([[1.0, 0.0], [0.3, -0.4]]) + 0.05 * g.standard_normal((30, 2))
        model, _ = cross_validate(Dataset(x, y), rs=RandomStream(0))
        return model, x

    def test_roundtrip_predictions_bit_exact(self, tmp_path):
        model, x = self._fit()
        path = str(tmp_path / "m.json")
        sio.save_model(model, path)
        back = sio.load_model(path)
        probe = RandomStream(50).generator().standard_normal((9, 5))
        assert np.array_equal(predict(model, probe), predict(back, probe))
        for k in range(model.decomposition.k + 1):
            assert np.array_equal(predict(model, x, k=k), predict(back, x, k=k))

    def test_roundtrip_with_dropped_columns(self, tmp_path):
        model, x = self._fit(with_dropped=True)
        assert model.standardizer.dropped == {3}
        path = str(tmp_path / "m.json")
        sio.save_model(model, path)
        back = sio.load_model(path)
        assert back.standardizer.dropped == {3}
        assert np.array_equal(predict(model, x), predict(back, x))

    def test_schema_version_check(self, tmp_path):
        model, _ = self._fit()
        path = str(tmp_path / "m.json")
        sio.save_model(model, path)
        doc = json.loads(open(path).read())
        doc["schema_version"] = 999
        open(path, "w").write(json.dumps(doc))
        with pytest.raises(DataError, match="schema_version"):
            sio.load_model(path)

    def test_malformed_json(self, tmp_path):
        (tmp_path / "m.json").write_text("{not json")
        with pytest.raises(DataError, match="JSON"):
            sio.load_model(str(tmp_path / "m.json"))


class TestCliFitPredict:
    def test_fit_then_predict_matches_in_process(self, tmp_path, capsys):
        xp, yp, x, y = write_xy(tmp_path, header=True)
        model_path = tmp_path / "model.json"
        assert main(["fit", str(xp), str(yp), "--out", str(model_path), "--seed", "3"]) == 0
        out = capsys.readouterr().out
        assert "chosen tau=" in out
        assert model_path.exists() and (tmp_path / "model.json.cv.csv").exists()

        pred_path = tmp_path / "pred.csv"
        assert main(["predict", str(model_path), str(xp), "--out", str(pred_path)]) == 0
        got, _ = sio.read_csv(str(pred_path))
        model = sio.load_model(str(model_path))
        expect = predict(model, x)
        assert np.array_equal(got, expect)

    def test_row_count_mismatch_exit_code(self, tmp_path, capsys):
        xp, yp, *_ = write_xy(tmp_path)
        bad = tmp_path / "short.csv"
        arr, _ = sio.read_csv(str(yp))
        sio.write_csv(str(bad), arr[:-3])
        rc = main(["fit", str(xp), str(bad), "--out", str(tmp_path / "m.json")])
        assert rc == 3
        err = capsys.readouterr().err
        assert "30" in err and "27" in err

    def test_predict_k_zero_gives_mean_rows(self, tmp_path):
        xp, yp, x, _y = write_xy(tmp_path)
        model_path = tmp_path / "model.json"
        main(["fit", str(xp), str(yp), "--out", str(model_path), "--seed", "1"])
        pred_path = tmp_path / "p0.csv"
        assert main(["predict", str(model_path), str(xp), "--out", str(pred_path), "--k", "0"]) == 0
        got, _ = sio.read_csv(str(pred_path))
        model = sio.load_model(str(model_path))
        assert np.array_equal(got, np.tile(model.standardizer.y_mean, (x.shape[0], 1)))

    def test_predict_k_too_large_exit_code(self, tmp_path, capsys):
        xp, yp, *_ = write_xy(tmp_path)
        model_path = tmp_path / "model.json"
        main(["fit", str(xp), str(yp), "--out", str(model_path)])
        rc = main(["predict", str(model_path), str(xp), "--out", str(tmp_path / "p.csv"), "--k", "40"])
        assert rc == 2

    def test_grid_override(self, tmp_path):
        xp, yp, *_ = write_xy(tmp_path)
        grid_path = tmp_path / "grid.csv"
        (grid_path).write_text("tau,lambda\n0.2,0.1\n2.0,0.4\n")
        model_path = tmp_path / "model.json"
        assert main(["fit", str(xp), str(yp), "--out", str(model_path), "--grid", str(grid_path)]) == 0
        model = sio.load_model(str(model_path))
        assert (model.tau, model.lam) in {(0.2, 0.1), (2.0, 0.4)}

    def test_bad_grid_width(self, tmp_path):
        xp, yp, *_ = write_xy(tmp_path)
        grid_path = tmp_path / "grid.csv"
        grid_path.write_text("0.2,0.1,9\n")
        rc = main(["fit", str(xp), str(yp), "--out", str(tmp_path / "m.json"), "--grid", str(grid_path)])
        assert rc == 3

    def test_cv_report_command(self, tmp_path):
        xp, yp, *_ = write_xy(tmp_path)
        report_path = tmp_path / "report.csv"
        assert main(["cv-report", str(xp), str(yp), "--out", str(report_path)]) == 0
        arr, header = sio.read_csv(str(report_path))
        assert header[:5] == ["pair", "tau", "lambda", "k", "e_mean"]
        assert header[-1] == "chosen"
        assert arr[:, -1].sum() == 1.0

    def test_numerical_failure_exit_code(self, tmp_path, monkeypatch, capsys):
        from sier import NumericalError
        import sier.cli as cli

        def boom(*a, **kw):
            raise NumericalError("synthetic failure")

        monkeypatch.setattr(cli, "cross_validate", boom)
        xp, yp, *_ = write_xy(tmp_path)
        rc = main(["fit", str(xp), str(yp), "--out", str(tmp_path / "m.json")])
        assert rc == 4
        assert "numerical failure" in capsys.readouterr().err

    def test_missing_model_is_data_error(self, tmp_path):
        xp, _yp, *_ = write_xy(tmp_path)
        rc = main(["predict", str(tmp_path / "missing.json"), str(xp),
                   "--out", str(tmp_path / "p.csv")])
        assert rc == 3


class TestCliCase1Data:
    def test_chosen_pair_is_a_default(self, tmp_path):
        from sier import DEFAULT_PAIRS, gen_case1

        train, _test, _truth = gen_case1(0.3, 0.2, 0.1, RandomStream(19), 40, 5)
        xp, yp = tmp_path / "x.csv", tmp_path / "y.csv"
        sio.write_csv(str(xp), train.x)
        sio.write_csv(str(yp), train.y)
        model_path = tmp_path / "m.json"
        assert main(["fit", str(xp), str(yp), "--out", str(model_path)]) == 0
        model = sio.load_model(str(model_path))
        assert any(p.tau == model.tau and p.lam == model.lam for p in DEFAULT_PAIRS)


class TestCliSimulate:
    def test_case1_deterministic_bytes(self, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["simulate", "--case", "1", "--reps", "1", "--seed", "7",
                "--n-train", "30", "--n-test", "20"]
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_study_csv_format(self, tmp_path):
        out = tmp_path / "s.csv"
        assert main(["simulate", "--case", "2", "--reps", "2", "--seed", "1",
                     "--p", "60", "--q", "8", "--n-train", "40", "--n-test", "25",
                     "--out", str(out)]) == 0
        lines = out.read_text().strip().splitlines()
        header = lines[0].split(",")
        assert header == ["rep", "mspe", "k_opt", "tau", "lambda", "se", "sp", "n_selected", "agg"]
        assert len(lines) == 1 + 2 + 2  # header + replicates + mean/sd
        assert lines[-2].split(",")[0] == "mean" and lines[-2].split(",")[-1] == "true"
        assert lines[-1].split(",")[0] == "sd"

    def test_figure1_curve(self, tmp_path):
        out = tmp_path / "curve.csv"
        assert main(["simulate", "--case", "figure1", "--seed", "2",
                     "--p", "60", "--q", "12", "--out", str(out)]) == 0
        arr, header = sio.read_csv(str(out))
        assert header == ["k", "err_sier", "err_svd"]

    def test_case3_warns_on_default_rho(self, tmp_path, capsys):
        out = tmp_path / "c3.csv"
        rc = main(["simulate", "--case", "3", "--reps", "1", "--seed", "1",
                   "--p", "220", "--q", "30", "--n-train", "25", "--n-test", "10",
                   "--out", str(out)])
        assert rc == 0
        assert "0.7" in capsys.readouterr().err

    def test_invalid_case_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--case", "9", "--out", str(tmp_path / "x.csv")])
        assert exc.value.code == 2


class TestCliApproxCurve:
    def test_reduced_scale_curve(self, tmp_path):
        out = tmp_path / "curve.csv"
        assert main(["approx-curve", "--seed", "3", "--n", "30", "--p", "50",
                     "--q", "12", "--rank", "6", "--support", "10",
                     "--out", str(out)]) == 0
        arr, header = sio.read_csv(str(out))
        assert header == ["k", "err_sier", "err_svd"]
        assert arr.shape[0] == 6
        assert np.all(arr[:, 1] <= arr[:, 2] + 1e-12)
        assert arr[-1, 1] <= 1e-10 and arr[-1, 2] <= 1e-10
