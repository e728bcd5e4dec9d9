import json
import math

import numpy as np
import pytest

from confdist.cli import load_csv_table, main
from confdist.data import Dataset
from confdist.errors import DataError
from confdist.linear import contrast, contrast_pivot, fit_ols, variance_pivot
from confdist.numerics import RngStream, rng_draws
from confdist.pivots import interval_endpoint

T5_Q95 = 2.0150483733330504


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(f"{v:.17g}" for v in row))
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture
def normal_csv(tmp_path):
    rng = np.random.default_rng(42)
    n = 20
    x1 = rng.normal(size=n)
    x2 = rng.normal(size=n)
    y = 1.0 + 2.0 * x1 - 0.5 * x2 + rng.normal(size=n)
    path = tmp_path / "normal.csv"
    write_csv(path, ["y", "x1", "x2"], np.column_stack([y, x1, x2]))
    return path, y, x1, x2


@pytest.fixture
def gamma_csv(tmp_path):
    rng = np.random.default_rng(7)
    n = 30
    x1 = rng.normal(size=n)
    mu = np.exp(0.5 + 0.3 * x1)
    y = mu * rng.gamma(2.0, 0.5, size=n)
    path = tmp_path / "gamma.csv"
    write_csv(path, ["y", "x1"], np.column_stack([y, x1]))
    return path, y, x1


class TestCsvLoader:
    def test_parses_and_names_bad_cells(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b\n1,2\n3,oops\n")
        with pytest.raises(DataError, match="line 3, column 'b'"):
            load_csv_table(p)

    def test_missing_column(self, tmp_path):
        p = tmp_path / "ok.csv"
        p.write_text("a,b\n1,2\n")
        table = load_csv_table(p)
        with pytest.raises(DataError, match="'c' not found"):
            table.column("c")

    def test_ragged_row_rejected(self, tmp_path):
        p = tmp_path / "ragged.csv"
        p.write_text("a,b\n1,2\n3\n")
        with pytest.raises(DataError, match="line 3"):
            load_csv_table(p)


class TestFitCommand:
    def test_normal_fit_matches_library(self, normal_csv, capsys):
        path, y, x1, x2 = normal_csv
        code = main(["fit", "--file", str(path), "--model", "normal",
                     "--response", "y", "--design", "x1,x2"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        X = np.column_stack([np.ones(len(y)), x1, x2])
        fit = fit_ols(Dataset(y=y, X=X))
        np.testing.assert_allclose(payload["beta_hat"], fit.beta_hat, atol=1e-10)
        assert payload["phi_hat_m"] == pytest.approx(fit.phi_hat_m, abs=1e-10)
        assert payload["df"] == fit.df

    def test_noise_free_normal_warns_degenerate(self, tmp_path, capsys):
        x = np.arange(1.0, 9.0)
        y = 2.0 + 3.0 * x
        p = tmp_path / "exact.csv"
        write_csv(p, ["y", "x"], np.column_stack([y, x]))
        code = main(["fit", "--file", str(p), "--model", "normal",
                     "--response", "y", "--design", "x"])
        captured = capsys.readouterr()
        assert code == 0
        payload = json.loads(captured.out)
        np.testing.assert_allclose(payload["beta_hat"], [2.0, 3.0], atol=1e-10)
        assert payload["degenerate"] is True
        assert "degenerate" in captured.err or "perfect fit" in captured.err

    def test_gamma_zero_response_names_row(self, tmp_path, capsys):
        p = tmp_path / "zero.csv"
        p.write_text("y,x\n1.0,0.1\n0.0,0.2\n2.0,0.3\n1.5,0.1\n2.5,0.9\n")
        code = main(["fit", "--file", str(p), "--model", "gamma",
                     "--response", "y", "--design", "x"])
        assert code == 3
        assert "row index 1" in capsys.readouterr().err

    def test_usage_error_without_response(self, normal_csv, capsys):
        path = normal_csv[0]
        code = main(["fit", "--file", str(path), "--model", "normal"])
        assert code == 2

    def test_rank_deficiency_is_data_error(self, tmp_path, capsys):
        x = np.arange(1.0, 11.0)
        p = tmp_path / "collinear.csv"
        write_csv(p, ["y", "x", "x2"], np.column_stack([x + 1.0, x, 2 * x]))
        code = main(["fit", "--file", str(p), "--model", "normal",
                     "--response", "y", "--design", "x,x2"])
        assert code == 3

    def test_gamma_known_mu_fit(self, tmp_path, capsys):
        y = rng_draws(RngStream(5, 0), "gamma", 12, shape=2.0, scale=0.5)
        p = tmp_path / "km.csv"
        write_csv(p, ["y"], y[:, None])
        code = main(["fit", "--file", str(p), "--model", "gamma",
                     "--response", "y", "--known-mu"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["model"] == "gamma_known_mu"
        assert payload["varphi_hat"] > 0


class TestConfdensCommand:
    def test_normal_location_style_density(self, tmp_path, capsys):
        # unit-information fixture: single coefficient, X'X = I after scaling
        rng = np.random.default_rng(3)
        n = 26
        x = rng.normal(size=n)
        x = x / np.linalg.norm(x)  # k = 1 exactly
        y = 1.3 * x + rng.normal(size=n) * 0.4
        p = tmp_path / "unit.csv"
        write_csv(p, ["y", "x"], np.column_stack([y, x]))
        code = main(["confdens", "--file", str(p), "--model", "normal",
                     "--response", "y", "--design", "x", "--no-intercept",
                     "--target", "contrast:1", "--grid=-4:6:201",
                     "--method", "exact"])
        assert code == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert out[0] == "contrast,confidence_density"
        grid = np.array([float(line.split(",")[0]) for line in out[1:]])
        dens = np.array([float(line.split(",")[1]) for line in out[1:]])

        fit = fit_ols(Dataset(y=y, X=x[:, None]))
        con = contrast(fit, np.array([1.0]))
        pv = contrast_pivot(fit, con)
        se = math.sqrt(con.k * fit.phi_hat_m)
        from confdist.numerics import t_pdf

        expected = np.array([t_pdf((con.lambda_hat - g) / se, fit.df) / se for g in grid])
        np.testing.assert_allclose(dens, expected, atol=1e-6)

    def test_variance_density_mode_matches_grid_search(self, tmp_path, capsys):
        rng = np.random.default_rng(11)
        n = 13  # df = 10 with three columns
        x1, x2 = rng.normal(size=n), rng.normal(size=n)
        y = 1.0 + x1 - x2 + rng.normal(size=n) * 1.4
        p = tmp_path / "var.csv"
        write_csv(p, ["y", "x1", "x2"], np.column_stack([y, x1, x2]))

        fit = fit_ols(Dataset(y=y, X=np.column_stack([np.ones(n), x1, x2])))
        lo, hi, npts = fit.phi_hat_m * 0.05, fit.phi_hat_m * 6.0, 1201
        code = main(["confdens", "--file", str(p), "--model", "normal",
                     "--response", "y", "--design", "x1,x2",
                     "--target", "variance", "--grid", f"{lo}:{hi}:{npts}",
                     "--method", "exact"])
        assert code == 0
        out = capsys.readouterr().out.strip().splitlines()[1:]
        grid = np.array([float(r.split(",")[0]) for r in out])
        dens = np.array([float(r.split(",")[1]) for r in out])
        # analytic mode of the transformed chi-square density: df*phm/(df+2)
        analytic = fit.df * fit.phi_hat_m / (fit.df + 2.0)
        found = grid[int(np.argmax(dens))]
        assert abs(found - analytic) <= (hi - lo) / (npts - 1)

    def test_grid_missing_mass_warns(self, tmp_path, capsys):
        rng = np.random.default_rng(4)
        n = 12
        x = rng.normal(size=n)
        y = 0.5 + x + rng.normal(size=n)
        p = tmp_path / "narrow.csv"
        write_csv(p, ["y", "x"], np.column_stack([y, x]))
        fit = fit_ols(Dataset(y=y, X=np.column_stack([np.ones(n), x])))
        lo, hi = fit.phi_hat_m * 0.8, fit.phi_hat_m * 1.2
        code = main(["confdens", "--file", str(p), "--model", "normal",
                     "--response", "y", "--design", "x",
                     "--target", "variance", "--grid", f"{lo}:{hi}:51",
                     "--method", "exact"])
        assert code == 0
        assert "warning" in capsys.readouterr().err

    def test_incompatible_pair_is_usage_error(self, gamma_csv, capsys):
        path = gamma_csv[0]
        code = main(["confdens", "--file", str(path), "--model", "gamma",
                     "--response", "y", "--design", "x1",
                     "--target", "precision", "--grid", "0.5:5:41",
                     "--method", "exact"])
        assert code == 2
        assert "valid target/method pairs" in capsys.readouterr().err

    def test_fraser_density_for_known_mu(self, tmp_path, capsys):
        y = rng_draws(RngStream(9, 0), "gamma", 15, shape=2.0, scale=0.5)
        p = tmp_path / "km.csv"
        write_csv(p, ["y"], y[:, None])
        from confdist.higher_order import fit_known_mean

        vh = fit_known_mean(y).varphi_hat
        code = main(["confdens", "--file", str(p), "--model", "gamma",
                     "--response", "y", "--known-mu", "--target", "precision",
                     "--grid", f"{vh*0.25}:{vh*4.0}:101", "--method", "fraser"])
        assert code == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert out[0] == "precision,confidence_density"
        dens = np.array([float(r.split(",")[1]) for r in out[1:]])
        assert np.all(dens >= 0)


class TestIntervalCommand:
    def test_contrast_t_quantile_endpoint(self, tmp_path, capsys):
        rng = np.random.default_rng(8)
        n = 7  # df = 5 with two columns
        x = rng.normal(size=n)
        y = 0.3 + 1.1 * x + rng.normal(size=n)
        p = tmp_path / "t5.csv"
        write_csv(p, ["y", "x"], np.column_stack([y, x]))
        code = main(["interval", "--file", str(p), "--model", "normal",
                     "--response", "y", "--design", "x",
                     "--target", "contrast:0,1", "--level", "0.95",
                     "--sides", "one", "--side", "lower", "--method", "exact"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        fit = fit_ols(Dataset(y=y, X=np.column_stack([np.ones(n), x])))
        con = contrast(fit, np.array([0.0, 1.0]))
        expected = con.lambda_hat - T5_Q95 * math.sqrt(con.k * fit.phi_hat_m)
        assert payload["statement"]["lower"] == pytest.approx(expected, abs=1e-8)
        assert payload["statement"]["confidence"] == 0.95

    def test_median_level_returns_estimate(self, tmp_path, capsys):
        rng = np.random.default_rng(9)
        n = 9
        x = rng.normal(size=n)
        y = 0.3 - 0.7 * x + rng.normal(size=n)
        p = tmp_path / "med.csv"
        write_csv(p, ["y", "x"], np.column_stack([y, x]))
        code = main(["interval", "--file", str(p), "--model", "normal",
                     "--response", "y", "--design", "x",
                     "--target", "contrast:0,1", "--level", "0.5",
                     "--sides", "one", "--method", "exact"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        fit = fit_ols(Dataset(y=y, X=np.column_stack([np.ones(n), x])))
        lam_hat = float(fit.beta_hat[1])
        assert payload["statement"]["lower"] == pytest.approx(lam_hat, abs=1e-8)

    def test_two_sided_agrees_with_one_sided_calls(self, normal_csv, capsys):
        path = normal_csv[0]
        args = ["interval", "--file", str(path), "--model", "normal",
                "--response", "y", "--design", "x1,x2",
                "--target", "contrast:0,1,0", "--method", "exact"]
        code = main(args + ["--level", "0.90", "--sides", "two"])
        assert code == 0
        two = json.loads(capsys.readouterr().out)["statement"]
        code = main(args + ["--level", "0.95", "--sides", "one", "--side", "lower"])
        lo = json.loads(capsys.readouterr().out)["statement"]["lower"]
        code = main(args + ["--level", "0.95", "--sides", "one", "--side", "upper"])
        hi = json.loads(capsys.readouterr().out)["statement"]["upper"]
        assert two["lower"] == pytest.approx(lo, abs=1e-10)
        assert two["upper"] == pytest.approx(hi, abs=1e-10)

    def test_round_trip_via_fit_json(self, normal_csv, tmp_path, capsys):
        path = normal_csv[0]
        fit_path = tmp_path / "fit.json"
        code = main(["fit", "--file", str(path), "--model", "normal",
                     "--response", "y", "--design", "x1,x2",
                     "--out", str(fit_path)])
        assert code == 0
        args_tail = ["--target", "variance", "--level", "0.9",
                     "--sides", "one", "--side", "lower", "--method", "exact"]
        code = main(["interval", "--file", str(path), "--model", "normal",
                     "--response", "y", "--design", "x1,x2"] + args_tail)
        direct = json.loads(capsys.readouterr().out)["statement"]["lower"]
        code = main(["interval", "--fit-json", str(fit_path), "--model", "normal"]
                    + args_tail)
        via_json = json.loads(capsys.readouterr().out)["statement"]["lower"]
        assert via_json == pytest.approx(direct, abs=1e-12)

    def test_gamma_first_order_round_trip(self, gamma_csv, tmp_path, capsys):
        path = gamma_csv[0]
        fit_path = tmp_path / "gfit.json"
        code = main(["fit", "--file", str(path), "--model", "gamma",
                     "--response", "y", "--design", "x1", "--out", str(fit_path)])
        assert code == 0
        args_tail = ["--target", "precision", "--level", "0.9",
                     "--sides", "one", "--side", "lower", "--method", "first_order"]
        code = main(["interval", "--file", str(path), "--model", "gamma",
                     "--response", "y", "--design", "x1"] + args_tail)
        direct = json.loads(capsys.readouterr().out)["statement"]["lower"]
        code = main(["interval", "--fit-json", str(fit_path), "--model", "gamma"]
                    + args_tail)
        via_json = json.loads(capsys.readouterr().out)["statement"]["lower"]
        assert via_json == pytest.approx(direct, abs=1e-12)

    def test_skovgaard_from_fit_json_is_usage_error(self, gamma_csv, tmp_path, capsys):
        path = gamma_csv[0]
        fit_path = tmp_path / "gfit.json"
        main(["fit", "--file", str(path), "--model", "gamma",
              "--response", "y", "--design", "x1", "--out", str(fit_path)])
        code = main(["interval", "--fit-json", str(fit_path), "--model", "gamma",
                     "--target", "precision", "--level", "0.9",
                     "--method", "skovgaard"])
        assert code == 2

    def test_matches_library_endpoint(self, normal_csv, capsys):
        path, y, x1, x2 = normal_csv
        code = main(["interval", "--file", str(path), "--model", "normal",
                     "--response", "y", "--design", "x1,x2",
                     "--target", "variance", "--level", "0.95",
                     "--sides", "one", "--side", "lower", "--method", "exact"])
        payload = json.loads(capsys.readouterr().out)
        X = np.column_stack([np.ones(len(y)), x1, x2])
        pv = variance_pivot(fit_ols(Dataset(y=y, X=X)))
        expected = interval_endpoint(pv, 0.95, "lower")
        assert payload["statement"]["lower"] == pytest.approx(expected, abs=1e-10)


class TestCoverageCommand:
    def test_runs_bundled_normal_scenario_shrunk(self, tmp_path, capsys):
        ini = tmp_path / "s.ini"
        ini.write_text(
            "[smoke]\nmodel = normal_regression\nn = 15\nreplications = 2000\n"
            "seed = 3\nlevels = 0.05, 0.95\nmethods = contrast_t\n"
            "beta = 1.0, -0.5, 0.25\nphi = 2.0\n"
        )
        out = tmp_path / "reports"
        code = main(["coverage", "--scenario", str(ini), "--out", str(out)])
        assert code == 0
        report = json.loads((out / "smoke.json").read_text())
        for row in report["results"]:
            assert abs(row["empirical_coverage"] - row["level"]) < 3.0 * math.sqrt(
                row["level"] * (1 - row["level"]) / 2000
            )

    def test_jobs_do_not_change_bytes(self, tmp_path):
        ini = tmp_path / "s.ini"
        ini.write_text(
            "[det]\nmodel = normal_regression\nn = 12\nreplications = 400\n"
            "seed = 5\nlevels = 0.5\nmethods = variance_chisq\n"
            "beta = 0.5, 1.0\nphi = 1.0\n"
        )
        outs = []
        for jobs in ("1", "4", "8"):
            out = tmp_path / f"rep{jobs}"
            assert main(["coverage", "--scenario", str(ini), "--out", str(out),
                         "--jobs", jobs]) == 0
            outs.append((out / "det.csv").read_bytes())
        assert outs[0] == outs[1] == outs[2]

    def test_unknown_method_is_schema_error(self, tmp_path, capsys):
        ini = tmp_path / "bad.ini"
        ini.write_text(
            "[bad]\nmodel = normal_regression\nn = 12\nreplications = 400\n"
            "seed = 5\nlevels = 0.5\nmethods = magic\nbeta = 0.5\nphi = 1.0\n"
        )
        code = main(["coverage", "--scenario", str(ini), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "magic" in capsys.readouterr().err

    def test_unknown_field_named(self, tmp_path, capsys):
        ini = tmp_path / "bad.ini"
        ini.write_text(
            "[bad]\nmodel = normal_regression\nn = 12\nreplications = 400\n"
            "seed = 5\nlevels = 0.5\nmethods = variance_chisq\nbeta = 0.5\n"
            "phi = 1.0\nbananas = 3\n"
        )
        code = main(["coverage", "--scenario", str(ini), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "bananas" in capsys.readouterr().err

    def test_bundled_scenarios_parse(self):
        from pathlib import Path

        from confdist.cli import _parse_scenarios

        root = Path(__file__).parent.parent / "scenarios"
        names = []
        for ini in sorted(root.glob("*.ini")):
            names.extend(name for name, _ in _parse_scenarios(str(ini), None))
        assert "normal_exact" in names
        assert "gamma_dominance" in names

    def test_seed_override_reproducible(self, tmp_path):
        ini = tmp_path / "s.ini"
        ini.write_text(
            "[det]\nmodel = normal_regression\nn = 12\nreplications = 300\n"
            "seed = 5\nlevels = 0.5\nmethods = variance_chisq\n"
            "beta = 0.5, 1.0\nphi = 1.0\n"
        )
        a = tmp_path / "a"
        b = tmp_path / "b"
        assert main(["coverage", "--scenario", str(ini), "--out", str(a),
                     "--seed", "99"]) == 0
        assert main(["coverage", "--scenario", str(ini), "--out", str(b),
                     "--seed", "99"]) == 0
        assert (a / "det.csv").read_bytes() == (b / "det.csv").read_bytes()
