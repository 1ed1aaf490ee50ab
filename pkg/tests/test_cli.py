import json
import math

import numpy as np
import pytest

from nonneg_dp.bias import bias_ratio_restricted_vs_bit
from nonneg_dp.cli import main, read_csv_report


def run(*argv):
    return main(list(argv))


def fmt17(value):
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    return str(value)


class TestBiasCurve:
    def test_clamped_curve_values(self, tmp_path):
        out = tmp_path / "curve.csv"
        code = run("bias-curve", "--mechanism", "bit", "--epsilon", "1",
                   "--sensitivity", "1", "--q-min", "0", "--q-max", "4",
                   "--q-points", "5", "--samples", "20000", "--seed", "3",
                   "--out", str(out))
        assert code == 0
        header, rows, _ = read_csv_report(str(out))
        assert header == ["q", "bias_closed_form", "bias_quadrature", "bias_mc", "mc_stderr"]
        assert rows[0][0] == 0.0 and rows[0][1] == 0.5
        for q, closed, quad, mc, stderr in rows:
            assert quad == pytest.approx(closed, abs=1e-8)
            assert abs(mc - closed) <= 4 * stderr

    def test_restricted_curve_starts_at_scale(self, tmp_path):
        out = tmp_path / "curve.csv"
        assert run("bias-curve", "--mechanism", "restricted", "--q-points", "3",
                   "--q-max", "2", "--samples", "20000", "--seed", "5",
                   "--out", str(out)) == 0
        _, rows, _ = read_csv_report(str(out))
        assert rows[0][1] == 1.0

    def test_json_format(self, tmp_path):
        out = tmp_path / "curve.json"
        assert run("bias-curve", "--mechanism", "bit", "--q-points", "2",
                   "--q-max", "1", "--samples", "1000", "--seed", "1",
                   "--format", "json", "--out", str(out)) == 0
        payload = json.loads(out.read_text())
        assert payload["rows"][0]["bias_closed_form"] == 0.5

    def test_multiplicative_requires_positive_grid(self, tmp_path):
        code = run("bias-curve", "--mechanism", "multiplicative", "--kbound", "0.5",
                   "--q-min", "0", "--q-max", "2", "--q-points", "3",
                   "--samples", "1000", "--seed", "1",
                   "--out", str(tmp_path / "x.csv"))
        assert code == 2


class TestOptimalAlpha:
    def test_unit_scale_report(self, tmp_path):
        out = tmp_path / "alpha.json"
        assert run("optimal-alpha", "--scale", "1", "--out", str(out)) == 0
        record = json.loads(out.read_text())
        assert record["alpha_star"] == pytest.approx(0.35173371124919584, abs=1e-11)
        assert record["B_at_zero"] == 0.5
        assert record["B_at_alpha_star"] == pytest.approx(record["alpha_star"], abs=1e-10)
        assert record["improvement_ratio"] > 1

    def test_scaling_with_b(self, tmp_path):
        out = tmp_path / "alpha.json"
        assert run("optimal-alpha", "--scale", "2", "--out", str(out)) == 0
        record = json.loads(out.read_text())
        assert record["alpha_star"] == pytest.approx(0.7034674224983917, rel=1e-10)

    def test_scale_from_privacy_parameters(self, tmp_path):
        out = tmp_path / "alpha.json"
        assert run("optimal-alpha", "--epsilon", "2", "--sensitivity", "1",
                   "--out", str(out)) == 0
        assert json.loads(out.read_text())["b"] == 0.5


class TestCompare:
    def test_ratio_column(self, tmp_path):
        out = tmp_path / "compare.csv"
        assert run("compare", "--epsilon", "1", "--sensitivity", "1",
                   "--q-min", "0", "--q-max", "20", "--q-points", "50",
                   "--out", str(out)) == 0
        _, rows, _ = read_csv_report(str(out))
        assert rows[0][3] == 4.0
        for q, _, _, ratio in rows:
            assert ratio > 2.0
            assert ratio == pytest.approx(bias_ratio_restricted_vs_bit(q, 1.0, 1.0),
                                          rel=1e-10)


class TestVerifyDp:
    def test_plain_passes_at_epsilon(self, tmp_path):
        out = tmp_path / "cert.json"
        assert run("verify-dp", "--mechanism", "laplace", "--epsilon", "1",
                   "--sensitivity", "1", "--out", str(out)) == 0
        cert = json.loads(out.read_text())
        assert cert["passed"] is True
        assert cert["max_log_ratio_observed"] == pytest.approx(1.0, abs=1e-9)

    def test_restricted_passes_at_doubled_level(self, tmp_path):
        out = tmp_path / "cert.json"
        assert run("verify-dp", "--mechanism", "restricted", "--epsilon", "1",
                   "--sensitivity", "1", "--out", str(out)) == 0
        cert = json.loads(out.read_text())
        assert cert["epsilon_claimed"] == 2.0 and cert["passed"] is True

    def test_restricted_fails_when_claimed_single_level(self, tmp_path):
        out = tmp_path / "cert.json"
        code = run("verify-dp", "--mechanism", "restricted", "--epsilon", "1",
                   "--sensitivity", "1", "--claimed", "1.0", "--out", str(out))
        assert code == 1
        assert json.loads(out.read_text())["passed"] is False

    def test_multiplicative_passes_on_log_scale(self, tmp_path):
        out = tmp_path / "cert.json"
        assert run("verify-dp", "--mechanism", "multiplicative", "--epsilon", "1",
                   "--kbound", "0.5", "--out", str(out)) == 0

    def test_postprocessed_has_no_density_to_certify(self, tmp_path):
        assert run("verify-dp", "--mechanism", "bit",
                   "--out", str(tmp_path / "cert.json")) == 2


class TestMcValidate:
    def test_z_scores_bounded(self, tmp_path):
        out = tmp_path / "mc.csv"
        assert run("mc-validate", "--mechanism", "bit", "--q-points", "5",
                   "--q-max", "4", "--samples", "20000", "--seed", "11",
                   "--out", str(out)) == 0
        _, rows, summaries = read_csv_report(str(out))
        assert len(summaries) == 1 and summaries[0].startswith("max_abs_z=")
        assert float(summaries[0].split("=")[1]) < 4.0
        for row in rows:
            assert abs(row[4]) < 4.0
            assert row[5] == ""  # no warning for clamping

    def test_divergent_multiplicative_flags_warning(self, tmp_path):
        out = tmp_path / "mc.csv"
        assert run("mc-validate", "--mechanism", "multiplicative", "--kbound", "2",
                   "--q-min", "1", "--q-max", "2", "--q-points", "2",
                   "--samples", "1000", "--seed", "11", "--out", str(out)) == 0
        header, rows, _ = read_csv_report(str(out))
        assert header[-1] == "warning"
        assert all("infinite" in row[5] for row in rows)


class TestQueryInfo:
    def test_mean_report(self, tmp_path):
        data = tmp_path / "records.txt"
        data.write_text("".join(f"0.{d}\n" for d in range(1, 10)) + "1.0\n")
        out = tmp_path / "info.json"
        assert run("query-info", "--data", str(data), "--lower", "0.1",
                   "--upper", "1", "--query", "mean", "--epsilon", "1",
                   "--out", str(out)) == 0
        record = json.loads(out.read_text())
        assert record["n"] == 10
        assert record["value"] == pytest.approx(0.55)
        assert record["sensitivity"] == pytest.approx(0.09)
        assert record["relative_bound"] == (1 - 0.1) / (0.1 * 10)

    def test_zero_lower_bound_reports_unbounded_ratio(self, tmp_path):
        data = tmp_path / "records.txt"
        data.write_text("0.5\n0.25\n")
        out = tmp_path / "info.json"
        assert run("query-info", "--data", str(data), "--lower", "0",
                   "--upper", "1", "--query", "mean", "--out", str(out)) == 0
        assert json.loads(out.read_text())["relative_bound"] == "inf"

    def test_record_outside_bounds_is_usage_error(self, tmp_path):
        data = tmp_path / "records.txt"
        data.write_text("2.5\n")
        assert run("query-info", "--data", str(data), "--lower", "0",
                   "--upper", "1", "--query", "mean",
                   "--out", str(tmp_path / "o.json")) == 2

    def test_unparsable_record_is_usage_error(self, tmp_path):
        data = tmp_path / "records.txt"
        data.write_text("0.5\noops\n")
        assert run("query-info", "--data", str(data), "--lower", "0",
                   "--upper", "1", "--query", "mean",
                   "--out", str(tmp_path / "o.json")) == 2


class TestConfigHandling:
    def test_config_file_supplies_defaults_and_flags_override(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"scale": 2.0, "format": "json"}))
        out = tmp_path / "alpha.json"
        assert run("optimal-alpha", "--config", str(config), "--out", str(out)) == 0
        assert json.loads(out.read_text())["b"] == 2.0
        assert run("optimal-alpha", "--config", str(config), "--scale", "1",
                   "--out", str(out)) == 0
        assert json.loads(out.read_text())["b"] == 1.0

    def test_malformed_config_is_usage_error(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text("{not json")
        assert run("optimal-alpha", "--config", str(config)) == 2

    def test_env_seed_fallback(self, tmp_path, monkeypatch):
        args = ("bias-curve", "--mechanism", "bit", "--q-points", "3", "--q-max", "2",
                "--samples", "1000")
        flagged = tmp_path / "flagged.csv"
        assert run(*args, "--seed", "99", "--out", str(flagged)) == 0
        monkeypatch.setenv("NONNEG_DP_SEED", "99")
        from_env = tmp_path / "env.csv"
        assert run(*args, "--out", str(from_env)) == 0
        assert flagged.read_bytes() == from_env.read_bytes()

    def test_invalid_env_seed_is_usage_error(self, monkeypatch):
        monkeypatch.setenv("NONNEG_DP_SEED", "not-a-number")
        assert run("optimal-alpha", "--scale", "1") == 2


class TestErrorHandling:
    def test_bad_epsilon_is_usage_error(self):
        assert run("optimal-alpha", "--epsilon", "-1") == 2

    def test_missing_kbound_is_usage_error(self):
        assert run("bias-curve", "--mechanism", "multiplicative") == 2

    def test_log_grid_requires_positive_origin(self):
        assert run("compare", "--q-log", "--q-min", "0") == 2

    def test_unwritable_output_path(self):
        assert run("optimal-alpha", "--scale", "1",
                   "--out", "/nonexistent-dir/report.json") == 2

    def test_unknown_mechanism_exits_via_argparse(self):
        with pytest.raises(SystemExit) as excinfo:
            run("bias-curve", "--mechanism", "bogus")
        assert excinfo.value.code == 2


class TestDeterminismAndRoundTrip:
    def test_repeat_runs_are_byte_identical(self, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ("mc-validate", "--mechanism", "restricted", "--q-points", "4",
                "--q-max", "3", "--samples", "5000", "--seed", "21")
        assert run(*args, "--out", str(first)) == 0
        assert run(*args, "--out", str(second)) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_csv_round_trip_preserves_values(self, tmp_path):
        out = tmp_path / "curve.csv"
        assert run("bias-curve", "--mechanism", "ramp", "--alpha", "0.35",
                   "--q-points", "4", "--q-max", "3", "--samples", "2000",
                   "--seed", "13", "--out", str(out)) == 0
        header, rows, summaries = read_csv_report(str(out))
        lines = [",".join(header)]
        lines += [",".join(fmt17(cell) for cell in row) for row in rows]
        lines += [f"# {s}" for s in summaries]
        assert out.read_text() == "\n".join(lines) + "\n"

    def test_stdout_output(self, capsys):
        assert run("optimal-alpha", "--scale", "1") == 0
        record = json.loads(capsys.readouterr().out)
        assert record["B_at_zero"] == 0.5
