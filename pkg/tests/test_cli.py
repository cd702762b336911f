import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from tfmm_interp.cli import EXIT_INPUT, EXIT_NONCONVERGED, EXIT_OK, RunConfig, main


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_trajectory_default_outputs(tmp_path):
    out = tmp_path / "t"
    assert main(["trajectory", "--out-dir", str(out)]) == EXIT_OK
    rows = _rows(out / "trajectory.csv")
    assert rows[0] == ["k", "w_1", "w_2", "w_3"]
    assert len(rows) == 1002
    assert [float(x) for x in rows[1][1:]] == [0.05, 0.55, 0.4]
    assert [float(x) for x in rows[-1][1:]] == [0.4, 0.5, 0.1]
    lin = np.array(_rows(out / "trajectory_linear.csv")[1:], dtype=float)
    np.testing.assert_allclose(lin[500, 1:], [0.225, 0.525, 0.25], atol=1e-15)
    deltas = _rows(out / "deltas.csv")
    assert deltas[0] == ["k", "dw_1", "dw_2", "dw_3"] and len(deltas) == 1001
    for scheme in ("approx_optimal", "linear", "geometric"):
        assert (out / f"trajectory_{scheme}.csv").exists()


def test_trajectory_custom(tmp_path):
    out = tmp_path / "t"
    code = main(["trajectory", "--out-dir", str(out), "--start", "0.5,0.5", "--end", "0.6,0.4",
                 "--steps", "4", "--schemes", "linear"])
    assert code == EXIT_OK
    rows = np.array(_rows(out / "trajectory.csv")[1:], dtype=float)
    np.testing.assert_allclose(rows[:, 1], [0.5, 0.525, 0.55, 0.575, 0.6], atol=1e-15)


@pytest.mark.parametrize(
    "args, needle",
    [
        (["--start", "0.7,0.2", "--end", "0.5,0.5"], "SumNotOne"),
        (["--start", "1.0,0.0", "--end", "0.5,0.5"], "OutOfBounds"),
        (["--start", "0.5,0.5", "--end", "0.2,0.3,0.5"], "differ in length"),
        (["--steps", "0"], "num_steps"),
        (["--schemes", "harmonic"], "harmonic"),
    ],
)
def test_trajectory_rejects(tmp_path, capsys, args, needle):
    out = tmp_path / "bad"
    assert main(["trajectory", "--out-dir", str(out), *args]) == EXIT_INPUT
    assert needle in capsys.readouterr().err
    assert not out.exists()


def test_parser_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["trajectory", "--steps", "many"])
    assert exc.value.code == EXIT_INPUT
    with pytest.raises(SystemExit) as exc:
        main(["launch"])
    assert exc.value.code == EXIT_INPUT


def test_optimize(tmp_path):
    out = tmp_path / "o"
    assert main(["optimize", "--out-dir", str(out), "--steps", "200"]) == EXIT_OK
    summary = json.loads((out / "optimize.json").read_text())
    assert summary["converged"]
    v = summary["values"]
    assert v["one_step"] < v["linear"] < v["approx_optimal"] <= v["numerical_optimal"]
    assert 0.9 <= summary["value_capture"] <= 1.0
    assert len(_rows(out / "deviation_linear.csv")) == 202


def test_optimize_nonconverged(tmp_path, capsys):
    out = tmp_path / "o"
    args = ["optimize", "--out-dir", str(out), "--steps", "200", "--max-iterations", "1",
            "--gradient-tolerance", "1e-300", "--method", "softmax"]
    assert main(args) == EXIT_NONCONVERGED
    assert "did not converge" in capsys.readouterr().err
    assert (out / "optimize.json").exists()
    assert main(args + ["--allow-nonconverged"]) == EXIT_OK


def test_backtest_synthetic(tmp_path):
    out = tmp_path / "b"
    code = main(["backtest", "--out-dir", str(out), "--synthetic", "--blocks", "80", "--lookback", "10",
                 "--cadence", "5", "--fees", "0,0.003", "--schemes", "linear,approx", "--seed", "3"])
    assert code == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert [r["file"] for r in summary["runs"]] == [
        "report_linear_fee0.csv", "report_linear_fee0.003.csv",
        "report_approx_optimal_fee0.csv", "report_approx_optimal_fee0.003.csv"]
    rows = _rows(out / "report_linear_fee0.003.csv")
    assert rows[0] == ["timestamp", "value", "fees_cum", "arb_cost_cum"] and len(rows) == 81
    assert float(rows[1][1]) == pytest.approx(1e6)


def test_backtest_csv_prices(tmp_path):
    prices = tmp_path / "p.csv"
    lines = ["timestamp,ETH,BTC"] + [f"{t},{2000 * 1.001 ** t},{30000 * 0.999 ** t}" for t in range(60)]
    prices.write_text("\n".join(lines) + "\n")
    out = tmp_path / "b"
    code = main(["backtest", "--out-dir", str(out), "--prices", str(prices), "--numeraire", "USD",
                 "--lookback", "10", "--cadence", "5", "--schemes", "linear"])
    assert code == EXIT_OK
    assert json.loads((out / "summary.json").read_text())["symbols"] == ["USD", "ETH", "BTC"]


def test_backtest_bad_csv_reports_line(tmp_path, capsys):
    prices = tmp_path / "p.csv"
    prices.write_text("timestamp,A,B\n1,1,2\n2,1,oops\n")
    assert main(["backtest", "--out-dir", str(tmp_path / "b"), "--prices", str(prices)]) == EXIT_INPUT
    assert "line 3" in capsys.readouterr().err


def test_backtest_needs_prices(tmp_path, capsys):
    assert main(["backtest", "--out-dir", str(tmp_path / "b")]) == EXIT_INPUT
    assert "--synthetic" in capsys.readouterr().err


def test_compare(tmp_path):
    out = tmp_path / "c"
    code = main(["compare", "--out-dir", str(out), "--seeds", "3", "--blocks", "60", "--lookback", "10",
                 "--fees", "0,0.01", "--schemes", "approx,linear"])
    assert code == EXIT_OK
    summary = json.loads((out / "compare.json").read_text())
    assert summary["numerator"] == "approx_optimal" and summary["seeds"] == 3
    assert len(summary["by_fee"]) == 2
    assert len(_rows(out / "paired_ratios.csv")) == 7


def test_config_round_trip(tmp_path):
    first = tmp_path / "a"
    assert main(["trajectory", "--out-dir", str(first), "--steps", "12", "--schemes", "linear"]) == EXIT_OK
    cfg = json.loads((first / "config.json").read_text())
    assert cfg["steps"] == 12
    second = tmp_path / "b"
    assert main(["trajectory", "--config", str(first / "config.json"), "--out-dir", str(second)]) == EXIT_OK
    assert (first / "trajectory.csv").read_bytes() == (second / "trajectory.csv").read_bytes()
    assert RunConfig.from_file(first / "config.json").steps == 12


def test_config_unknown_key(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text('{"stepz": 3}')
    assert main(["trajectory", "--config", str(path), "--out-dir", str(tmp_path / "o")]) == EXIT_INPUT
    assert "stepz" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    out = tmp_path / "m"
    proc = subprocess.run([sys.executable, "-m", "tfmm_interp", "trajectory", "--steps", "3", "--out-dir", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "trajectory.csv").exists()
