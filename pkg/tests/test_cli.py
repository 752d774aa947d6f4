import csv
import io
import subprocess
import sys

import pytest

from artcollector.cli import ESTIMATE_COLUMNS, HEATMAP_COLUMNS, main

BERN = ["--eps", "0.3", "--delta", "0.2", "--eta", "2"]

GOLDEN = """\
# schema: artcollector-estimate v1
lambda,theta,method,value,cert_type,cert_value,stderr,bound,iterations,seed
0.265,0.284,transfer,0.01991889418178668,analytic,3.938343589451361e-05,,3.938343589451361e-05,20,3
"""


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    lines = text.splitlines()
    assert lines[0].startswith("# schema: artcollector-")
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def test_golden_transfer_row(capsys):
    code, out, _ = run(["estimate", *BERN, "--lambda", "0.265", "--theta", "0.284",
                        "--method", "transfer", "--seed", "3"], capsys)
    assert code == 0
    got, want = out.splitlines(), GOLDEN.splitlines()
    assert got[:2] == want[:2]
    g, w = got[2].split(","), want[2].split(",")
    assert g[:3] == w[:3] and g[4] == w[4] and g[-2:] == w[-2:]
    assert float(g[3]) == pytest.approx(float(w[3]), abs=1e-13)
    assert float(g[5]) == pytest.approx(float(w[5]), rel=1e-9)


def test_estimate_columns_and_methods(capsys):
    code, out, _ = run(["estimate", *BERN, "--policies", "0.265:0.284,0.5:1.0",
                        "--method", "ratio,cf-v", "--replications", "2000", "--depth", "40",
                        "--seed", "1"], capsys)
    assert code == 0
    rows = table(out)
    assert list(rows[0]) == list(ESTIMATE_COLUMNS)
    methods = [r["method"] for r in rows]
    assert methods == ["ratio", "cf-v", "boundary", "boundary"]
    assert all(r["cert_type"] == "mixed" for r in rows[:2])
    assert rows[2]["cert_type"] == "analytic"


def test_lambda_zero_is_exactly_zero(capsys):
    code, out, _ = run(["estimate", *BERN, "--lambda", "0", "--theta", "0.5"], capsys)
    rows = table(out)
    assert code == 0 and float(rows[0]["value"]) == 0.0 and rows[0]["method"] == "boundary"


def test_output_is_byte_identical(capsys, tmp_path):
    argv = ["estimate", *BERN, "--lambda", "0.3", "--theta", "0.4", "--method", "direct",
            "--min-iter", "500", "--reps", "5", "--seed", "9"]
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_seed_precedence(capsys, monkeypatch, tmp_path):
    argv = ["estimate", *BERN, "--lambda", "0.3", "--theta", "0.4", "--method", "direct",
            "--min-iter", "200", "--reps", "4"]
    monkeypatch.setenv("ARTCOLLECTOR_SEED", "77")
    _, out, _ = run(argv, capsys)
    assert table(out)[0]["seed"] == "77"
    cfg = tmp_path / "c.ini"
    cfg.write_text("[stream]\nseed = 5\n")
    _, out, _ = run(argv + ["--config", str(cfg)], capsys)
    assert table(out)[0]["seed"] == "5"
    _, out, _ = run(argv + ["--config", str(cfg), "--seed", "6"], capsys)
    assert table(out)[0]["seed"] == "6"
    monkeypatch.delenv("ARTCOLLECTOR_SEED")
    _, out, _ = run(argv, capsys)
    assert table(out)[0]["seed"] == "12345"


def test_config_supplies_stream_and_policy(capsys, tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[stream]\nkind = bern\neps_low = 0.3\ndelta_low = 0.2\nhigh = 2\n"
                   "[policy]\nlambda = 0.265\ntheta = 0.284\n[estimate]\nmethod = transfer\n")
    code, out, _ = run(["estimate", "--config", str(cfg)], capsys)
    assert code == 0 and table(out)[0]["method"] == "transfer"


@pytest.mark.parametrize("argv", [
    ["estimate", *BERN, "--lambda", "2", "--theta", "0.5"],
    ["estimate", *BERN, "--lambda", "0.3"],
    ["estimate", *BERN, "--lambda", "0.3", "--theta", "0.3", "--method", "magic"],
    ["estimate", "--lambda", "0.3", "--theta", "0.3"],
    ["estimate", *BERN, "--policies", "0.3-0.3"],
    ["estimate", *BERN, "--lambda", "0.3", "--theta", "0.3", "--config", "/nonexistent.ini"],
    ["heatmap", *BERN, "--resolution", "1"],
])
def test_usage_errors_exit_2(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2 and "usage:" in err


def test_numeric_failure_exits_3(capsys):
    code, _, err = run(["estimate", *BERN, "--lambda", "0.3", "--theta", "0.3", "--max-iter", "50",
                        "--min-iter", "10", "--rel-tol", "1e-12"], capsys)
    assert code == 3 and "numeric failure" in err


def test_help_lists_columns():
    out = subprocess.run([sys.executable, "-m", "artcollector.cli", "estimate", "--help"],
                         capture_output=True, text=True, check=True).stdout
    for col in ESTIMATE_COLUMNS + HEATMAP_COLUMNS:
        assert col in out


def test_console_script_exit_code():
    res = subprocess.run([sys.executable, "-m", "artcollector.cli", "estimate", *BERN,
                          "--lambda", "7", "--theta", "0.1"], capture_output=True, text=True)
    assert res.returncode == 2


def test_heatmap_table(capsys):
    code, out, err = run(["heatmap", *BERN, "--resolution", "3", "--estimator", "transfer",
                          "--iters", "12"], capsys)
    rows = table(out)
    assert code == 0 and len(rows) == 9 and list(rows[0]) == list(HEATMAP_COLUMNS)
    assert float(rows[0]["lambda"]) == 0.25
    assert err.strip()


def test_heatmap_flags_negative_cells(capsys):
    code, out, _ = run(["heatmap", "--eps", "0.5", "--delta", "0.5", "--eta", "1.2",
                        "--resolution", "2", "--estimator", "transfer", "--iters", "10"], capsys)
    assert code == 0 and all("negative" in r["flag"] for r in table(out))


def test_optimize_summary(capsys):
    code, out, _ = run(["optimize", *BERN, "--resolution", "4", "--estimator", "transfer",
                        "--iters", "20"], capsys)
    assert code == 0
    assert "KELLY_EFFECT" in out and "SUPERCRITICAL" in out


def test_bounds_table(capsys):
    code, out, _ = run(["bounds", *BERN, "--lambda", "0.265", "--theta", "0.284"], capsys)
    rows = table(out)
    assert code == 0
    names = [r["method"] for r in rows]
    assert "bound:lower_art" in names and "bound:upper_logplus" in names
    assert names[-1] == "transfer"


def test_meanfield_table(capsys):
    code, out, err = run(["meanfield", "--alpha", "2", "--beta", "0.5", "--lambda", "0.3",
                          "--theta", "0.6", "--u0", "1", "--v0", "3", "--steps", "5"], capsys)
    rows = table(out)
    assert code == 0 and len(rows) == 6
    w = {float(r["alphaU_plus_V"]) for r in rows}
    assert max(w) - min(w) < 1e-12
    assert "mu" in err
