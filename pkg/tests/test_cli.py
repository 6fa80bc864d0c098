import csv
import io
import json
import math
import subprocess
import sys

import pytest

from icwlab import cli


def run(*argv, capsys):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def parse_csv(text):
    lines = text.splitlines()
    assert lines[0].startswith("# icwlab ") and "config_sha256=" in lines[0] and "seed=" in lines[0]
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def test_dk_scan_homogeneous(capsys):
    code, out, _ = run("dk-scan", "--weights", "[1]", "--beta", "0.5", "--h", "0",
                       "--n", "16,32,64,128,256", capsys=capsys)
    assert code == 0
    rows = parse_csv(out)
    assert [int(r["n"]) for r in rows] == [16, 32, 64, 128, 256]
    dks = [float(r["d_K"]) for r in rows]
    assert all(a > b for a, b in zip(dks, dks[1:]))
    for r in rows:
        assert float(r["sqrt_n_dK"]) == pytest.approx(math.sqrt(int(r["n"])) * float(r["d_K"]), rel=1e-15)


def test_stein_terms_reports_majorization(capsys):
    code, out, _ = run("stein-terms", "--weights", "[1]", "--n", "12", "--beta", "0.5", "--h", "0",
                       capsys=capsys)
    assert code == 0
    rows = {r["term"]: r for r in parse_csv(out)}
    total = sum(float(rows[t]["mean_abs"]) for t in ("T1", "T2", "T3"))
    assert rows["d_K"]["majorized"] == "true"
    assert float(rows["d_K"]["bound"]) == pytest.approx(total, rel=1e-14)
    assert float(rows["d_K"]["mean_abs"]) <= total
    assert all(rows[t]["majorized"] == "true" for t in rows if t.startswith(("R1", "R2", "R3", "R4")))
    assert {r["source"] for r in rows.values()} == {"exact-enumeration"}


def test_stein_terms_from_samples(capsys):
    code, out, _ = run("stein-terms", "--weights", "[1,2]", "--n", "20", "--beta", "0.3", "--h", "0.1",
                       "--source", "sample", "--count", "2000", "--seed", "3", capsys=capsys)
    assert code == 0
    rows = {r["term"]: r for r in parse_csv(out)}
    assert rows["T1"]["source"] == "sample-batch" and float(rows["T1"]["stderr"]) > 0


def test_malformed_weights_file_names_entry(tmp_path, capsys):
    bad = tmp_path / "w.json"
    bad.write_text("[1.0, 2.0, -0.5]")
    code, out, err = run("exact-dist", "--weights", str(bad), capsys=capsys)
    assert code != 0 and out == ""
    obj = json.loads(err)
    assert "weights[2]" in obj["message"] and obj["path"] == ["weights", 2]


def test_unparseable_weights(capsys):
    code, _, err = run("exact-dist", "--weights", "[1, 2", capsys=capsys)
    assert code != 0 and json.loads(err)["error"] == "UsageError"


def test_regime_error_reports_critical_beta(capsys):
    code, _, err = run("fixed-point", "--weights", "[1,1,2,2]", "--beta", "0.9", "--h", "0", capsys=capsys)
    obj = json.loads(err)
    assert code != 0 and obj["error"] == "RegimeError" and obj["beta_c"] == pytest.approx(0.6)


def test_config_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"weights": [1, 2], "bta": 0.3}))
    code, _, err = run("mgf", "--config", str(cfg), capsys=capsys)
    assert code != 0 and "bta" in json.loads(err)["message"]


def test_config_for_other_command_rejected(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"command": "mgf", "weights": [1, 2]}))
    code, _, err = run("sample", "--config", str(cfg), capsys=capsys)
    assert code != 0


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"weights": {"base": [1, 2], "replicate": 3}, "beta": 0.1, "h": 0.2}))
    code, out, _ = run("fixed-point", "--config", str(cfg), "--beta", "0.3", "--format", "json",
                       "--dry-run", capsys=capsys)
    obj = json.loads(out)
    assert code == 0 and obj["config"]["beta"] == 0.3 and obj["n"] == 6


@pytest.mark.parametrize("command", cli.COMMANDS)
def test_every_command_has_dry_run(command, capsys):
    code, out, err = run(command, "--weights", "[1,2]", "--n", "8", "--dry-run", capsys=capsys)
    assert code == 0, err
    assert json.loads(out)["status"] == "ok"


@pytest.mark.parametrize("argv", [
    ["fixed-point", "--weights", "[1,2]", "--beta", "0.3", "--h", "0.1"],
    ["fixed-point", "--weights", "[1,2]", "--scan-grid", "0.1,0.5,0.9:0,0.2"],
    ["exact-dist", "--weights", "[1,2]", "--n", "10", "--beta", "0.3", "--h", "0.1"],
    ["mgf", "--weights", "[1,2]", "--n", "32", "--beta", "0.3", "--h", "0.1", "--s-grid=-0.2,0.2"],
    ["sample", "--weights", "[1,2]", "--n", "8", "--beta", "0.3", "--h", "0.1", "--count", "50",
     "--seed", "9", "--method", "glauber-chain"],
    ["sample", "--weights", "[1,2]", "--n", "8", "--beta", "0.3", "--h", "0.1", "--count", "50",
     "--seed", "9", "--emit", "configurations", "--format", "json"],
])
def test_repeated_runs_are_byte_identical(argv, capsys):
    first = run(*argv, capsys=capsys)
    second = run(*argv, capsys=capsys)
    assert first[0] == 0 and first == second


def test_output_file_and_hash_ignore_path(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["exact-dist", "--weights", "[1,2]", "--n", "4", "--beta", "0.2", "--h", "0.1"]
    assert run(*argv, "--out", str(a), capsys=capsys)[1] == ""
    run(*argv, "--out", str(b), capsys=capsys)
    assert a.read_bytes() == b.read_bytes()
    rows = parse_csv(a.read_text())
    assert sum(float(r["mass"]) for r in rows) == pytest.approx(1.0, abs=1e-15)


def test_numbers_round_trip():
    x = 0.1 + 0.2
    assert float(cli.fmt(x)) == x
    assert cli.fmt(3) == "3" and cli.fmt(None) == "" and cli.fmt(True) == "true"


def test_scan_grid_marks_points_outside_regime(capsys):
    code, out, _ = run("fixed-point", "--weights", "[1]", "--scan-grid", "0.5,1.5:0", capsys=capsys)
    rows = parse_csv(out)
    assert [r["in_regime"] for r in rows] == ["true", "false"]
    assert float(rows[0]["chi"]) == pytest.approx(2.0, rel=1e-14)


def test_json_fixed_point(capsys):
    code, out, _ = run("fixed-point", "--weights", "[1]", "--beta", "0.5", "--h", "0", "--format", "json",
                       capsys=capsys)
    obj = json.loads(out)
    assert obj["observables"]["chi"] == pytest.approx(2.0) and "config_sha256" in obj["provenance"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "icwlab", "mgf", "--weights", "[1]", "--n", "16",
                           "--beta", "0.5", "--h", "0.2", "--s-grid", "0.1"],
                          capture_output=True, text=True, check=True)
    rows = parse_csv(proc.stdout)
    assert len(rows) == 1 and float(rows[0]["c_n"]) > 0


def test_parallel_scan_matches_serial(capsys):
    argv = ["dk-scan", "--weights", "[1,2]", "--beta", "0.3", "--h", "0.1", "--n", "16,32,64"]
    assert run(*argv, capsys=capsys) == run(*argv, "--jobs", "3", capsys=capsys)
