import csv
import io
import math
import subprocess
import sys

import pytest

from gaussmac import cli


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_fmt():
    assert cli.fmt(1 / 3) == "0.333333333"
    assert cli.fmt(math.inf) == "inf"
    assert cli.fmt(None) == ""
    assert cli.fmt(7) == "7"
    assert cli.fmt(1e-20) == "1e-20"


def test_rd_query(capsys):
    code, out, _ = run(["rd", "--d1", "0.3", "--d2", "0.7", "--rho", "0.5"], capsys)
    assert code == 0
    (row,) = rows(out)
    assert row["region"] == "Region3" and float(row["rate"]) == pytest.approx(0.924260831, abs=1e-9)
    assert out.endswith("\n") and "\r" not in out


def test_rd_bad_domain(capsys):
    code, _, err = run(["rd", "--d1", "0", "--d2", "0.7", "--rho", "0.5"], capsys)
    assert code == 1 and "error" in err


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["sweep", "--bogus"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 1


def test_sweep_minimal(capsys):
    code, out, _ = run(["sweep", "--points", "2", "--schemes", "lower,uncoded,separation"], capsys)
    assert code == 0
    table = rows(out)
    assert len(table) == 2 and list(table[0]) == cli.SWEEP_HEADER
    assert table[0]["d_vq"] == "" and table[0]["d_lower"] == table[0]["d_uncoded"]


def test_sweep_structure(capsys):
    code, out, _ = run(["sweep", "--points", "8", "--snr-min", "0.2", "--snr-max", "3",
                        "--schemes", "lower,uncoded,separation,vq"], capsys)
    for r in rows(out):
        snr, lo, un = float(r["snr"]), float(r["d_lower"]), float(r["d_uncoded"])
        if snr <= 2 / 3:
            assert abs(lo - un) <= 1e-8
        else:
            assert un > lo
        assert un < float(r["d_sep"]) and float(r["d_vq"]) <= float(r["d_sep"])


def test_sweep_bad_arguments(capsys):
    code, _, err = run(["sweep", "--points", "1"], capsys)
    assert code == 1 and "points" in err
    code, _, err = run(["sweep", "--schemes", "lower,magic"], capsys)
    assert code == 1 and "magic" in err
    code, _, err = run(["sweep", "--rho", "1.0"], capsys)
    assert code == 1


def test_sweep_normalized_and_deterministic(capsys):
    _, a, _ = run(["sweep", "--points", "3", "--sigma2", "4", "--schemes", "lower,vq"], capsys)
    _, b, _ = run(["sweep", "--points", "3", "--sigma2", "1", "--schemes", "lower,vq"], capsys)
    assert a == b


def test_parse_config():
    text = "# comment\nrho = 0.3\n\nn=64  # trailing\nmode=full\n"
    assert cli.parse_config(text) == {"rho": 0.3, "n": 64, "mode": "full"}
    with pytest.raises(cli.ConfigError, match=r"cfg:2: unknown key 'rh0'"):
        cli.parse_config("rho=0.1\nrh0=0.2\n", "cfg")
    with pytest.raises(cli.ConfigError, match="bad value for 'n'"):
        cli.parse_config("n=abc")
    with pytest.raises(cli.ConfigError, match="expected key=value"):
        cli.parse_config("rho 0.3")


def test_resolve_precedence():
    cfg = cli.resolve_config({"seed": 1, "n": 10}, {"n": 20, "seed": None}, env={"GAUSSMAC_SEED": "7"})
    assert cfg["seed"] == 7 and cfg["n"] == 20
    cfg = cli.resolve_config({"seed": 1}, {"seed": 3}, env={"GAUSSMAC_SEED": "7"})
    assert cfg["seed"] == 3
    with pytest.raises(cli.ConfigError):
        cli.resolve_config({"mode": "psychic"}, {}, env={})


def test_simulate_uncoded(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("GAUSSMAC_SEED", raising=False)
    cfg = tmp_path / "u.cfg"
    cfg.write_text("scheme=uncoded\nrho=0.5\np1=1\np2=1\nnoise=2\nn=20000\ntrials=10\nseed=4\n")
    code, out, _ = run(["simulate", "--config", str(cfg)], capsys)
    assert code == 0
    (row,) = rows(out)
    assert abs(float(row["z1"])) <= 3 and abs(float(row["z2"])) <= 3
    assert float(row["d1_ref"]) == pytest.approx(0.55)


def test_simulate_seed_env(tmp_path, capsys, monkeypatch):
    args = ["simulate", "--scheme", "vq", "--n", "200", "--trials", "3", "--p1", "10", "--p2", "10"]
    monkeypatch.setenv("GAUSSMAC_SEED", "5")
    _, a, _ = run(args, capsys)
    _, b, _ = run(args + ["--seed", "5"], capsys)
    monkeypatch.setenv("GAUSSMAC_SEED", "6")
    _, c, _ = run(args, capsys)
    assert a == b and a != c


def test_simulate_bad_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("rho=0.5\nnoize=1\n")
    code, _, err = run(["simulate", "--config", str(cfg)], capsys)
    assert code == 1 and "noize" in err and ":2:" in err


def test_simulate_budget(capsys):
    code, _, err = run(["simulate", "--scheme", "vq", "--mode", "full", "--n", "100"], capsys)
    assert code == 2 and "budget" in err


def test_verify_passes(capsys):
    code, out, _ = run(["verify"], capsys)
    table = rows(out)
    assert code == 0, out
    assert {r["check"] for r in table} == set(cli.VERIFY_CHECKS)
    assert all(r["status"] == "pass" for r in table)


def test_verify_catches_perturbed_rd(capsys, monkeypatch):
    original = cli.ratedist.rd_rate_array
    monkeypatch.setattr(cli.ratedist, "rd_rate_array",
                        lambda d1, d2, s, rho: original(d1, d2, s, rho) * (1 + 1e-4))
    result = cli.run_verify({"rd_vs_waterfill": cli._check_rd_oracle})
    assert result[0][3] == "fail"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gaussmac", "rd", "--d1", "0.5", "--d2", "0.5",
                           "--rho", "0"], capture_output=True, text=True)
    assert proc.returncode == 0 and "Region2" in proc.stdout


def test_output_file(tmp_path, capsys):
    path = tmp_path / "out.csv"
    code, out, _ = run(["sweep", "--points", "2", "--schemes", "lower", "-o", str(path)], capsys)
    assert code == 0 and out == ""
    assert path.read_bytes().startswith(b"snr,d_lower")
