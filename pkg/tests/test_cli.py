import json

import numpy as np
import pytest

from spinmacro.cli import main
from spinmacro.spincore import (SystemDescriptor, ghz_state, random_density,
                                write_msdm)


@pytest.fixture
def ghz_file(tmp_path):
    p = tmp_path / "ghz4.msdm"
    write_msdm(ghz_state(4), p)
    return str(p)


class TestUsageErrors:
    def test_no_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as exc:
            main(["measure", "--bogus"])
        assert exc.value.code == 1

    def test_missing_required(self):
        with pytest.raises(SystemExit) as exc:
            main(["measure"])
        assert exc.value.code == 1


class TestMeasureCommand:
    def test_ghz_values(self, ghz_file, capsys):
        assert main(["measure", "--in", ghz_file, "--restarts", "20"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert len(out) == 2
        by_name = {r["measure"]: r for r in out}
        assert abs(by_name["I"]["value"] - 4.0) < 1e-8
        assert abs(by_name["F"]["value"] - 4.0) < 1e-8

    def test_single_measure_and_outfile(self, ghz_file, tmp_path):
        out = tmp_path / "res.json"
        assert main(["measure", "--in", ghz_file, "--measure", "I",
                     "--restarts", "20", "--out", str(out)]) == 0
        rec = json.loads(out.read_text())
        assert rec["measure"] == "I"
        assert rec["convention"] == "qubit"
        assert abs(rec["value"] - 4.0) < 1e-8

    def test_raw_convention(self, ghz_file, capsys):
        assert main(["measure", "--in", ghz_file, "--measure", "I",
                     "--convention", "raw", "--restarts", "20"]) == 0
        rec = json.loads(capsys.readouterr().out)
        assert abs(rec["value"] - 2.0) < 1e-8

    def test_byte_identical_reruns(self, ghz_file, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        args = ["measure", "--in", ghz_file, "--restarts", "20", "--seed", "7"]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_missing_file_exit_2(self, tmp_path, capsys):
        assert main(["measure", "--in", str(tmp_path / "nope.msdm")]) == 2

    def test_malformed_file_exit_2(self, tmp_path, capsys):
        p = tmp_path / "bad.msdm"
        p.write_text("not a state\n")
        assert main(["measure", "--in", str(p)]) == 2


class TestWignerCommand:
    def test_csv_shape(self, capsys):
        assert main(["wigner", "--spin", "4"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "theta,phi,w"
        assert len(lines) > 10

    def test_bad_gamma_exit_2(self, capsys):
        assert main(["wigner", "--spin", "4", "--gamma", "1.5"]) == 2

    def test_gamma_changes_output(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["wigner", "--spin", "6", "--out", str(a)]) == 0
        assert main(["wigner", "--spin", "6", "--gamma", "0",
                     "--out", str(b)]) == 0
        assert a.read_bytes() != b.read_bytes()


class TestIsingCommands:
    def test_small_sweep(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        assert main(["ising-sweep", "--lmin", "0.5", "--lmax", "1.5",
                     "--steps", "3", "--L", "1,2", "--restarts", "15",
                     "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "lambda,L,I,F,purity"
        assert len(lines) == 7

    def test_scaling(self, tmp_path, capsys):
        out = tmp_path / "scal.csv"
        assert main(["ising-scaling", "--N", "8,10", "--restarts", "15",
                     "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "N,maxvar_per_particle"
        assert len(lines) == 3
        assert "fitted exponent" in capsys.readouterr().err


class TestDissipateCommand:
    def test_zero_rate_constant(self, capsys):
        assert main(["dissipate", "--N", "6", "--gamma", "0", "--dt", "0.01",
                     "--tmax", "0.2"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "t,purity,I,F"
        for line in lines[1:]:
            t, p, iv, fv = (float(x) for x in line.split(","))
            assert abs(p - 1.0) < 1e-10
            assert abs(iv - 6.0) < 1e-6

    def test_full_path_small_n(self, capsys):
        assert main(["dissipate", "--N", "3", "--tmax", "0.1",
                     "--restarts", "15", "--full"]) == 0
        lines = capsys.readouterr().out.splitlines()
        first = [float(x) for x in lines[1].split(",")]
        assert abs(first[2] - 3.0) < 1e-6


class TestBenchCommand:
    def test_tiny_bench(self, tmp_path):
        out = tmp_path / "bench.csv"
        assert main(["bench", "--N", "3,4", "--samples", "4", "--reps", "1",
                     "--restarts", "5", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "N,phase,median_seconds,samples"
        assert len(lines) == 1 + 2 * 4
        for line in lines[1:]:
            n, phase, med, samples = line.split(",")
            assert phase in ("BuildV", "BuildW", "OptimizeV", "OptimizeW")
            assert float(med) > 0
            assert int(samples) == 4


class TestSelftestCommand:
    def test_passes(self, capsys):
        assert main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert out.count("PASS") >= 7

    def test_json_mode(self, capsys):
        assert main(["selftest", "--json"]) == 0
        rec = json.loads(capsys.readouterr().out)
        assert rec["ok"] is True
        assert all(c["pass"] for c in rec["checks"])


class TestMsdmRoundTripThroughCli:
    def test_random_state_measured(self, tmp_path, capsys):
        rho = random_density(SystemDescriptor(3, 1), 2, 11)
        p = tmp_path / "r.msdm"
        write_msdm(rho, p)
        assert main(["measure", "--in", str(p), "--measure", "I",
                     "--restarts", "20"]) == 0
        rec = json.loads(capsys.readouterr().out)
        assert 0.0 <= rec["value"] <= 2 * 3 * 0.5 + 1e-8
