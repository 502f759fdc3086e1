import io
import json
import shutil
import subprocess
import sys

import pytest

from alphastream.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestRun:
    def test_csv_input_to_stdout(self, capsys, tmp_path):
        path = tmp_path / "in.csv"
        path.write_text("label,p\nx,0.001\ny,0.9\n")
        code, out, err = run_cli(capsys, "run", "--procedure", "uncorrected",
                                 "--input", str(path))
        assert code == 0
        lines = [json.loads(l) for l in out.strip().splitlines()]
        assert [l["rejected"] for l in lines] == [True, False]

    def test_jsonl_input_with_state(self, capsys, tmp_path):
        inp = tmp_path / "in.jsonl"
        inp.write_text('{"t": 1, "p": 0.004}\n{"t": 2, "p": 0.6}\n')
        state = tmp_path / "state.json"
        out_path = tmp_path / "log.jsonl"
        code, _, _ = run_cli(capsys, "run", "--procedure", "saffron",
                             "--input", str(inp), "--state", str(state),
                             "--out", str(out_path))
        assert code == 0
        assert state.exists()
        assert len(out_path.read_text().splitlines()) == 2
        # resume continues the same stream
        more = tmp_path / "more.jsonl"
        more.write_text('{"t": 3, "p": 0.2}\n')
        code, _, _ = run_cli(capsys, "run", "--input", str(more),
                             "--state", str(state), "--out", str(out_path))
        assert code == 0
        assert json.loads(state.read_text())["state"]["t"] == 4

    def test_bad_p_value_is_input_error(self, capsys, tmp_path):
        path = tmp_path / "in.csv"
        path.write_text("label,p\nx,1.7\n")
        code, _, err = run_cli(capsys, "run", "--procedure", "lord",
                               "--input", str(path))
        assert code == 2
        assert "row 1" in err

    def test_missing_procedure(self, capsys, tmp_path):
        path = tmp_path / "in.csv"
        path.write_text("label,p\nx,0.5\n")
        code, _, err = run_cli(capsys, "run", "--input", str(path))
        assert code == 2
        assert "--procedure" in err

    def test_procedure_conflicts_with_state(self, capsys, tmp_path):
        inp = tmp_path / "in.jsonl"
        inp.write_text('{"t": 1, "p": 0.5}\n')
        state = tmp_path / "state.json"
        run_cli(capsys, "run", "--procedure", "lord", "--input", str(inp),
                "--state", str(state))
        more = tmp_path / "more.jsonl"
        more.write_text('{"t": 2, "p": 0.5}\n')
        code, _, err = run_cli(capsys, "run", "--procedure", "saffron",
                               "--input", str(more), "--state", str(state))
        assert code == 2
        assert "conflicts" in err

    def test_corrupt_state_is_state_error(self, capsys, tmp_path):
        inp = tmp_path / "in.jsonl"
        inp.write_text('{"t": 1, "p": 0.5}\n')
        state = tmp_path / "state.json"
        state.write_text('{"schema": 1, "config": {}, "state": {}, "checksum": "xx"}')
        code, _, err = run_cli(capsys, "run", "--input", str(inp),
                               "--state", str(state))
        assert code == 3
        assert "checksum" in err

    def test_lock_conflict_is_state_error(self, capsys, tmp_path):
        inp = tmp_path / "in.jsonl"
        inp.write_text('{"t": 1, "p": 0.5}\n')
        state = tmp_path / "state.json"
        (tmp_path / "state.json.lock").write_text("4242")
        code, _, err = run_cli(capsys, "run", "--procedure", "lord",
                               "--input", str(inp), "--state", str(state))
        assert code == 3
        assert "locked" in err

    def test_stdin_input(self, capsys, monkeypatch):
        monkeypatch.setattr(sys, "stdin",
                            io.StringIO('{"t": 1, "p": 0.01}\n{"t": 2, "p": 0.8}\n'))
        code, out, _ = run_cli(capsys, "run", "--procedure", "uncorrected")
        assert code == 0
        assert len(out.strip().splitlines()) == 2

    def test_gamma_and_w0_flags(self, capsys, tmp_path):
        path = tmp_path / "in.csv"
        path.write_text("label,p\nx,0.002\n")
        code, out, _ = run_cli(capsys, "run", "--procedure", "lord",
                               "--alpha", "0.05", "--w0", "0.005",
                               "--gamma", "bounded:20", "--input", str(path))
        assert code == 0
        entry = json.loads(out.strip().splitlines()[0])
        assert entry["alpha"] == pytest.approx(0.005 * 0.05, abs=1e-15)


class TestPreview:
    def test_preview_fresh_alpha_spending(self, capsys, tmp_path):
        from alphastream.procedures import make_procedure
        from alphastream.streamio import save_snapshot

        engine = make_procedure("alpha-spending", alpha=0.05, gamma="bounded:20")
        state = tmp_path / "state.json"
        save_snapshot(engine, state)
        code, out, _ = run_cli(capsys, "preview", "--state", str(state))
        assert code == 0
        assert float(out.strip()) == pytest.approx(0.0025, abs=1e-15)


class TestSimulate:
    def test_json_config(self, capsys, tmp_path):
        cfg = {
            "T": 60, "alpha": 0.05, "replicates": 8, "seed": 3,
            "pi1_grid": [0.2], "procedures": ["lord", "bh"],
            "f0": ["normal", -0.5, 0.1],
        }
        cfg_path = tmp_path / "exp.json"
        cfg_path.write_text(json.dumps(cfg))
        out_path = tmp_path / "res.csv"
        code, _, _ = run_cli(capsys, "simulate", "--config", str(cfg_path),
                             "--out", str(out_path))
        assert code == 0
        lines = out_path.read_text().splitlines()
        assert lines[0] == "pi1,procedure,metric,value,mc_se"
        assert any(line.startswith("0.2,lord,power,") for line in lines)

    def test_unknown_config_key(self, capsys, tmp_path):
        cfg_path = tmp_path / "exp.json"
        cfg_path.write_text(json.dumps({"bogus": 1}))
        code, _, err = run_cli(capsys, "simulate", "--config", str(cfg_path))
        assert code == 2
        assert "bogus" in err

    def test_override_flags(self, capsys, tmp_path):
        cfg_path = tmp_path / "exp.json"
        cfg_path.write_text(json.dumps({"T": 40, "pi1": 0.3,
                                        "procedures": ["uncorrected"]}))
        code, out, _ = run_cli(capsys, "simulate", "--config", str(cfg_path),
                               "--replicates", "5", "--seed", "1")
        assert code == 0
        assert "uncorrected" in out


class TestCaseStudy:
    def test_text_output(self, capsys):
        code, out, _ = run_cli(capsys, "casestudy", "stampede")
        assert code == 0
        assert "SAFFRON" in out and "0.0165" in out
        assert "Uncorrected" in out and "C, E, G" in out

    def test_unknown_name(self, capsys):
        code, _, err = run_cli(capsys, "casestudy", "impc")
        assert code == 2
        assert "impc" in err

    def test_csv_to_file(self, capsys, tmp_path):
        out_path = tmp_path / "case.csv"
        code, _, _ = run_cli(capsys, "casestudy", "stampede", "--format", "csv",
                             "--out", str(out_path))
        assert code == 0
        assert out_path.read_text().startswith("procedure,rejections,alpha_next")


class TestConsoleScript:
    def test_entry_point_runs(self):
        exe = shutil.which("alphastream")
        if exe is None:
            pytest.skip("console script not on PATH")
        proc = subprocess.run([exe, "casestudy", "stampede"],
                              capture_output=True, text=True, timeout=120)
        assert proc.returncode == 0
        assert "SAFFRON" in proc.stdout


class TestCalibrate:
    def test_writes_manifest(self, capsys, tmp_path):
        out_path = tmp_path / "manifest.json"
        code, out, _ = run_cli(capsys, "calibrate-w0", "--out", str(out_path))
        assert code == 0
        assert "all procedures matched" in out
        doc = json.loads(out_path.read_text())
        assert doc["all_matched"] is True
        assert doc["procedures"]["saffron"]["w0_rule"] == "alpha/2"
