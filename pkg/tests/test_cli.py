import csv
import json
import subprocess
import sys

import pytest

from resonance_lab import __version__
from resonance_lab.cli import DEFAULTS, main

ARCTAN_G = {"n": 1, "f": {"family": "zero"}, "g": {"family": "arctan-scaled"}, "e": {"trig": [[1, 1.0, 0.0]]}}


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def problem(E=1.0, f="zero", g="arctan-scaled"):
    f_block = {"family": "zero"} if f == "zero" else {"family": f, "derivative": True}
    g_block = {"family": "zero"} if g == "zero" else {"family": g}
    return {"n": 1, "f": f_block, "g": g_block, "e": {"trig": [[1, E, 0.0]]}}


class TestConfigErrors:
    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        assert main(["check", "--config", str(path)]) == 2
        assert "malformed JSON" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["check", "--config", str(tmp_path / "nope.json")]) == 2

    def test_unknown_top_key(self, tmp_path):
        assert main(["check", "--config", str(write_config(tmp_path, {"problem": ARCTAN_G, "bogus": 1}))]) == 2

    def test_unknown_block_key(self, tmp_path):
        cfg = write_config(tmp_path, {"problem": ARCTAN_G, "simulate": {"xi0": [0, 0], "tolerance": 1}})
        assert main(["simulate", "--config", str(cfg)]) == 2

    def test_unknown_problem_key(self, tmp_path):
        cfg = write_config(tmp_path, {"problem": {**ARCTAN_G, "damping": 1}})
        assert main(["check", "--config", str(cfg)]) == 2

    def test_bad_values(self, tmp_path):
        cfg = write_config(tmp_path, {"problem": ARCTAN_G, "simulate": {"xi0": [0, "a"]}})
        assert main(["simulate", "--config", str(cfg)]) == 2
        cfg = write_config(tmp_path, {"problem": ARCTAN_G, "counterexample": {"epsilon": 4.0}})
        assert main(["counterexample", "--config", str(cfg)]) == 2

    def test_missing_problem(self, tmp_path):
        assert main(["check", "--config", str(write_config(tmp_path, {}))]) == 2


class TestCheck:
    def test_periodic_exists(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"problem": problem(1.0)})
        assert main(["check", "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "classification: PeriodicExists" in out
        doc = json.loads((tmp_path / "check.json").read_text())
        assert doc["classification"] == "PeriodicExists"
        assert doc["coefficients"]["A_n"] == pytest.approx(3.141592653589793, abs=0)

    def test_unbounded(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"problem": problem(3.0)})
        assert main(["check", "--config", str(cfg)]) == 0
        assert "classification: Unbounded" in capsys.readouterr().out

    @pytest.mark.parametrize("E, f, code", [(1.0, "zero", 10), (3.0, "zero", 11), (1.0, "arctan-scaled", 12)])
    def test_exit_by_class(self, tmp_path, E, f, code):
        cfg = write_config(tmp_path, {"problem": problem(E, f=f)})
        assert main(["check", "--config", str(cfg), "--exit-by-class"]) == code

    def test_mixed_declines_existence(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"problem": problem(1.0, f="arctan-scaled")})
        main(["check", "--config", str(cfg)])
        assert "existence undetermined" in capsys.readouterr().out


class TestCommands:
    def test_fourier(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"problem": {**ARCTAN_G, "e": {"trig": [[1, 3.0, 4.0]]}}, "fourier": {"n": [1, 2]}})
        assert main(["fourier", "--config", str(cfg)]) == 0
        rows = json.loads((tmp_path / "fourier.json").read_text())["rows"]
        assert rows[0]["magnitude"] == pytest.approx(5 * 3.141592653589793, abs=1e-12)
        assert rows[1]["delta"] is None
        assert "undefined" in capsys.readouterr().out

    def test_simulate(self, tmp_path):
        cfg = write_config(tmp_path, {"problem": ARCTAN_G, "simulate": {"xi0": [1.0, 0.0], "samples": 11}})
        assert main(["simulate", "--config", str(cfg)]) == 0
        rows = list(csv.reader(open(tmp_path / "trajectory.csv", encoding="utf-8")))
        assert rows[0] == ["t", "x", "xprime", "energy"]
        assert len(rows) == 12

    def test_simulate_blowup_exit_3(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"problem": problem(3.0), "simulate": {"t1": 200.0, "max_norm": 5.0}})
        assert main(["simulate", "--config", str(cfg)]) == 3
        assert "partial trajectory written" in capsys.readouterr().out
        assert (tmp_path / "trajectory.csv").exists()
        assert json.loads((tmp_path / "simulate.json").read_text())["status"] == "norm-exceeded"

    def test_find_periodic_success(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"problem": problem(1.0)})
        assert main(["find-periodic", "--config", str(cfg)]) == 0
        doc = json.loads((tmp_path / "fixed_point.json").read_text())
        assert doc["found"] and doc["residual_norm"] < 1e-9
        assert len((tmp_path / "periodic_solution.csv").read_text().splitlines()) == 258

    def test_find_periodic_free_oscillator(self, tmp_path):
        cfg = write_config(tmp_path, {"problem": problem(0.0, g="zero")})
        assert main(["find-periodic", "--config", str(cfg)]) == 0
        doc = json.loads((tmp_path / "fixed_point.json").read_text())
        assert doc["starts_tried"] == 1 and doc["residual_norm"] < 1e-9

    def test_find_periodic_failure_exit_4(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"problem": problem(3.0), "find-periodic": {"grid_size": 2}})
        assert main(["find-periodic", "--config", str(cfg)]) == 4
        doc = json.loads((tmp_path / "fixed_point.json").read_text())
        assert not doc["found"] and doc["starts_tried"] == 4
        assert "best residual" in capsys.readouterr().out

    def test_escape(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"problem": problem(3.0), "escape": {"xi0": [[0, 0]], "K": 200}})
        assert main(["escape", "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "escaped forward and backward" in out
        assert "forward: V strictly increasing 200/200" in out
        doc = json.loads((tmp_path / "escape.json").read_text())
        assert doc["all_escaped"]
        assert (tmp_path / "orbit_000_backward.csv").exists()

    def test_counterexample(self, tmp_path):
        cfg = write_config(tmp_path, {"problem": problem(1.0, f="arctan-scaled"),
                                      "counterexample": {"n": 2, "epsilon": 0.1}})
        assert main(["counterexample", "--config", str(cfg)]) == 0
        doc = json.loads((tmp_path / "counterexample.json").read_text())
        assert doc["E"] == pytest.approx(6.0 - 0.1 / 3.141592653589793)
        assert abs(doc["margin"] - 0.1) < 1e-12
        assert doc["report"]["classification"] == "NecessaryHoldsOnly"

    def test_verify_lemmas(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {})
        assert main(["verify-lemmas", "--config", str(cfg)]) == 0
        assert "120/120 within 1e-08 (480/480 sign-set integrals)" in capsys.readouterr().out
        assert len((tmp_path / "lemmas.csv").read_text().splitlines()) == 481

    def test_out_dir_and_output_dir(self, tmp_path):
        cfg = write_config(tmp_path, {"problem": ARCTAN_G, "output_dir": "results"})
        assert main(["check", "--config", str(cfg)]) == 0
        assert (tmp_path / "results" / "check.json").exists()
        other = tmp_path / "elsewhere"
        assert main(["check", "--config", str(cfg), "--out", str(other)]) == 0
        assert (other / "check.json").exists()


class TestManifest:
    def test_contents(self, tmp_path):
        cfg = write_config(tmp_path, {"problem": problem(1.0)})
        main(["find-periodic", "--config", str(cfg)])
        m = json.loads((tmp_path / "find-periodic.manifest.json").read_text())
        assert m["version"] == __version__ and m["tool"] == "resonance-lab"
        resolved = m["resolved"]["find-periodic"]
        # every default in effect is echoed, including the derived grid radius
        assert set(resolved) == set(DEFAULTS["find-periodic"])
        assert resolved["R"] == pytest.approx(3.141592653589793 / 2)
        assert m["problem"]["g"]["family"] == "arctan-scaled"
        assert m["outputs"] == ["fixed_point.json", "periodic_solution.csv"]
        assert "timestamp" in m

    def test_simulate_defaults_echoed(self, tmp_path):
        cfg = write_config(tmp_path, {"problem": ARCTAN_G})
        main(["simulate", "--config", str(cfg)])
        resolved = json.loads((tmp_path / "simulate.manifest.json").read_text())["resolved"]["simulate"]
        assert resolved["rtol"] == 1e-10 and resolved["atol"] == 1e-12
        assert resolved["t1"] == pytest.approx(6.283185307179586)

    def test_reproducible(self, tmp_path):
        cfg = write_config(tmp_path, {"problem": problem(3.0), "escape": {"random_starts": 1, "K": 30},
                                      "simulate": {"xi0": [0.5, 0.5]}})
        outputs = {}
        for run in ("a", "b"):
            for cmd in ("simulate", "escape", "find-periodic"):
                main([cmd, "--config", str(cfg), "--out", str(tmp_path / run)])
            outputs[run] = {p.name: p.read_bytes() for p in (tmp_path / run).iterdir()
                            if not p.name.endswith(".manifest.json")}
        assert outputs["a"] == outputs["b"]
        assert len(outputs["a"]) >= 5


def test_console_entry_point(tmp_path):
    cfg = write_config(tmp_path, {"problem": ARCTAN_G})
    proc = subprocess.run([sys.executable, "-m", "resonance_lab.cli", "check", "--config", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "classification: PeriodicExists" in proc.stdout
