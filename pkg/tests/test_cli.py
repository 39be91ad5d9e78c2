import json
from pathlib import Path

import pytest

from momentchain.cli import main

FIXTURES = Path(__file__).parent / "fixtures"


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestRun:
    def test_exact_json(self, capsys):
        code, out, _ = run_cli(capsys, "run", str(FIXTURES / "trivial.scn"))
        assert code == 0
        data = json.loads(out)
        assert data["outcomes"] == [{"values": [1, 1], "probability": 1.0}]

    def test_csv_format(self, capsys):
        code, out, _ = run_cli(
            capsys, "run", str(FIXTURES / "epr-alice.scn"), "--format", "csv"
        )
        assert code == 0
        lines = out.strip().split("\n")
        assert lines[0].startswith("z(A@3)-z(A@1),probability")
        assert len(lines) == 4  # header + three outcomes

    def test_sampled_requires_seed(self, capsys):
        code, _, err = run_cli(
            capsys, "run", str(FIXTURES / "trivial.scn"), "--samples", "10"
        )
        assert code == 64
        assert "--seed" in err

    def test_sampled_run(self, capsys):
        code, out, _ = run_cli(
            capsys, "run", str(FIXTURES / "trivial.scn"),
            "--samples", "25", "--seed", "1",
        )
        assert code == 0
        data = json.loads(out)
        assert data["mode"] == "sampled" and data["n"] == 25 and data["seed"] == 1

    def test_parse_error_exit_1(self, capsys, tmp_path):
        bad = tmp_path / "bad.scn"
        bad.write_text("system A qubit\nprepare A ket 1 1\n")
        code, _, err = run_cli(capsys, "run", str(bad))
        assert code == 1
        assert "unnormalized" in err

    def test_conditioning_impossible_exit_2(self, capsys, tmp_path):
        f = tmp_path / "impossible.scn"
        f.write_text(
            "system A qubit\nprepare A state +z\nlink A @1 identity\n"
            "postselect A state -z\n"
        )
        code, _, err = run_cli(capsys, "run", str(f))
        assert code == 2
        assert "conditioning impossible" in err

    def test_cap_exceeded_exit_3(self, capsys, tmp_path):
        f = tmp_path / "huge.scn"
        f.write_text(
            "system A qudit 2000000\nprepare A ket "
            + " ".join(["1"] + ["0"] * 1999999)
            + "\n"
        )
        code, _, err = run_cli(capsys, "run", str(f))
        assert code == 3
        assert "cap" in err


class TestCheck:
    def test_valid_files(self, capsys):
        files = [str(p) for p in sorted(FIXTURES.glob("*.scn"))]
        code, out, _ = run_cli(capsys, "check", *files)
        assert code == 0
        assert out.count("ok:") == len(files)

    def test_invalid_file(self, capsys):
        code, _, err = run_cli(
            capsys, "check", str(FIXTURES / "errors" / "err-non-unitary.scn")
        )
        assert code == 1
        assert "non-unitary" in err


class TestExperimentCommands:
    def test_epr_bob(self, capsys):
        code, out, _ = run_cli(capsys, "epr", "--who", "bob")
        assert code == 0
        data = json.loads(out)
        assert data["outcomes"] == [{"values": [0], "probability": 1.0}]

    def test_epr_alice_outcome_minus(self, capsys):
        code, out, _ = run_cli(capsys, "epr", "--who", "alice", "--outcome", "-1")
        assert code == 0
        probs = {tuple(e["values"]): e["probability"] for e in json.loads(out)["outcomes"]}
        assert probs == {(-2,): 0.25, (0,): 0.5, (2,): 0.25}

    def test_double_life(self, capsys):
        code, out, _ = run_cli(
            capsys, "double-life", "--psi1", "+z", "--psi2", "+x",
            "--moments", "4", "--obs", "z", "--pair", "0,2",
        )
        assert code == 0
        assert json.loads(out)["outcomes"] == [{"values": [0], "probability": 1.0}]

    def test_double_life_amplitude_args(self, capsys):
        code, out, _ = run_cli(
            capsys, "double-life", "--psi1", "1,0",
            "--psi2", "0.7071067811865476,0.7071067811865476", "--pair", "0,1",
        )
        assert code == 0
        probs = {tuple(e["values"]): e["probability"] for e in json.loads(out)["outcomes"]}
        assert probs == {(-2,): 0.5, (0,): 0.5}

    def test_protocol_report(self, capsys):
        code, out, _ = run_cli(
            capsys, "protocol", "--n", "2", "--plans", "3", "--seed", "2"
        )
        assert code == 0
        data = json.loads(out)
        assert data["max_total_variation"] < 1e-10
        assert data["expected_success_probability"] == 0.25

    def test_usage_error_exit_64(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["epr"])  # missing required --who
        assert exc.value.code == 64
