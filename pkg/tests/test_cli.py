import json
import subprocess
import sys

import pytest

from conftest import DATA
from chesseval.cli import main
from chesseval.dataset import read_records

START = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestUsage:
    def test_no_arguments(self, capsys):
        code, _, err = run(capsys)
        assert code == 2 and "usage:" in err

    def test_unknown_flag(self, capsys):
        assert run(capsys, "perft", "startpos", "1", "--bogus")[0] == 2

    def test_bad_jobs(self, capsys):
        assert run(capsys, "perft", "startpos", "1", "--jobs", "0")[0] == 2

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "chesseval"], capture_output=True, text=True)
        assert proc.returncode == 2 and "usage:" in proc.stderr


class TestPerft:
    def test_startpos(self, capsys):
        code, out, _ = run(capsys, "perft", "startpos", "3")
        assert code == 0 and out.strip() == "8902"

    def test_divide(self, capsys):
        code, out, _ = run(capsys, "perft", START, "2", "--divide")
        lines = out.strip().splitlines()
        assert code == 0 and len([l for l in lines if ":" in l]) == 20 and lines[-1] == "400"

    def test_bad_fen_is_runtime_error(self, capsys):
        code, _, err = run(capsys, "perft", "not a fen", "1")
        assert code == 1 and err.startswith("chesseval: error:")

    def test_depth_zero_is_usage_error(self, capsys):
        assert run(capsys, "perft", "startpos", "0")[0] == 2


class TestConvert:
    def test_moves_to_fen(self, capsys):
        code, out, _ = run(capsys, "convert", "startpos", "e4", "e5", "Nf3")
        assert code == 0
        assert out.strip() == "rnbqkbnr/pppp1ppp/8/4p3/4P3/5N2/PPPP1PPP/RNBQKB1R b KQkq - 1 2"

    def test_moves_to_uci(self, capsys):
        assert run(capsys, "convert", "startpos", "e4", "e5", "--to", "uci")[1].strip() == "e2e4 e7e5"

    def test_illegal_move(self, capsys):
        assert run(capsys, "convert", "startpos", "e5")[0] == 1

    def test_pgn_to_fen(self, capsys):
        code, out, _ = run(capsys, "convert", str(DATA / "reference_game.pgn"))
        assert code == 0 and out.strip().endswith(" 46")  # final position after 46. Qf8#


class TestArena:
    def arena(self, capsys, tmp_path, tag):
        pgn, rep = tmp_path / f"{tag}.pgn", tmp_path / f"{tag}.json"
        code, out, _ = run(
            capsys, "arena", "--white", "noisy:p=0.3,inner=random", "--black", "greedy",
            "--games", "4", "--seed", "7", "--move-cap", "60", "--pgn", str(pgn), "--report", str(rep),
        )
        assert code == 0
        return pgn.read_text(), json.loads(rep.read_text()), out

    def test_replay_is_identical(self, capsys, tmp_path):
        pgn_a, rep_a, _ = self.arena(capsys, tmp_path, "a")
        pgn_b, rep_b, out = self.arena(capsys, tmp_path, "b")
        assert pgn_a == pgn_b
        for rep in (rep_a, rep_b):
            rep["config"].pop("pgn", None)
        assert rep_a == rep_b
        assert rep_a["metrics"]["games"] == 4 and "win_rate" in out

    def test_lm_protocol_needs_engine(self, capsys):
        code, _, err = run(
            capsys, "arena", "--white", "random", "--black", "random", "--games", "1",
            "--protocol", "lm", "--engine", "/nonexistent/engine",
        )
        assert code == 1 and "error" in err

    def test_bad_policy_spec(self, capsys):
        code, _, _ = run(capsys, "arena", "--white", "bogus", "--black", "random", "--games", "1")
        assert code == 2


class TestRate:
    def test_rate(self, capsys, tmp_path):
        path = tmp_path / "r.txt"
        path.write_text("1-0 1400\n0-1 1400\n1/2-1/2 1500\n")
        code, out, _ = run(capsys, "rate", "--results", str(path), "--report", str(tmp_path / "r.json"))
        assert code == 0 and "elo" in out
        data = json.loads((tmp_path / "r.json").read_text())
        assert data["metrics"]["games"] == 3

    def test_malformed_results(self, capsys, tmp_path):
        path = tmp_path / "r.txt"
        path.write_text("1-0 1400\nmaybe 1400\n")
        code, _, err = run(capsys, "rate", "--results", str(path))
        assert code == 1 and "r.txt:2" in err


class TestDataPipeline:
    def test_build_split_accuracy(self, capsys, tmp_path, engine_path):
        records = tmp_path / "recs.txt"
        code, _, _ = run(
            capsys, "build-dataset", "--pgn", str(DATA / "reference_game.pgn"), "--depth", "1",
            "--out", str(records), "--engine", engine_path,
        )
        assert code == 0 and len(read_records(records)) == 91

        manifest = tmp_path / "m.json"
        code, _, _ = run(
            capsys, "split", "--records", str(records), "--eval-size", "10", "--manifest", str(manifest),
            "--buckets", "1-20:0.5,20-:0.5", "--eval-out", str(tmp_path / "eval.txt"),
            "--train-out", str(tmp_path / "train.txt"),
        )
        assert code == 0
        assert len(read_records(tmp_path / "eval.txt")) == 10
        assert len(read_records(tmp_path / "train.txt")) == 81

        code, out, _ = run(capsys, "accuracy", "--policy", "random", "--items", str(tmp_path / "eval.txt"),
                           "--report", str(tmp_path / "acc.json"))
        assert code == 0
        metrics = json.loads((tmp_path / "acc.json").read_text())["metrics"]
        assert metrics["legal_move_accuracy"] == 1.0

    def test_split_shortfall(self, capsys, tmp_path, engine_path):
        records = tmp_path / "recs.txt"
        run(capsys, "build-dataset", "--pgn", str(DATA / "reference_game.pgn"), "--depth", "1",
            "--out", str(records), "--engine", engine_path)
        code, _, err = run(capsys, "split", "--records", str(records), "--eval-size", "500",
                           "--manifest", str(tmp_path / "m.json"))
        assert code == 1 and "short" in err.lower()


@pytest.mark.engine
class TestLadder:
    def test_table_shape(self, capsys, engine_path):
        code, out, _ = run(
            capsys, "ladder", "--policy", "random", "--skills", "0", "--games", "2",
            "--engine", engine_path, "--engine-movetime", "20", "--move-cap", "40",
        )
        assert code == 0
        lines = out.splitlines()
        header = next(i for i, l in enumerate(lines) if l.split()[:1] == ["Skill"])
        row = lines[header + 2].split()
        assert row[0] == "0" and int(row[2]) + int(row[3]) + int(row[4]) == 2 and row[-2] == "+/-"
