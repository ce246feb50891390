import pytest

from conftest import synthetic_records
from chesseval.dataset import (
    DEFAULT_BUCKETS,
    TRAIN_SHORT,
    DatasetError,
    DatasetRecord,
    HarvestStats,
    LabelStats,
    SplitManifest,
    SplitShortfall,
    apply_split,
    fixed_depth,
    harvest_positions,
    label_best_moves,
    make_split,
    parse_buckets,
    read_records,
    self_play_endgames,
    write_records,
)
from chesseval.engine import EngineConfig, Score, SearchLimits, spawn
from chesseval.notation import parse_fen, parse_pgn, render_fen
from chesseval.rules import Move


class TestRecords:
    def test_line_round_trip(self):
        rec = DatasetRecord(
            "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1",
            Move.from_uci("e2e4"),
            12,
            2000,
            Score(cp=31),
            "long",
            "self_play",
        )
        assert DatasetRecord.from_line(rec.to_line()) == rec
        assert rec.to_line().startswith("FEN:rnbqkbnr/")

    def test_file_round_trip(self, tmp_path):
        recs = synthetic_records(50)
        path = tmp_path / "d.txt"
        assert write_records(recs, path) == 50
        assert read_records(path) == recs

    def test_illegal_best_move_rejected_with_location(self, tmp_path):
        good = synthetic_records(1)[0].to_line()
        bad = good.replace("BM:", "BM:a1a1x", 1)
        path = tmp_path / "d.txt"
        path.write_text(good + "\n" + bad + "\n")
        with pytest.raises(DatasetError, match=r"d\.txt:2"):
            read_records(path)

    def test_legal_but_wrong_move_rejected(self, tmp_path):
        line = DatasetRecord(
            "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1", Move.from_uci("e2e4"), 1, None
        ).to_line().replace("BM:e2e4", "BM:e2e5")
        path = tmp_path / "d.txt"
        path.write_text(line + "\n")
        with pytest.raises(DatasetError):
            read_records(path)


class TestHarvest:
    def test_reference_game_positions(self, reference_pgn, tmp_path):
        path = tmp_path / "game.pgn"
        path.write_text(reference_pgn, encoding="utf-8")
        stats = HarvestStats()
        positions = list(harvest_positions(path, stats=stats))
        [game] = parse_pgn(reference_pgn)
        assert len(game.moves) == 91
        assert len(positions) == 92  # every ply plus the start position
        assert stats.games == 1 and stats.duplicates == 0

    def test_empty_source(self, tmp_path):
        path = tmp_path / "empty.pgn"
        path.write_text("")
        assert list(harvest_positions(path)) == []

    def test_duplicate_games_are_deduplicated(self, reference_pgn, tmp_path):
        (tmp_path / "a.pgn").write_text(reference_pgn + "\n\n" + reference_pgn, encoding="utf-8")
        (tmp_path / "b.pgn").write_text(reference_pgn, encoding="utf-8")
        stats = HarvestStats()
        positions = list(harvest_positions(tmp_path, stats=stats))
        assert len(positions) == 92
        assert stats.games == 3 and stats.duplicates == 2 * 92

    def test_records_accepted_directly(self, reference_pgn):
        games = parse_pgn(reference_pgn)
        assert len(list(harvest_positions(games))) == 92

    def test_malformed_games_are_skipped(self, tmp_path):
        path = tmp_path / "bad.pgn"
        path.write_text('[Event "a"]\n\n1. e4 Ke3 *\n\n[Event "b"]\n\n1. d4 *\n')
        stats = HarvestStats()
        assert len(list(harvest_positions(path, stats=stats))) == 2
        assert stats.skipped_games == 1


class TestSplit:
    def test_default_bucket_targets(self):
        recs = synthetic_records(2000, seed=1)
        manifest = make_split(recs, 400, seed=3)
        assert manifest.targets == {"1-10": 40, "10-20": 120, "20-40": 200, "40+": 40}
        assert manifest.train_ids.isdisjoint(manifest.eval_ids)
        assert len(manifest.eval_ids) == 400
        assert manifest.train_ids | manifest.eval_ids == {r.key for r in recs}

    def test_eval_members_are_in_their_bucket(self):
        recs = synthetic_records(1000, seed=2)
        manifest = make_split(recs, 200, seed=0)
        _, evals = apply_split(recs, manifest)
        counts = {b.name: sum(b.contains(r.fullmove_number) for r in evals) for b in DEFAULT_BUCKETS}
        assert counts == manifest.targets

    def test_deterministic_under_seed(self):
        recs = synthetic_records(600, seed=4)
        assert make_split(recs, 100, seed=9).eval_ids == make_split(recs, 100, seed=9).eval_ids
        assert make_split(recs, 100, seed=9).eval_ids != make_split(recs, 100, seed=10).eval_ids

    def test_zero_eval_size(self):
        recs = synthetic_records(100)
        manifest = make_split(recs, 0)
        assert manifest.eval_ids == set() and len(manifest.train_ids) == 100

    def test_shortfall_lists_deficits(self):
        recs = synthetic_records(100)
        with pytest.raises(SplitShortfall) as info:
            make_split(recs, 1000)
        assert set(info.value.deficits) == {"1-10", "10-20", "20-40", "40+"}

    def test_manifest_json_round_trip(self):
        manifest = make_split(synthetic_records(300), 50, seed=1, engine_build="test build")
        again = SplitManifest.from_json(manifest.to_json())
        assert again.eval_ids == manifest.eval_ids and again.train_ids == manifest.train_ids
        assert again.buckets == manifest.buckets and again.engine_build == "test build"

    def test_parse_buckets(self):
        assert parse_buckets("1-10:0.1,10-20:0.3,20-40:0.5,40-:0.1") == DEFAULT_BUCKETS
        with pytest.raises(ValueError):
            parse_buckets("1-10:0.5")
        with pytest.raises(ValueError):
            parse_buckets("junk")


def test_fixed_depth_preset():
    p = fixed_depth(3)
    assert p.depth_range == (3, 3) and p.movetime_ms is None


@pytest.mark.engine
class TestWithEngine:
    def test_mate_in_one_label(self, engine_path):
        pos = parse_fen("7k/8/6K1/8/8/8/8/5Q2 w - - 0 1")
        with spawn(EngineConfig(executable_path=engine_path)) as engine:
            [rec] = label_best_moves([pos], engine, TRAIN_SHORT)
        assert rec.best_move == Move.from_uci("f1f8")
        assert 12 <= rec.search_depth <= 50 and rec.movetime_ms == 2000

    def test_terminal_positions_skipped(self, engine_path):
        stats = LabelStats()
        mate = parse_fen("7k/6Q1/6K1/8/8/8/8/8 b - - 0 1")
        with spawn(EngineConfig(executable_path=engine_path)) as engine:
            assert list(label_best_moves([mate], engine, fixed_depth(1), stats=stats)) == []
        assert stats.skipped_terminal == 1

    def test_labels_are_reproducible(self, engine_path, reference_pgn):
        games = parse_pgn(reference_pgn)
        runs = []
        for _ in range(2):
            with spawn(EngineConfig(executable_path=engine_path)) as engine:
                runs.append([r.to_line() for r in label_best_moves(harvest_positions(games), engine, fixed_depth(4))])
        assert runs[0] == runs[1]
        assert len(runs[0]) == 91  # the final position is checkmate

    def test_self_play_endgames(self, engine_path):
        with spawn(EngineConfig(executable_path=engine_path)) as engine:
            assert list(self_play_endgames(engine, 0, SearchLimits(depth=1))) == []
            out = list(self_play_endgames(engine, 3, SearchLimits(depth=1), seed=1, min_fullmove=30))
        assert out
        for pos, fullmove in out:
            assert fullmove > 30 and pos.fullmove_number == fullmove
            assert parse_fen(render_fen(pos)) == pos

    @pytest.mark.slow
    def test_self_play_material_shift(self, engine_path):
        with spawn(EngineConfig(executable_path=engine_path)) as engine:
            out = list(self_play_endgames(engine, 20, SearchLimits(depth=1), seed=2))
        pieces = [sum(1 for c in pos.board if c) for pos, _ in out]
        assert pieces and sum(pieces) / len(pieces) <= 16
