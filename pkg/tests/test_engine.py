import sys

import pytest

from chesseval.engine import (
    EngineConfig,
    EngineError,
    EngineStartupError,
    Score,
    SearchLimits,
    parse_info_score,
    spawn,
)
from chesseval.notation import parse_fen
from chesseval.rules import STARTING_POSITION, Move, legal_moves


class TestPureParts:
    def test_limits_need_something(self):
        with pytest.raises(ValueError):
            SearchLimits()

    @pytest.mark.parametrize("kw", [{"depth": 0}, {"movetime_ms": 0}])
    def test_limits_reject_nonpositive(self, kw):
        with pytest.raises(ValueError):
            SearchLimits(**kw)

    def test_go_command(self):
        assert SearchLimits(depth=5, movetime_ms=200).go_command() == "go depth 5 movetime 200"

    @pytest.mark.parametrize("skill", [-1, 21])
    def test_skill_rejected_before_spawn(self, skill):
        with pytest.raises(ValueError):
            EngineConfig(executable_path="/nonexistent", skill_level=skill)

    def test_options_include_skill(self):
        opts = dict(EngineConfig(executable_path="x", skill_level=0).options())
        assert opts["Skill Level"] == "0" and opts["Threads"] == "1"

    def test_parse_info_score(self):
        score, depth = parse_info_score("info depth 12 seldepth 18 score cp -35 nodes 1000 pv e2e4")
        assert score == Score(cp=-35) and depth == 12
        score, depth = parse_info_score("info depth 3 score mate 2 pv d1h5")
        assert score == Score(mate=2)
        assert parse_info_score("info string hello") is None
        assert parse_info_score("info depth 4 multipv 2 score cp 10") is None

    def test_score_win_rate(self):
        assert Score(cp=0).win_rate == 0.5
        assert Score(mate=3).win_rate == 1.0
        assert Score(mate=-1).win_rate == 0.0
        assert Score.from_dict(Score(cp=12).as_dict()) == Score(cp=12)


class TestStartupFailures:
    def test_nonexistent_path(self):
        with pytest.raises(EngineStartupError):
            spawn(EngineConfig(executable_path="/nonexistent/stockfish"))

    def test_program_that_exits(self):
        with pytest.raises(EngineStartupError):
            spawn(EngineConfig(executable_path="false"))

    def test_program_that_never_answers(self):
        cmd = f"{sys.executable} -c 'import sys; sys.stdin.read()'"
        with pytest.raises(EngineStartupError):
            spawn(EngineConfig(executable_path=cmd, handshake_timeout=1.0))


@pytest.fixture
def engine(engine_path):
    with spawn(EngineConfig(executable_path=engine_path)) as handle:
        yield handle


@pytest.mark.engine
class TestLiveEngine:
    def test_handshake(self, engine):
        assert engine.alive
        assert engine.name != "unknown"
        assert "skill level" in engine.options

    def test_skill_zero_accepted(self, engine_path):
        with spawn(EngineConfig(executable_path=engine_path, skill_level=0)) as h:
            reply = h.best_move(STARTING_POSITION, SearchLimits(depth=1))
            assert reply.best_move in legal_moves(STARTING_POSITION)

    def test_depth_one_from_start(self, engine):
        reply = engine.best_move(STARTING_POSITION, SearchLimits(depth=1))
        assert reply.best_move in legal_moves(STARTING_POSITION)
        assert reply.score is not None

    def test_terminal_position_never_sent(self, engine):
        mate = parse_fen("7k/6Q1/6K1/8/8/8/8/8 b - - 0 1")
        with pytest.raises(ValueError):
            engine.best_move(mate, SearchLimits(depth=1))
        assert engine.alive

    def test_mate_in_one(self, engine):
        pos = parse_fen("7k/8/6K1/8/8/8/8/5Q2 w - - 0 1")
        reply = engine.best_move(pos, SearchLimits(depth=1))
        assert reply.best_move == Move.from_uci("f1f8")  # the only mating move
        assert reply.score.mate == 1

    def test_fixed_depth_is_deterministic(self, engine):
        pos = parse_fen("r1bqkbnr/pppp1ppp/2n5/4p3/4P3/5N2/PPPP1PPP/RNBQKB1R w KQkq - 2 3")
        a = engine.best_move(pos, SearchLimits(depth=8))
        b = engine.best_move(pos, SearchLimits(depth=8))
        assert a == b

    def test_unknown_option_rejected(self, engine_path):
        cfg = EngineConfig(executable_path=engine_path, extra_options=(("No Such Option", "1"),))
        with pytest.raises(EngineStartupError):
            spawn(cfg)

    def test_shutdown_is_idempotent_and_reaps(self, engine_path):
        h = spawn(EngineConfig(executable_path=engine_path))
        h.shutdown()
        h.shutdown()
        assert not h.alive
        assert h._proc.poll() is not None
        with pytest.raises(EngineError):
            h.best_move(STARTING_POSITION, SearchLimits(depth=1))
