import chess
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from conftest import random_walk
from chesseval.notation import parse_fen, render_fen
from chesseval.rules import (
    BLACK,
    STARTING_POSITION,
    WHITE,
    IllegalMoveError,
    Move,
    PositionError,
    RepetitionCounter,
    StatusTag,
    apply_move,
    insufficient_material,
    is_legal,
    legal_moves,
    material,
    parse_square,
    perft,
    status,
)

KIWIPETE = "r3k2r/p1ppqpb1/bn2pnp1/3PN3/1p2P3/2N2Q1p/PPPBBPPP/R3K2R w KQkq - 0 1"
# positions from the well-known perft suite, with published depth-3 counts
PERFT_SUITE = [
    (KIWIPETE, 3, 97862),
    ("8/2p5/3p4/KP5r/1R3p1k/8/4P1P1/8 w - - 0 1", 3, 2812),
    ("r3k2r/Pppp1ppp/1b3nbN/nP6/BBP1P3/q4N2/Pp1P2PP/R2Q1RK1 w kq - 0 1", 3, 9467),
    ("rnbq1k1r/pp1Pbppp/2p5/8/2B5/8/PPP1NnPP/RNBQK2R w KQ - 1 8", 3, 62379),
    ("r4rk1/1pp1qppp/p1np1n2/2b1p1B1/2B1P1b1/P1NP1N2/1PP1QPPP/R4RK1 w - - 0 10", 3, 89890),
]


def mv(text):
    return Move.from_uci(text)


def uci_set(pos):
    return sorted(m.uci() for m in legal_moves(pos))


class TestMoveGeneration:
    def test_start_position_has_20_moves(self):
        assert len(legal_moves(STARTING_POSITION)) == 20

    def test_stalemate_has_no_moves(self):
        pos = parse_fen("7k/5Q2/6K1/8/8/8/8/8 b - - 0 1")
        assert legal_moves(pos) == []
        assert status(pos).tag is StatusTag.STALEMATE

    def test_checkmate_has_no_moves(self):
        pos = parse_fen("7k/6Q1/6K1/8/8/8/8/8 b - - 0 1")
        assert legal_moves(pos) == []
        st_ = status(pos)
        assert st_.tag is StatusTag.CHECKMATE and st_.winner is WHITE
        assert st_.result == "1-0"

    def test_moves_are_sorted_canonically(self):
        moves = legal_moves(parse_fen(KIWIPETE))
        assert moves == sorted(moves)

    @pytest.mark.parametrize("fen,depth,expected", PERFT_SUITE)
    def test_perft_suite(self, fen, depth, expected):
        assert perft(parse_fen(fen), depth) == expected

    @pytest.mark.parametrize("depth,expected", [(1, 20), (2, 400), (3, 8902)])
    def test_perft_startpos_matches_oracle(self, depth, expected):
        assert perft(STARTING_POSITION, depth) == expected
        assert oracle.perft_fen(render_fen(STARTING_POSITION), depth) == expected

    def test_perft_rejects_depth_zero(self):
        with pytest.raises(ValueError):
            perft(STARTING_POSITION, 0)

    def test_pinned_piece_cannot_leave_the_line(self):
        pos = parse_fen("4k3/8/8/8/4r3/8/4N3/4K3 w - - 0 1")
        assert not any(m.from_sq == parse_square("e2") for m in legal_moves(pos))

    def test_en_passant_exposing_the_king_is_illegal(self):
        pos = parse_fen("8/8/8/K2pP2r/8/8/8/7k w - d6 0 1")
        assert mv("e5d6") not in legal_moves(pos)

    def test_castling_through_check_is_illegal(self):
        pos = parse_fen("4k3/8/8/8/8/8/5r2/R3K2R w KQ - 0 1")
        moves = uci_set(pos)
        assert "e1g1" not in moves
        assert "e1c1" in moves

    def test_promotions_generate_four_moves(self):
        pos = parse_fen("8/P6k/8/8/8/8/8/K7 w - - 0 1")
        assert sorted(m.uci() for m in legal_moves(pos) if m.from_sq == parse_square("a7")) == [
            "a7a8b", "a7a8n", "a7a8q", "a7a8r"]


class TestApply:
    def test_double_push_sets_ep_square(self):
        pos = apply_move(STARTING_POSITION, mv("e2e4"))
        assert render_fen(pos) == "rnbqkbnr/pppppppp/8/8/4P3/8/PPPP1PPP/RNBQKBNR b KQkq e3 0 1"

    def test_quiet_piece_move_increments_halfmove(self):
        pos = apply_move(STARTING_POSITION, mv("g1f3"))
        assert pos.halfmove_clock == 1
        pos = apply_move(pos, mv("b8c6"))
        assert pos.halfmove_clock == 2 and pos.fullmove_number == 2

    def test_kingside_castle(self):
        pos = parse_fen("r3k2r/8/8/8/8/8/8/R3K2R w KQkq - 3 10")
        after = apply_move(pos, mv("e1g1"))
        assert after.piece_at(parse_square("g1")).symbol() == "K"
        assert after.piece_at(parse_square("f1")).symbol() == "R"
        assert after.piece_at(parse_square("h1")) is None
        assert after.castling == frozenset("kq")

    def test_rook_capture_removes_castling_right(self):
        pos = parse_fen("r3k2r/8/8/8/8/8/8/R3K2R w KQkq - 0 1")
        after = apply_move(pos, mv("a1a8"))
        assert after.castling == frozenset("Kk")

    def test_illegal_move_raises(self):
        with pytest.raises(IllegalMoveError):
            apply_move(STARTING_POSITION, mv("e2e5"))

    def test_is_legal(self):
        assert is_legal(STARTING_POSITION, mv("e2e4"))
        assert not is_legal(STARTING_POSITION, mv("e1e2"))


class TestStatus:
    def test_kk_is_insufficient(self):
        pos = parse_fen("8/8/4k3/8/8/4K3/8/8 w - - 0 1")
        assert status(pos).tag is StatusTag.DRAW_INSUFFICIENT_MATERIAL

    @pytest.mark.parametrize("fen,expected", [
        ("8/8/4k3/8/8/4KB2/8/8 w - - 0 1", True),
        ("8/8/4k3/8/8/4KN2/8/8 w - - 0 1", True),
        ("8/8/4kb2/8/8/4KB2/8/8 w - - 0 1", False),  # f6 and f3 differ in colour
        ("8/8/4k1b1/8/8/4KB2/8/8 w - - 0 1", True),  # g6 and f3 are both light
        ("8/8/4k3/8/8/4KR2/8/8 w - - 0 1", False),
        ("8/8/4k3/8/8/4KP2/8/8 w - - 0 1", False),
    ])
    def test_insufficient_material(self, fen, expected):
        assert insufficient_material(parse_fen(fen)) is expected

    def test_fifty_move_rule(self):
        pos = parse_fen("8/8/4k3/8/8/4KR2/8/8 w - - 100 80")
        assert legal_moves(pos)
        assert status(pos).tag is StatusTag.DRAW_FIFTY_MOVE

    def test_mate_beats_fifty_move_rule(self):
        pos = parse_fen("7k/6Q1/6K1/8/8/8/8/8 b - - 100 80")
        assert status(pos).tag is StatusTag.CHECKMATE

    def test_threefold_repetition(self):
        pos = STARTING_POSITION
        history = [pos]
        for text in ["g1f3", "g8f6", "f3g1", "f6g8"] * 2:
            pos = apply_move(pos, mv(text))
            history.append(pos)
        assert status(pos, history).tag is StatusTag.DRAW_THREEFOLD
        assert status(pos, history[:5]).tag is StatusTag.ONGOING
        counter = RepetitionCounter(history)
        assert counter.count(pos) == 3

    def test_ongoing_has_no_winner(self):
        st_ = status(STARTING_POSITION)
        assert not st_.is_over and st_.winner is None and st_.result == "*"

    def test_material(self):
        assert material(STARTING_POSITION, WHITE) == material(STARTING_POSITION, BLACK) == 39


class TestValidation:
    @pytest.mark.parametrize("fen", [
        "8/8/8/8/8/8/8/8 w - - 0 1",  # no kings
        "k7/8/8/8/8/8/8/KK6 w - - 0 1",  # two white kings
        "P3k3/8/8/8/8/8/8/4K3 w - - 0 1",  # pawn on the back rank
        "4k3/8/8/8/8/8/8/4K2R w Q - 0 1",  # castling right without a rook
        "4k3/4R3/8/8/8/8/8/4K3 w - - 0 1",  # side not to move is in check
    ])
    def test_impossible_positions_rejected(self, fen):
        with pytest.raises(ValueError):
            parse_fen(fen)

    def test_position_error_is_value_error(self):
        assert issubclass(PositionError, ValueError)


# --- property tests against the brute-force oracle and a reference library ---


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_legal_moves_match_oracle_along_random_walks(seed):
    for pos in random_walk(seed, 60)[::3]:
        fen = render_fen(pos)
        assert uci_set(pos) == oracle.legal_uci(fen), fen


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_legal_moves_and_status_match_reference_library(seed):
    for pos in random_walk(seed, 200):
        fen = render_fen(pos)
        ref = chess.Board(fen)
        assert uci_set(pos) == sorted(m.uci() for m in ref.legal_moves), fen
        assert pos.is_check() == ref.is_check()
        tag = status(pos).tag
        assert (tag is StatusTag.CHECKMATE) == ref.is_checkmate()
        assert (tag is StatusTag.STALEMATE) == ref.is_stalemate()


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_apply_matches_reference_library(seed):
    walk = random_walk(seed, 150)
    ref = chess.Board()
    for before, after in zip(walk, walk[1:]):
        move = next(m for m in legal_moves(before) if apply_move(before, m) == after)
        ref.push(chess.Move.from_uci(move.uci()))
        assert render_fen(after) == ref.fen(en_passant="fen")


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_perft_depth_one_is_move_count(seed):
    for pos in random_walk(seed, 40)[::5]:
        assert perft(pos, 1) == len(legal_moves(pos))
