"""Chess evaluation harness: rules, notation, engine client, arena, datasets and metrics."""

__version__ = "0.1.0"

from .rules import Move, Position, STARTING_POSITION, legal_moves, apply_move, perft, status  # noqa: E402
from .notation import GameRecord, parse_fen, render_fen, parse_move_text, render_san, parse_pgn, render_pgn  # noqa: E402
from .rating import expected_score, update, skill_from_elo, elo_from_skill, estimate_rating  # noqa: E402

__all__ = [
    "__version__",
    "Move",
    "Position",
    "STARTING_POSITION",
    "legal_moves",
    "apply_move",
    "perft",
    "status",
    "GameRecord",
    "parse_fen",
    "render_fen",
    "parse_move_text",
    "render_san",
    "parse_pgn",
    "render_pgn",
    "expected_score",
    "update",
    "skill_from_elo",
    "elo_from_skill",
    "estimate_rating",
]
