"""Board representation, legal move generation and game adjudication.

Squares are plain ints 0..63 in rank-major order (a1=0, b1=1, ..., h8=63),
so the natural int ordering is the deterministic iteration order.  The board
is a 64-tuple of signed piece codes: positive for white, negative for black,
0 for empty.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Iterable, NamedTuple, Optional, Sequence


class Color(IntEnum):
    WHITE = 0
    BLACK = 1

    @property
    def other(self) -> "Color":
        return Color.BLACK if self is Color.WHITE else Color.WHITE


WHITE, BLACK = Color.WHITE, Color.BLACK


class PieceType(IntEnum):
    PAWN = 1
    KNIGHT = 2
    BISHOP = 3
    ROOK = 4
    QUEEN = 5
    KING = 6


PAWN, KNIGHT, BISHOP, ROOK, QUEEN, KING = (
    PieceType.PAWN,
    PieceType.KNIGHT,
    PieceType.BISHOP,
    PieceType.ROOK,
    PieceType.QUEEN,
    PieceType.KING,
)

PIECE_SYMBOLS = " pnbrqk"


@dataclass(frozen=True)
class Piece:
    kind: PieceType
    color: Color

    def symbol(self) -> str:
        s = PIECE_SYMBOLS[self.kind]
        return s.upper() if self.color is WHITE else s

    @classmethod
    def from_symbol(cls, symbol: str) -> "Piece":
        kind = PIECE_SYMBOLS.find(symbol.lower())
        if kind < 1 or len(symbol) != 1:
            raise ValueError(f"invalid piece symbol: {symbol!r}")
        return cls(PieceType(kind), WHITE if symbol.isupper() else BLACK)

    @property
    def code(self) -> int:
        return int(self.kind) if self.color is WHITE else -int(self.kind)

    @classmethod
    def from_code(cls, code: int) -> "Piece":
        return cls(PieceType(abs(code)), WHITE if code > 0 else BLACK)


# --- squares -----------------------------------------------------------------

FILE_NAMES = "abcdefgh"
RANK_NAMES = "12345678"
SQUARE_NAMES = [f + r for r in RANK_NAMES for f in FILE_NAMES]


def square(file: int, rank: int) -> int:
    if not (0 <= file < 8 and 0 <= rank < 8):
        raise ValueError(f"square coordinates out of range: file={file} rank={rank}")
    return rank * 8 + file


def square_file(sq: int) -> int:
    return sq & 7


def square_rank(sq: int) -> int:
    return sq >> 3


def square_name(sq: int) -> str:
    return SQUARE_NAMES[sq]


def parse_square(name: str) -> int:
    try:
        return SQUARE_NAMES.index(name)
    except ValueError:
        raise ValueError(f"invalid square name: {name!r}") from None


A1, C1, D1, E1, F1, G1, H1 = 0, 2, 3, 4, 5, 6, 7
A8, C8, D8, E8, F8, G8, H8 = 56, 58, 59, 60, 61, 62, 63


def _walk(sq: int, df: int, dr: int) -> tuple[int, ...]:
    f, r = square_file(sq), square_rank(sq)
    out = []
    f, r = f + df, r + dr
    while 0 <= f < 8 and 0 <= r < 8:
        out.append(r * 8 + f)
        f, r = f + df, r + dr
    return tuple(out)


def _leaps(sq: int, deltas: Iterable[tuple[int, int]]) -> tuple[int, ...]:
    f, r = square_file(sq), square_rank(sq)
    return tuple(
        sorted((r + dr) * 8 + f + df for df, dr in deltas if 0 <= f + df < 8 and 0 <= r + dr < 8)
    )


# Directions 0-3 are orthogonal (rook-like), 4-7 diagonal (bishop-like).
_DIRECTIONS = ((0, 1), (0, -1), (1, 0), (-1, 0), (1, 1), (-1, 1), (1, -1), (-1, -1))
RAYS = [tuple(_walk(sq, df, dr) for df, dr in _DIRECTIONS) for sq in range(64)]
KNIGHT_TARGETS = [
    _leaps(sq, ((1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2)))
    for sq in range(64)
]
KING_TARGETS = [_leaps(sq, _DIRECTIONS) for sq in range(64)]
# PAWN_ATTACKS[color][sq]: squares attacked by a pawn of `color` standing on sq.
PAWN_ATTACKS = [
    [_leaps(sq, ((-1, 1), (1, 1))) for sq in range(64)],
    [_leaps(sq, ((-1, -1), (1, -1))) for sq in range(64)],
]

_PROMOTIONS = (KNIGHT, BISHOP, ROOK, QUEEN)


class Move(NamedTuple):
    """A from/to square pair plus optional promotion piece kind.

    Tuple ordering (from, to, promotion) is the canonical move order.
    """

    from_sq: int
    to_sq: int
    promotion: Optional[PieceType] = None

    def uci(self) -> str:
        s = SQUARE_NAMES[self.from_sq] + SQUARE_NAMES[self.to_sq]
        if self.promotion:
            s += PIECE_SYMBOLS[self.promotion]
        return s

    @classmethod
    def from_uci(cls, text: str) -> "Move":
        """Parse strict UCI move text.  Raises ValueError on bad syntax."""
        if len(text) not in (4, 5):
            raise ValueError(f"invalid UCI move: {text!r}")
        f, t = parse_square(text[:2]), parse_square(text[2:4])
        promo = None
        if len(text) == 5:
            k = PIECE_SYMBOLS.find(text[4])
            if k not in (2, 3, 4, 5):
                raise ValueError(f"invalid UCI promotion: {text!r}")
            promo = PieceType(k)
        if f == t:
            raise ValueError(f"null move is not a move: {text!r}")
        return cls(f, t, promo)

    def __str__(self) -> str:
        return self.uci()


class PositionError(ValueError):
    """A position violates a structural invariant."""


class IllegalMoveError(ValueError):
    def __init__(self, move: Move, message: str = ""):
        self.move = move
        super().__init__(message or f"illegal move {move.uci()}")


# --- position ----------------------------------------------------------------

_CASTLING_ORDER = "KQkq"


@dataclass(frozen=True, slots=True)
class Position:
    board: tuple[int, ...]
    turn: Color = WHITE
    castling: frozenset[str] = frozenset()
    ep_square: Optional[int] = None
    halfmove_clock: int = 0
    fullmove_number: int = 1

    @property
    def placement(self) -> dict[int, Piece]:
        return {sq: Piece.from_code(p) for sq, p in enumerate(self.board) if p}

    def piece_at(self, sq: int) -> Optional[Piece]:
        p = self.board[sq]
        return Piece.from_code(p) if p else None

    @property
    def castling_text(self) -> str:
        return "".join(c for c in _CASTLING_ORDER if c in self.castling) or "-"

    def key(self) -> tuple:
        """Identity used for repetition and dataset dedup (clocks excluded)."""
        return (self.board, self.turn, self.castling, self.ep_square)

    def king_square(self, color: Color) -> int:
        return self.board.index(KING if color is WHITE else -KING)

    def is_check(self) -> bool:
        s = 1 if self.turn is WHITE else -1
        return _attacked(self.board, self.board.index(KING * s), -s)

    def validate(self) -> "Position":
        """Raise PositionError unless every structural invariant holds."""
        b = self.board
        if len(b) != 64 or any(not -6 <= p <= 6 for p in b):
            raise PositionError("board must hold 64 piece codes")
        if b.count(KING) != 1 or b.count(-KING) != 1:
            raise PositionError("each side needs exactly one king")
        if any(abs(b[sq]) == PAWN for sq in (*range(0, 8), *range(56, 64))):
            raise PositionError("pawns cannot stand on the first or last rank")
        if not set(self.castling) <= set(_CASTLING_ORDER):
            raise PositionError(f"invalid castling rights {sorted(self.castling)}")
        for right, king_sq, rook_sq, sign in (
            ("K", E1, H1, 1), ("Q", E1, A1, 1), ("k", E8, H8, -1), ("q", E8, A8, -1)
        ):
            if right in self.castling and (b[king_sq] != KING * sign or b[rook_sq] != ROOK * sign):
                raise PositionError(f"castling right {right} without king and rook at home")
        if self.ep_square is not None:
            ep = self.ep_square
            if self.turn is WHITE:
                ok = square_rank(ep) == 5 and b[ep] == 0 and b[ep - 8] == -PAWN
            else:
                ok = square_rank(ep) == 2 and b[ep] == 0 and b[ep + 8] == PAWN
            if not ok:
                raise PositionError(f"inconsistent en passant square {square_name(ep)}")
        if self.halfmove_clock < 0:
            raise PositionError("halfmove clock must be non-negative")
        if self.fullmove_number < 1:
            raise PositionError("fullmove number must be positive")
        s = -1 if self.turn is WHITE else 1
        if _attacked(b, b.index(KING * s), -s):
            raise PositionError("side not to move is in check")
        return self


def _start_board() -> tuple[int, ...]:
    back = (ROOK, KNIGHT, BISHOP, QUEEN, KING, BISHOP, KNIGHT, ROOK)
    b = [0] * 64
    for f, k in enumerate(back):
        b[f] = k
        b[8 + f] = PAWN
        b[48 + f] = -PAWN
        b[56 + f] = -k
    return tuple(b)


STARTING_POSITION = Position(_start_board(), WHITE, frozenset("KQkq"), None, 0, 1)


# --- attack detection ----------------------------------------------------------


def _attacked(board: Sequence[int], sq: int, by: int) -> bool:
    """True if any piece of sign `by` attacks sq on `board`."""
    for t in KNIGHT_TARGETS[sq]:
        if board[t] == KNIGHT * by:
            return True
    for t in KING_TARGETS[sq]:
        if board[t] == KING * by:
            return True
    # a pawn of colour `by` attacks sq from the squares a pawn of the other colour would attack
    for t in PAWN_ATTACKS[0 if by < 0 else 1][sq]:
        if board[t] == PAWN * by:
            return True
    rays = RAYS[sq]
    rook, bishop, queen = ROOK * by, BISHOP * by, QUEEN * by
    for d in range(4):
        for t in rays[d]:
            p = board[t]
            if p:
                if p == rook or p == queen:
                    return True
                break
    for d in range(4, 8):
        for t in rays[d]:
            p = board[t]
            if p:
                if p == bishop or p == queen:
                    return True
                break
    return False


def is_attacked(pos: Position, sq: int, by: Color) -> bool:
    return _attacked(pos.board, sq, 1 if by is WHITE else -1)


# --- move generation -------------------------------------------------------------


def _generate(pos: Position) -> list[Move]:
    board = pos.board
    white = pos.turn is WHITE
    s = 1 if white else -1
    ks = board.index(KING * s)

    checkers = 0
    mask: Optional[set[int]] = None  # squares that resolve a single check
    pinned: dict[int, tuple[int, ...]] = {}
    rays = RAYS[ks]
    for d in range(8):
        ray = rays[d]
        own = -1
        for i, t in enumerate(ray):
            p = board[t]
            if not p:
                continue
            if p * s > 0:
                if own >= 0:
                    break
                own = t
                continue
            k = -p * s
            if k == QUEEN or (k == ROOK if d < 4 else k == BISHOP):
                if own < 0:
                    checkers += 1
                    mask = set(ray[: i + 1])
                else:
                    pinned[own] = ray[: i + 1]
            break
    for t in KNIGHT_TARGETS[ks]:
        if board[t] == -KNIGHT * s:
            checkers += 1
            mask = {t}
    for t in PAWN_ATTACKS[0 if white else 1][ks]:
        if board[t] == -PAWN * s:
            checkers += 1
            mask = {t}

    moves: list[Move] = []
    append = moves.append

    # king moves: test destination with the king lifted off the board (x-rays)
    lifted = list(board)
    lifted[ks] = 0
    for t in KING_TARGETS[ks]:
        if board[t] * s <= 0 and not _attacked(lifted, t, -s):
            append(Move(ks, t))

    if checkers > 1:
        moves.sort()
        return moves

    if not checkers and pos.castling:
        if white:
            if "K" in pos.castling and not board[F1] and not board[G1] and not _attacked(
                board, F1, -1
            ) and not _attacked(board, G1, -1):
                append(Move(E1, G1))
            if "Q" in pos.castling and not board[D1] and not board[C1] and not board[1] and not _attacked(
                board, D1, -1
            ) and not _attacked(board, C1, -1):
                append(Move(E1, C1))
        else:
            if "k" in pos.castling and not board[F8] and not board[G8] and not _attacked(
                board, F8, 1
            ) and not _attacked(board, G8, 1):
                append(Move(E8, G8))
            if "q" in pos.castling and not board[D8] and not board[C8] and not board[57] and not _attacked(
                board, D8, 1
            ) and not _attacked(board, C8, 1):
                append(Move(E8, C8))

    ep = pos.ep_square
    fwd = 8 * s
    last_rank = 7 if white else 0
    start_rank = 1 if white else 6
    pawn_attacks = PAWN_ATTACKS[0 if white else 1]

    for f in range(64):
        p = board[f] * s
        if p <= 0 or p == KING:
            continue
        pin = pinned.get(f)
        targets: list[int] = []
        if p == PAWN:
            t = f + fwd
            if not board[t]:
                targets.append(t)
                if square_rank(f) == start_rank and not board[t + fwd]:
                    targets.append(t + fwd)
            for t in pawn_attacks[f]:
                if board[t] * s < 0:
                    targets.append(t)
                elif t == ep:
                    m = Move(f, t)
                    if _ep_legal(board, f, t, s, ks):
                        append(m)
            for t in targets:
                if pin is not None and t not in pin:
                    continue
                if mask is not None and t not in mask:
                    continue
                if square_rank(t) == last_rank:
                    for k in _PROMOTIONS:
                        append(Move(f, t, k))
                else:
                    append(Move(f, t))
            continue
        if p == KNIGHT:
            if pin is not None:
                continue  # a pinned knight can never move
            for t in KNIGHT_TARGETS[f]:
                if board[t] * s <= 0 and (mask is None or t in mask):
                    append(Move(f, t))
            continue
        fr = RAYS[f]
        dirs = range(4) if p == ROOK else range(4, 8) if p == BISHOP else range(8)
        for d in dirs:
            for t in fr[d]:
                q = board[t] * s
                if q > 0:
                    break
                if (mask is None or t in mask) and (pin is None or t in pin):
                    append(Move(f, t))
                if q < 0:
                    break
    moves.sort()
    return moves


def _ep_legal(board: Sequence[int], f: int, t: int, s: int, ks: int) -> bool:
    b = list(board)
    b[t] = b[f]
    b[f] = 0
    b[t - 8 * s] = 0
    return not _attacked(b, ks, -s)


def legal_moves(pos: Position) -> list[Move]:
    """All legal moves in `pos`, sorted by (from, to, promotion)."""
    return _generate(pos)


def is_legal(pos: Position, move: Move) -> bool:
    return move in _generate(pos)


# --- move application ---------------------------------------------------------------

_ROOK_HOME_RIGHT = {H1: "K", A1: "Q", H8: "k", A8: "q"}


def _apply(pos: Position, m: Move) -> Position:
    board = list(pos.board)
    f, t = m.from_sq, m.to_sq
    p = board[f]
    captured = board[t]
    kind = abs(p)
    s = 1 if p > 0 else -1
    ep = None
    castling = pos.castling

    board[t] = p
    board[f] = 0
    if kind == PAWN:
        if t == pos.ep_square and not captured:
            board[t - 8 * s] = 0
        elif abs(t - f) == 16:
            ep = (f + t) // 2
        if m.promotion:
            board[t] = int(m.promotion) * s
    elif kind == KING:
        if abs(t - f) == 2:
            if t > f:
                board[f + 1], board[f + 3] = board[f + 3], 0
            else:
                board[f - 1], board[f - 4] = board[f - 4], 0
        if castling:
            castling = castling - ({"K", "Q"} if s > 0 else {"k", "q"})
    if castling:
        drop = {_ROOK_HOME_RIGHT[sq] for sq in (f, t) if sq in _ROOK_HOME_RIGHT}
        if drop:
            castling = castling - drop

    black = pos.turn is BLACK
    return Position(
        tuple(board),
        WHITE if black else BLACK,
        castling,
        ep,
        0 if kind == PAWN or captured else pos.halfmove_clock + 1,
        pos.fullmove_number + 1 if black else pos.fullmove_number,
    )


def apply_move(pos: Position, m: Move) -> Position:
    """Return the successor position.  Raises IllegalMoveError for illegal moves."""
    if m not in _generate(pos):
        raise IllegalMoveError(m, f"illegal move {m.uci()} in this position")
    return _apply(pos, m)


def apply_unchecked(pos: Position, m: Move) -> Position:
    """apply_move without the legality check; caller guarantees legality."""
    return _apply(pos, m)


# --- perft ---------------------------------------------------------------------------


def perft(pos: Position, depth: int) -> int:
    """Number of leaf nodes of the legal-move tree exactly `depth` plies deep."""
    if depth < 1:
        raise ValueError("perft depth must be >= 1")
    moves = _generate(pos)
    if depth == 1:
        return len(moves)
    return sum(perft(_apply(pos, m), depth - 1) for m in moves)


# --- adjudication ----------------------------------------------------------------------


class StatusTag(str, Enum):
    ONGOING = "ongoing"
    CHECKMATE = "checkmate"
    STALEMATE = "stalemate"
    DRAW_FIFTY_MOVE = "draw_fifty_move"
    DRAW_THREEFOLD = "draw_threefold"
    DRAW_INSUFFICIENT_MATERIAL = "draw_insufficient_material"
    DRAW_MOVE_CAP = "draw_move_cap"


@dataclass(frozen=True)
class GameStatus:
    tag: StatusTag
    winner: Optional[Color] = None

    @property
    def is_over(self) -> bool:
        return self.tag is not StatusTag.ONGOING

    @property
    def result(self) -> str:
        """PGN result token for this status."""
        if self.tag is StatusTag.ONGOING:
            return "*"
        if self.winner is None:
            return "1/2-1/2"
        return "1-0" if self.winner is WHITE else "0-1"


def insufficient_material(pos: Position) -> bool:
    """K v K, K+B v K, K+N v K, or K+B v K+B with same-coloured bishops."""
    others = [(sq, p) for sq, p in enumerate(pos.board) if p and abs(p) != KING]
    if not others:
        return True
    if len(others) == 1:
        return abs(others[0][1]) in (KNIGHT, BISHOP)
    if len(others) == 2:
        (s1, p1), (s2, p2) = others
        if abs(p1) == BISHOP and abs(p2) == BISHOP and (p1 > 0) != (p2 > 0):
            return (square_file(s1) + square_rank(s1)) % 2 == (square_file(s2) + square_rank(s2)) % 2
    return False


def status(pos: Position, history: Sequence[Position] = ()) -> GameStatus:
    """Adjudicate `pos`.  `history` holds every position of the game, ending at pos."""
    if not _generate(pos):
        if pos.is_check():
            return GameStatus(StatusTag.CHECKMATE, pos.turn.other)
        return GameStatus(StatusTag.STALEMATE)
    if insufficient_material(pos):
        return GameStatus(StatusTag.DRAW_INSUFFICIENT_MATERIAL)
    if pos.halfmove_clock >= 100:
        return GameStatus(StatusTag.DRAW_FIFTY_MOVE)
    if history:
        key = pos.key()
        if sum(1 for h in history if h.key() == key) >= 3:
            return GameStatus(StatusTag.DRAW_THREEFOLD)
    return GameStatus(StatusTag.ONGOING)


class RepetitionCounter:
    """Incremental threefold bookkeeping for long games (O(1) per ply)."""

    def __init__(self, positions: Iterable[Position] = ()):
        self._counts: Counter = Counter(p.key() for p in positions)

    def push(self, pos: Position) -> int:
        k = pos.key()
        self._counts[k] += 1
        return self._counts[k]

    def count(self, pos: Position) -> int:
        return self._counts[pos.key()]


def material(pos: Position, color: Color) -> int:
    """Conventional material count (P=1, N=B=3, R=5, Q=9) for one side."""
    values = (0, 1, 3, 3, 5, 9, 0)
    s = 1 if color is WHITE else -1
    return sum(values[abs(p)] for p in pos.board if p * s > 0)
