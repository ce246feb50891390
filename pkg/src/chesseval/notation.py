"""FEN, UCI, SAN and PGN parsing and rendering."""

from __future__ import annotations

import re
import textwrap
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from .rules import (
    BLACK,
    E1,
    E8,
    C1,
    C8,
    G1,
    G8,
    KING,
    PAWN,
    PIECE_SYMBOLS,
    SQUARE_NAMES,
    STARTING_POSITION,
    WHITE,
    Move,
    PieceType,
    Position,
    PositionError,
    apply_unchecked,
    legal_moves,
    parse_square,
    square_file,
    square_rank,
)

STARTING_FEN = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1"
RESULTS = ("1-0", "0-1", "1/2-1/2", "*")


class NotationError(ValueError):
    pass


class FenError(NotationError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"FEN {field_name}: {message}")


class MoveSyntaxError(NotationError):
    """Move text that no supported notation can parse."""


class MoveLegalityError(NotationError):
    """Well-formed move text denoting a move that is not legal here."""


class AmbiguousMoveError(NotationError):
    pass


class PgnError(NotationError):
    def __init__(self, message: str, game_index: Optional[int] = None, ply: Optional[int] = None):
        self.game_index = game_index
        self.ply = ply
        where = []
        if game_index is not None:
            where.append(f"game {game_index}")
        if ply is not None:
            where.append(f"ply {ply}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


# --- FEN ---------------------------------------------------------------------------


def parse_fen(text: str) -> Position:
    fields = text.split()
    if len(fields) != 6:
        raise FenError("field count", f"expected 6 fields, got {len(fields)}")
    placement, side, castling, ep, half, full = fields

    ranks = placement.split("/")
    if len(ranks) != 8:
        raise FenError("placement", f"expected 8 ranks, got {len(ranks)}")
    board = [0] * 64
    for i, row in enumerate(ranks):
        rank = 7 - i
        file = 0
        prev_digit = False
        for ch in row:
            if ch in "12345678":
                if prev_digit:
                    raise FenError("placement", f"consecutive digits in rank {rank + 1}")
                file += int(ch)
                prev_digit = True
            else:
                kind = PIECE_SYMBOLS.find(ch.lower())
                if kind < 1:
                    raise FenError("placement", f"illegal piece letter {ch!r}")
                if file >= 8:
                    raise FenError("placement", f"rank {rank + 1} longer than 8 squares")
                board[rank * 8 + file] = kind if ch.isupper() else -kind
                file += 1
                prev_digit = False
        if file != 8:
            raise FenError("placement", f"rank {rank + 1} has length {file}, expected 8")

    if side not in ("w", "b"):
        raise FenError("active color", f"expected 'w' or 'b', got {side!r}")

    if castling == "-":
        rights: frozenset[str] = frozenset()
    else:
        if not re.fullmatch(r"K?Q?k?q?", castling):
            raise FenError("castling", f"malformed castling field {castling!r}")
        rights = frozenset(castling)

    if ep == "-":
        ep_sq = None
    else:
        if not re.fullmatch(r"[a-h][36]", ep):
            raise FenError("en passant", f"malformed en passant field {ep!r}")
        ep_sq = parse_square(ep)

    if not half.isdigit():
        raise FenError("halfmove clock", f"expected non-negative integer, got {half!r}")
    if not full.isdigit() or int(full) < 1:
        raise FenError("fullmove number", f"expected positive integer, got {full!r}")

    pos = Position(tuple(board), WHITE if side == "w" else BLACK, rights, ep_sq, int(half), int(full))
    try:
        return pos.validate()
    except PositionError as exc:
        raise FenError("position", str(exc)) from None


def render_placement(pos: Position) -> str:
    rows = []
    for rank in range(7, -1, -1):
        row, empty = [], 0
        for file in range(8):
            p = pos.board[rank * 8 + file]
            if not p:
                empty += 1
                continue
            if empty:
                row.append(str(empty))
                empty = 0
            row.append(PIECE_SYMBOLS[p].upper() if p > 0 else PIECE_SYMBOLS[-p])
        if empty:
            row.append(str(empty))
        rows.append("".join(row))
    return "/".join(rows)


def render_fen(pos: Position) -> str:
    return " ".join(
        (
            render_placement(pos),
            "w" if pos.turn is WHITE else "b",
            pos.castling_text,
            "-" if pos.ep_square is None else SQUARE_NAMES[pos.ep_square],
            str(pos.halfmove_clock),
            str(pos.fullmove_number),
        )
    )


def position_key(pos: Position) -> str:
    """First four FEN fields: the board-state identity (clocks excluded)."""
    return render_fen(pos).rsplit(" ", 2)[0]


# --- move text -------------------------------------------------------------------

_UCI_RE = re.compile(r"[a-h][1-8][a-h][1-8][nbrq]?")
_LENIENT_RE = re.compile(r"([PNBRQK])?([a-h][1-8])[-x:]?([a-h][1-8])(?:=?([NBRQnbrq]))?[+#]?")
_CASTLE_RE = re.compile(r"(O-O(?:-O)?|0-0(?:-0)?)[+#]?")
_SAN_RE = re.compile(r"([NBRQK])?([a-h])?([1-8])?(x)?([a-h][1-8])(?:=?([NBRQnbrq]))?[+#]?")
_ANNOTATION_RE = re.compile(r"[!?]+$")


def _promo(letter: Optional[str]) -> Optional[PieceType]:
    return PieceType(PIECE_SYMBOLS.find(letter.lower())) if letter else None


def _checked_move(pos: Position, move: Move, text: str) -> Move:
    if move not in legal_moves(pos):
        raise MoveLegalityError(f"move {text!r} is not legal in this position")
    return move


def parse_move_text(text: str, pos: Position) -> Move:
    """Parse move text in UCI, piece-prefixed UCI, castling words, or SAN.

    Raises MoveSyntaxError when nothing parses, MoveLegalityError when the
    text is well formed but denotes an illegal move, AmbiguousMoveError when
    SAN matches several legal moves.
    """
    token = _ANNOTATION_RE.sub("", text.strip())
    if not token:
        raise MoveSyntaxError("empty move text")

    if _UCI_RE.fullmatch(token):
        f, t = parse_square(token[:2]), parse_square(token[2:4])
        if f == t:
            raise MoveSyntaxError(f"null move {token!r}")
        return _checked_move(pos, Move(f, t, _promo(token[4:] or None)), token)

    m = _LENIENT_RE.fullmatch(token)
    if m:
        letter, frm, to, promo = m.groups()
        f, t = parse_square(frm), parse_square(to)
        if f == t:
            raise MoveSyntaxError(f"null move {token!r}")
        move = Move(f, t, _promo(promo))
        if letter and abs(pos.board[f]) != PIECE_SYMBOLS.find(letter.lower()):
            raise MoveLegalityError(f"move {token!r}: no {letter} on {frm}")
        return _checked_move(pos, move, token)

    m = _CASTLE_RE.fullmatch(token)
    if m:
        long = m.group(1).count("-") == 2
        if pos.turn is WHITE:
            move = Move(E1, C1 if long else G1)
        else:
            move = Move(E8, C8 if long else G8)
        if abs(pos.board[move.from_sq]) != KING:
            raise MoveLegalityError(f"cannot castle: {token!r}")
        return _checked_move(pos, move, token)

    m = _SAN_RE.fullmatch(token)
    if m:
        letter, dfile, drank, _, to, promo = m.groups()
        kind = PIECE_SYMBOLS.find(letter.lower()) if letter else PAWN
        t = parse_square(to)
        promotion = _promo(promo)
        candidates = [
            mv
            for mv in legal_moves(pos)
            if mv.to_sq == t
            and abs(pos.board[mv.from_sq]) == kind
            and mv.promotion == promotion
            and (dfile is None or square_file(mv.from_sq) == "abcdefgh".index(dfile))
            and (drank is None or square_rank(mv.from_sq) == int(drank) - 1)
            # castling is only ever written O-O / O-O-O in SAN
            and not (kind == KING and abs(mv.to_sq - mv.from_sq) == 2)
        ]
        if not candidates:
            raise MoveLegalityError(f"move {token!r} is not legal in this position")
        if len(candidates) > 1:
            raise AmbiguousMoveError(
                f"move {token!r} is ambiguous: {', '.join(c.uci() for c in candidates)}"
            )
        return candidates[0]

    raise MoveSyntaxError(f"unparseable move text {text!r}")


def render_san(move: Move, pos: Position, moves: Optional[Sequence[Move]] = None) -> str:
    legal = legal_moves(pos) if moves is None else moves
    if move not in legal:
        raise MoveLegalityError(f"move {move.uci()} is not legal in this position")
    piece = abs(pos.board[move.from_sq])
    f, t = move.from_sq, move.to_sq

    if piece == KING and abs(t - f) == 2:
        san = "O-O" if t > f else "O-O-O"
    else:
        capture = bool(pos.board[t]) or (piece == PAWN and t == pos.ep_square)
        if piece == PAWN:
            san = (SQUARE_NAMES[f][0] + "x" if capture else "") + SQUARE_NAMES[t]
            if move.promotion:
                san += "=" + PIECE_SYMBOLS[move.promotion].upper()
        else:
            rivals = [
                m.from_sq
                for m in legal
                if m.to_sq == t and m.from_sq != f and abs(pos.board[m.from_sq]) == piece
            ]
            dis = ""
            if rivals:
                if all(square_file(r) != square_file(f) for r in rivals):
                    dis = SQUARE_NAMES[f][0]
                elif all(square_rank(r) != square_rank(f) for r in rivals):
                    dis = SQUARE_NAMES[f][1]
                else:
                    dis = SQUARE_NAMES[f]
            san = PIECE_SYMBOLS[piece].upper() + dis + ("x" if capture else "") + SQUARE_NAMES[t]

    after = apply_unchecked(pos, move)
    if after.is_check():
        san += "#" if not legal_moves(after) else "+"
    return san


# --- PGN -----------------------------------------------------------------------------

SEVEN_TAG_ROSTER = ("Event", "Site", "Date", "Round", "White", "Black", "Result")


@dataclass
class GameRecord:
    tags: list[tuple[str, str]] = field(default_factory=list)
    moves: list[Move] = field(default_factory=list)
    result: str = "*"
    per_move_meta: Optional[list] = None

    def tag(self, name: str, default: Optional[str] = None) -> Optional[str]:
        for k, v in self.tags:
            if k == name:
                return v
        return default

    def set_tag(self, name: str, value: str) -> None:
        for i, (k, _) in enumerate(self.tags):
            if k == name:
                self.tags[i] = (name, value)
                return
        self.tags.append((name, value))

    def start_position(self) -> Position:
        fen = self.tag("FEN")
        return parse_fen(fen) if fen else STARTING_POSITION

    def positions(self) -> list[Position]:
        """Start position followed by the position after every move."""
        pos = self.start_position()
        out = [pos]
        for i, mv in enumerate(self.moves):
            if mv not in legal_moves(pos):
                raise PgnError(f"illegal move {mv.uci()}", ply=i + 1)
            pos = apply_unchecked(pos, mv)
            out.append(pos)
        return out


_CURLY = str.maketrans({"“": '"', "”": '"', "„": '"', "«": '"', "»": '"'})

_TOKEN_RE = re.compile(
    r"""
    (?P<tag>\[\s*(?P<name>[A-Za-z0-9_]+)\s*"(?P<value>(?:[^"\\]|\\.)*)"\s*\])
  | (?P<badtag>\[[^\]]*(?:\]|$))
  | (?P<comment>\{[^}]*\})
  | (?P<badcomment>\{[^}]*$)
  | (?P<linecomment>;[^\n]*)
  | (?P<escape>^%[^\n]*)
  | (?P<result>1-0|0-1|1/2-1/2|\*)
  | (?P<movenum>\d+\s*\.(?:\s*\.\s*\.)?|\d+\.+)
  | (?P<nag>\$\d+)
  | (?P<open>\()
  | (?P<close>\))
  | (?P<san>[^\s{}()\[\];$]+)
  | (?P<ws>\s+)
    """,
    re.VERBOSE | re.MULTILINE,
)


def _normalize_tag_quotes(text: str) -> str:
    text = text.translate(_CURLY)
    # LaTeX-style ``value'' inside tag brackets
    return re.sub(r"\[(\s*\w+\s*)``(.*?)''(\s*)\]", r'[\1"\2"\3]', text)


def _unescape(value: str) -> str:
    return re.sub(r"\\(.)", r"\1", value)


def iter_pgn(text: str) -> Iterator[GameRecord]:
    """Yield games from PGN text, raising PgnError at the first bad game."""
    for rec, err in _iter_pgn(text):
        if err is not None:
            raise err
        yield rec


def _iter_pgn(text: str) -> Iterator[tuple[Optional[GameRecord], Optional[PgnError]]]:
    text = _normalize_tag_quotes(text.lstrip("﻿"))
    game_index = 0
    rec: Optional[GameRecord] = None
    pos: Optional[Position] = None
    error: Optional[PgnError] = None
    in_movetext = False
    rav_depth = 0

    def finish():
        nonlocal rec, pos, in_movetext, error, game_index, rav_depth
        out = (rec, error)
        rec, pos, error, in_movetext, rav_depth = None, None, None, False, 0
        game_index += 1
        return out

    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        if kind in ("ws", "escape", "linecomment", "comment", "nag"):
            continue
        if kind == "badcomment":
            if rec is None:
                rec = GameRecord()
            error = error or PgnError("unterminated comment", game_index)
            yield finish()
            return
        if kind == "badtag":
            if rec is None:
                rec = GameRecord()
            error = error or PgnError(f"malformed tag pair {m.group(0)[:40]!r}", game_index)
            continue
        if kind == "tag":
            if in_movetext:
                # a new header without a result token starts the next game
                if rec is not None:
                    rec.result = rec.tag("Result") if rec.tag("Result") in RESULTS else "*"
                    yield finish()
            if rec is None:
                rec = GameRecord()
            rec.tags.append((m.group("name"), _unescape(m.group("value"))))
            continue
        if rec is None:
            rec = GameRecord()
        if kind == "result" and rav_depth == 0:
            rec.result = m.group(0)
            yield finish()
            continue
        in_movetext = True
        if kind == "open":
            rav_depth += 1
            continue
        if kind == "close":
            rav_depth = max(0, rav_depth - 1)
            continue
        if kind in ("movenum", "result") or rav_depth or error is not None:
            continue
        # san token
        if pos is None:
            try:
                pos = rec.start_position()
            except NotationError as exc:
                error = PgnError(f"bad FEN tag: {exc}", game_index)
                continue
        ply = len(rec.moves) + 1
        try:
            mv = parse_move_text(m.group(0), pos)
        except NotationError as exc:
            error = PgnError(str(exc), game_index, ply)
            continue
        rec.moves.append(mv)
        pos = apply_unchecked(pos, mv)

    if rec is not None and (rec.tags or rec.moves or error is not None):
        if rec.result == "*" and rec.tag("Result") in RESULTS:
            rec.result = rec.tag("Result")
        yield finish()


def parse_pgn(text: str) -> list[GameRecord]:
    """Parse every game in `text`.  Raises PgnError on the first bad game."""
    return list(iter_pgn(text))


def parse_pgn_lenient(text: str) -> tuple[list[GameRecord], int]:
    """Parse every well-formed game, returning (games, number skipped)."""
    games, skipped = [], 0
    for rec, err in _iter_pgn(text):
        if err is None:
            games.append(rec)
        else:
            skipped += 1
    return games, skipped


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace('"', '\\"')


def movetext_tokens(rec: GameRecord) -> list[str]:
    pos = rec.start_position()
    tokens = []
    for i, mv in enumerate(rec.moves):
        legal = legal_moves(pos)
        if mv not in legal:
            raise PgnError(f"illegal move {mv.uci()}", ply=i + 1)
        if pos.turn is WHITE:
            tokens.append(f"{pos.fullmove_number}.")
        elif i == 0:
            tokens.append(f"{pos.fullmove_number}...")
        tokens.append(render_san(mv, pos, legal))
        pos = apply_unchecked(pos, mv)
    tokens.append(rec.result)
    return tokens


def render_pgn(rec: GameRecord) -> str:
    names = [k for k, _ in rec.tags]
    ordered = [t for t in SEVEN_TAG_ROSTER if t in names]
    ordered += [k for k in names if k not in SEVEN_TAG_ROSTER]
    lines = [f'[{k} "{_escape(rec.tag(k))}"]' for k in ordered]
    body = textwrap.fill(
        " ".join(movetext_tokens(rec)), width=80, break_long_words=False, break_on_hyphens=False
    )
    if lines:
        lines.append("")
    lines.append(body)
    return "\n".join(lines) + "\n"
