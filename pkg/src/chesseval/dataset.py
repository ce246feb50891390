"""FEN -> best-move dataset construction and evaluation-set sampling."""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence, Union

from .engine import Engine, EngineError, Score, SearchLimits
from .notation import (
    GameRecord,
    NotationError,
    parse_fen,
    parse_pgn_lenient,
    position_key,
    render_fen,
)
from .policy import derive_seed
from .rules import (
    STARTING_POSITION,
    Move,
    Position,
    RepetitionCounter,
    apply_unchecked,
    legal_moves,
    status,
)

log = logging.getLogger(__name__)

SHORT, LONG = "short", "long"
CORPUS, SELF_PLAY = "corpus", "self_play"


class DatasetError(ValueError):
    pass


class SplitShortfall(DatasetError):
    def __init__(self, deficits: dict[str, int]):
        self.deficits = deficits
        listing = ", ".join(f"{k}: short by {v}" for k, v in deficits.items())
        super().__init__(f"not enough records for the requested split ({listing})")


@dataclass(frozen=True)
class DatasetRecord:
    fen: str
    best_move: Move
    search_depth: Optional[int]
    movetime_ms: Optional[int]
    engine_eval: Optional[Score] = None
    round_class: str = SHORT
    source: str = CORPUS

    @property
    def key(self) -> str:
        return " ".join(self.fen.split()[:4])

    @property
    def fullmove_number(self) -> int:
        return int(self.fen.split()[5])

    def to_line(self) -> str:
        meta = {
            "depth": self.search_depth,
            "movetime_ms": self.movetime_ms,
            "eval": self.engine_eval.as_dict() if self.engine_eval else None,
            "class": self.round_class,
            "source": self.source,
        }
        return f"FEN:{self.fen}\tBM:{self.best_move.uci()}\t{json.dumps(meta, sort_keys=True, separators=(',', ':'))}"

    @classmethod
    def from_line(cls, line: str) -> "DatasetRecord":
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 3 or not parts[0].startswith("FEN:") or not parts[1].startswith("BM:"):
            raise ValueError("expected 'FEN:<fen>\\tBM:<uci>\\t<json>'")
        fen, uci = parts[0][4:], parts[1][3:]
        pos = parse_fen(fen)
        move = Move.from_uci(uci)
        if move not in legal_moves(pos):
            raise ValueError(f"best move {uci} is not legal in {fen}")
        meta = json.loads(parts[2])
        return cls(
            fen=fen,
            best_move=move,
            search_depth=meta.get("depth"),
            movetime_ms=meta.get("movetime_ms"),
            engine_eval=Score.from_dict(meta.get("eval")),
            round_class=meta.get("class", SHORT),
            source=meta.get("source", CORPUS),
        )


def write_records(records: Iterable[DatasetRecord], path: Union[str, Path]) -> int:
    n = 0
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for rec in records:
            fh.write(rec.to_line() + "\n")
            n += 1
    return n


def read_records(path: Union[str, Path]) -> list[DatasetRecord]:
    """Read a dataset file, re-validating every FEN and best move."""
    out = []
    with open(path, encoding="utf-8-sig") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(DatasetRecord.from_line(line))
            except (ValueError, NotationError) as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
    return out


# --- position harvesting -----------------------------------------------------------


@dataclass
class HarvestStats:
    games: int = 0
    skipped_games: int = 0
    positions: int = 0
    duplicates: int = 0


def read_pgn_games(source: Union[str, Path], stats: Optional[HarvestStats] = None) -> list[GameRecord]:
    """Every well-formed game in a PGN file or a directory of *.pgn files."""
    path = Path(source)
    files = sorted(path.rglob("*.pgn")) if path.is_dir() else [path]
    games = []
    for f in files:
        parsed, skipped = parse_pgn_lenient(f.read_text(encoding="utf-8-sig", errors="replace"))
        if skipped:
            log.warning("%s: skipped %d malformed game(s)", f, skipped)
        if stats is not None:
            stats.skipped_games += skipped
        games.extend(parsed)
    return games


def harvest_positions(
    source: Union[str, Path, Iterable[GameRecord]],
    seen: Optional[set] = None,
    stats: Optional[HarvestStats] = None,
) -> Iterator[tuple[Position, int]]:
    """Every distinct position reached in every game, start position included."""
    stats = stats if stats is not None else HarvestStats()
    games = read_pgn_games(source, stats) if isinstance(source, (str, Path)) else source
    seen = set() if seen is None else seen
    for rec in games:
        try:
            positions = rec.positions()
        except NotationError as exc:
            stats.skipped_games += 1
            log.warning("skipping game with an illegal move: %s", exc)
            continue
        stats.games += 1
        for pos in positions:
            k = pos.key()
            if k in seen:
                stats.duplicates += 1
                continue
            seen.add(k)
            stats.positions += 1
            yield pos, pos.fullmove_number


def self_play_endgames(
    engine: Engine,
    n_games: int,
    limits: SearchLimits,
    seed: int = 0,
    min_fullmove: int = 40,
    move_cap: int = 512,
    opening_plies: int = 8,
) -> Iterator[tuple[Position, int]]:
    """Engine-vs-itself games; yields positions past move `min_fullmove`.

    The first `opening_plies` plies of each game are random legal moves drawn
    from the game's seed, so a deterministic engine still yields distinct games.
    """
    seen: set = set()
    for g in range(n_games):
        rng = random.Random(derive_seed(seed, "selfplay", g))
        pos = STARTING_POSITION
        reps = RepetitionCounter([pos])
        try:
            for ply in range(move_cap):
                st = status(pos)
                if st.is_over or reps.count(pos) >= 3:
                    break
                if ply < opening_plies:
                    move = rng.choice(legal_moves(pos))
                else:
                    move = engine.best_move(pos, limits).best_move
                pos = apply_unchecked(pos, move)
                reps.push(pos)
                if pos.fullmove_number > min_fullmove and pos.key() not in seen:
                    seen.add(pos.key())
                    yield pos, pos.fullmove_number
        except EngineError as exc:
            log.warning("self-play game %d aborted: %s", g, exc)


# --- labelling -------------------------------------------------------------------


@dataclass(frozen=True)
class LabelPreset:
    name: str
    depth_range: tuple[int, int]
    movetime_ms: Optional[int]


TRAIN_SHORT = LabelPreset("train_short", (12, 50), 2000)
TRAIN_LONG = LabelPreset("train_long", (50, 200), 2000)
EVAL_LABEL = LabelPreset("eval_label", (1, 1), 100)
PRESETS = {p.name: p for p in (TRAIN_SHORT, TRAIN_LONG, EVAL_LABEL)}


def fixed_depth(depth: int) -> LabelPreset:
    """Depth-only preset: no wall-clock cap, so labels are reproducible."""
    return LabelPreset(f"depth{depth}", (depth, depth), None)


@dataclass
class LabelStats:
    labeled: int = 0
    skipped_terminal: int = 0
    engine_errors: int = 0


def label_best_moves(
    positions: Iterable[Union[Position, tuple[Position, int]]],
    engine: Engine,
    preset: LabelPreset = TRAIN_SHORT,
    round_class: str = SHORT,
    source: str = CORPUS,
    seed: int = 0,
    stats: Optional[LabelStats] = None,
) -> Iterator[DatasetRecord]:
    """Ask the engine for the best move of each position.

    Each position's depth is drawn uniformly from the preset's range using a
    seed derived from the position itself, so labels do not depend on order.
    The movetime cap (if any) stops the search first when it triggers first.
    """
    stats = stats if stats is not None else LabelStats()
    lo, hi = preset.depth_range
    for item in positions:
        pos = item[0] if isinstance(item, tuple) else item
        if not legal_moves(pos):
            stats.skipped_terminal += 1
            continue
        fen = render_fen(pos)
        depth = lo if lo == hi else random.Random(derive_seed(seed, position_key(pos))).randint(lo, hi)
        try:
            reply = engine.best_move(pos, SearchLimits(depth=depth, movetime_ms=preset.movetime_ms))
        except EngineError as exc:
            stats.engine_errors += 1
            log.warning("labelling failed for %s: %s", fen, exc)
            continue
        stats.labeled += 1
        yield DatasetRecord(
            fen=fen,
            best_move=reply.best_move,
            search_depth=depth,
            movetime_ms=preset.movetime_ms,
            engine_eval=reply.score,
            round_class=round_class,
            source=source,
        )


# --- evaluation split -----------------------------------------------------------------


@dataclass(frozen=True)
class Bucket:
    name: str
    lo: int  # inclusive fullmove number
    hi: float  # exclusive
    fraction: float

    def contains(self, fullmove: int) -> bool:
        return self.lo <= fullmove < self.hi


DEFAULT_BUCKETS = (
    Bucket("1-10", 1, 10, 0.10),
    Bucket("10-20", 10, 20, 0.30),
    Bucket("20-40", 20, 40, 0.50),
    Bucket("40+", 40, math.inf, 0.10),
)


def parse_buckets(text: str) -> tuple[Bucket, ...]:
    """'1-10:0.1,10-20:0.3,20-40:0.5,40-:0.1' (half-open fullmove ranges)."""
    out = []
    for part in text.split(","):
        rng, _, frac = part.partition(":")
        lo, _, hi = rng.partition("-")
        if not frac or not lo:
            raise ValueError(f"bad bucket {part!r}; expected LO-HI:FRACTION")
        out.append(Bucket(rng if hi else f"{lo}+", int(lo), float(hi) if hi else math.inf, float(frac)))
    if abs(sum(b.fraction for b in out) - 1.0) > 1e-9:
        raise ValueError("bucket fractions must sum to 1")
    return tuple(out)


@dataclass
class SplitManifest:
    train_ids: set[str]
    eval_ids: set[str]
    distribution: dict[str, int]
    targets: dict[str, int] = field(default_factory=dict)
    buckets: tuple[Bucket, ...] = DEFAULT_BUCKETS
    seed: int = 0
    engine_build: Optional[str] = None

    def fractions(self) -> dict[str, float]:
        n = sum(self.distribution.values())
        return {k: (v / n if n else 0.0) for k, v in self.distribution.items()}

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "engine_build": self.engine_build,
            "buckets": [
                {"name": b.name, "lo": b.lo, "hi": None if b.hi == math.inf else b.hi, "fraction": b.fraction}
                for b in self.buckets
            ],
            "targets": self.targets,
            "distribution": self.distribution,
            "eval_ids": sorted(self.eval_ids),
            "train_ids": sorted(self.train_ids),
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SplitManifest":
        doc = json.loads(text)
        buckets = tuple(
            Bucket(b["name"], b["lo"], math.inf if b["hi"] is None else b["hi"], b["fraction"])
            for b in doc["buckets"]
        )
        return cls(
            train_ids=set(doc["train_ids"]),
            eval_ids=set(doc["eval_ids"]),
            distribution=doc["distribution"],
            targets=doc.get("targets", {}),
            buckets=buckets,
            seed=doc["seed"],
            engine_build=doc.get("engine_build"),
        )


def _allocate(total: int, buckets: Sequence[Bucket]) -> dict[str, int]:
    """Largest-remainder rounding of total * fraction per bucket."""
    raw = [(b.name, total * b.fraction) for b in buckets]
    counts = {name: int(math.floor(x)) for name, x in raw}
    leftover = total - sum(counts.values())
    for name, x in sorted(raw, key=lambda r: (-(r[1] - math.floor(r[1])), r[0]))[:leftover]:
        counts[name] += 1
    return counts


def make_split(
    records: Iterable[DatasetRecord],
    eval_size: int,
    buckets: Sequence[Bucket] = DEFAULT_BUCKETS,
    seed: int = 0,
    engine_build: Optional[str] = None,
) -> SplitManifest:
    """Sample an evaluation set hitting the bucket targets; everything else trains."""
    by_bucket: dict[str, list[str]] = {b.name: [] for b in buckets}
    keys: set[str] = set()
    for rec in records:
        if rec.key in keys:
            continue
        keys.add(rec.key)
        for b in buckets:
            if b.contains(rec.fullmove_number):
                by_bucket[b.name].append(rec.key)
                break
    targets = _allocate(eval_size, buckets)
    deficits = {n: targets[n] - len(by_bucket[n]) for n in targets if targets[n] > len(by_bucket[n])}
    if deficits:
        raise SplitShortfall(deficits)
    rng = random.Random(seed)
    eval_ids: set[str] = set()
    for b in buckets:
        eval_ids.update(rng.sample(sorted(by_bucket[b.name]), targets[b.name]))
    return SplitManifest(
        train_ids=keys - eval_ids,
        eval_ids=eval_ids,
        distribution={b.name: targets[b.name] for b in buckets},
        targets=targets,
        buckets=tuple(buckets),
        seed=seed,
        engine_build=engine_build,
    )


def apply_split(
    records: Iterable[DatasetRecord], manifest: SplitManifest
) -> tuple[list[DatasetRecord], list[DatasetRecord]]:
    train, evals = [], []
    for rec in records:
        if rec.key in manifest.eval_ids:
            evals.append(rec)
        elif rec.key in manifest.train_ids:
            train.append(rec)
    return train, evals

