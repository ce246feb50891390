"""Evaluation quantities and reports."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from . import __version__
from .arena import LadderRung, MatchResult
from .dataset import DatasetRecord
from .notation import GameRecord, parse_fen
from .policy import Legality, Policy, derive_seed, propose
from .rules import WHITE, Move, legal_moves


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class EvalItem:
    fen: str
    reference_best: Move
    candidates: Optional[tuple[tuple[Move, float], ...]] = None

    def __post_init__(self):
        moves = legal_moves(parse_fen(self.fen))
        if not moves:
            raise MetricsError(f"evaluation position has no legal moves: {self.fen}")
        if self.reference_best not in moves:
            raise MetricsError(f"reference move {self.reference_best.uci()} illegal in {self.fen}")
        for m, _ in self.candidates or ():
            if m not in moves:
                raise MetricsError(f"candidate {m.uci()} illegal in {self.fen}")

    @classmethod
    def from_record(cls, rec: DatasetRecord) -> "EvalItem":
        return cls(rec.fen, rec.best_move)


def _nonempty(items: Sequence) -> None:
    if not items:
        raise MetricsError("need at least one evaluation item")


@dataclass(frozen=True)
class ItemOutcome:
    legal: bool
    best: bool


def item_outcomes(policy: Policy, items: Sequence[EvalItem], seed: int = 0) -> list[ItemOutcome]:
    """One proposal per item (seeded by item index), classified once."""
    _nonempty(items)
    out = []
    for i, it in enumerate(items):
        prop = propose(policy, parse_fen(it.fen), derive_seed(seed, "item", i))
        out.append(ItemOutcome(prop.legality is Legality.LEGAL, prop.parsed == it.reference_best))
    return out


def legal_move_accuracy(policy: Policy, items: Sequence[EvalItem], seed: int = 0) -> float:
    """Fraction of items whose single proposal is legal (no retries)."""
    outcomes = item_outcomes(policy, items, seed)
    return sum(o.legal for o in outcomes) / len(outcomes)


def best_move_accuracy(policy: Policy, items: Sequence[EvalItem], seed: int = 0) -> float:
    """Fraction of items whose single proposal equals the reference move."""
    outcomes = item_outcomes(policy, items, seed)
    return sum(o.best for o in outcomes) / len(outcomes)


def pass_at_1(records: Iterable[GameRecord], player: Optional[str] = None) -> Optional[float]:
    """Pooled fraction of move events whose first proposal was legal.

    `player` selects events by the White/Black tag name; None pools both
    sides.  Returns None when there are no move events.
    """
    first_legal = events = 0
    for rec in records:
        if rec.per_move_meta is None:
            raise MetricsError("game record carries no move telemetry")
        for tel in rec.per_move_meta:
            side = rec.tag("White") if tel.proposer is WHITE else rec.tag("Black")
            if player is not None and side != player:
                continue
            events += 1
            first_legal += tel.first_attempt_legal
    return first_legal / events if events else None


def win_rate(result: MatchResult, draw_weight: float = 0.5) -> tuple[float, float]:
    """(score, binomial standard error) from the first player's perspective."""
    n = result.wins + result.losses + result.draws
    if n < 1:
        raise MetricsError("win rate needs at least one completed game")
    p = (result.wins + draw_weight * result.draws) / n
    return p, math.sqrt(p * (1.0 - p) / n)


def move_score(choice: Move, item: EvalItem) -> float:
    """Min-max normalised candidate score of `choice`; 0 if it is not a candidate."""
    if not item.candidates:
        raise MetricsError("item has no scored candidates")
    scores = [s for _, s in item.candidates]
    lo, hi = min(scores), max(scores)
    if hi == lo:
        raise MetricsError("move score needs at least two distinct candidate scores")
    for m, s in item.candidates:
        if m == choice:
            return (s - lo) / (hi - lo)
    return 0.0


@dataclass
class MoveScoreSummary:
    mean: float
    stderr: float
    n: int
    off_menu: int


def general_policy_scores(
    policy: Policy, items: Sequence[EvalItem], max_attempts: int = 10, seed: int = 0
) -> MoveScoreSummary:
    """Average move score; a choice off the candidate list is resampled, and
    after `max_attempts` misses the item scores 0 and counts as off-menu."""
    _nonempty(items)
    scores, off_menu = [], 0
    for i, it in enumerate(items):
        pos = parse_fen(it.fen)
        menu = {m for m, _ in it.candidates or ()}
        choice = None
        for a in range(max_attempts):
            prop = propose(policy, pos, derive_seed(seed, "item", i, "attempt", a))
            if prop.parsed in menu:
                choice = prop.parsed
                break
        if choice is None:
            off_menu += 1
            scores.append(0.0)
        else:
            scores.append(move_score(choice, it))
    return summarize_scores(scores, off_menu)


def summarize_scores(scores: Sequence[float], off_menu: int = 0) -> MoveScoreSummary:
    n = len(scores)
    mean = sum(scores) / n
    var = sum((s - mean) ** 2 for s in scores) / (n - 1) if n > 1 else 0.0
    return MoveScoreSummary(mean, math.sqrt(var / n), n, off_menu)


# --- reports -----------------------------------------------------------------------------


@dataclass
class Report:
    kind: str
    config: dict
    metrics: dict = field(default_factory=dict)
    breakdown: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "tool": {"name": "chesseval", "version": __version__},
            "kind": self.kind,
            "config": self.config,
            "metrics": self.metrics,
            "breakdown": self.breakdown,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = [f"chesseval {__version__} -- {self.kind}"]
        for k, v in self.metrics.items():
            lines.append(f"  {k:<24} {_fmt(v)}")
        if self.kind == "ladder":
            lines.append(ladder_table(self.breakdown.get("rungs", [])))
        for n in self.notes:
            lines.append(f"  note: {n}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}"
    if v is None:
        return "n/a"
    return str(v)


def match_report(result: MatchResult, config: dict, draw_weight: float = 0.5) -> Report:
    score, stderr = win_rate(result, draw_weight)
    return Report(
        kind="match",
        config={**config, "draw_weight": draw_weight},
        metrics={
            "games": result.n_games,
            "wins": result.wins,
            "losses": result.losses,
            "draws": result.draws,
            "aborted": len(result.aborted),
            "win_rate": score,
            "win_rate_stderr": stderr,
            "pass_at_1_a": pass_at_1(result.games, result.a_name),
            "pass_at_1_b": pass_at_1(result.games, result.b_name) if result.b_name != result.a_name else None,
        },
        breakdown=result.as_dict(timing=False),
        notes=["win-rate uncertainty is the binomial standard error of the score"],
    )


def ladder_report(rungs: Sequence[LadderRung], config: dict) -> Report:
    rows = [r.as_dict() for r in rungs]
    return Report(
        kind="ladder",
        config=config,
        metrics={},
        breakdown={"rungs": rows},
        notes=[
            "Elo: final value of the sequential update; +/- is the half-width of a 95% bootstrap interval",
        ],
    )


def ladder_table(rows: Sequence[dict]) -> str:
    header = f"{'Skill':>5} {'Opp Elo':>8} {'Win':>4} {'Lose':>4} {'Draw':>4} {'Elo':>14}"
    out = [header, "-" * len(header)]
    for r in rows:
        if r.get("error"):
            out.append(f"{r['skill']:>5} {r['opponent_elo']:>8.0f}  error: {r['error']}")
            continue
        rating = r["rating"]
        elo = f"{rating['elo']:.0f} +/- {rating['uncertainty']:.0f}"
        out.append(
            f"{r['skill']:>5} {r['opponent_elo']:>8.0f} {r['wins']:>4} {r['losses']:>4} {r['draws']:>4} {elo:>14}"
        )
    return "\n".join(out)
