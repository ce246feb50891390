"""Play games and matches between policies under the sampling protocols."""

from __future__ import annotations

import logging
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Sequence

from .engine import Engine, EngineConfig, EngineError, SearchLimits, default_engine_path
from .notation import GameRecord, render_pgn
from .policy import (
    ELO_PROTOCOL,
    FALLBACK_LIMITS,
    LM_MATCH_PROTOCOL,
    EnginePolicy,
    Policy,
    PolicyError,
    SamplingConfig,
    derive_seed,
    fallback_move,
    retry_sample,
)
from .rating import KSchedule, RatingEstimate, band_midpoint, estimate_rating, opponent_elo
from .rules import (
    STARTING_POSITION,
    WHITE,
    Color,
    GameStatus,
    RepetitionCounter,
    StatusTag,
    apply_unchecked,
    legal_moves,
    status,
)

log = logging.getLogger(__name__)


class Protocol(str, Enum):
    ELO = "elo_protocol"
    LM_MATCH = "lm_match_protocol"

    @property
    def sampling(self) -> SamplingConfig:
        return ELO_PROTOCOL if self is Protocol.ELO else LM_MATCH_PROTOCOL


class ExhaustionRule(str, Enum):
    FORFEIT_LOSS = "forfeit_loss"
    RANDOM_LEGAL_CONTINUE = "random_legal_continue"


class GameAborted(RuntimeError):
    def __init__(self, ply: int, reason: str):
        self.ply = ply
        self.reason = reason
        super().__init__(f"game aborted at ply {ply}: {reason}")


class MatchError(RuntimeError):
    pass


@dataclass
class MoveTelemetry:
    ply: int
    proposer: Color
    attempts_used: int
    first_attempt_legal: bool
    fallback_source: Optional[str] = None
    adjudication: Optional[str] = None
    elapsed_ms: int = 0

    def as_dict(self, timing: bool = True) -> dict:
        d = {
            "ply": self.ply,
            "proposer": "white" if self.proposer is WHITE else "black",
            "attempts_used": self.attempts_used,
            "first_attempt_legal": self.first_attempt_legal,
            "fallback_source": self.fallback_source,
            "adjudication": self.adjudication,
        }
        if timing:
            d["elapsed_ms"] = self.elapsed_ms
        return d


@dataclass
class GameConfig:
    white_sampling: SamplingConfig = ELO_PROTOCOL
    black_sampling: SamplingConfig = ELO_PROTOCOL
    protocol: Protocol = Protocol.ELO
    exhaustion_rule: ExhaustionRule = ExhaustionRule.FORFEIT_LOSS
    fallback_engine: Optional[Engine] = None
    fallback_limits: SearchLimits = FALLBACK_LIMITS
    move_cap: int = 512
    seed: int = 0
    event: str = "chesseval match"
    round: str = "1"
    white_name: Optional[str] = None
    black_name: Optional[str] = None


def _adjudicate(pos, reps: RepetitionCounter) -> GameStatus:
    st = status(pos)
    if st.tag is StatusTag.ONGOING and reps.count(pos) >= 3:
        return GameStatus(StatusTag.DRAW_THREEFOLD)
    return st


def play_game(white: Policy, black: Policy, cfg: GameConfig) -> GameRecord:
    """Play one game from the standard start position.

    Raises GameAborted if a policy or engine fails at the transport level.
    """
    if cfg.protocol is Protocol.LM_MATCH and cfg.fallback_engine is None:
        raise ValueError("lm_match_protocol needs a fallback engine")
    pos = STARTING_POSITION
    reps = RepetitionCounter([pos])
    rec = GameRecord(
        tags=[
            ("Event", cfg.event),
            ("Site", "?"),
            ("Date", "????.??.??"),
            ("Round", cfg.round),
            ("White", cfg.white_name or white.name),
            ("Black", cfg.black_name or black.name),
            ("Result", "*"),
        ],
        per_move_meta=[],
    )
    termination = None
    result = None
    ply = 0
    while True:
        st = _adjudicate(pos, reps)
        if st.is_over:
            termination, result = st.tag.value, st.result
            break
        if ply >= cfg.move_cap:
            termination, result = StatusTag.DRAW_MOVE_CAP.value, "1/2-1/2"
            break
        ply += 1
        mover = pos.turn
        policy = white if mover is WHITE else black
        sampling = cfg.white_sampling if mover is WHITE else cfg.black_sampling
        sampling = replace(sampling, seed=derive_seed(cfg.seed, "ply", ply))
        t0 = time.perf_counter()
        try:
            outcome = retry_sample(policy, pos, sampling)
        except (PolicyError, EngineError) as exc:
            raise GameAborted(ply, str(exc)) from exc
        tel = MoveTelemetry(ply, mover, outcome.attempts_used, outcome.first_attempt_legal)
        move = outcome.move
        if move is None:
            if cfg.protocol is Protocol.LM_MATCH:
                move, source = fallback_move(
                    pos, cfg.fallback_engine, derive_seed(cfg.seed, "fallback", ply), cfg.fallback_limits
                )
                tel.fallback_source = source.value
            elif cfg.exhaustion_rule is ExhaustionRule.FORFEIT_LOSS:
                tel.adjudication = "forfeit"
                tel.elapsed_ms = round((time.perf_counter() - t0) * 1000)
                rec.per_move_meta.append(tel)
                termination = "forfeit"
                result = "0-1" if mover is WHITE else "1-0"
                break
            else:
                move = random.Random(derive_seed(cfg.seed, "continue", ply)).choice(legal_moves(pos))
                tel.adjudication = ExhaustionRule.RANDOM_LEGAL_CONTINUE.value
        tel.elapsed_ms = round((time.perf_counter() - t0) * 1000)
        rec.per_move_meta.append(tel)
        rec.moves.append(move)
        pos = apply_unchecked(pos, move)
        reps.push(pos)

    rec.result = result
    rec.set_tag("Result", result)
    rec.set_tag("Termination", termination)
    rec.set_tag("PlyCount", str(len(rec.moves)))
    rec.positions()  # replay through the rules before anyone persists the record
    return rec


# --- matches ---------------------------------------------------------------------------


@dataclass
class MatchConfig:
    protocol: Protocol = Protocol.ELO
    sampling_a: Optional[SamplingConfig] = None
    sampling_b: Optional[SamplingConfig] = None
    exhaustion_rule: ExhaustionRule = ExhaustionRule.FORFEIT_LOSS
    fallback_engine: Optional[EngineConfig] = None
    fallback_limits: SearchLimits = FALLBACK_LIMITS
    move_cap: int = 512
    seed: int = 0
    jobs: int = 1
    min_completion: float = 0.9
    event: str = "chesseval match"

    def echo(self) -> dict:
        return {
            "protocol": self.protocol.value,
            "sampling_a": (self.sampling_a or self.protocol.sampling).echo(),
            "sampling_b": (self.sampling_b or self.protocol.sampling).echo(),
            "exhaustion_rule": self.exhaustion_rule.value,
            "fallback_engine": self.fallback_engine.echo() if self.fallback_engine else None,
            "fallback_limits": {
                "depth": self.fallback_limits.depth,
                "movetime_ms": self.fallback_limits.movetime_ms,
            },
            "move_cap": self.move_cap,
            "seed": self.seed,
            "jobs": self.jobs,
            "color_alternation": "strict (a is white in even-indexed games)",
        }


@dataclass
class AbortedGame:
    index: int
    seed: int
    reason: str


@dataclass
class MatchResult:
    wins: int = 0
    losses: int = 0
    draws: int = 0
    games: list[GameRecord] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    protocol: Protocol = Protocol.ELO
    a_is_white: list[bool] = field(default_factory=list)
    aborted: list[AbortedGame] = field(default_factory=list)
    a_name: str = "a"
    b_name: str = "b"

    @property
    def n_games(self) -> int:
        return self.wins + self.losses + self.draws

    def scores(self) -> list[float]:
        """Per completed game score from a's perspective, in game order."""
        out = []
        for rec, a_white in zip(self.games, self.a_is_white):
            if rec.result == "1/2-1/2":
                out.append(0.5)
            elif rec.result in ("1-0", "0-1"):
                out.append(1.0 if (rec.result == "1-0") == a_white else 0.0)
        return out

    def pgn(self) -> str:
        return "\n".join(render_pgn(g) for g in self.games)

    def as_dict(self, timing: bool = False) -> dict:
        return {
            "a": self.a_name,
            "b": self.b_name,
            "protocol": self.protocol.value,
            "wins": self.wins,
            "losses": self.losses,
            "draws": self.draws,
            "aborted": [vars(a) for a in self.aborted],
            "games": [
                {
                    "seed": seed,
                    "a_is_white": a_white,
                    "result": rec.result,
                    "termination": rec.tag("Termination"),
                    "plies": len(rec.moves),
                    "telemetry": [t.as_dict(timing) for t in rec.per_move_meta or []],
                }
                for rec, seed, a_white in zip(self.games, self.seeds, self.a_is_white)
            ],
        }


def _tally(result: MatchResult, rec: GameRecord, a_white: bool) -> None:
    if rec.result == "1/2-1/2":
        result.draws += 1
    elif (rec.result == "1-0") == a_white:
        result.wins += 1
    else:
        result.losses += 1


def run_match(a: Policy, b: Policy, n_games: int, cfg: MatchConfig) -> MatchResult:
    """Play n_games between a and b with strictly alternating colours.

    Game i uses seed derive_seed(cfg.seed, "game", i); results are aggregated
    in game-index order regardless of worker scheduling.
    """
    if n_games < 1:
        raise ValueError("n_games must be >= 1")
    if cfg.protocol is Protocol.LM_MATCH and cfg.fallback_engine is None:
        raise ValueError("lm_match_protocol needs a fallback engine config")
    sa = cfg.sampling_a or cfg.protocol.sampling
    sb = cfg.sampling_b or cfg.protocol.sampling
    seeds = [derive_seed(cfg.seed, "game", i) for i in range(n_games)]

    def play(i: int, pa: Policy, pb: Policy, fb: Optional[Engine]):
        a_white = i % 2 == 0
        gcfg = GameConfig(
            white_sampling=sa if a_white else sb,
            black_sampling=sb if a_white else sa,
            protocol=cfg.protocol,
            exhaustion_rule=cfg.exhaustion_rule,
            fallback_engine=fb,
            fallback_limits=cfg.fallback_limits,
            move_cap=cfg.move_cap,
            seed=seeds[i],
            event=cfg.event,
            round=str(i + 1),
            white_name=a.name if a_white else b.name,
            black_name=b.name if a_white else a.name,
        )
        try:
            rec = play_game(pa if a_white else pb, pb if a_white else pa, gcfg)
        except GameAborted as exc:
            log.warning("game %d aborted: %s", i, exc)
            return i, a_white, None, str(exc)
        return i, a_white, rec, None

    def spawn_fallback() -> Optional[Engine]:
        return Engine(cfg.fallback_engine) if cfg.fallback_engine else None

    outcomes = []
    if cfg.jobs <= 1:
        fb = spawn_fallback()
        try:
            outcomes = [play(i, a, b, fb) for i in range(n_games)]
        finally:
            if fb:
                fb.shutdown()
    else:

        def worker(i: int):
            pa, pb = a.clone(), b.clone()
            fb = spawn_fallback()
            try:
                return play(i, pa, pb, fb)
            finally:
                if pa is not a:
                    pa.close()
                if pb is not b:
                    pb.close()
                if fb:
                    fb.shutdown()

        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(worker, range(n_games)))

    result = MatchResult(protocol=cfg.protocol, a_name=a.name, b_name=b.name)
    for i, a_white, rec, err in sorted(outcomes, key=lambda o: o[0]):
        if rec is None:
            result.aborted.append(AbortedGame(i, seeds[i], err))
            continue
        result.games.append(rec)
        result.seeds.append(seeds[i])
        result.a_is_white.append(a_white)
        _tally(result, rec, a_white)
    if result.n_games < cfg.min_completion * n_games:
        raise MatchError(
            f"only {result.n_games}/{n_games} games finished "
            f"({len(result.aborted)} aborted); need {cfg.min_completion:.0%}"
        )
    return result


# --- ladder --------------------------------------------------------------------------------


@dataclass
class LadderRung:
    skill: int
    opponent_elo: float
    initial_elo: float
    result: Optional[MatchResult]
    estimate: Optional[RatingEstimate]
    error: Optional[str] = None

    def as_dict(self) -> dict:
        r = self.result
        return {
            "skill": self.skill,
            "opponent_elo": self.opponent_elo,
            "initial_elo": self.initial_elo,
            "wins": r.wins if r else None,
            "losses": r.losses if r else None,
            "draws": r.draws if r else None,
            "aborted": len(r.aborted) if r else None,
            "rating": self.estimate.as_dict() if self.estimate else None,
            "error": self.error,
        }


def ladder(
    policy: Policy,
    skill_levels: Sequence[int],
    n_games_each: int,
    cfg: MatchConfig,
    engine_path: Optional[str] = None,
    engine_limits: SearchLimits = SearchLimits(movetime_ms=100),
    threads: int = 1,
    k_schedule: Optional[KSchedule] = None,
    opponent_factory: Optional[Callable[[int], Policy]] = None,
) -> list[LadderRung]:
    """Match `policy` against the engine at each skill level and rate it per rung."""
    rungs = []
    for skill in skill_levels:
        if not 0 <= skill <= 20:
            raise ValueError(f"skill level {skill} outside 0..20")
        opp_elo = opponent_elo(skill)
        initial = band_midpoint(skill)
        if opponent_factory is not None:
            opponent = opponent_factory(skill)
        else:
            opponent = EnginePolicy(
                EngineConfig(
                    executable_path=engine_path or default_engine_path(),
                    skill_level=skill,
                    threads=threads,
                ),
                engine_limits,
            )
        try:
            res = run_match(policy, opponent, n_games_each, replace(cfg, seed=derive_seed(cfg.seed, "skill", skill)))
        except (MatchError, EngineError) as exc:
            log.error("ladder rung skill %d failed: %s", skill, exc)
            rungs.append(LadderRung(skill, opp_elo, initial, None, None, str(exc)))
            continue
        finally:
            opponent.close()
        est = estimate_rating(
            [(s, opp_elo) for s in res.scores()], k_schedule, initial, seed=cfg.seed
        )
        rungs.append(LadderRung(skill, opp_elo, initial, res, est))
    return rungs
