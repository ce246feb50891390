"""Move-proposing policies and the sampling / fallback protocols around them.

A policy emits raw move text the way a language model would; the harness
classifies that text and decides what to do with it.
"""

from __future__ import annotations

import hashlib
import logging
import os
import queue
import random
import shlex
import subprocess
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from .engine import Engine, EngineConfig, EngineError, SearchLimits, default_engine_path
from .notation import (
    AmbiguousMoveError,
    MoveLegalityError,
    MoveSyntaxError,
    render_fen,
)
from .notation import parse_move_text
from .rules import Move, Position, apply_unchecked, legal_moves, material

log = logging.getLogger(__name__)

ILLEGAL_TOKEN = "zz99"


def derive_seed(*parts: object) -> int:
    """Stable 63-bit seed from any sequence of printable parts."""
    digest = hashlib.blake2b("\x1f".join(map(str, parts)).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


class PolicyError(RuntimeError):
    """The policy could not produce text at all (transport failure)."""


class Legality(str, Enum):
    LEGAL = "legal"
    ILLEGAL_SYNTAX = "illegal_syntax"
    ILLEGAL_MOVE = "illegal_move"


@dataclass(frozen=True)
class Proposal:
    raw_text: str
    parsed: Optional[Move]
    legality: Legality


def classify(text: str, pos: Position) -> Proposal:
    try:
        move = parse_move_text(text, pos)
    except MoveSyntaxError:
        return Proposal(text, None, Legality.ILLEGAL_SYNTAX)
    except (MoveLegalityError, AmbiguousMoveError):
        return Proposal(text, None, Legality.ILLEGAL_MOVE)
    return Proposal(text, move, Legality.LEGAL)


@dataclass(frozen=True)
class SamplingConfig:
    max_attempts: int = 1
    temperature: float = 1.0
    top_p: float = 1.0
    top_k: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be positive")

    def echo(self) -> dict:
        return {
            "max_attempts": self.max_attempts,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "top_k": self.top_k,
        }


PASS_AT_1 = SamplingConfig(max_attempts=1, temperature=1.0, top_p=1.0, top_k=50)
ELO_PROTOCOL = SamplingConfig(max_attempts=10, temperature=0.7, top_p=0.7, top_k=50)
LM_MATCH_PROTOCOL = SamplingConfig(max_attempts=50, temperature=0.7, top_p=0.7, top_k=50)


# --- policies ------------------------------------------------------------------


class Policy:
    """Base class.  Subclasses implement emit(); stateless ones need nothing else."""

    name = "policy"

    def emit(self, pos: Position, seed: int) -> str:
        raise NotImplementedError

    def clone(self) -> "Policy":
        return self

    def close(self) -> None:
        pass

    def spec(self) -> str:
        return self.name

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class RandomLegal(Policy):
    name = "random"

    def emit(self, pos: Position, seed: int) -> str:
        return random.Random(seed).choice(legal_moves(pos)).uci()


class GreedyMaterial(Policy):
    """Maximise material balance one ply ahead; ties go to the first move in order."""

    name = "greedy"

    def emit(self, pos: Position, seed: int) -> str:
        us, them = pos.turn, pos.turn.other
        best, best_gain = None, None
        for m in legal_moves(pos):
            after = apply_unchecked(pos, m)
            gain = material(after, us) - material(after, them)
            if best_gain is None or gain > best_gain:
                best, best_gain = m, gain
        return best.uci()


class EnginePolicy(Policy):
    """Stockfish as a policy.  The engine is spawned lazily and owned by this policy."""

    def __init__(self, cfg: EngineConfig, limits: SearchLimits = SearchLimits(movetime_ms=100)):
        self.cfg = cfg
        self.limits = limits
        self._engine: Optional[Engine] = None

    @property
    def name(self) -> str:  # type: ignore[override]
        skill = "" if self.cfg.skill_level is None else f" skill {self.cfg.skill_level}"
        return f"stockfish{skill}"

    @property
    def engine(self) -> Engine:
        if self._engine is None or not self._engine.alive:
            self._engine = Engine(self.cfg)
        return self._engine

    def emit(self, pos: Position, seed: int) -> str:
        try:
            return self.engine.best_move(pos, self.limits).best_move.uci()
        except EngineError as exc:
            raise PolicyError(f"engine policy failed: {exc}") from exc

    def clone(self) -> "EnginePolicy":
        return EnginePolicy(self.cfg, self.limits)

    def close(self) -> None:
        if self._engine is not None:
            self._engine.shutdown()
            self._engine = None

    def spec(self) -> str:
        parts = []
        if self.cfg.skill_level is not None:
            parts.append(f"skill={self.cfg.skill_level}")
        if self.limits.depth is not None:
            parts.append(f"depth={self.limits.depth}")
        if self.limits.movetime_ms is not None:
            parts.append(f"movetime={self.limits.movetime_ms}")
        return "engine" + (":" + ",".join(parts) if parts else "")


class Noisy(Policy):
    """With probability p emit an unparseable token, otherwise defer to `inner`."""

    def __init__(self, p: float, inner: Policy):
        if not 0 <= p <= 1:
            raise ValueError("noise probability must be in [0, 1]")
        self.p = p
        self.inner = inner

    @property
    def name(self) -> str:  # type: ignore[override]
        return f"noisy({self.p:g}, {self.inner.name})"

    def emit(self, pos: Position, seed: int) -> str:
        if random.Random(seed).random() < self.p:
            return ILLEGAL_TOKEN
        return self.inner.emit(pos, derive_seed(seed, "inner"))

    def clone(self) -> "Noisy":
        return Noisy(self.p, self.inner.clone())

    def close(self) -> None:
        self.inner.close()

    def spec(self) -> str:
        return f"noisy:p={self.p:g},inner={self.inner.spec()}"


class ExternalText(Policy):
    """Line protocol adapter for an external completion process.

    Each request is one line ``FEN: <fen>\tSEED: <seed>`` on the process's
    stdin; the reply is one line of move text on its stdout.  Sampling parameters are passed
    once, at launch, through CHESSEVAL_TEMPERATURE / _TOP_P / _TOP_K.
    """

    name = "extern"

    def __init__(self, command: str, sampling: SamplingConfig = PASS_AT_1, timeout: float = 60.0):
        self.command = command
        self.sampling = sampling
        self.timeout = timeout
        self._proc: Optional[subprocess.Popen] = None
        self._lines: "queue.Queue[Optional[str]]" = queue.Queue()

    def _start(self) -> subprocess.Popen:
        env = dict(os.environ)
        env.update(
            CHESSEVAL_TEMPERATURE=str(self.sampling.temperature),
            CHESSEVAL_TOP_P=str(self.sampling.top_p),
            CHESSEVAL_TOP_K=str(self.sampling.top_k),
        )
        try:
            proc = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
                env=env,
            )
        except OSError as exc:
            raise PolicyError(f"cannot start adapter {self.command!r}: {exc}") from exc

        lines = self._lines = queue.Queue()

        def pump():
            for line in proc.stdout:
                lines.put(line.rstrip("\r\n"))
            lines.put(None)

        threading.Thread(target=pump, daemon=True).start()
        return proc

    def emit(self, pos: Position, seed: int) -> str:
        if self._proc is None:
            self._proc = self._start()
        try:
            self._proc.stdin.write(f"FEN: {render_fen(pos)}\tSEED: {seed}\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError, ValueError) as exc:
            raise PolicyError(f"adapter write failed: {exc}") from exc
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise PolicyError(f"adapter gave no reply within {self.timeout:g}s") from None
        if line is None:
            raise PolicyError(f"adapter exited (code {self._proc.poll()})")
        return line.strip()

    def clone(self) -> "ExternalText":
        return ExternalText(self.command, self.sampling, self.timeout)

    def close(self) -> None:
        if self._proc is not None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=2)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()
            self._proc = None

    def spec(self) -> str:
        return f"extern:cmd={self.command}"


# --- protocols -----------------------------------------------------------------


def propose(policy: Policy, pos: Position, seed: int) -> Proposal:
    return classify(policy.emit(pos, seed), pos)


@dataclass(frozen=True)
class SampleOutcome:
    move: Optional[Move]
    attempts_used: int
    first_attempt_legal: bool
    proposals: tuple[Proposal, ...] = field(default_factory=tuple)


def retry_sample(policy: Policy, pos: Position, cfg: SamplingConfig) -> SampleOutcome:
    """Propose up to cfg.max_attempts times, stopping at the first legal move."""
    proposals = []
    for attempt in range(cfg.max_attempts):
        prop = propose(policy, pos, derive_seed(cfg.seed, "attempt", attempt))
        proposals.append(prop)
        if prop.legality is Legality.LEGAL:
            break
    last = proposals[-1]
    return SampleOutcome(
        move=last.parsed,
        attempts_used=len(proposals),
        first_attempt_legal=proposals[0].legality is Legality.LEGAL,
        proposals=tuple(proposals),
    )


class FallbackSource(str, Enum):
    ENGINE_BEST = "engine_best"
    RANDOM_LEGAL = "random_legal"


FALLBACK_LIMITS = SearchLimits(depth=10)


def fallback_move(
    pos: Position,
    engine: Engine,
    seed: int,
    limits: SearchLimits = FALLBACK_LIMITS,
) -> tuple[Move, FallbackSource]:
    """Fair coin between the engine's best move and a uniformly random legal move."""
    moves = legal_moves(pos)
    if not moves:
        raise ValueError("fallback_move needs a position with legal moves")
    rng = random.Random(seed)
    if rng.random() < 0.5:
        try:
            return engine.best_move(pos, limits).best_move, FallbackSource.ENGINE_BEST
        except EngineError as exc:
            log.warning("fallback engine failed, using a random legal move: %s", exc)
    return rng.choice(moves), FallbackSource.RANDOM_LEGAL


# --- policy spec mini-language ---------------------------------------------------------


def _kv(text: str) -> dict[str, str]:
    out = {}
    for part in filter(None, text.split(",")):
        if "=" not in part:
            raise ValueError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def policy_from_spec(
    spec: str,
    engine_path: Optional[str] = None,
    threads: int = 1,
    sampling: SamplingConfig = PASS_AT_1,
) -> Policy:
    """Build a policy from ``random``, ``greedy``, ``engine:skill=K[,depth=D][,movetime=T]``,
    ``noisy:p=X,inner=SPEC`` or ``extern:cmd=COMMAND``."""
    kind, _, args = spec.strip().partition(":")
    if kind == "random" and not args:
        return RandomLegal()
    if kind == "greedy" and not args:
        return GreedyMaterial()
    if kind == "engine":
        kv = _kv(args)
        unknown = set(kv) - {"skill", "depth", "movetime"}
        if unknown:
            raise ValueError(f"unknown engine policy keys: {sorted(unknown)}")
        depth = int(kv["depth"]) if "depth" in kv else None
        movetime = int(kv["movetime"]) if "movetime" in kv else None
        if depth is None and movetime is None:
            movetime = 100
        cfg = EngineConfig(
            executable_path=engine_path or default_engine_path(),
            skill_level=int(kv["skill"]) if "skill" in kv else None,
            threads=threads,
        )
        return EnginePolicy(cfg, SearchLimits(depth=depth, movetime_ms=movetime))
    if kind == "noisy":
        head, sep, inner = args.partition("inner=")
        if not sep:
            raise ValueError("noisy policy needs inner=SPEC")
        p = _kv(head.rstrip(","))
        if set(p) != {"p"}:
            raise ValueError("noisy policy takes p=X before inner=SPEC")
        return Noisy(float(p["p"]), policy_from_spec(inner, engine_path, threads, sampling))
    if kind == "extern":
        if not args.startswith("cmd="):
            raise ValueError("extern policy needs cmd=COMMAND")
        return ExternalText(args[len("cmd=") :], sampling)
    raise ValueError(f"unknown policy spec {spec!r}")


def with_seed(cfg: SamplingConfig, seed: int) -> SamplingConfig:
    return replace(cfg, seed=seed)

