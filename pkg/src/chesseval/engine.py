"""UCI engine client: drive Stockfish (or any UCI engine) over a subprocess."""

from __future__ import annotations

import logging
import os
import queue
import shlex
import subprocess
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .notation import render_fen
from .rules import Move, Position, legal_moves

log = logging.getLogger(__name__)

ENGINE_ENV = "CHESSEVAL_ENGINE"


def default_engine_path() -> str:
    return os.environ.get(ENGINE_ENV, "stockfish")


class EngineError(RuntimeError):
    pass


class EngineStartupError(EngineError):
    def __init__(self, message: str, stderr: str = ""):
        self.stderr = stderr
        super().__init__(message + (f"\nengine stderr:\n{stderr}" if stderr else ""))


@dataclass(frozen=True)
class SearchLimits:
    depth: Optional[int] = None
    movetime_ms: Optional[int] = None

    def __post_init__(self):
        if self.depth is None and self.movetime_ms is None:
            raise ValueError("SearchLimits needs a depth or a movetime")
        if self.depth is not None and self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.movetime_ms is not None and self.movetime_ms < 1:
            raise ValueError(f"movetime must be >= 1 ms, got {self.movetime_ms}")

    def go_command(self) -> str:
        parts = ["go"]
        if self.depth is not None:
            parts += ["depth", str(self.depth)]
        if self.movetime_ms is not None:
            parts += ["movetime", str(self.movetime_ms)]
        return " ".join(parts)


# two-second searches used for training labels; depth 1 / 0.1 s for the eval set
TWO_SECOND_SEARCH = SearchLimits(movetime_ms=2000)
EVAL_LABEL = SearchLimits(depth=1, movetime_ms=100)


@dataclass(frozen=True)
class EngineConfig:
    executable_path: str = field(default_factory=default_engine_path)
    skill_level: Optional[int] = None
    threads: int = 1
    hash_mb: int = 16
    extra_options: tuple[tuple[str, str], ...] = ()
    new_game_per_query: bool = True
    handshake_timeout: float = 10.0
    grace_ms: int = 1000
    depth_timeout: float = 300.0

    def __post_init__(self):
        if self.skill_level is not None and not 0 <= self.skill_level <= 20:
            raise ValueError(f"skill level must be in 0..20, got {self.skill_level}")
        if self.threads < 1:
            raise ValueError("threads must be positive")
        if self.hash_mb < 1:
            raise ValueError("hash_mb must be positive")

    def options(self) -> list[tuple[str, str]]:
        opts = [("Threads", str(self.threads)), ("Hash", str(self.hash_mb))]
        if self.skill_level is not None:
            opts.append(("Skill Level", str(self.skill_level)))
        return opts + [(str(n), str(v)) for n, v in self.extra_options]

    def echo(self) -> dict:
        return {
            "executable": self.executable_path,
            "skill_level": self.skill_level,
            "threads": self.threads,
            "hash_mb": self.hash_mb,
            "extra_options": [list(o) for o in self.extra_options],
            "new_game_per_query": self.new_game_per_query,
        }


@dataclass(frozen=True)
class Score:
    """Engine evaluation from the side to move: centipawns or mate-in-N."""

    cp: Optional[int] = None
    mate: Optional[int] = None

    @property
    def win_rate(self) -> float:
        if self.mate is not None:
            return 1.0 if self.mate > 0 else 0.0
        return 1.0 / (1.0 + 10.0 ** (-(self.cp or 0) / 400.0))

    def as_dict(self) -> dict:
        return {"cp": self.cp} if self.mate is None else {"mate": self.mate}

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> Optional["Score"]:
        if not d:
            return None
        return cls(cp=d.get("cp"), mate=d.get("mate"))


@dataclass(frozen=True)
class EngineReply:
    best_move: Move
    score: Optional[Score] = None
    depth: Optional[int] = None

    @property
    def win_rate(self) -> Optional[float]:
        return None if self.score is None else self.score.win_rate


def parse_info_score(line: str) -> Optional[tuple[Score, Optional[int]]]:
    """Extract (score, depth) from a UCI 'info' line, if it carries a score."""
    tokens = line.split()
    if not tokens or tokens[0] != "info" or "score" not in tokens:
        return None
    if "multipv" in tokens and tokens[tokens.index("multipv") + 1] != "1":
        return None
    i = tokens.index("score")
    try:
        kind, value = tokens[i + 1], int(tokens[i + 2])
    except (IndexError, ValueError):
        return None
    depth = None
    if "depth" in tokens:
        try:
            depth = int(tokens[tokens.index("depth") + 1])
        except (IndexError, ValueError):
            pass
    if kind == "cp":
        return Score(cp=value), depth
    if kind == "mate":
        return Score(mate=value), depth
    return None


_EOF = object()


class Engine:
    """One running engine process.  Single owner; never shared between threads."""

    def __init__(self, cfg: EngineConfig):
        self.cfg = cfg
        self.name = "unknown"
        self.options: dict[str, str] = {}
        self._closed = False
        self._stderr: deque[str] = deque(maxlen=200)
        self._lines: "queue.Queue[object]" = queue.Queue()
        path = cfg.executable_path
        argv = [path] if os.path.exists(path) else shlex.split(path)
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise EngineStartupError(f"cannot start engine {path!r}: {exc}") from exc
        threading.Thread(target=self._pump_stdout, daemon=True).start()
        threading.Thread(target=self._pump_stderr, daemon=True).start()
        try:
            self._handshake()
        except EngineError as exc:
            self.shutdown()
            raise EngineStartupError(str(exc), self.stderr_text()) from None

    # -- plumbing

    def _pump_stdout(self) -> None:
        for line in self._proc.stdout:
            self._lines.put(line.rstrip("\r\n"))
        self._lines.put(_EOF)

    def _pump_stderr(self) -> None:
        for line in self._proc.stderr:
            self._stderr.append(line.rstrip("\n"))

    def stderr_text(self) -> str:
        return "\n".join(self._stderr)

    def _send(self, command: str) -> None:
        if self._closed:
            raise EngineError("engine handle is closed")
        log.debug("> %s", command)
        try:
            self._proc.stdin.write(command + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError, ValueError) as exc:
            raise EngineError(f"engine process is gone: {exc}") from exc

    def _readline(self, deadline: float) -> str:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise TimeoutError
        try:
            line = self._lines.get(timeout=remaining)
        except queue.Empty:
            raise TimeoutError from None
        if line is _EOF:
            raise EngineError(f"engine process exited (code {self._proc.poll()})")
        log.debug("< %s", line)
        return line  # type: ignore[return-value]

    def _wait_for(self, token: str, timeout: float) -> list[str]:
        deadline = time.monotonic() + timeout
        seen = []
        while True:
            try:
                line = self._readline(deadline)
            except TimeoutError:
                raise EngineError(f"timed out after {timeout:g}s waiting for {token!r}") from None
            seen.append(line)
            if line.split()[:1] == [token]:
                return seen

    def _handshake(self) -> None:
        self._send("uci")
        for line in self._wait_for("uciok", self.cfg.handshake_timeout):
            if line.startswith("id name "):
                self.name = line[len("id name ") :].strip()
            elif line.startswith("option name "):
                rest = line[len("option name ") :]
                name = rest.split(" type ")[0].strip()
                self.options[name.lower()] = name
        for name, value in self.cfg.options():
            if name.lower() not in self.options:
                if name == "Threads" and value == "1":
                    continue  # single-threaded builds omit the option
                raise EngineError(f"engine does not support option {name!r}")
            self._send(f"setoption name {self.options[name.lower()]} value {value}")
        self.ping()

    def ping(self) -> None:
        self._send("isready")
        self._wait_for("readyok", self.cfg.handshake_timeout)

    # -- queries

    def best_move(self, pos: Position, limits: SearchLimits) -> EngineReply:
        legal = legal_moves(pos)
        if not legal:
            raise ValueError("best_move called on a position with no legal moves")
        if self.cfg.new_game_per_query:
            self._send("ucinewgame")
            self.ping()
        self._send(f"position fen {render_fen(pos)}")
        self._send(limits.go_command())
        if limits.movetime_ms is not None:
            timeout = (limits.movetime_ms + self.cfg.grace_ms) / 1000.0
        else:
            timeout = self.cfg.depth_timeout
        deadline = time.monotonic() + timeout
        score: Optional[Score] = None
        depth: Optional[int] = None
        stopped = False
        while True:
            try:
                line = self._readline(deadline)
            except TimeoutError:
                if stopped:
                    raise EngineError("engine did not answer 'stop'") from None
                self._send("stop")
                stopped = True
                deadline = time.monotonic() + self.cfg.grace_ms / 1000.0
                continue
            if line.startswith("info"):
                parsed = parse_info_score(line)
                if parsed:
                    score, depth = parsed
            elif line.startswith("bestmove"):
                break
        if stopped:
            raise EngineError(f"search exceeded {timeout:g}s")
        parts = line.split()
        if len(parts) < 2 or parts[1] in ("(none)", "0000"):
            raise EngineError(f"engine returned no move: {line!r}")
        try:
            move = Move.from_uci(parts[1])
        except ValueError:
            raise EngineError(f"unparseable engine move {parts[1]!r}") from None
        if move not in legal:
            raise EngineError(f"engine replied with illegal move {parts[1]} in {render_fen(pos)}")
        return EngineReply(move, score, depth)

    @property
    def alive(self) -> bool:
        return not self._closed and self._proc.poll() is None

    def shutdown(self) -> None:
        if self._closed:
            return
        try:
            self._send("quit")
        except EngineError:
            pass
        self._closed = True
        try:
            self._proc.wait(timeout=2)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()
        try:
            self._proc.stdin.close()
        except OSError:
            pass

    @property
    def pid(self) -> int:
        return self._proc.pid

    def __enter__(self) -> "Engine":
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()


def spawn(cfg: EngineConfig) -> Engine:
    return Engine(cfg)


def best_move(handle: Engine, pos: Position, limits: SearchLimits) -> EngineReply:
    return handle.best_move(pos, limits)


def shutdown(handle: Engine) -> None:
    handle.shutdown()
