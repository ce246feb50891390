import random
import shutil
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from chesseval.dataset import DatasetRecord  # noqa: E402
from chesseval.engine import default_engine_path  # noqa: E402
from chesseval.notation import render_fen  # noqa: E402
from chesseval.rules import STARTING_POSITION, apply_unchecked, legal_moves  # noqa: E402

DATA = Path(__file__).parent / "data"


def engine_available() -> bool:
    path = default_engine_path()
    return Path(path).exists() or shutil.which(path) is not None


requires_engine = pytest.mark.skipif(not engine_available(), reason="no UCI engine on PATH")


@pytest.fixture
def engine_path():
    if not engine_available():
        pytest.skip("no UCI engine on PATH")
    return default_engine_path()


@pytest.fixture(scope="session")
def reference_pgn() -> str:
    return (DATA / "reference_game.pgn").read_text(encoding="utf-8")


def random_walk(seed: int, max_plies: int = 120):
    """Positions along one random legal playout, start position included."""
    rng = random.Random(seed)
    pos = STARTING_POSITION
    out = [pos]
    for _ in range(max_plies):
        moves = legal_moves(pos)
        if not moves:
            break
        pos = apply_unchecked(pos, rng.choice(moves))
        out.append(pos)
    return out


def synthetic_records(n, seed=0):
    """Distinct legal positions with fullmove numbers spread over 1..80."""
    rng = random.Random(seed)
    seen, out = set(), []
    walk = 0
    while len(out) < n:
        for pos in random_walk(seed * 100_000 + walk, 200)[1:]:
            moves = legal_moves(pos)
            if not moves or pos.key() in seen:
                continue
            seen.add(pos.key())
            fields = render_fen(pos).split()
            fields[5] = str(rng.randint(1, 80))
            out.append(DatasetRecord(" ".join(fields), moves[0], 1, None))
            if len(out) == n:
                break
        walk += 1
    return out


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
