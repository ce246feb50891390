"""Elo arithmetic and Stockfish skill-level conversion."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

ELO_FLOOR = 1320.0
ELO_SPAN = 1870.0
# cubic in normalized Elo e -> skill level, highest power first
SKILL_COEFFS = (37.247, -40.852, 22.294, -0.311)
SKILL_MIN = -0.311
SKILL_MAX = sum(SKILL_COEFFS)  # value at e = 1

# published Elo bands for the lowest skill levels
SKILL_BANDS = {0: (1350.0, 1440.0), 1: (1450.0, 1560.0), 2: (1570.0, 1720.0)}

VALID_RESULTS = (0.0, 0.5, 1.0)


class RatingDomainError(ValueError):
    pass


def expected_score(player_elo: float, opponent_elo: float) -> float:
    return 1.0 / (1.0 + 10.0 ** ((opponent_elo - player_elo) / 400.0))


@dataclass(frozen=True)
class RatingUpdate:
    elo_old: float
    elo_new: float
    k: float
    actual: float
    expected: float
    player_elo: float
    opponent_elo: float

    @property
    def delta(self) -> float:
        return self.elo_new - self.elo_old


def update(elo_old: float, actual: float, opponent_elo: float, k: float) -> RatingUpdate:
    if actual not in VALID_RESULTS:
        raise ValueError(f"game result must be 0, 0.5 or 1, got {actual!r}")
    if not k > 0:
        raise ValueError(f"K must be positive, got {k!r}")
    exp = expected_score(elo_old, opponent_elo)
    return RatingUpdate(
        elo_old=elo_old,
        elo_new=elo_old + (actual - exp) * k,
        k=k,
        actual=actual,
        expected=exp,
        player_elo=elo_old,
        opponent_elo=opponent_elo,
    )


@dataclass(frozen=True)
class KSchedule:
    """K=low below `threshold` Elo, K=high at or above it."""

    low: float = 20.0
    high: float = 10.0
    threshold: float = 2000.0

    def __post_init__(self):
        if not (self.low > 0 and self.high > 0):
            raise ValueError("K values must be positive")

    def __call__(self, elo: float) -> float:
        return self.low if elo < self.threshold else self.high

    @classmethod
    def parse(cls, text: str) -> "KSchedule":
        """'20/2000/10' (low/threshold/high) or a single constant such as '16'."""
        parts = text.split("/")
        try:
            if len(parts) == 1:
                k = float(parts[0])
                return cls(k, k, math.inf)
            if len(parts) == 3:
                return cls(float(parts[0]), float(parts[2]), float(parts[1]))
        except ValueError:
            pass
        raise ValueError(f"bad K schedule {text!r}; use LOW/THRESHOLD/HIGH or a constant")

    def describe(self) -> str:
        if self.low == self.high:
            return f"{self.low:g}"
        return f"{self.low:g}/{self.threshold:g}/{self.high:g}"


# --- skill level <-> Elo -------------------------------------------------------------------


@dataclass(frozen=True)
class SkillLevel:
    sk: float
    e: float


def _skill_poly(e: float) -> float:
    a, b, c, d = SKILL_COEFFS
    return ((a * e + b) * e + c) * e + d


def skill_from_elo(elo: float) -> SkillLevel:
    if not ELO_FLOOR <= elo <= ELO_FLOOR + ELO_SPAN:
        raise RatingDomainError(f"Elo {elo} outside [{ELO_FLOOR:g}, {ELO_FLOOR + ELO_SPAN:g}]")
    e = (elo - ELO_FLOOR) / ELO_SPAN
    return SkillLevel(_skill_poly(e), e)


def elo_from_skill(sk: float, tol: float = 1e-9) -> float:
    """Invert the skill cubic by bisection on e in [0, 1]; `tol` is in Elo."""
    if not SKILL_MIN <= sk <= SKILL_MAX:
        raise RatingDomainError(f"skill {sk} outside [{SKILL_MIN}, {SKILL_MAX:.3f}]")
    lo, hi = 0.0, 1.0
    while (hi - lo) * ELO_SPAN > tol:
        mid = 0.5 * (lo + hi)
        if _skill_poly(mid) < sk:
            lo = mid
        else:
            hi = mid
    return ELO_FLOOR + 0.5 * (lo + hi) * ELO_SPAN


def _elo_at_skill(sk: float) -> float:
    # skill levels past the cubic's range sit at the top of the Elo scale
    return ELO_FLOOR + ELO_SPAN if sk > SKILL_MAX else elo_from_skill(sk)


def opponent_elo(skill: int) -> float:
    """Point Elo for an engine skill setting: midpoint of the cubic at skill and
    skill+1, clamped into the published band for skills 0-2."""
    if not 0 <= skill <= 20:
        raise RatingDomainError(f"skill level {skill} outside 0..20")
    mid = 0.5 * (_elo_at_skill(skill) + _elo_at_skill(skill + 1))
    band = SKILL_BANDS.get(skill)
    if band is not None:
        mid = min(max(mid, band[0]), band[1])
    return mid


def band_midpoint(skill: int) -> float:
    """Centre of the published band, or opponent_elo outside the table."""
    band = SKILL_BANDS.get(skill)
    return 0.5 * (band[0] + band[1]) if band else opponent_elo(skill)


# --- sequential estimation ---------------------------------------------------------------------


@dataclass(frozen=True)
class RatingEstimate:
    elo: float
    uncertainty: float
    interval: tuple[float, float]
    mean_tail: float
    games: int
    trajectory: tuple[float, ...] = ()

    def as_dict(self) -> dict:
        return {
            "elo": self.elo,
            "uncertainty": self.uncertainty,
            "interval": list(self.interval),
            "mean_tail": self.mean_tail,
            "games": self.games,
        }


def fold(results: Sequence[tuple[float, float]], k_schedule: KSchedule, initial_elo: float) -> list[float]:
    """Elo after each game when `update` is folded over `results` in order."""
    elo = initial_elo
    out = []
    for actual, opp in results:
        elo = update(elo, actual, opp, k_schedule(elo)).elo_new
        out.append(elo)
    return out


def estimate_rating(
    results: Sequence[tuple[float, float]],
    k_schedule: Optional[KSchedule] = None,
    initial_elo: float = 1500.0,
    bootstrap: int = 1000,
    seed: int = 0,
) -> RatingEstimate:
    """Sequential Elo estimate over (result, opponent_elo) pairs.

    The point estimate is the final Elo of the fold; the uncertainty is the
    half-width of the central 95% interval of final Elos over bootstrap
    resamples.  mean_tail averages the trajectory over the second half.
    """
    if not results:
        raise ValueError("estimate_rating needs at least one result")
    ks = k_schedule or KSchedule()
    traj = fold(results, ks, initial_elo)
    tail = traj[len(traj) // 2 :]
    rng = np.random.default_rng(seed)
    n = len(results)
    finals = np.empty(bootstrap)
    for b in range(bootstrap):
        idx = rng.integers(0, n, size=n)
        finals[b] = fold([results[i] for i in idx], ks, initial_elo)[-1]
    lo, hi = (float(x) for x in np.percentile(finals, [2.5, 97.5])) if bootstrap else (traj[-1],) * 2
    return RatingEstimate(
        elo=traj[-1],
        uncertainty=(hi - lo) / 2.0,
        interval=(lo, hi),
        mean_tail=sum(tail) / len(tail),
        games=n,
        trajectory=tuple(traj),
    )


def performance_rating(score: float, opponent: float) -> float:
    """Closed-form rating at which expected_score equals `score`."""
    if not 0.0 < score < 1.0:
        raise RatingDomainError("performance rating undefined for a 0% or 100% score")
    return opponent + 400.0 * math.log10(score / (1.0 - score))
