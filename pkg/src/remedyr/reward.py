"""Verifiable shaped reward for pairwise translation verdicts.

The reward is deterministic: a binary ranking term (1 iff the parsed scores
order the candidates the same way the human scores do) gated onto a Huber
calibration term that discounts miscalibrated magnitudes. A wrong ranking,
a predicted tie, or an unparseable output always earns exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import PreferencePair
from .verdict import ParsedVerdict, VerdictStatus


@dataclass(frozen=True)
class RewardConfig:
    c: float = 5.0                 # Huber threshold
    beta: float = 0.5              # shaping strength
    clamp_shaping: bool = True
    genrm_coeff: float | None = None

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not (0.0 <= self.beta <= 1.0):
            raise ValueError(f"beta must be in [0,1], got {self.beta}")
        if self.genrm_coeff is not None and self.genrm_coeff < 0:
            raise ValueError(f"genrm_coeff must be non-negative, got {self.genrm_coeff}")


@dataclass(frozen=True)
class ShapedReward:
    r_rank: int
    e_a: float
    e_b: float
    rho_a: float
    rho_b: float
    psi: float
    r: float


def ranking_reward(verdict: ParsedVerdict, pair: PreferencePair) -> int:
    """1 iff the parsed scores reproduce the human ordering; 0 otherwise.

    Parse failures and predicted ties score 0; the reward never raises.
    """
    if verdict.status is not VerdictStatus.OK_PAIRWISE:
        return 0
    s_a, s_b = verdict.score_a, verdict.score_b
    if s_a == s_b:
        return 0
    return 1 if (s_a > s_b) == (pair.g_a > pair.g_b) else 0


def huber_penalty(e: float, c: float) -> float:
    """Quadratic within |e| <= c, linear beyond; continuous at the joint."""
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    abs_e = abs(e)
    if abs_e <= c:
        return (e * e) / (2.0 * c)
    return abs_e - c / 2.0


def calibration_term(e_a: float, e_b: float, c: float) -> float:
    """Average normalized Huber penalty of the two per-candidate errors."""
    return (huber_penalty(e_a, c) / c + huber_penalty(e_b, c) / c) / 2.0


def shaped_reward(
    verdict: ParsedVerdict,
    pair: PreferencePair,
    config: RewardConfig = RewardConfig(),
) -> ShapedReward:
    """Compose ranking and calibration into the final reward.

    Shaping applies only when the ranking is correct; otherwise the reward is
    zero regardless of how close the predicted scores are.
    """
    r_rank = ranking_reward(verdict, pair)
    if verdict.status is VerdictStatus.OK_PAIRWISE:
        e_a = verdict.score_a - pair.g_a
        e_b = verdict.score_b - pair.g_b
        rho_a = huber_penalty(e_a, config.c)
        rho_b = huber_penalty(e_b, config.c)
        psi = (rho_a / config.c + rho_b / config.c) / 2.0
    else:
        e_a = e_b = rho_a = rho_b = psi = 0.0
    if r_rank == 0:
        r = 0.0
    else:
        factor = 1.0 - config.beta * psi
        if config.clamp_shaping:
            factor = max(0.0, factor)
        r = float(r_rank) * factor
    return ShapedReward(r_rank=r_rank, e_a=e_a, e_b=e_b, rho_a=rho_a, rho_b=rho_b, psi=psi, r=r)


def genrm_adjust(base: ShapedReward, judge_score: float, config: RewardConfig) -> float:
    """Subtract a scaled explanation-quality penalty; identity when disabled."""
    if config.genrm_coeff is None:
        return base.r
    if not (0.0 <= judge_score <= 100.0):
        raise ValueError(f"judge_score {judge_score} outside [0,100]")
    return base.r - config.genrm_coeff * (1.0 - judge_score / 100.0)


def reward_to_record(pair_id: str, sr: ShapedReward) -> dict:
    return {
        "id": pair_id,
        "r_rank": sr.r_rank,
        "e_a": sr.e_a,
        "e_b": sr.e_b,
        "rho_a": sr.rho_a,
        "rho_b": sr.rho_b,
        "psi": sr.psi,
        "r": sr.r,
    }
