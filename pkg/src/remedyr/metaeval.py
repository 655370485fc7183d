"""Meta-evaluation statistics over system x segment score matrices.

Implements system-level pairwise accuracy, tie-calibrated segment-level
accuracy, soft pairwise accuracy via paired sign-flip permutation p-values,
the Perm-Both significance test between two metrics, and multi-pass score
aggregation. Missing cells are ignored, never imputed.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np


class MetaEvalError(ValueError):
    """Misaligned matrices or degenerate comparison sets."""


@dataclass(frozen=True)
class ScoreMatrix:
    systems: tuple[str, ...]
    segments: tuple[str, ...]
    values: np.ndarray  # (n_systems, n_segments), NaN for missing
    source_label: str = "metric"

    def __post_init__(self):
        if self.values.shape != (len(self.systems), len(self.segments)):
            raise MetaEvalError(
                f"grid shape {self.values.shape} does not match id lists "
                f"({len(self.systems)}, {len(self.segments)})"
            )

    @staticmethod
    def from_rows(
        systems: list[str],
        segments: list[str],
        rows: list[list[float | None]],
        source_label: str = "metric",
    ) -> "ScoreMatrix":
        grid = np.array(
            [[np.nan if v is None else float(v) for v in row] for row in rows], dtype=float
        )
        return ScoreMatrix(tuple(systems), tuple(segments), grid, source_label)


def _aligned(metric: ScoreMatrix, human: ScoreMatrix) -> None:
    if metric.systems != human.systems or metric.segments != human.segments:
        raise MetaEvalError("metric and human matrices are not aligned")


def system_pairwise_accuracy(metric: ScoreMatrix, human: ScoreMatrix) -> float:
    """Fraction of system pairs whose metric-mean ordering matches the human one.

    Per-system means are taken over segments where both matrices have that
    system's entry. Pairs with tied human means are skipped; metric ties
    count as incorrect.
    """
    _aligned(metric, human)
    if len(metric.systems) < 2:
        raise MetaEvalError("need at least 2 systems")
    both = ~np.isnan(metric.values) & ~np.isnan(human.values)
    m_means = np.array(
        [metric.values[i, both[i]].mean() if both[i].any() else np.nan
         for i in range(len(metric.systems))]
    )
    h_means = np.array(
        [human.values[i, both[i]].mean() if both[i].any() else np.nan
         for i in range(len(human.systems))]
    )
    correct = total = 0
    for i, j in itertools.combinations(range(len(metric.systems)), 2):
        if np.isnan(h_means[i]) or np.isnan(h_means[j]):
            continue
        if h_means[i] == h_means[j]:
            continue
        total += 1
        if m_means[i] != m_means[j] and (m_means[i] > m_means[j]) == (h_means[i] > h_means[j]):
            correct += 1
    if total == 0:
        raise MetaEvalError("no comparable system pairs with distinct human means")
    return correct / total


def _segment_pairs(metric: ScoreMatrix, human: ScoreMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Per-segment system-pair score differences (metric, human), both present."""
    _aligned(metric, human)
    m_diffs: list[float] = []
    h_diffs: list[float] = []
    n_sys = len(metric.systems)
    for s in range(len(metric.segments)):
        for i, j in itertools.combinations(range(n_sys), 2):
            mi, mj = metric.values[i, s], metric.values[j, s]
            hi, hj = human.values[i, s], human.values[j, s]
            if np.isnan(mi) or np.isnan(mj) or np.isnan(hi) or np.isnan(hj):
                continue
            m_diffs.append(mi - mj)
            h_diffs.append(hi - hj)
    return np.array(m_diffs), np.array(h_diffs)


def acc_eq_at(m_diffs: np.ndarray, h_diffs: np.ndarray, epsilon: float) -> float:
    """Rank-and-tie agreement at a fixed tie threshold."""
    pred_tie = np.abs(m_diffs) <= epsilon
    human_tie = h_diffs == 0
    correct = (pred_tie & human_tie) | (
        ~pred_tie & ~human_tie & (np.sign(m_diffs) == np.sign(h_diffs))
    )
    return float(correct.mean())


def tie_calibrated_accuracy(
    metric_seg: ScoreMatrix, human_seg: ScoreMatrix
) -> tuple[float, float]:
    """Best rank-and-tie agreement over the finite candidate threshold set.

    acc_eq is piecewise constant in epsilon, so {0} plus the midpoints of
    consecutive sorted distinct |score gaps| covers every attainable value.
    """
    m_diffs, h_diffs = _segment_pairs(metric_seg, human_seg)
    if len(m_diffs) == 0:
        raise MetaEvalError("empty comparison set")
    gaps = np.unique(np.abs(m_diffs))
    candidates = [0.0]
    candidates.extend((gaps[:-1] + gaps[1:]) / 2.0)
    if len(gaps) > 0:
        candidates.append(float(gaps[-1]) + 1.0)  # cover the predict-all-ties regime
    best_acc, best_eps = -1.0, 0.0
    for eps in candidates:
        acc = acc_eq_at(m_diffs, h_diffs, eps)
        if acc > best_acc:
            best_acc, best_eps = acc, float(eps)
    return best_acc, best_eps


def _one_sided_p(diffs: np.ndarray, resamples: int, rng: np.random.Generator) -> float:
    """P(sign-flipped mean >= observed mean) under the paired permutation null.

    Enumerates all sign patterns exactly when that is no more work than the
    requested number of resamples; otherwise draws random sign flips.
    """
    m = len(diffs)
    observed = diffs.mean()
    if m <= 30 and 2 ** m <= resamples:
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=m)))
        means = (signs * diffs).mean(axis=1)
        return float((means >= observed - 1e-12).mean())
    signs = rng.integers(0, 2, size=(resamples, m)) * 2.0 - 1.0
    means = (signs * diffs).mean(axis=1)
    return float((means >= observed - 1e-12).mean())


def soft_pairwise_accuracy(
    metric_seg: ScoreMatrix,
    human_seg: ScoreMatrix,
    resamples: int = 1000,
    rng_seed: int = 0,
) -> float:
    """Mean over system pairs of 1 - |p_human - p_metric|.

    p-values come from one-sided paired sign-flip permutation tests of
    whether system i beats system j under each scorer.
    """
    _aligned(metric_seg, human_seg)
    n_sys = len(metric_seg.systems)
    if n_sys < 2:
        raise MetaEvalError("need at least 2 systems")
    if resamples < 100:
        raise MetaEvalError("resamples must be >= 100")
    rng = np.random.default_rng(rng_seed)
    agreements = []
    for i, j in itertools.combinations(range(n_sys), 2):
        present = (
            ~np.isnan(metric_seg.values[i]) & ~np.isnan(metric_seg.values[j])
            & ~np.isnan(human_seg.values[i]) & ~np.isnan(human_seg.values[j])
        )
        if not present.any():
            continue
        m_d = metric_seg.values[i, present] - metric_seg.values[j, present]
        h_d = human_seg.values[i, present] - human_seg.values[j, present]
        p_m = _one_sided_p(m_d, resamples, rng)
        p_h = _one_sided_p(h_d, resamples, rng)
        agreements.append(1.0 - abs(p_h - p_m))
    if not agreements:
        raise MetaEvalError("no comparable system pairs")
    return float(np.mean(agreements))


class PermBothStatistic(enum.Enum):
    SYS_ACC = "sys_acc"
    SEG_ACC_EQ = "seg_acc_eq"


def _stat(metric: ScoreMatrix, human: ScoreMatrix, statistic: PermBothStatistic) -> float:
    if statistic is PermBothStatistic.SYS_ACC:
        return system_pairwise_accuracy(metric, human)
    acc, _ = tie_calibrated_accuracy(metric, human)
    return acc


def perm_both_test(
    metric_x: ScoreMatrix,
    metric_y: ScoreMatrix,
    human: ScoreMatrix,
    statistic: PermBothStatistic = PermBothStatistic.SYS_ACC,
    resamples: int = 1000,
    alpha: float = 0.05,
    rng_seed: int = 0,
) -> tuple[float, bool]:
    """Paired permutation test of stat(x) - stat(y) by random per-cell swaps."""
    _aligned(metric_x, human)
    _aligned(metric_y, human)
    observed = _stat(metric_x, human, statistic) - _stat(metric_y, human, statistic)
    rng = np.random.default_rng(rng_seed)
    shape = metric_x.values.shape
    exceed = 0
    for _ in range(resamples):
        swap = rng.random(shape) < 0.5
        x_vals = np.where(swap, metric_y.values, metric_x.values)
        y_vals = np.where(swap, metric_x.values, metric_y.values)
        x_perm = ScoreMatrix(metric_x.systems, metric_x.segments, x_vals, metric_x.source_label)
        y_perm = ScoreMatrix(metric_y.systems, metric_y.segments, y_vals, metric_y.source_label)
        delta = _stat(x_perm, human, statistic) - _stat(y_perm, human, statistic)
        if abs(delta) >= abs(observed) - 1e-12:
            exceed += 1
    p_value = exceed / resamples
    return p_value, p_value < alpha


def tts_aggregate(
    passes: list[list[float | None]],
) -> tuple[list[float | None], list[int]]:
    """Elementwise mean over passes, skipping parse-failed entries.

    Returns (aggregates, contributing-pass counts); an element every pass
    failed on aggregates to None with count 0.
    """
    if not passes:
        raise MetaEvalError("need at least one pass")
    length = len(passes[0])
    if any(len(p) != length for p in passes):
        raise MetaEvalError("passes have unequal lengths")
    aggregates: list[float | None] = []
    counts: list[int] = []
    for i in range(length):
        valid = [p[i] for p in passes if p[i] is not None]
        counts.append(len(valid))
        aggregates.append(float(np.mean(valid)) if valid else None)
    return aggregates, counts
