"""OOD challenge item generation and robustness scoring.

Each clean segment spawns one item per requested perturbation category.
Degenerate categories (empty output, empty input, source copy, wrong or
unrelated language) should receive near-zero quality scores from a robust
metric; mixed-language output preserves meaning and should land mid-range.
Wrong/mixed/unrelated text comes from caller-supplied pools.
"""

from __future__ import annotations

import enum
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Segment, SegmentSet


class ChallengeError(ValueError):
    """Missing auxiliary pool or unscored item."""


class Category(enum.Enum):
    EMPTY_MT = "empty_mt"
    EMPTY_SRC_REF = "empty_src_ref"
    SRC_COPY = "src_copy"
    WRONG_LANG = "wrong_lang"
    MIX_LANG = "mix_lang"
    UNRELATED_MT = "unrelated_mt"


class Expectation(enum.Enum):
    NEAR_ZERO = "near_zero"
    MODERATE = "moderate"


POOL_BACKED = {Category.WRONG_LANG, Category.MIX_LANG, Category.UNRELATED_MT}

# Default pass bands on a 0-100 scale; configurable in robustness_report.
NEAR_ZERO_MAX_MEAN = 15.0
MODERATE_BAND = (20.0, 80.0)


@dataclass(frozen=True)
class ChallengeItem:
    id: str
    base_segment_id: str
    category: Category
    src: str
    mt: str
    ref: str | None
    expectation: Expectation


@dataclass(frozen=True)
class ChallengeSet:
    items: tuple[ChallengeItem, ...]

    def __len__(self) -> int:
        return len(self.items)


def _expectation(category: Category) -> Expectation:
    return Expectation.MODERATE if category is Category.MIX_LANG else Expectation.NEAR_ZERO


def generate(
    segments: SegmentSet,
    categories: set[Category],
    aux: dict[Category, list[str]] | None = None,
    rng_seed: int = 0,
) -> ChallengeSet:
    """Build one item per (segment, category); pool draws are seed-deterministic."""
    aux = aux or {}
    for cat in sorted(categories, key=lambda c: c.value):
        if cat in POOL_BACKED and not aux.get(cat):
            raise ChallengeError(f"category {cat.value} requires an auxiliary text pool")
    rng = random.Random(rng_seed)
    items: list[ChallengeItem] = []
    ordered = [c for c in Category if c in categories]
    for seg in segments.segments:
        for cat in ordered:
            items.append(_make_item(seg, cat, aux, rng))
    return ChallengeSet(tuple(items))


def _make_item(
    seg: Segment, cat: Category, aux: dict[Category, list[str]], rng: random.Random
) -> ChallengeItem:
    src, mt, ref = seg.src, seg.mt, seg.ref
    if cat is Category.EMPTY_MT:
        mt = ""
    elif cat is Category.EMPTY_SRC_REF:
        src, ref = "", ""
    elif cat is Category.SRC_COPY:
        mt = seg.src
    elif cat in POOL_BACKED:
        pool = [t for t in aux[cat] if t != seg.mt and t != seg.ref]
        if not pool:
            raise ChallengeError(
                f"auxiliary pool for {cat.value} has no text distinct from segment {seg.id!r}"
            )
        mt = pool[rng.randrange(len(pool))]
    return ChallengeItem(
        id=f"{seg.id}__{cat.value}",
        base_segment_id=seg.id,
        category=cat,
        src=src,
        mt=mt,
        ref=ref,
        expectation=_expectation(cat),
    )


@dataclass(frozen=True)
class CategorySummary:
    category: Category
    count: int
    mean: float
    median: float
    frac_below_threshold: float
    expectation: Expectation
    passed: bool


def robustness_report(
    items: ChallengeSet,
    metric_scores: dict[str, float],
    below_threshold: float = 10.0,
    near_zero_max_mean: float = NEAR_ZERO_MAX_MEAN,
    moderate_band: tuple[float, float] = MODERATE_BAND,
) -> dict[Category, CategorySummary]:
    """Per-category score summary with pass/fail against expectation bands."""
    unscored = [it.id for it in items.items if it.id not in metric_scores]
    if unscored:
        raise ChallengeError(f"unscored items: {unscored[:5]}{'...' if len(unscored) > 5 else ''}")
    by_cat: dict[Category, list[float]] = {}
    for it in items.items:
        by_cat.setdefault(it.category, []).append(float(metric_scores[it.id]))
    report: dict[Category, CategorySummary] = {}
    for cat, scores in by_cat.items():
        arr = np.array(scores)
        # exact summation so reported means are reproducible bit for bit
        mean = math.fsum(scores) / len(scores)
        expectation = _expectation(cat)
        if expectation is Expectation.NEAR_ZERO:
            passed = mean <= near_zero_max_mean
        else:
            passed = moderate_band[0] <= mean <= moderate_band[1]
        report[cat] = CategorySummary(
            category=cat,
            count=len(scores),
            mean=mean,
            median=float(np.median(arr)),
            frac_below_threshold=float((arr < below_threshold).mean()),
            expectation=expectation,
            passed=passed,
        )
    return report


def item_to_record(item: ChallengeItem) -> dict:
    return {
        "id": item.id,
        "base_segment_id": item.base_segment_id,
        "category": item.category.value,
        "src": item.src,
        "mt": item.mt,
        "ref": item.ref,
        "expectation": item.expectation.value,
    }


def item_from_record(record: dict) -> ChallengeItem:
    return ChallengeItem(
        id=str(record["id"]),
        base_segment_id=str(record["base_segment_id"]),
        category=Category(record["category"]),
        src=str(record["src"]),
        mt=str(record["mt"]),
        ref=record.get("ref"),
        expectation=Expectation(record["expectation"]),
    )


def write_items(items: ChallengeSet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in items.items:
            fh.write(json.dumps(item_to_record(item), ensure_ascii=False) + "\n")


def read_items(path: str | Path) -> ChallengeSet:
    items = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                items.append(item_from_record(json.loads(line)))
    return ChallengeSet(tuple(items))
