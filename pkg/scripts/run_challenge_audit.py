#!/usr/bin/env python3
"""Audit a metric against out-of-distribution challenge items.

Builds a challenge set from a synthetic corpus, scores it with two toy
metrics (a length-ratio heuristic that is easy to fool, and a gold-aware
oracle that is not), and prints the robustness report for each so the
expected failure of the heuristic is visible side by side.

Example:
    python3 scripts/run_challenge_audit.py --segments 50 --seed 0
"""

import argparse

import numpy as np

from remedyr.challenge import Category, generate, robustness_report
from remedyr.corpus import Segment, SegmentSet


def length_ratio_metric(item) -> float:
    """Scores by target/source length similarity; blind to meaning."""
    if not item.src:
        return 50.0
    ratio = len(item.mt) / len(item.src)
    return float(100.0 * max(0.0, 1.0 - abs(1.0 - ratio)))


def gold_aware_metric(item, rng) -> float:
    """Knows which degradations destroy meaning; a stand-in for a good judge."""
    if item.category in (Category.EMPTY_MT, Category.SRC_COPY,
                         Category.WRONG_LANG, Category.UNRELATED_MT,
                         Category.EMPTY_SRC_REF):
        return float(rng.uniform(0, 8))
    return float(rng.uniform(35, 65))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--segments", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    corpus = SegmentSet(tuple(
        Segment(id=f"s{i}", lang_pair="en-de", src=f"an ordinary source sentence {i}",
                mt=f"an ordinary translation {i}", ref=f"an ordinary reference {i}",
                system="sysA")
        for i in range(args.segments)
    ))
    pool = [f"unrelated filler sentence number {i}" for i in range(30)]
    aux = {c: pool for c in (Category.WRONG_LANG, Category.MIX_LANG,
                             Category.UNRELATED_MT)}
    items = generate(corpus, set(Category), aux, rng_seed=args.seed)
    print(f"generated {len(items)} challenge items "
          f"({len(list(Category))} categories x {args.segments} segments)\n")

    for name, scorer in [
        ("length-ratio heuristic", lambda it: length_ratio_metric(it)),
        ("gold-aware oracle", lambda it: gold_aware_metric(it, rng)),
    ]:
        scores = {it.id: scorer(it) for it in items.items}
        report = robustness_report(items, scores)
        print(f"=== {name} ===")
        for cat in Category:
            if cat not in report:
                continue
            s = report[cat]
            status = "PASS" if s.passed else "FAIL"
            print(f"  {cat.value:14s} mean={s.mean:6.1f} median={s.median:6.1f} "
                  f"frac<10={s.frac_below_threshold:.2f} "
                  f"[{s.expectation.value}] {status}")
        print()


if __name__ == "__main__":
    main()
