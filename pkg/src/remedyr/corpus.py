"""Scored-segment ingestion and preference-pair construction.

Segments are grouped by (lang_pair, src); within each group every unordered
candidate pair with distinct human scores becomes one training pair. Human
ties are never stored. The A/B order of each pair is flipped with probability
1/2 under a caller-supplied seed to counter position bias.
"""

from __future__ import annotations

import csv
import enum
import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .prompts import (
    PromptText,
    TemplateId,
    render_pairwise_train,
    render_single_eval,
)

_LANG_PAIR_RE = re.compile(r"[a-z]{2}-[a-z]{2}")

SEGMENT_FIELDS = ("id", "lang_pair", "src", "mt", "ref", "system", "human_score", "domain_tag")


class CorpusError(ValueError):
    """Unreadable file or schema violation."""


class Label(enum.Enum):
    A_BETTER = "A_BETTER"
    B_BETTER = "B_BETTER"


@dataclass(frozen=True)
class Segment:
    id: str
    lang_pair: str
    src: str
    mt: str
    ref: str | None = None
    system: str = ""
    human_score: float | None = None
    domain_tag: str | None = None

    def __post_init__(self):
        if not _LANG_PAIR_RE.fullmatch(self.lang_pair):
            raise CorpusError(f"bad lang_pair {self.lang_pair!r} for segment {self.id!r}")
        if self.human_score is not None and not (0.0 <= self.human_score <= 100.0):
            raise CorpusError(
                f"human_score {self.human_score} out of [0,100] for segment {self.id!r}"
            )


@dataclass(frozen=True)
class PreferencePair:
    id: str
    lang_pair: str
    src: str
    mt_a: str
    mt_b: str
    g_a: float
    g_b: float
    label: Label
    swapped: bool
    ref: str | None = None

    def __post_init__(self):
        if self.g_a == self.g_b:
            raise CorpusError(f"tied pair {self.id!r} (g_a == g_b == {self.g_a})")
        expected = Label.A_BETTER if self.g_a > self.g_b else Label.B_BETTER
        if self.label is not expected:
            raise CorpusError(f"label inconsistent with scores for pair {self.id!r}")


@dataclass(frozen=True)
class Diagnostic:
    location: str
    message: str


@dataclass(frozen=True)
class SegmentSet:
    segments: tuple[Segment, ...]
    diagnostics: tuple[Diagnostic, ...] = ()

    def __len__(self) -> int:
        return len(self.segments)


@dataclass(frozen=True)
class PairSet:
    pairs: tuple[PreferencePair, ...]
    diagnostics: tuple[Diagnostic, ...] = ()

    def __len__(self) -> int:
        return len(self.pairs)


def _segment_from_record(record: dict) -> Segment:
    missing = [k for k in ("id", "lang_pair", "src", "mt") if not record.get(k)]
    if missing:
        raise CorpusError(f"missing required field(s) {missing}")
    score = record.get("human_score")
    if score is not None and score != "":
        try:
            score = float(score)
        except (TypeError, ValueError):
            raise CorpusError(f"non-numeric human_score {score!r}") from None
    else:
        score = None
    ref = record.get("ref") or None
    return Segment(
        id=str(record["id"]),
        lang_pair=str(record["lang_pair"]),
        src=str(record["src"]),
        mt=str(record["mt"]),
        ref=str(ref) if ref is not None else None,
        system=str(record.get("system") or ""),
        human_score=score,
        domain_tag=record.get("domain_tag") or None,
    )


class Format(enum.Enum):
    JSONL = "jsonl"
    TSV = "tsv"


def load_segments(path: str | Path, format: Format = Format.JSONL) -> SegmentSet:
    """Load segments, keeping well-formed rows and reporting rejected ones."""
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"cannot read {path}")
    segments: list[Segment] = []
    diagnostics: list[Diagnostic] = []
    seen_ids: set[str] = set()

    def add(record: dict, lineno: int) -> None:
        loc = f"{path.name}:{lineno}"
        try:
            seg = _segment_from_record(record)
        except CorpusError as exc:
            diagnostics.append(Diagnostic(loc, str(exc)))
            return
        if seg.id in seen_ids:
            diagnostics.append(Diagnostic(loc, f"duplicate id {seg.id!r}"))
            return
        seen_ids.add(seg.id)
        segments.append(seg)

    text = path.read_text(encoding="utf-8")
    if format is Format.JSONL:
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                diagnostics.append(Diagnostic(f"{path.name}:{lineno}", f"bad JSON: {exc}"))
                continue
            if not isinstance(record, dict):
                diagnostics.append(Diagnostic(f"{path.name}:{lineno}", "row is not an object"))
                continue
            add(record, lineno)
    elif format is Format.TSV:
        reader = csv.DictReader(text.splitlines(), delimiter="\t")
        for lineno, record in enumerate(reader, start=2):
            add({k: v for k, v in record.items() if v not in (None, "")}, lineno)
    else:  # pragma: no cover - enum is closed
        raise CorpusError(f"unknown format {format!r}")
    return SegmentSet(tuple(segments), tuple(diagnostics))


def build_preference_pairs(segments: SegmentSet, rng_seed: int) -> PairSet:
    """Emit one pair per unordered candidate pair with distinct scores.

    Groups are keyed by exact (lang_pair, src) match. A group containing any
    segment without a human score is skipped whole, with a diagnostic. Ties
    are dropped silently (they carry no preference). Each emitted pair is
    flipped with probability 1/2.
    """
    rng = random.Random(rng_seed)
    groups: dict[tuple[str, str], list[Segment]] = {}
    for seg in segments.segments:
        groups.setdefault((seg.lang_pair, seg.src), []).append(seg)

    pairs: list[PreferencePair] = []
    diagnostics: list[Diagnostic] = []
    for (lang_pair, src), members in groups.items():
        unscored = [s.id for s in members if s.human_score is None]
        if unscored:
            diagnostics.append(
                Diagnostic(
                    f"group({lang_pair!r}, src={src[:40]!r})",
                    f"skipped: segments without human_score: {unscored}",
                )
            )
            continue
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                first, second = members[i], members[j]
                if first.human_score == second.human_score:
                    continue
                swapped = rng.random() < 0.5
                if swapped:
                    first, second = second, first
                label = Label.A_BETTER if first.human_score > second.human_score else Label.B_BETTER
                pairs.append(
                    PreferencePair(
                        id=f"{first.id}__{second.id}",
                        lang_pair=lang_pair,
                        src=src,
                        ref=first.ref or second.ref,
                        mt_a=first.mt,
                        mt_b=second.mt,
                        g_a=float(first.human_score),
                        g_b=float(second.human_score),
                        label=label,
                        swapped=swapped,
                    )
                )
    return PairSet(tuple(pairs), tuple(diagnostics))


def render_prompt(
    item: PreferencePair | Segment,
    template_id: TemplateId,
    include_ref: bool = False,
) -> PromptText:
    """Render a pair or segment through the named template."""
    if template_id is TemplateId.PAIRWISE_TRAIN:
        if not isinstance(item, PreferencePair):
            raise CorpusError("PAIRWISE_TRAIN requires a PreferencePair")
        return render_pairwise_train(
            lang_pair=item.lang_pair,
            src=item.src,
            mt_a=item.mt_a,
            mt_b=item.mt_b,
            ref=item.ref,
            include_ref=include_ref,
        )
    if template_id is TemplateId.SINGLE_EVAL:
        if not isinstance(item, Segment):
            raise CorpusError("SINGLE_EVAL requires a Segment")
        return render_single_eval(
            lang_pair=item.lang_pair,
            src=item.src,
            mt=item.mt,
            ref=item.ref,
            include_ref=include_ref,
        )
    raise CorpusError(f"render_prompt does not handle template {template_id}")


def pair_to_record(pair: PreferencePair) -> dict:
    record = {
        "id": pair.id,
        "lang_pair": pair.lang_pair,
        "src": pair.src,
        "mt_a": pair.mt_a,
        "mt_b": pair.mt_b,
        "g_a": pair.g_a,
        "g_b": pair.g_b,
        "label": pair.label.value,
        "swapped": pair.swapped,
    }
    if pair.ref is not None:
        record["ref"] = pair.ref
    return record


def pair_from_record(record: dict) -> PreferencePair:
    return PreferencePair(
        id=str(record["id"]),
        lang_pair=str(record["lang_pair"]),
        src=str(record["src"]),
        ref=record.get("ref"),
        mt_a=str(record["mt_a"]),
        mt_b=str(record["mt_b"]),
        g_a=float(record["g_a"]),
        g_b=float(record["g_b"]),
        label=Label(record["label"]),
        swapped=bool(record["swapped"]),
    )


def write_pairs(pairs: PairSet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs.pairs:
            fh.write(json.dumps(pair_to_record(pair), ensure_ascii=False) + "\n")


def read_pairs(path: str | Path) -> PairSet:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                pairs.append(pair_from_record(json.loads(line)))
    return PairSet(tuple(pairs))
