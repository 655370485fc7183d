"""Reason-then-score output parsing.

Model outputs carry free-form analysis followed by a marked score block:
"####\\nA: <n>\\nB: <n>" for pairwise prompts, "#### Score: <n>" for single
evaluation. Parsing is total: arbitrary input yields a ParsedVerdict, never
an exception. When a model echoes the format instructions, the last marker
wins.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass


class VerdictStatus(enum.Enum):
    OK_PAIRWISE = "OK_PAIRWISE"
    OK_SINGLE = "OK_SINGLE"
    PARSE_FAILURE = "PARSE_FAILURE"


class FailureReason(enum.Enum):
    NO_MARKER = "NO_MARKER"
    NON_NUMERIC = "NON_NUMERIC"
    OUT_OF_RANGE = "OUT_OF_RANGE"
    DUPLICATE_BLOCK = "DUPLICATE_BLOCK"


@dataclass(frozen=True)
class ParsedVerdict:
    rationale: str
    score_a: float | None = None
    score_b: float | None = None
    score_single: float | None = None
    status: VerdictStatus = VerdictStatus.PARSE_FAILURE
    failure_reason: FailureReason | None = None
    notes: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.status is not VerdictStatus.PARSE_FAILURE


_NUMBER_RE = r"([+-]?\d+(?:\.\d+)?)"
# Trailing punctuation and "(0-100)"-style echoes after the number are tolerated.
_A_LINE_RE = re.compile(rf"^\s*A\s*:\s*\[?{_NUMBER_RE}\]?\s*(?:\(.*\))?\s*[.!,;]?\s*$")
_B_LINE_RE = re.compile(rf"^\s*B\s*:\s*\[?{_NUMBER_RE}\]?\s*(?:\(.*\))?\s*[.!,;]?\s*$")
_SINGLE_RE = re.compile(rf"####\s*Score\s*:\s*\[?{_NUMBER_RE}\]?")
_MARKER = "####"


def _fail(rationale: str, reason: FailureReason) -> ParsedVerdict:
    return ParsedVerdict(rationale=rationale, status=VerdictStatus.PARSE_FAILURE, failure_reason=reason)


def parse_pairwise(text: str) -> ParsedVerdict:
    """Extract (score_a, score_b) from the last "####" score block."""
    idx = text.rfind(_MARKER)
    if idx < 0:
        return _fail(text, FailureReason.NO_MARKER)
    rationale = text[:idx].rstrip()
    block = text[idx + len(_MARKER):]

    score_a = score_b = None
    notes: list[str] = []
    for line in block.splitlines():
        ma = _A_LINE_RE.match(line)
        mb = _B_LINE_RE.match(line)
        if ma and score_a is None:
            score_a = float(ma.group(1))
            if score_b is not None:
                notes.append("A line appeared after B line")
        elif mb and score_b is None:
            score_b = float(mb.group(1))
    if score_a is None or score_b is None:
        return _fail(rationale, FailureReason.NON_NUMERIC)
    if not (0.0 <= score_a <= 100.0 and 0.0 <= score_b <= 100.0):
        return _fail(rationale, FailureReason.OUT_OF_RANGE)
    return ParsedVerdict(
        rationale=rationale,
        score_a=score_a,
        score_b=score_b,
        status=VerdictStatus.OK_PAIRWISE,
        notes=tuple(notes),
    )


def parse_single(text: str) -> ParsedVerdict:
    """Extract the number after the final "#### Score:" occurrence."""
    matches = list(_SINGLE_RE.finditer(text))
    if not matches:
        return _fail(text, FailureReason.NO_MARKER)
    last = matches[-1]
    rationale = text[: last.start()].rstrip()
    score = float(last.group(1))
    if not (0.0 <= score <= 100.0):
        return _fail(rationale, FailureReason.OUT_OF_RANGE)
    return ParsedVerdict(
        rationale=rationale,
        score_single=score,
        status=VerdictStatus.OK_SINGLE,
    )


def _fmt(score: float) -> str:
    if float(score) == int(score):
        return str(int(score))
    return repr(float(score))


def render_scores(score_a: float, score_b: float) -> str:
    """Emit the canonical pairwise score block (round-trip safe)."""
    for s in (score_a, score_b):
        if not (0.0 <= s <= 100.0):
            raise ValueError(f"score {s} outside [0,100]")
    return f"####\nA: {_fmt(score_a)}\nB: {_fmt(score_b)}"


def verdict_to_record(v: ParsedVerdict, item_id: str | None = None) -> dict:
    record: dict = {}
    if item_id is not None:
        record["item_id"] = item_id
    record["rationale"] = v.rationale
    if v.score_a is not None:
        record["score_a"] = v.score_a
    if v.score_b is not None:
        record["score_b"] = v.score_b
    if v.score_single is not None:
        record["score"] = v.score_single
    record["status"] = v.status.value
    if v.failure_reason is not None:
        record["failure_reason"] = v.failure_reason.value
    return record


def verdict_from_record(record: dict) -> ParsedVerdict:
    return ParsedVerdict(
        rationale=record.get("rationale", ""),
        score_a=record.get("score_a"),
        score_b=record.get("score_b"),
        score_single=record.get("score"),
        status=VerdictStatus(record["status"]),
        failure_reason=(
            FailureReason(record["failure_reason"]) if record.get("failure_reason") else None
        ),
    )
