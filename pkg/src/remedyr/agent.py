"""Evaluate-revise agent loop.

Each iteration scores the current translation, feeds the evaluator's
rationale into a refinement prompt, requests a revision, and re-scores it.
The self-refine baseline runs the identical loop with the feedback block
omitted from the refinement prompt. Selection keeps either the last or the
best-scoring candidate; the source text is never mutated.
"""

from __future__ import annotations

import json
import enum
from dataclasses import dataclass
from pathlib import Path

from .gateway import EndpointConfig, chat_complete, evaluate_segment
from .corpus import Segment
from .prompts import render_refine


class Selection(enum.Enum):
    LAST = "last"
    BEST_SCORE = "best_score"


@dataclass(frozen=True)
class AgentConfig:
    feedback_endpoint: EndpointConfig
    refinement_endpoint: EndpointConfig
    max_iterations: int = 4
    selection: Selection = Selection.BEST_SCORE
    stop_on_no_gain: bool = True
    include_ref_in_feedback: bool = False
    tts_n: int = 1

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class Iteration:
    feedback_rationale: str
    feedback_score: float | None
    revised_mt: str
    revised_score: float | None


@dataclass(frozen=True)
class AgentTranscript:
    src: str
    lang_pair: str
    initial_mt: str
    iterations: tuple[Iteration, ...]
    selected_mt: str
    selected_score: float | None
    error: str | None = None


def _score(config: AgentConfig, src: str, mt: str, lang_pair: str, ref: str | None):
    segment = Segment(
        id="agent", lang_pair=lang_pair, src=src, mt=mt, ref=ref, system="agent"
    )
    verdicts, aggregate = evaluate_segment(
        config.feedback_endpoint,
        segment,
        include_ref=config.include_ref_in_feedback,
        tts_n=config.tts_n,
    )
    rationale = verdicts[0].rationale if verdicts else ""
    return rationale, aggregate


def _run(
    config: AgentConfig,
    src: str,
    initial_mt: str,
    lang_pair: str,
    ref: str | None,
    with_feedback: bool,
) -> AgentTranscript:
    iterations: list[Iteration] = []
    candidates: list[tuple[str, float]] = []
    error: str | None = None
    current_mt = initial_mt
    best = float("-inf")
    try:
        for _ in range(config.max_iterations):
            rationale, score = _score(config, src, current_mt, lang_pair, ref)
            if score is not None:
                candidates.append((current_mt, score))
                best = max(best, score)
            prompt = render_refine(
                lang_pair=lang_pair,
                src=src,
                mt=current_mt,
                feedback=rationale if with_feedback else None,
            )
            revised = chat_complete(
                config.refinement_endpoint,
                [{"role": "user", "content": prompt.rendered}],
            ).strip()
            _, revised_score = _score(config, src, revised, lang_pair, ref)
            iterations.append(
                Iteration(
                    feedback_rationale=rationale if with_feedback else "",
                    feedback_score=score,
                    revised_mt=revised,
                    revised_score=revised_score,
                )
            )
            if revised_score is not None:
                candidates.append((revised, revised_score))
            current_mt = revised
            if (
                config.stop_on_no_gain
                and revised_score is not None
                and revised_score <= best
            ):
                break
            if revised_score is not None:
                best = max(best, revised_score)
    except Exception as exc:  # endpoint failure mid-loop: keep completed iterations
        error = f"{type(exc).__name__}: {exc}"

    if config.selection is Selection.BEST_SCORE and candidates:
        selected_mt, selected_score = max(candidates, key=lambda t: t[1])
    elif candidates:
        selected_mt, selected_score = candidates[-1]
    else:
        selected_mt, selected_score = initial_mt, None
    return AgentTranscript(
        src=src,
        lang_pair=lang_pair,
        initial_mt=initial_mt,
        iterations=tuple(iterations),
        selected_mt=selected_mt,
        selected_score=selected_score,
        error=error,
    )


def run_loop(
    config: AgentConfig,
    src: str,
    initial_mt: str,
    lang_pair: str,
    ref: str | None = None,
) -> AgentTranscript:
    """Full evaluate-revise loop with feedback in the refinement prompt."""
    return _run(config, src, initial_mt, lang_pair, ref, with_feedback=True)


def self_refine_baseline(
    config: AgentConfig,
    src: str,
    initial_mt: str,
    lang_pair: str,
    ref: str | None = None,
) -> AgentTranscript:
    """Control arm: identical loop with no feedback shown to the reviser."""
    return _run(config, src, initial_mt, lang_pair, ref, with_feedback=False)


def transcript_to_record(t: AgentTranscript) -> dict:
    record = {
        "src": t.src,
        "lang_pair": t.lang_pair,
        "initial_mt": t.initial_mt,
        "iterations": [
            {
                "feedback_rationale": it.feedback_rationale,
                "feedback_score": it.feedback_score,
                "revised_mt": it.revised_mt,
                "revised_score": it.revised_score,
            }
            for it in t.iterations
        ],
        "selected_mt": t.selected_mt,
        "selected_score": t.selected_score,
    }
    if t.error is not None:
        record["error"] = t.error
    return record


def write_transcripts(transcripts: list[AgentTranscript], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in transcripts:
            fh.write(json.dumps(transcript_to_record(t), ensure_ascii=False) + "\n")
