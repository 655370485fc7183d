"""Prompt templates and rendering.

Four templates are supported: pairwise training prompts, single-segment
evaluation prompts, translation refinement prompts, and the faithfulness
judging prompt (system + user message pair). Rendering is a pure function of
its inputs; identical inputs always produce identical bytes.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field


class TemplateId(enum.Enum):
    PAIRWISE_TRAIN = "pairwise_train"
    SINGLE_EVAL = "single_eval"
    REFINE = "refine"
    FAITHFULNESS = "faithfulness"


@dataclass(frozen=True)
class PromptText:
    rendered: str
    template_id: TemplateId
    variables: dict[str, str] = field(default_factory=dict)


class TemplateError(ValueError):
    """Missing variable or unknown template."""


PAIRWISE_TRAIN_TEMPLATE = """\
You are an expert machine translation evaluator. You need to assess the quality of two translations of the same source text. Your task is to evaluate the translation quality and provide scores from 0-100, where higher scores indicate better quality.{ref_intro}

Evaluation Criteria:
- Accuracy: Whether the meaning expressed in the translation is correct and faithful to the source. Penalize mistranslation, unsupported additions/hallucinations, terminology errors, and untranslated text.
- Fluency: How natural and grammatically correct the translation reads in the target language. Consider grammar, agreement, word order, punctuation, spelling, register.
- Completeness: Is all information from the source conveyed without omissions?

Instructions: Think step by step about the quality of each translation and write your analysis first, then provide your final scores. Evaluate each translation independently rather than by comparison.

Output Format: Thinking through your evaluation first, then output the scores in exactly this format (do not give scores first):
####
A: [score]
B: [score]

Now evaluate this {src_lang}-{tgt_lang} translation:
-----
Source: {source}
{ref_line}Translation A: {translation_a}
Translation B: {translation_b}"""

PAIRWISE_REF_INTRO = " You are also given a reference (not always perfect) to help you assess the quality."

SINGLE_EVAL_TEMPLATE = """\
You are an expert machine translation evaluator. You need to assess the quality of a single translation. Your task is to evaluate the translation quality and provide a score from 0-100, where higher scores indicate better quality.

Evaluation Criteria:
- Accuracy: How well the translation preserves the meaning of the source
- Fluency: How natural and grammatically correct the translation reads
- Completeness: Whether all information from the source is conveyed, without unrelevant additions like instructions
- Language Correctness: Ensure the translation is in the correct {tgt_lang} language without mixing languages

Instructions:
Think step by step about the quality of the translation, then provide your final score.

Output Format:
First, think through your evaluation step by step. Then provide your final answer in this exact format:
#### Score: [score] (0-100)

Now evaluate this {src_lang}-{tgt_lang} translation:
-----
Source: {source}
{ref_line}Translation: {translation}"""

REFINE_TEMPLATE = """\
You are an expert translator. Revise the translation below so it is accurate, fluent, and complete in the target language ({tgt_lang}). Output only the revised translation, with no commentary.

Source ({src_lang}): {source}
Current translation: {translation}
{feedback_block}Revised translation:"""

REFINE_FEEDBACK_BLOCK = "Feedback from a quality evaluation of the current translation:\n{feedback}\n"

FAITHFULNESS_SYSTEM = (
    "You are a strict verifier. Your job is to score the FAITHFULNESS of an "
    "evaluation explanation. You must return ONLY a single valid JSON object "
    "and nothing else."
)

FAITHFULNESS_USER_TEMPLATE = """\
You are given: 1) src_sent: the source sentence; 2) target_sent: the translation hypothesis; 3) explanation: an evaluation text that comments on the translation quality

Task: Provide a score (0-100) indicating how FAITHFUL the explanation is to src_sent and target_sent.

Definition of faithfulness:
- Every key claim in the explanation must be supported by what is actually present in src_sent and/or target_sent.
- If the explanation invents content, mentions errors that are not evidenced, misquotes words, or contradicts src/target, score lower.

CRITICAL:
- You are NOT evaluating translation quality.
- A translation can be very bad, but an explanation can still be highly faithful if it correctly describes that badness.

Return ONLY JSON with:
{{"faithfulness_score": int,   // 0-100
  "brief_reason": string       // <= 40 words, cite the biggest supported or unsupported claim}}

Input:
src_lang: {src_lang}; tgt_lang: {tgt_lang}; src_sent: {src_sent}; target_sent: {target_sent}; explanation: {explanation}"""

_PLACEHOLDER_RE = re.compile(r"\{[a-z_]+\}")


def split_lang_pair(lang_pair: str) -> tuple[str, str]:
    m = re.fullmatch(r"([a-z]{2})-([a-z]{2})", lang_pair)
    if m is None:
        raise TemplateError(f"lang_pair must look like 'xx-yy', got {lang_pair!r}")
    return m.group(1), m.group(2)


def _check_rendered(rendered: str, template_id: TemplateId) -> None:
    leftover = _PLACEHOLDER_RE.search(rendered.replace("{{", "").replace("}}", ""))
    if leftover and template_id is not TemplateId.FAITHFULNESS:
        raise TemplateError(f"unbound placeholder {leftover.group()} in rendered prompt")


def render_pairwise_train(
    *,
    lang_pair: str,
    src: str,
    mt_a: str,
    mt_b: str,
    ref: str | None = None,
    include_ref: bool = True,
) -> PromptText:
    src_lang, tgt_lang = split_lang_pair(lang_pair)
    use_ref = include_ref
    if use_ref and ref is None:
        raise TemplateError("include_ref requested but no reference available")
    variables = {
        "src_lang": src_lang,
        "tgt_lang": tgt_lang,
        "source": src,
        "translation_a": mt_a,
        "translation_b": mt_b,
    }
    if use_ref:
        variables["reference"] = ref  # type: ignore[assignment]
    rendered = PAIRWISE_TRAIN_TEMPLATE.format(
        ref_intro=PAIRWISE_REF_INTRO if use_ref else "",
        ref_line=f"Reference: {ref}\n" if use_ref else "",
        **{k: v for k, v in variables.items() if k != "reference"},
    )
    _check_rendered(rendered, TemplateId.PAIRWISE_TRAIN)
    return PromptText(rendered, TemplateId.PAIRWISE_TRAIN, variables)


def render_single_eval(
    *,
    lang_pair: str,
    src: str,
    mt: str,
    ref: str | None = None,
    include_ref: bool = False,
) -> PromptText:
    src_lang, tgt_lang = split_lang_pair(lang_pair)
    if include_ref and ref is None:
        raise TemplateError("include_ref requested but no reference available")
    variables = {
        "src_lang": src_lang,
        "tgt_lang": tgt_lang,
        "source": src,
        "translation": mt,
    }
    if include_ref:
        variables["reference"] = ref  # type: ignore[assignment]
    rendered = SINGLE_EVAL_TEMPLATE.format(
        ref_line=f"Reference: {ref}\n" if include_ref else "",
        **{k: v for k, v in variables.items() if k != "reference"},
    )
    _check_rendered(rendered, TemplateId.SINGLE_EVAL)
    return PromptText(rendered, TemplateId.SINGLE_EVAL, variables)


def render_refine(
    *,
    lang_pair: str,
    src: str,
    mt: str,
    feedback: str | None = None,
) -> PromptText:
    """Refinement prompt; omit `feedback` for the self-refine control arm."""
    src_lang, tgt_lang = split_lang_pair(lang_pair)
    variables = {
        "src_lang": src_lang,
        "tgt_lang": tgt_lang,
        "source": src,
        "translation": mt,
    }
    if feedback is not None:
        variables["feedback"] = feedback
    block = REFINE_FEEDBACK_BLOCK.format(feedback=feedback) if feedback is not None else ""
    rendered = REFINE_TEMPLATE.format(
        feedback_block=block,
        **{k: v for k, v in variables.items() if k != "feedback"},
    )
    _check_rendered(rendered, TemplateId.REFINE)
    return PromptText(rendered, TemplateId.REFINE, variables)


def render_faithfulness(
    *,
    src_lang: str,
    tgt_lang: str,
    src_sent: str,
    target_sent: str,
    explanation: str,
) -> tuple[str, PromptText]:
    """Return (system_message, user PromptText) for the faithfulness judge."""
    variables = {
        "src_lang": src_lang,
        "tgt_lang": tgt_lang,
        "src_sent": src_sent,
        "target_sent": target_sent,
        "explanation": explanation,
    }
    rendered = FAITHFULNESS_USER_TEMPLATE.format(**variables)
    return FAITHFULNESS_SYSTEM, PromptText(rendered, TemplateId.FAITHFULNESS, variables)
