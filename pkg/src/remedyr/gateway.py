"""Chat-completion endpoint driver.

Speaks the common POST {base_url}/chat/completions wire shape. Single-segment
evaluation supports multi-pass aggregation (test-time scaling); the
faithfulness judge sends the verbatim system/user prompt pair and expects a
bare JSON object back. Credentials live only in the named environment
variable and never reach logs or error messages.
"""

from __future__ import annotations

import json
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import requests

from .corpus import Segment
from .metaeval import tts_aggregate
from .prompts import render_faithfulness, render_single_eval
from .verdict import ParsedVerdict, parse_single


class GatewayError(RuntimeError):
    """Transport failure, authentication failure, or malformed reply."""


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str
    api_key_env: str = "REMEDY_API_KEY"
    temperature: float = 0.0
    max_tokens: int = 1024
    timeout: float = 60.0
    max_retries: int = 3
    max_concurrency: int = 4

    def __post_init__(self):
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if not (0 <= self.max_retries <= 10):
            raise ValueError("max_retries must be in [0,10]")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


# Multi-pass sampling needs temperature > 0 to vary reasoning trajectories.
TTS_TEMPERATURE = 0.7


def build_request_body(config: EndpointConfig, messages: list[dict]) -> dict:
    """Wire body; field order is part of the golden-file contract."""
    return {
        "model": config.model_name,
        "messages": messages,
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    }


def chat_complete(
    config: EndpointConfig,
    messages: list[dict],
    _sleep=time.sleep,
) -> str:
    """POST one completion request, retrying transient failures with backoff."""
    api_key = os.environ.get(config.api_key_env)
    if not api_key:
        raise GatewayError(f"no credential in environment variable {config.api_key_env}")
    url = config.base_url.rstrip("/") + "/chat/completions"
    body = build_request_body(config, messages)
    headers = {"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"}
    last_error = "unknown"
    for attempt in range(config.max_retries + 1):
        try:
            resp = requests.post(url, json=body, headers=headers, timeout=config.timeout)
        except requests.RequestException as exc:
            last_error = type(exc).__name__
            if attempt < config.max_retries:
                _sleep(min(2.0 ** attempt * 0.5, 8.0))
            continue
        if resp.status_code in (401, 403):
            raise GatewayError(f"authentication failed (HTTP {resp.status_code})")
        if resp.status_code >= 500 or resp.status_code == 429:
            last_error = f"HTTP {resp.status_code}"
            if attempt < config.max_retries:
                _sleep(min(2.0 ** attempt * 0.5, 8.0))
            continue
        if resp.status_code != 200:
            raise GatewayError(f"unexpected HTTP {resp.status_code}")
        try:
            payload = resp.json()
            return payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"malformed response body: {type(exc).__name__}") from None
    raise GatewayError(f"gave up after {config.max_retries + 1} attempts ({last_error})")


def evaluate_segment(
    config: EndpointConfig,
    segment: Segment,
    include_ref: bool = False,
    tts_n: int = 1,
) -> tuple[list[ParsedVerdict], float | None]:
    """Run tts_n independent evaluation passes and average the parsed scores."""
    if tts_n < 1:
        raise ValueError("tts_n must be >= 1")
    prompt = render_single_eval(
        lang_pair=segment.lang_pair,
        src=segment.src,
        mt=segment.mt,
        ref=segment.ref,
        include_ref=include_ref,
    )
    pass_config = config
    if tts_n > 1 and config.temperature == 0.0:
        pass_config = replace(config, temperature=TTS_TEMPERATURE)
    messages = [{"role": "user", "content": prompt.rendered}]
    verdicts = [parse_single(chat_complete(pass_config, messages)) for _ in range(tts_n)]
    scores: list[float | None] = [v.score_single for v in verdicts]
    aggregates, _counts = tts_aggregate([[s] for s in scores])
    return verdicts, aggregates[0]


@dataclass(frozen=True)
class FaithfulnessVerdict:
    faithfulness_score: int
    brief_reason: str

    def __post_init__(self):
        if not (0 <= self.faithfulness_score <= 100):
            raise ValueError(f"faithfulness_score {self.faithfulness_score} outside [0,100]")
        if not self.brief_reason:
            raise ValueError("brief_reason must be nonempty")


_JSON_OBJECT_RE = re.compile(r"\{.*\}", re.DOTALL)


def judge_faithfulness(
    config: EndpointConfig,
    src: str,
    mt: str,
    explanation: str,
    lang_pair: str,
) -> FaithfulnessVerdict:
    """Score how faithful an evaluation explanation is to source and translation."""
    src_lang, tgt_lang = lang_pair.split("-", 1)
    system, user = render_faithfulness(
        src_lang=src_lang,
        tgt_lang=tgt_lang,
        src_sent=src,
        target_sent=mt,
        explanation=explanation,
    )
    reply = chat_complete(
        config,
        [
            {"role": "system", "content": system},
            {"role": "user", "content": user.rendered},
        ],
    )
    match = _JSON_OBJECT_RE.search(reply)
    if match is None:
        raise GatewayError("judge reply contains no JSON object")
    try:
        payload = json.loads(match.group())
    except json.JSONDecodeError:
        raise GatewayError("judge reply is not valid JSON") from None
    if not isinstance(payload, dict):
        raise GatewayError("judge reply is not a JSON object")
    missing = [k for k in ("faithfulness_score", "brief_reason") if k not in payload]
    if missing:
        raise GatewayError(f"judge reply missing keys {missing}")
    try:
        return FaithfulnessVerdict(
            faithfulness_score=int(payload["faithfulness_score"]),
            brief_reason=str(payload["brief_reason"]),
        )
    except (TypeError, ValueError) as exc:
        raise GatewayError(f"judge reply invalid: {exc}") from None


def run_batch(func, inputs: list, max_concurrency: int) -> list:
    """Fan out up to max_concurrency calls; results joined in input order."""
    with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
        return list(pool.map(func, inputs))
