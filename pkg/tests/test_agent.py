import json

import pytest

from remedyr.agent import (
    AgentConfig,
    Selection,
    run_loop,
    self_refine_baseline,
    transcript_to_record,
    write_transcripts,
)
from remedyr.gateway import EndpointConfig


def endpoint(base_url):
    return EndpointConfig(base_url=base_url, model_name="stub-model",
                          timeout=5.0, max_retries=0, max_concurrency=2)


class ScriptedModels:
    """Plays an evaluator (scores by translation text) and a reviser (fixed
    revision sequence) behind one chat-completion stub."""

    def __init__(self, scores_by_mt: dict[str, float], revisions: list[str]):
        self.scores_by_mt = scores_by_mt
        self.revisions = list(revisions)
        self.eval_prompts: list[str] = []
        self.refine_prompts: list[str] = []

    def __call__(self, body, i):
        content = body["messages"][0]["content"]
        if "Revised translation:" in content:
            self.refine_prompts.append(content)
            return self.revisions.pop(0) if self.revisions else "no more revisions"
        self.eval_prompts.append(content)
        for mt, score in self.scores_by_mt.items():
            if f"Translation: {mt}" in content:
                return f"Looks fine.\n#### Score: {score}"
        return "Unknown translation.\n#### Score: 1"


def agent_config(server, **overrides):
    cfg = endpoint(server.base_url)
    defaults = dict(feedback_endpoint=cfg, refinement_endpoint=cfg)
    defaults.update(overrides)
    return AgentConfig(**defaults)


class TestRunLoop:
    def test_single_improving_step(self, stub_server_factory, api_key_env):
        models = ScriptedModels({"initial": 80, "better": 85}, ["better"])
        server = stub_server_factory(models)
        t = run_loop(agent_config(server, max_iterations=1), "the source", "initial", "en-de")
        assert t.selected_mt == "better"
        assert t.selected_score == 85
        assert len(t.iterations) == 1

    def test_incumbent_retained_on_regression(self, stub_server_factory, api_key_env):
        models = ScriptedModels({"initial": 80, "worse": 70}, ["worse"])
        server = stub_server_factory(models)
        t = run_loop(agent_config(server, max_iterations=1), "src", "initial", "en-de")
        assert t.selected_mt == "initial"
        assert t.selected_score == 80

    def test_best_score_over_four_iterations(self, stub_server_factory, api_key_env):
        models = ScriptedModels(
            {"initial": 60, "r1": 70, "r2": 68, "r3": 72},
            ["r1", "r2", "r3", "r3"],
        )
        server = stub_server_factory(models)
        t = run_loop(
            agent_config(server, max_iterations=4, stop_on_no_gain=False),
            "src", "initial", "en-de",
        )
        assert len(t.iterations) == 4
        assert t.selected_score == 72
        assert t.selected_mt == "r3"

    def test_stop_on_no_gain(self, stub_server_factory, api_key_env):
        models = ScriptedModels({"initial": 60, "r1": 70, "r2": 65},
                                ["r1", "r2", "r2", "r2"])
        server = stub_server_factory(models)
        t = run_loop(agent_config(server, max_iterations=4), "src", "initial", "en-de")
        assert len(t.iterations) == 2  # stops once r2 fails to beat r1
        assert t.selected_score == 70

    def test_source_never_mutated(self, stub_server_factory, api_key_env):
        models = ScriptedModels({"initial": 50, "r1": 60, "r2": 65}, ["r1", "r2"])
        server = stub_server_factory(models)
        run_loop(agent_config(server, max_iterations=2, stop_on_no_gain=False),
                 "the exact source", "initial", "en-de")
        for prompt in models.refine_prompts:
            assert "the exact source" in prompt

    def test_feedback_rationale_flows_to_refiner(self, stub_server_factory, api_key_env):
        models = ScriptedModels({"initial": 50, "r1": 60}, ["r1"])
        server = stub_server_factory(models)
        run_loop(agent_config(server, max_iterations=1), "src", "initial", "en-de")
        assert any("Looks fine." in p for p in models.refine_prompts)
        assert any("Feedback" in p for p in models.refine_prompts)

    def test_endpoint_failure_truncates(self, stub_server_factory, api_key_env):
        calls = {"n": 0}

        def flaky(body, i):
            content = body["messages"][0]["content"]
            if "Revised translation:" in content:
                calls["n"] += 1
                if calls["n"] >= 2:
                    return 500
                return "r1"
            if "Translation: initial" in content:
                return "#### Score: 50"
            return "#### Score: 60"

        server = stub_server_factory(flaky)
        t = run_loop(
            agent_config(server, max_iterations=3, stop_on_no_gain=False),
            "src", "initial", "en-de",
        )
        assert t.error is not None
        assert len(t.iterations) == 1
        assert t.selected_score == 60

    def test_last_selection(self, stub_server_factory, api_key_env):
        models = ScriptedModels({"initial": 80, "r1": 70}, ["r1"])
        server = stub_server_factory(models)
        t = run_loop(
            agent_config(server, max_iterations=1, selection=Selection.LAST,
                         stop_on_no_gain=False),
            "src", "initial", "en-de",
        )
        assert t.selected_mt == "r1"
        assert t.selected_score == 70


class TestSelfRefine:
    def test_no_feedback_block_in_prompts(self, stub_server_factory, api_key_env):
        models = ScriptedModels({"initial": 50, "r1": 60}, ["r1"])
        server = stub_server_factory(models)
        t = self_refine_baseline(agent_config(server, max_iterations=1),
                                 "src", "initial", "en-de")
        assert len(t.iterations) == 1
        for prompt in models.refine_prompts:
            assert "Feedback" not in prompt

    def test_arms_differ_only_in_feedback_block(self, stub_server_factory, api_key_env):
        models_fb = ScriptedModels({"initial": 50, "r1": 60}, ["r1"])
        server_fb = stub_server_factory(models_fb)
        run_loop(agent_config(server_fb, max_iterations=1), "src", "initial", "en-de")
        models_nf = ScriptedModels({"initial": 50, "r1": 60}, ["r1"])
        server_nf = stub_server_factory(models_nf)
        self_refine_baseline(agent_config(server_nf, max_iterations=1),
                             "src", "initial", "en-de")
        with_fb = models_fb.refine_prompts[0]
        without_fb = models_nf.refine_prompts[0]
        stripped = "\n".join(
            ln for ln in with_fb.splitlines()
            if "Feedback" not in ln and "Looks fine." not in ln
        )
        assert stripped == without_fb


class TestTranscript:
    def test_best_score_is_max_of_recorded_scores(self, stub_server_factory, api_key_env):
        models = ScriptedModels({"initial": 55, "r1": 75, "r2": 40},
                                ["r1", "r2", "r2"])
        server = stub_server_factory(models)
        t = run_loop(agent_config(server, max_iterations=3, stop_on_no_gain=False),
                     "src", "initial", "en-de")
        scores = [it.feedback_score for it in t.iterations] + [
            it.revised_score for it in t.iterations
        ]
        assert t.selected_score == max(s for s in scores if s is not None)

    def test_serialization_round_trip(self, stub_server_factory, api_key_env, tmp_path):
        models = ScriptedModels({"initial": 50, "r1": 60}, ["r1"])
        server = stub_server_factory(models)
        t = run_loop(agent_config(server, max_iterations=1), "src", "initial", "en-de")
        path = tmp_path / "transcripts.jsonl"
        write_transcripts([t], path)
        loaded = json.loads(path.read_text().strip())
        assert loaded == transcript_to_record(t)
        assert loaded["selected_mt"] == "r1"
        assert len(loaded["iterations"]) == 1


def test_config_validation():
    cfg = EndpointConfig(base_url="http://x", model_name="m")
    with pytest.raises(ValueError):
        AgentConfig(feedback_endpoint=cfg, refinement_endpoint=cfg, max_iterations=0)
