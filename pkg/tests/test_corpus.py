import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from remedyr.corpus import (
    CorpusError,
    Format,
    Label,
    PreferencePair,
    Segment,
    SegmentSet,
    build_preference_pairs,
    load_segments,
    pair_from_record,
    pair_to_record,
    render_prompt,
)
from remedyr.prompts import TemplateId


def seg(i, src="the cat", score=None, lang_pair="en-de", system="sysA", mt=None, ref=None):
    return Segment(
        id=f"s{i}",
        lang_pair=lang_pair,
        src=src,
        mt=mt or f"die Katze {i}",
        ref=ref,
        system=system,
        human_score=score,
    )


def write_jsonl(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")


class TestLoadSegments:
    def test_single_row(self, tmp_path):
        p = tmp_path / "segs.jsonl"
        write_jsonl(p, [{"id": "a", "lang_pair": "en-de", "src": "hi", "mt": "hallo",
                         "system": "s1", "human_score": 70}])
        result = load_segments(p)
        assert len(result) == 1
        assert result.segments[0].human_score == 70

    def test_score_out_of_range_rejected(self, tmp_path):
        p = tmp_path / "segs.jsonl"
        write_jsonl(p, [{"id": "a", "lang_pair": "en-de", "src": "hi", "mt": "hallo",
                         "human_score": 120}])
        result = load_segments(p)
        assert len(result) == 0
        assert len(result.diagnostics) == 1
        assert "out of [0,100]" in result.diagnostics[0].message

    def test_mixed_file_counts(self, tmp_path):
        rows = [
            {"id": f"s{i}", "lang_pair": "en-de", "src": f"src {i}", "mt": f"mt {i}",
             "human_score": 50}
            for i in range(8)
        ]
        rows.insert(3, {"id": "bad1", "lang_pair": "en-de", "src": "x"})  # missing mt
        rows.insert(7, {"id": "bad2", "lang_pair": "german", "src": "x", "mt": "y"})
        p = tmp_path / "segs.jsonl"
        write_jsonl(p, rows)
        result = load_segments(p)
        assert len(result) == 8
        assert len(result.diagnostics) == 2
        locations = [d.location for d in result.diagnostics]
        assert "segs.jsonl:4" in locations and "segs.jsonl:8" in locations

    def test_missing_file(self, tmp_path):
        with pytest.raises(CorpusError):
            load_segments(tmp_path / "nope.jsonl")

    def test_duplicate_ids_rejected(self, tmp_path):
        p = tmp_path / "segs.jsonl"
        row = {"id": "a", "lang_pair": "en-de", "src": "hi", "mt": "hallo"}
        write_jsonl(p, [row, row])
        result = load_segments(p)
        assert len(result) == 1
        assert "duplicate" in result.diagnostics[0].message

    def test_tsv(self, tmp_path):
        p = tmp_path / "segs.tsv"
        p.write_text(
            "id\tlang_pair\tsrc\tmt\thuman_score\n"
            "a\ten-de\thi\thallo\t70\n"
            "b\ten-de\tbye\ttschuess\t\n",
            encoding="utf-8",
        )
        result = load_segments(p, Format.TSV)
        assert len(result) == 2
        assert result.segments[1].human_score is None


class TestBuildPairs:
    def test_forced_ordering(self):
        segments = SegmentSet((seg(1, score=100), seg(2, score=0)))
        pairs = build_preference_pairs(segments, rng_seed=0)
        assert len(pairs) == 1
        pair = pairs.pairs[0]
        better = pair.mt_a if pair.label is Label.A_BETTER else pair.mt_b
        assert better == "die Katze 1"

    def test_ties_excluded(self):
        segments = SegmentSet((seg(1, score=70), seg(2, score=70)))
        assert len(build_preference_pairs(segments, rng_seed=0)) == 0

    def test_four_candidates_give_six_pairs(self):
        segments = SegmentSet(tuple(seg(i, score=10 * i) for i in range(1, 5)))
        assert len(build_preference_pairs(segments, rng_seed=0)) == 6

    def test_unscored_group_skipped_with_diagnostic(self):
        segments = SegmentSet((seg(1, score=50), seg(2, score=None)))
        pairs = build_preference_pairs(segments, rng_seed=0)
        assert len(pairs) == 0
        assert len(pairs.diagnostics) == 1

    def test_groups_do_not_mix_sources(self):
        segments = SegmentSet((seg(1, src="a", score=10), seg(2, src="b", score=90)))
        assert len(build_preference_pairs(segments, rng_seed=0)) == 0

    def test_swap_fraction_balanced(self):
        segments = SegmentSet(
            tuple(
                seg(2 * i + j, src=f"src {i}", score=float(20 + 60 * j))
                for i in range(1200)
                for j in range(2)
            )
        )
        pairs = build_preference_pairs(segments, rng_seed=42)
        assert len(pairs) == 1200
        frac = sum(p.swapped for p in pairs.pairs) / len(pairs)
        assert 0.45 <= frac <= 0.55

    def test_no_tied_pair_ever_stored(self):
        with pytest.raises(CorpusError):
            PreferencePair(
                id="x", lang_pair="en-de", src="s", mt_a="a", mt_b="b",
                g_a=50, g_b=50, label=Label.A_BETTER, swapped=False,
            )

    @given(g_a=st.floats(0, 100), g_b=st.floats(0, 100))
    def test_relabel_after_swap_round_trip(self, g_a, g_b):
        if g_a == g_b:
            return
        label = Label.A_BETTER if g_a > g_b else Label.B_BETTER
        pair = PreferencePair(
            id="x", lang_pair="en-de", src="s", mt_a="a", mt_b="b",
            g_a=g_a, g_b=g_b, label=label, swapped=False,
        )
        flipped_label = Label.B_BETTER if label is Label.A_BETTER else Label.A_BETTER
        flipped = PreferencePair(
            id="x", lang_pair="en-de", src="s", mt_a="b", mt_b="a",
            g_a=g_b, g_b=g_a, label=flipped_label, swapped=True,
        )
        better_orig = pair.mt_a if pair.label is Label.A_BETTER else pair.mt_b
        better_flip = flipped.mt_a if flipped.label is Label.A_BETTER else flipped.mt_b
        assert better_orig == better_flip

    def test_determinism(self):
        segments = SegmentSet(
            tuple(seg(3 * i + j, src=f"src {i}", score=float(10 * j))
                  for i in range(20) for j in range(3))
        )
        a = build_preference_pairs(segments, rng_seed=7)
        b = build_preference_pairs(segments, rng_seed=7)
        assert a == b

    def test_pair_record_round_trip(self):
        segments = SegmentSet((seg(1, score=90, ref="ref text"), seg(2, score=30)))
        pair = build_preference_pairs(segments, rng_seed=0).pairs[0]
        assert pair_from_record(pair_to_record(pair)) == pair


class TestRenderPrompt:
    def _pair(self, ref="die Katze"):
        segments = SegmentSet((seg(1, score=90, ref=ref), seg(2, score=30, ref=ref)))
        return build_preference_pairs(segments, rng_seed=0).pairs[0]

    def test_pairwise_with_ref(self):
        prompt = render_prompt(self._pair(), TemplateId.PAIRWISE_TRAIN, include_ref=True)
        assert "Reference:" in prompt.rendered
        assert "####\nA: [score]\nB: [score]" in prompt.rendered
        for criterion in ("Accuracy", "Fluency", "Completeness"):
            assert criterion in prompt.rendered

    def test_single_eval_no_ref_line(self):
        prompt = render_prompt(seg(1), TemplateId.SINGLE_EVAL, include_ref=False)
        assert "Reference:" not in prompt.rendered
        assert "#### Score: [score]" in prompt.rendered

    def test_rendering_deterministic(self):
        pair = self._pair()
        a = render_prompt(pair, TemplateId.PAIRWISE_TRAIN, include_ref=True)
        b = render_prompt(pair, TemplateId.PAIRWISE_TRAIN, include_ref=True)
        assert a.rendered == b.rendered

    def test_missing_ref_raises(self):
        from remedyr.prompts import TemplateError

        with pytest.raises(TemplateError):
            render_prompt(self._pair(ref=None), TemplateId.PAIRWISE_TRAIN, include_ref=True)
