import pytest
from hypothesis import given
from hypothesis import strategies as st

from remedyr.verdict import (
    FailureReason,
    VerdictStatus,
    parse_pairwise,
    parse_single,
    render_scores,
    verdict_from_record,
    verdict_to_record,
)


class TestParsePairwise:
    def test_basic_block(self):
        v = parse_pairwise("analysis of both translations...\n####\nA: 85\nB: 70")
        assert v.status is VerdictStatus.OK_PAIRWISE
        assert (v.score_a, v.score_b) == (85, 70)
        assert v.rationale == "analysis of both translations..."

    def test_no_marker(self):
        v = parse_pairwise("no scores here")
        assert v.status is VerdictStatus.PARSE_FAILURE
        assert v.failure_reason is FailureReason.NO_MARKER
        assert v.score_a is None and v.score_b is None

    def test_out_of_range(self):
        v = parse_pairwise("####\nA: 150\nB: 10")
        assert v.status is VerdictStatus.PARSE_FAILURE
        assert v.failure_reason is FailureReason.OUT_OF_RANGE

    def test_non_numeric(self):
        v = parse_pairwise("####\nA: great\nB: bad")
        assert v.failure_reason is FailureReason.NON_NUMERIC

    def test_last_marker_wins(self):
        text = "the format is ####\nA: 1\nB: 2\nok now really:\n####\nA: 90\nB: 30"
        v = parse_pairwise(text)
        assert (v.score_a, v.score_b) == (90, 30)

    def test_trailing_punctuation_and_echoes(self):
        v = parse_pairwise("####\nA: 72.5 (0-100)\nB: 60.")
        assert v.status is VerdictStatus.OK_PAIRWISE
        assert (v.score_a, v.score_b) == (72.5, 60)

    def test_reversed_line_order_accepted_with_note(self):
        v = parse_pairwise("####\nB: 40\nA: 60")
        assert v.status is VerdictStatus.OK_PAIRWISE
        assert (v.score_a, v.score_b) == (60, 40)
        assert v.notes

    def test_rationale_excludes_block(self):
        v = parse_pairwise("some thoughts\n####\nA: 10\nB: 20")
        assert "####" not in v.rationale
        assert "A: 10" not in v.rationale

    @given(st.text(max_size=300))
    def test_never_raises(self, text):
        v = parse_pairwise(text)
        assert v.status in VerdictStatus
        if v.status is VerdictStatus.PARSE_FAILURE:
            assert v.failure_reason is not None
            assert v.score_a is None and v.score_b is None


class TestParseSingle:
    def test_example_style(self):
        v = parse_single("The translation is mostly accurate...\n#### Score: 65.")
        assert v.status is VerdictStatus.OK_SINGLE
        assert v.score_single == 65

    def test_zero_boundary(self):
        v = parse_single("#### Score: 0")
        assert v.score_single == 0

    def test_last_occurrence_rule(self):
        text = "format is #### Score: [n]\n#### Score: 80\nwait no\n#### Score: 40"
        assert parse_single(text).score_single == 40

    def test_no_marker(self):
        assert parse_single("Score: 50").failure_reason is FailureReason.NO_MARKER

    def test_out_of_range(self):
        assert parse_single("#### Score: 101").failure_reason is FailureReason.OUT_OF_RANGE

    @given(st.text(max_size=300))
    def test_never_raises(self, text):
        v = parse_single(text)
        assert v.status in VerdictStatus


class TestRenderScores:
    def test_exact_format(self):
        assert render_scores(85, 70) == "####\nA: 85\nB: 70"

    def test_boundaries(self):
        out = render_scores(100, 0)
        assert "A: 100" in out and "B: 0" in out

    def test_out_of_range_raises(self):
        with pytest.raises(ValueError):
            render_scores(101, 0)
        with pytest.raises(ValueError):
            render_scores(50, -1)

    @given(a=st.integers(0, 100), b=st.integers(0, 100))
    def test_round_trip(self, a, b):
        v = parse_pairwise(render_scores(a, b))
        assert v.status is VerdictStatus.OK_PAIRWISE
        assert (v.score_a, v.score_b) == (a, b)

    @given(
        a=st.floats(0, 100).map(lambda x: round(x, 2)),
        b=st.floats(0, 100).map(lambda x: round(x, 2)),
    )
    def test_round_trip_fractional(self, a, b):
        v = parse_pairwise(render_scores(a, b))
        assert (v.score_a, v.score_b) == (a, b)


def test_record_round_trip():
    v = parse_pairwise("thinking\n####\nA: 42\nB: 58")
    assert verdict_from_record(verdict_to_record(v)) == v
    f = parse_single("nope")
    restored = verdict_from_record(verdict_to_record(f, item_id="x"))
    assert restored.status is VerdictStatus.PARSE_FAILURE
    assert restored.failure_reason is FailureReason.NO_MARKER
