from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from armbridge.errors import IncompleteResponse, Unreconstructable
from armbridge.survey import (
    LEVELS,
    Category,
    Level,
    Questionnaire,
    SurveyResponse,
    aggregate,
    default_questionnaire,
    parse_level,
    reconstruct_counts,
    render_table,
    responses_from_csv,
    responses_to_csv,
    summaries_to_csv,
    summaries_to_json,
)
from survey_data import TABLE1_ROWS, build_responses, within_band


def counts_for_table1() -> list[tuple[int, ...]]:
    return [
        reconstruct_counts(pcts, 15 * nq)[0]
        for _, nq, pcts in TABLE1_ROWS
    ]


class TestQuestionnaire:
    def test_default_instrument_shape(self):
        q = default_questionnaire()
        assert len(q.categories) == 7
        assert len(q.question_ids) == 9
        assert q.categories[0].question_ids == ("q1", "q2", "q3")

    def test_duplicate_question_rejected(self):
        with pytest.raises(ValueError):
            Questionnaire((
                Category("a", ("q1",)),
                Category("b", ("q1",)),
            ))

    def test_json_round_trip(self):
        q = default_questionnaire()
        assert Questionnaire.from_dict(q.to_dict()) == q


class TestAggregate:
    def test_simplicity_in_use_row(self):
        counts = [(45, 0, 0, 0, 0), (15, 0, 0, 0, 0), (15, 0, 0, 0, 0),
                  (15, 0, 0, 0, 0), (10, 5, 0, 0, 0), (15, 0, 0, 0, 0),
                  (15, 0, 0, 0, 0)]
        summaries = aggregate(build_responses(counts), default_questionnaire())
        simplicity = summaries[4]
        assert simplicity.name == "Simplicity in Use"
        assert simplicity.percent_strings[:2] == ("66.67", "33.33")
        # printed values are 66.66 / 33.33: within the 0.01 band
        assert within_band(simplicity.percents[0], 66.66)
        assert within_band(simplicity.percents[1], 33.33)

    def test_robot_convenience_row_over_45_answers(self):
        counts = counts_for_table1()
        summaries = aggregate(build_responses(counts), default_questionnaire())
        convenience = summaries[0]
        assert convenience.question_count == 3
        assert convenience.counts == (17, 19, 6, 3, 0)
        expected = (37.78, 42.22, 13.33, 6.67, 0.0)
        for got, want in zip(convenience.percents, expected):
            assert got == pytest.approx(want, abs=1e-9)

    def test_single_subject_all_very_satisfied(self):
        q = default_questionnaire()
        answers = {qid: Level.VERY_SATISFIED for qid in q.question_ids}
        summaries = aggregate([SurveyResponse("solo", answers)], q)
        for s in summaries:
            assert s.percent_strings == ("100.00", "0.00", "0.00", "0.00", "0.00")

    def test_incomplete_response_identified(self):
        q = default_questionnaire()
        answers = {qid: Level.SATISFIED for qid in q.question_ids if qid != "q5"}
        with pytest.raises(IncompleteResponse) as err:
            aggregate([SurveyResponse("p1", answers)], q)
        assert err.value.subject_id == "p1"
        assert err.value.question_id == "q5"

    def test_fractions_sum_to_exactly_one(self):
        summaries = aggregate(build_responses(counts_for_table1()), default_questionnaire())
        for s in summaries:
            assert sum(s.fractions, Fraction(0)) == 1

    def test_permutation_invariance(self):
        q = default_questionnaire()
        responses = build_responses(counts_for_table1())
        shuffled = responses[:]
        random.Random(11).shuffle(shuffled)
        assert aggregate(shuffled, q) == aggregate(responses, q)
        # question order within a category does not matter either
        q2 = Questionnaire(tuple(
            Category(c.name, tuple(reversed(c.question_ids))) for c in q.categories
        ))
        assert [s.counts for s in aggregate(responses, q2)] == \
               [s.counts for s in aggregate(responses, q)]


class TestReconstructCounts:
    def test_robot_safety_unique_match(self):
        assert reconstruct_counts((53.33, 33.33, 13.33, 0, 0), 15) == [(8, 5, 2, 0, 0)]

    def test_all_very_satisfied(self):
        for n in (1, 7, 15, 45):
            assert reconstruct_counts((100, 0, 0, 0, 0), n) == [(n, 0, 0, 0, 0)]

    def test_parity_impossibility(self):
        with pytest.raises(Unreconstructable):
            reconstruct_counts((50, 50, 0, 0, 0), 3)

    def test_total_cap(self):
        with pytest.raises(ValueError):
            reconstruct_counts((100, 0, 0, 0, 0), 1001)

    def test_every_table_row_reconstructs_uniquely(self):
        for name, nq, pcts in TABLE1_ROWS:
            matches = reconstruct_counts(pcts, 15 * nq)
            assert len(matches) == 1, name
            assert sum(matches[0]) == 15 * nq

    @settings(max_examples=100)
    @given(
        st.integers(1, 30).flatmap(
            lambda n: st.tuples(
                st.just(n),
                st.lists(st.integers(0, len(LEVELS) - 1), min_size=n, max_size=n),
            )
        )
    )
    def test_round_trip_containment(self, n_and_answers):
        # reconstruct(aggregate(D)) always contains D's true count vector
        n, answers = n_and_answers
        counts = [0] * len(LEVELS)
        for a in answers:
            counts[a] += 1
        percents = [
            round(100 * c / n, 2) for c in counts
        ]
        matches = reconstruct_counts(percents, n)
        assert tuple(counts) in matches


class TestRenderTable:
    def test_full_reconstruction_matches_printed_table(self):
        summaries = aggregate(build_responses(counts_for_table1()), default_questionnaire())
        text = render_table(summaries)
        for (name, nq, pcts), summary in zip(TABLE1_ROWS, summaries):
            assert summary.name == name
            assert summary.question_count == nq
            for got, printed in zip(summary.percents, pcts):
                assert within_band(got, printed), (name, got, printed)
            assert name in text

    def test_empty_renders_header_only(self):
        text = render_table([])
        lines = text.strip().split("\n")
        assert len(lines) == 2  # header + rule
        assert "Type of Questions" in lines[0]

    def test_single_category_single_row(self):
        counts = counts_for_table1()
        summaries = aggregate(build_responses(counts), default_questionnaire())
        text = render_table(summaries[:1])
        assert text.strip().count("\n") == 2


class TestInterchange:
    def test_csv_round_trip(self):
        q = default_questionnaire()
        responses = build_responses(counts_for_table1())
        text = responses_to_csv(responses, q)
        back = responses_from_csv(text)
        assert back == responses

    def test_level_aliases(self):
        assert parse_level("Very Satisfied") is Level.VERY_SATISFIED
        assert parse_level("natural") is Level.NEUTRAL
        assert parse_level("unsatisfied") is Level.UNSATISFIED
        with pytest.raises(ValueError):
            parse_level("meh")

    def test_summaries_csv_shape(self):
        summaries = aggregate(build_responses(counts_for_table1()), default_questionnaire())
        text = summaries_to_csv(summaries)
        lines = text.strip().split("\n")
        assert len(lines) == 8
        assert lines[0].startswith("category,question_count,very_satisfied")

    def test_summaries_json_shape(self):
        summaries = aggregate(build_responses(counts_for_table1()), default_questionnaire())
        data = summaries_to_json(summaries)
        assert len(data["categories"]) == 7
        assert data["categories"][1]["percents"]["very_satisfied"] == 53.33
