import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_record
from simdrive.errors import RecordParseError, SchemaError
from simdrive.prompts import (
    SPEEDS_PREFIX,
    VIEW_NAMES,
    export_prompt_pairs,
    parse_answer,
    render_answer,
    render_prompt,
    spe_descriptor,
)

TABLE_WAYPOINTS = np.array([
    [4.96, 0.12], [8.93, 0.48], [12.62, 1.03],
    [16.27, 1.78], [19.67, 2.68], [22.94, 3.70],
])

TABLE_ANSWER = ("Here is the planning trajectory (+4.96, +0.12), (+8.93, +0.48), "
                "(+12.62, +1.03), (+16.27, +1.78), (+19.67, +2.68), (+22.94, +3.70).")


class TestRenderAnswer:
    def test_published_answer_byte_exact(self):
        assert render_answer(TABLE_WAYPOINTS) == TABLE_ANSWER

    def test_all_zero_waypoints(self):
        out = render_answer(np.zeros((6, 2)))
        assert out.count("(+0.00, +0.00)") == 6

    def test_round_half_even_on_boundary_value(self):
        out = render_answer(np.array([[-1.005, 0.0]] + [[0.0, 0.0]] * 5))
        assert out.startswith("Here is the planning trajectory (-1.00, +0.00)")

    def test_speeds_rendered_unsigned_two_decimals(self):
        out = render_answer(np.zeros((6, 2)), speeds=np.array([8.0, 8.125, 8.25, 9.0, 9.5, 10.0]))
        assert "Speeds: 8.00, 8.12, 8.25, 9.00, 9.50, 10.00." in out

    def test_wrong_count_rejected(self):
        with pytest.raises(SchemaError):
            render_answer(np.zeros((5, 2)))


class TestParseAnswer:
    def test_roundtrip_of_published_answer(self):
        wp, speeds = parse_answer(TABLE_ANSWER)
        assert np.array_equal(wp, TABLE_WAYPOINTS)
        assert speeds is None

    def test_garbage_rejected(self):
        with pytest.raises(RecordParseError):
            parse_answer("garbage text")

    def test_tolerates_preamble_and_whitespace(self):
        s = "Sure! After careful thought:\n  " + TABLE_ANSWER + "   \n"
        wp, _ = parse_answer(s)
        assert np.array_equal(wp, TABLE_WAYPOINTS)

    def test_whitespace_mutations_parse_identically(self):
        mutated = TABLE_ANSWER.replace(", (", ",   (").replace("(+4.96, +0.12)", "( +4.96 , +0.12 )")
        wp, _ = parse_answer(mutated)
        assert np.array_equal(wp, TABLE_WAYPOINTS)

    def test_speeds_roundtrip(self):
        speeds = np.array([3.0, 3.5, 4.0, 4.5, 5.0, 5.5])
        out = render_answer(TABLE_WAYPOINTS, speeds)
        wp, sp = parse_answer(out)
        assert np.array_equal(wp, TABLE_WAYPOINTS)
        assert np.array_equal(sp, speeds)

    def test_missing_speeds_after_marker_rejected(self):
        with pytest.raises(RecordParseError):
            parse_answer(TABLE_ANSWER[:-1] + ". " + SPEEDS_PREFIX + "1.0, 2.0.")

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.tuples(st.floats(-99, 99), st.floats(-99, 99)), min_size=6, max_size=6))
    def test_render_parse_identity_up_to_quantization(self, pts):
        wp = np.array(pts)
        parsed, _ = parse_answer(render_answer(wp))
        assert np.abs(parsed - wp).max() <= 0.005 + 1e-9


class TestRenderPrompt:
    def test_sim_record_contains_spe_line(self):
        p = render_prompt(make_record(city="Town13", provenance="sim"))
        assert "You are driving in Town13 under Simulation scenario." in p.question

    def test_real_record_uses_real_world_wording(self):
        p = render_prompt(make_record(city="Boston", provenance="real",
                                      convention="RH_FLU_ROOF"))
        assert "You are driving in Boston under Real-World scenario." in p.question

    def test_six_video_slots_and_views(self):
        p = render_prompt(make_record())
        assert p.question.count("<video>") == 6
        for name in VIEW_NAMES:
            assert name in p.question

    def test_descriptor_appears_exactly_once(self):
        p = render_prompt(make_record())
        assert p.question.count(p.spe_descriptor) == 1

    def test_provenance_is_the_only_difference(self):
        a = render_prompt(make_record(rid="x", provenance="sim"))
        b = render_prompt(make_record(rid="y", provenance="real", convention="RH_FLU_ROOF"))
        assert a.question.replace("Simulation", "Real-World") == b.question

    def test_turn_command_sentence(self):
        p = render_prompt(make_record(command="turn left"))
        assert "You need to make a left turn at the upcoming intersection, " \
               "please provide the planning trajectory for the ego car." in p.question

    def test_empty_city_rejected(self):
        with pytest.raises(SchemaError):
            spe_descriptor("", "sim")

    def test_deterministic_for_equal_inputs(self):
        a = render_prompt(make_record(rid="p"))
        b = render_prompt(make_record(rid="q"))
        assert a.question == b.question


class TestExport:
    def test_jsonl_pairs(self):
        records = [make_record(rid="a"), make_record(rid="b")]
        buf = io.StringIO()
        export_prompt_pairs(records, buf)
        lines = [json.loads(l) for l in buf.getvalue().splitlines()]
        assert [l["id"] for l in lines] == ["a", "b"]
        assert all(set(l) == {"id", "question", "answer"} for l in lines)
        assert lines[0]["answer"].startswith("Here is the planning trajectory ")
