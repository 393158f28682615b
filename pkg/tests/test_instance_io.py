"""Instance files: schema validation, round trips, generator determinism."""

import json
import math

import pytest

from speedshare.instance_io import (
    SchemaError,
    dump_json,
    generate_instance,
    instance_payload,
    parse_instance,
    payload_to_instance,
)
from speedshare.mechanisms import outcome
from speedshare.model import (
    Announcement,
    DeadlineJob,
    NonPositiveField,
    PenaltyJob,
    validate_instance,
)


def _payload_a(**overrides):
    payload = {
        "version": 1,
        "alpha": 2.0,
        "user_type": "A",
        "jobs": [
            {"id": 1, "w": 1.0, "d": 0.5, "U": 10.0},
            {"id": 2, "w": 3.0, "d": 2.0, "U": 10.0},
        ],
    }
    payload.update(overrides)
    return payload


class TestPayloadValidation:
    def test_valid_roundtrip(self):
        inst, anns = payload_to_instance(_payload_a())
        assert inst.kind == "A"
        assert inst.n == 2
        assert anns is None

    def test_unknown_top_level_field(self):
        with pytest.raises(SchemaError, match=r"unknown field\(s\) \['color'\]"):
            payload_to_instance(_payload_a(color="red"))

    def test_missing_field(self):
        payload = _payload_a()
        del payload["alpha"]
        with pytest.raises(SchemaError, match=r"missing field\(s\) \['alpha'\]"):
            payload_to_instance(payload)

    def test_wrong_version(self):
        with pytest.raises(SchemaError, match="unsupported version"):
            payload_to_instance(_payload_a(version=2))

    def test_bad_user_type(self):
        with pytest.raises(SchemaError, match="user_type"):
            payload_to_instance(_payload_a(user_type="C"))

    def test_job_unknown_field(self):
        payload = _payload_a()
        payload["jobs"][0]["extra"] = 1
        with pytest.raises(SchemaError, match=r"jobs\[0\]: unknown field\(s\) \['extra'\]"):
            payload_to_instance(payload)

    def test_type_a_job_with_rate_key(self):
        payload = _payload_a()
        payload["jobs"][0] = {"id": 1, "w": 1.0, "p": 3.0, "U": 10.0}
        with pytest.raises(SchemaError, match=r"missing field\(s\) \['d'\]"):
            payload_to_instance(payload)

    def test_boolean_is_not_a_number(self):
        payload = _payload_a()
        payload["jobs"][0]["w"] = True
        with pytest.raises(SchemaError, match="expected a number"):
            payload_to_instance(payload)

    def test_boolean_is_not_an_id(self):
        payload = _payload_a()
        payload["jobs"][0]["id"] = True
        with pytest.raises(SchemaError, match="expected an integer"):
            payload_to_instance(payload)

    def test_duplicate_ids(self):
        payload = _payload_a()
        payload["jobs"][1]["id"] = 1
        with pytest.raises(SchemaError, match="id 1 duplicated"):
            payload_to_instance(payload)

    def test_ids_must_be_contiguous(self):
        payload = _payload_a()
        payload["jobs"][1]["id"] = 5
        with pytest.raises(SchemaError, match="contiguous from 1"):
            payload_to_instance(payload)

    def test_empty_jobs(self):
        with pytest.raises(SchemaError, match="non-empty"):
            payload_to_instance(_payload_a(jobs=[]))

    def test_value_errors_come_from_model(self):
        payload = _payload_a()
        payload["jobs"][0]["w"] = 0.0
        with pytest.raises(NonPositiveField):
            payload_to_instance(payload)

    def test_announcements_parsed(self):
        payload = _payload_a(
            announcements=[{"id": 1, "value": 0.7}, {"id": 2, "participate": False}]
        )
        _, anns = payload_to_instance(payload)
        assert anns == (Announcement(1, 0.7, True), Announcement(2, None, False))

    def test_announcement_unknown_id(self):
        payload = _payload_a(announcements=[{"id": 7}])
        with pytest.raises(SchemaError, match="no job with id 7"):
            payload_to_instance(payload)

    def test_announcement_duplicate(self):
        payload = _payload_a(announcements=[{"id": 1}, {"id": 1}])
        with pytest.raises(SchemaError, match="id 1 duplicated"):
            payload_to_instance(payload)

    def test_announcement_bad_participate(self):
        payload = _payload_a(announcements=[{"id": 1, "participate": 1}])
        with pytest.raises(SchemaError, match="expected a boolean"):
            payload_to_instance(payload)


class TestFiles:
    def test_parse_rejects_bad_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{\n  \"version\": 1,\n", encoding="utf-8")
        with pytest.raises(SchemaError, match="invalid JSON at line"):
            parse_instance(path)

    def test_parse_rejects_non_object(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(SchemaError, match="top level"):
            parse_instance(path)

    def test_round_trip_exact(self, tmp_path):
        inst = validate_instance(
            2.5,
            [PenaltyJob(1, 0.3, 1.7, 4.25), PenaltyJob(2, 2.0, 0.9, 3.5)],
        )
        anns = (Announcement(2, 1.1, True),)
        path = tmp_path / "b.json"
        path.write_text(dump_json(instance_payload(inst, anns)), encoding="utf-8")
        inst2, anns2 = parse_instance(path)
        assert inst2.alpha.value == inst.alpha.value
        assert inst2.jobs == inst.jobs
        assert anns2 == anns
        # emitting again is byte-identical
        again = dump_json(instance_payload(inst2, anns2))
        assert again == path.read_text(encoding="utf-8")

    def test_dump_is_sorted_and_newline_terminated(self):
        text = dump_json({"b": 1, "a": [2.5]})
        assert text == '{\n  "a": [\n    2.5\n  ],\n  "b": 1\n}\n'


class TestGenerator:
    def test_deterministic(self):
        a = generate_instance(7, 4, "A")
        b = generate_instance(7, 4, "A")
        assert a.jobs == b.jobs
        assert generate_instance(8, 4, "A").jobs != a.jobs

    @pytest.mark.parametrize("kind", ["A", "B"])
    def test_fields_positive_and_ordered(self, kind):
        inst = generate_instance(3, 6, kind, alpha=2.5)
        assert inst.n == 6
        assert inst.kind == kind
        for job in inst.jobs:
            assert job.w > 0.0
            assert job.U > 0.0
        if kind == "A":
            deadlines = [j.d for j in inst.jobs]
            assert deadlines == sorted(deadlines)
            assert all(d > 0 for d in deadlines)

    @pytest.mark.parametrize("kind", ["A", "B"])
    def test_utilities_leave_unit_surplus(self, kind):
        # calibration: truthful participation nets each user exactly 1
        inst = generate_instance(11, 5, kind)
        got = outcome(inst)
        for u in range(1, 6):
            assert math.isclose(got.welfares[u], 1.0, rel_tol=1e-9)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            generate_instance(1, 0, "A")
        with pytest.raises(ValueError):
            generate_instance(1, 3, "Q")
