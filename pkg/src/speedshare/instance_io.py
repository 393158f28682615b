"""Instance files, report serialization, and the seeded instance generator.

Instance files are strict JSON: a version, the power exponent, the user
type, a contiguous id-ordered job list, and optionally per-user
announcements.  Unknown fields anywhere are rejected so typos fail loudly.
Serialization is canonical (sorted keys, repr floats) and writes are atomic
(temp file then rename), so identical inputs produce byte-identical outputs.
"""

from __future__ import annotations

import json
import os
import random
import tempfile
from typing import Iterable, Mapping, Sequence

from .model import (
    Announcement,
    DeadlineJob,
    Instance,
    PenaltyJob,
    validate_instance,
)

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """Instance file violates the expected shape."""


def _require_number(value: object, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _require_keys(obj: Mapping, required: set[str], optional: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    keys = set(obj)
    missing = required - keys
    if missing:
        raise SchemaError(f"{where}: missing field(s) {sorted(missing)}")
    unknown = keys - required - optional
    if unknown:
        raise SchemaError(f"{where}: unknown field(s) {sorted(unknown)}")


def payload_to_instance(
    payload: Mapping,
) -> tuple[Instance, tuple[Announcement, ...] | None]:
    """Validate a decoded instance payload into domain objects."""
    _require_keys(
        payload,
        {"version", "alpha", "user_type", "jobs"},
        {"announcements"},
        "instance",
    )
    if payload["version"] != SCHEMA_VERSION:
        raise SchemaError(f"instance: unsupported version {payload['version']!r}")
    user_type = payload["user_type"]
    if user_type not in ("A", "B"):
        raise SchemaError(f"instance: user_type must be \"A\" or \"B\", got {user_type!r}")
    alpha = _require_number(payload["alpha"], "instance.alpha")
    raw_jobs = payload["jobs"]
    if not isinstance(raw_jobs, list) or not raw_jobs:
        raise SchemaError("instance.jobs: expected a non-empty array")
    value_key = "d" if user_type == "A" else "p"
    jobs = []
    ids = []
    for k, raw in enumerate(raw_jobs):
        where = f"instance.jobs[{k}]"
        _require_keys(raw, {"id", "w", value_key, "U"}, set(), where)
        job_id = raw["id"]
        if isinstance(job_id, bool) or not isinstance(job_id, int):
            raise SchemaError(f"{where}.id: expected an integer, got {job_id!r}")
        ids.append(job_id)
        w = _require_number(raw["w"], f"{where}.w")
        value = _require_number(raw[value_key], f"{where}.{value_key}")
        utility = _require_number(raw["U"], f"{where}.U")
        if user_type == "A":
            jobs.append(DeadlineJob(job_id, w, value, utility))
        else:
            jobs.append(PenaltyJob(job_id, w, value, utility))
    for job_id in ids:
        if ids.count(job_id) > 1:
            raise SchemaError(f"instance.jobs: id {job_id} duplicated")
    if sorted(ids) != list(range(1, len(ids) + 1)):
        raise SchemaError("instance.jobs: ids must be contiguous from 1")
    announcements: tuple[Announcement, ...] | None = None
    if "announcements" in payload:
        raw_anns = payload["announcements"]
        if not isinstance(raw_anns, list):
            raise SchemaError("instance.announcements: expected an array")
        seen: set[int] = set()
        items = []
        for k, raw in enumerate(raw_anns):
            where = f"instance.announcements[{k}]"
            _require_keys(raw, {"id"}, {"value", "participate"}, where)
            user = raw["id"]
            if isinstance(user, bool) or not isinstance(user, int):
                raise SchemaError(f"{where}.id: expected an integer, got {user!r}")
            if user not in set(ids):
                raise SchemaError(f"{where}.id: no job with id {user}")
            if user in seen:
                raise SchemaError(f"instance.announcements: id {user} duplicated")
            seen.add(user)
            participate = raw.get("participate", True)
            if not isinstance(participate, bool):
                raise SchemaError(f"{where}.participate: expected a boolean")
            value = raw.get("value")
            if value is not None:
                value = _require_number(value, f"{where}.value")
            items.append(Announcement(user, value, participate))
        announcements = tuple(items)
    return validate_instance(alpha, jobs), announcements


def parse_instance(path: str | os.PathLike) -> tuple[Instance, tuple[Announcement, ...] | None]:
    """Read and validate an instance file.

    Raises SchemaError (with field diagnostics) for shape problems, the
    model's validation errors for bad values, OSError for I/O failures.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(payload, dict):
        raise SchemaError(f"{path}: expected a JSON object at top level")
    return payload_to_instance(payload)


def instance_payload(
    instance: Instance, announcements: Iterable[Announcement] | None = None
) -> dict:
    """Canonical JSON-ready form of an instance (inverse of payload_to_instance)."""
    value_key = "d" if instance.kind == "A" else "p"
    payload: dict = {
        "version": SCHEMA_VERSION,
        "alpha": instance.alpha.value,
        "user_type": instance.kind,
        "jobs": [
            {
                "id": j.id,
                "w": j.w,
                value_key: getattr(j, value_key),
                "U": j.U,
            }
            for j in sorted(instance.jobs, key=lambda j: j.id)
        ],
    }
    anns = tuple(announcements) if announcements is not None else None
    if anns:
        payload["announcements"] = [
            {
                "id": a.user,
                **({"value": a.value} if a.value is not None else {}),
                "participate": a.participate,
            }
            for a in anns
        ]
    return payload


def dump_json(payload: Mapping) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see a torn file."""
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_instance(
    path: str | os.PathLike,
    instance: Instance,
    announcements: Iterable[Announcement] | None = None,
) -> None:
    atomic_write_text(path, dump_json(instance_payload(instance, announcements)))


def write_table(
    path: str | os.PathLike, header: Sequence[str], rows: Iterable[Sequence[object]]
) -> None:
    """Flat comma-separated table with repr-exact floats, for plotting."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(x) if isinstance(x, float) else str(x) for x in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def generate_instance(seed: int, n: int, kind: str, alpha: float = 2.0) -> Instance:
    """Deterministic random instance with participation-friendly utilities.

    Workloads, penalty rates, and deadline gaps are uniform on (0, 1].  Each
    utility is set one unit above the user's truthful cost (cost share, plus
    delay penalty for penalty users), so truthful participation always earns
    positive welfare.  The same (seed, n, kind, alpha) reproduces the same
    instance bit for bit.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if kind not in ("A", "B"):
        raise ValueError(f"kind must be \"A\" or \"B\", got {kind!r}")
    rng = random.Random(seed)

    def draw() -> float:  # uniform on (0, 1]
        return 1.0 - rng.random()

    # local imports keep module import cheap and avoid a cycle with mechanisms
    from .mechanisms import outcome

    if kind == "A":
        jobs_a: list[DeadlineJob] = []
        deadline = 0.0
        for i in range(1, n + 1):
            work = draw()
            deadline += draw()
            jobs_a.append(DeadlineJob(i, work, deadline, 1.0))
        draft = validate_instance(alpha, jobs_a)
        res = outcome(draft)
        jobs = [
            DeadlineJob(j.id, j.w, j.d, res.shares[j.id] + 1.0) for j in jobs_a
        ]
        return validate_instance(alpha, jobs)
    jobs_b: list[PenaltyJob] = []
    for i in range(1, n + 1):
        work = draw()
        rate = draw()
        jobs_b.append(PenaltyJob(i, work, rate, 1.0))
    draft = validate_instance(alpha, jobs_b)
    res = outcome(draft)
    jobs = [
        PenaltyJob(
            j.id,
            j.w,
            j.p,
            j.p * res.announced_times[j.id] + res.shares[j.id] + 1.0,
        )
        for j in jobs_b
    ]
    return validate_instance(alpha, jobs)
