"""Domain types and shared arithmetic for the speed-scaling scheduling game.

A single machine runs at a controllable speed; running at speed ``s`` draws
power ``s ** alpha``, so a constant-speed block that delivers ``v`` units of
work over a span of length ``ell`` costs ``v ** alpha * ell ** (1 - alpha)``
energy.  Two kinds of users submit jobs:

* deadline users (``user_type`` "A") collect a fixed utility ``U`` when the
  job completes by their private deadline ``d`` and nothing otherwise;
* penalty users (``user_type`` "B") collect ``U - p * t`` when the job
  completes at time ``t``, where ``p`` is a private delay penalty rate.

A user's welfare is the collected utility minus the cost share the regulator
charges.  Users act to maximize welfare.

Units: workloads are work units, times and deadlines are time units, speeds
are work per time, utilities / energy / shares are utility units (energy is
charged one-for-one against utility).  All arithmetic is double precision;
tolerance-based comparisons default to ``REL_TOL`` relative unless a caller
states otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

REL_TOL = 1e-9


class InvalidInstance(ValueError):
    """Base class for instance validation failures."""


class NonPositiveField(InvalidInstance):
    """A job field that must be strictly positive is zero or negative."""

    def __init__(self, field_name: str, job_id: int):
        super().__init__(f"job {job_id}: field {field_name!r} must be > 0")
        self.field_name = field_name
        self.job_id = job_id


class NonFiniteField(InvalidInstance):
    """A job field is NaN or infinite."""

    def __init__(self, field_name: str, job_id: int):
        super().__init__(f"job {job_id}: field {field_name!r} must be finite")
        self.field_name = field_name
        self.job_id = job_id


class EmptyInstance(InvalidInstance):
    """An instance with no jobs."""

    def __init__(self) -> None:
        super().__init__("instance has no jobs")


class BadAlpha(InvalidInstance):
    """Power exponent outside the admissible range (must be finite, > 1)."""

    def __init__(self, value: float):
        super().__init__(f"alpha must be finite and > 1, got {value!r}")
        self.value = value


class WorkMismatch(ValueError):
    """A profile's total work does not cover the jobs it is asked to serve."""


class TooLarge(ValueError):
    """An exhaustive procedure was asked for more jobs than it enumerates."""


@dataclass(frozen=True)
class Alpha:
    """Power-law exponent of the speed/power curve.

    Hardware models put the exponent around 2 to 3; anything > 1 is
    mathematically admissible.  ``outside_typical_range`` is a warning flag,
    not an error: solvers work for any ``value > 1``.
    """

    value: float

    def __post_init__(self) -> None:
        if not isinstance(self.value, (int, float)) or isinstance(self.value, bool):
            raise BadAlpha(self.value)
        v = float(self.value)
        if not math.isfinite(v) or v <= 1.0:
            raise BadAlpha(v)
        object.__setattr__(self, "value", v)

    @property
    def outside_typical_range(self) -> bool:
        return not (2.0 <= self.value <= 3.0)


@dataclass(frozen=True)
class DeadlineJob:
    """A deadline user's job: utility ``U`` if done by ``d``, else zero."""

    id: int
    w: float
    d: float
    U: float


@dataclass(frozen=True)
class PenaltyJob:
    """A penalty user's job: utility ``U - p * t`` at completion time ``t``."""

    id: int
    w: float
    p: float
    U: float


Job = DeadlineJob | PenaltyJob


@dataclass(frozen=True)
class Announcement:
    """A user's declared private value (deadline or penalty rate).

    ``value=None`` declares the true value.  ``participate=False`` opts the
    user out: the job is not scheduled, the user pays nothing and ends with
    welfare zero.
    """

    user: int
    value: float | None = None
    participate: bool = True


@dataclass(frozen=True)
class Instance:
    """A validated set of same-kind jobs plus the power exponent.

    Deadline jobs are stored sorted by (deadline, id); penalty jobs by id.
    Build through :func:`validate_instance` rather than directly.
    """

    alpha: Alpha
    jobs: tuple[DeadlineJob, ...] | tuple[PenaltyJob, ...]

    @property
    def kind(self) -> str:
        """"A" for deadline instances, "B" for penalty instances."""
        return "A" if isinstance(self.jobs[0], DeadlineJob) else "B"

    @property
    def n(self) -> int:
        return len(self.jobs)

    def job(self, user: int) -> Job:
        for j in self.jobs:
            if j.id == user:
                return j
        raise KeyError(f"no job with id {user}")

    def workloads(self) -> dict[int, float]:
        return {j.id: j.w for j in self.jobs}


def validate_instance(alpha: float | Alpha, jobs: Iterable[Job]) -> Instance:
    """Check field positivity/finiteness, sort canonically, wrap as Instance.

    Raises EmptyInstance, BadAlpha, NonPositiveField, NonFiniteField, or a
    plain InvalidInstance for mixed job kinds and duplicate ids.
    """
    a = alpha if isinstance(alpha, Alpha) else Alpha(alpha)
    job_list = list(jobs)
    if not job_list:
        raise EmptyInstance()
    kinds = {type(j) for j in job_list}
    if len(kinds) != 1:
        raise InvalidInstance("an instance must not mix deadline and penalty jobs")
    seen: set[int] = set()
    for job in job_list:
        if job.id in seen:
            raise InvalidInstance(f"duplicate job id {job.id}")
        seen.add(job.id)
        value_fields = ("w", "d", "U") if isinstance(job, DeadlineJob) else ("w", "p", "U")
        for name in value_fields:
            x = getattr(job, name)
            if not math.isfinite(x):
                raise NonFiniteField(name, job.id)
            if x <= 0.0:
                raise NonPositiveField(name, job.id)
    if isinstance(job_list[0], DeadlineJob):
        job_list.sort(key=lambda j: (j.d, j.id))
    else:
        job_list.sort(key=lambda j: j.id)
    return Instance(a, tuple(job_list))


@dataclass(frozen=True)
class SpeedProfile:
    """A piecewise-constant speed plan as (work, span) blocks, fastest first.

    Block ``(v, ell)`` runs at speed ``v / ell`` for ``ell`` time units and
    delivers ``v`` work units.  Valid profiles have positive entries and
    strictly decreasing block speeds.
    """

    blocks: tuple[tuple[float, float], ...]

    @property
    def duration(self) -> float:
        return sum(ell for _, ell in self.blocks)

    @property
    def total_work(self) -> float:
        return sum(v for v, _ in self.blocks)

    def speeds(self) -> tuple[float, ...]:
        return tuple(v / ell for v, ell in self.blocks)

    def work_by(self, t: float) -> float:
        """Work delivered during [0, t]."""
        remaining = t
        acc = 0.0
        for v, ell in self.blocks:
            if remaining >= ell:
                acc += v
                remaining -= ell
            else:
                if remaining > 0.0:
                    acc += v * (remaining / ell)
                break
        return acc

    def check_valid(self) -> None:
        """Raise ValueError unless entries are positive and speeds strictly drop."""
        for v, ell in self.blocks:
            if not (v > 0.0 and ell > 0.0):
                raise ValueError(f"block ({v}, {ell}) must have positive work and span")
        for (v1, l1), (v2, l2) in zip(self.blocks, self.blocks[1:]):
            # compare speeds v1/l1 > v2/l2 by cross products to avoid division rounding
            if not v2 * l1 < v1 * l2:
                raise ValueError("block speeds must be strictly decreasing")


def energy(profile: SpeedProfile, alpha: float) -> float:
    """Energy drawn by a profile: sum of v**alpha * ell**(1 - alpha) per block."""
    return sum(v ** alpha * ell ** (1.0 - alpha) for v, ell in profile.blocks)


def completion_times(
    profile: SpeedProfile,
    order: Sequence[int],
    workloads: Mapping[int, float],
) -> tuple[float, ...]:
    """Completion time of each job when run back to back under ``profile``.

    ``order`` lists job ids in execution order; ``workloads`` maps id to work.
    The completion time of the j-th job is the earliest moment the profile
    has delivered the first j jobs' total work.  The profile must cover the
    total workload (WorkMismatch otherwise, 1e-9 relative).
    """
    loads = [float(workloads[u]) for u in order]
    total_w = sum(loads)
    total_v = profile.total_work
    if abs(total_v - total_w) > REL_TOL * max(abs(total_v), abs(total_w)):
        raise WorkMismatch(
            f"profile delivers {total_v} work units but jobs need {total_w}"
        )
    blocks = profile.blocks
    tol = REL_TOL * max(1.0, total_w)
    times: list[float] = []
    target = 0.0
    bi = 0
    block_t0 = 0.0  # time when current block starts
    block_w0 = 0.0  # work delivered before current block
    for w in loads:
        target += w
        while bi < len(blocks) - 1 and block_w0 + blocks[bi][0] < target - tol:
            block_t0 += blocks[bi][1]
            block_w0 += blocks[bi][0]
            bi += 1
        v, ell = blocks[bi]
        frac = (target - block_w0) / v
        if frac > 1.0:
            frac = 1.0
        elif frac < 0.0:
            frac = 0.0
        times.append(block_t0 + frac * ell)
    return tuple(times)


@dataclass(frozen=True)
class ScheduleResult:
    """A solved schedule: who runs when, at what cost.

    ``order`` lists job ids by rank (``order[j]`` runs (j+1)-th), ``times``
    and ``lengths`` align with it (``lengths[j]`` is the execution span
    ``times[j] - times[j-1]``), ``block_of`` maps rank to the index of the
    profile block the job finishes in, and ``energy`` is the profile energy.
    """

    order: tuple[int, ...]
    times: tuple[float, ...]
    lengths: tuple[float, ...]
    profile: SpeedProfile
    energy: float
    block_of: tuple[int, ...]

    @property
    def rank_of(self) -> dict[int, int]:
        """Inverse of ``order``: job id to 0-based rank."""
        return {u: j for j, u in enumerate(self.order)}

    def time_of(self, user: int) -> float:
        return self.times[self.rank_of[user]]


def deadline_met(t_hat: float, deadline: float, tol: float = REL_TOL) -> bool:
    """Whether a completion time honors a deadline, up to relative rounding slop."""
    return t_hat <= deadline + tol * abs(deadline)


def quality_a(job: DeadlineJob, t_hat: float) -> float:
    """Deadline user's collected utility: U on time, 0 late."""
    return job.U if deadline_met(t_hat, job.d) else 0.0


def quality_b(job: PenaltyJob, t_hat: float) -> float:
    """Penalty user's collected utility: U minus the linear delay penalty."""
    return job.U - job.p * t_hat


def welfare_a(job: DeadlineJob, t_hat: float, share: float) -> float:
    """Deadline user's welfare: collected utility minus the cost share."""
    return quality_a(job, t_hat) - share


def welfare_b(job: PenaltyJob, t_hat: float, share: float) -> float:
    """Penalty user's welfare: collected utility minus the cost share."""
    return quality_b(job, t_hat) - share
