"""Energy-minimal speed profiles for deadline instances.

The solver sweeps jobs in deadline order, pushing one (work, gap) pair per
job onto a stack and merging neighbours whose speeds are out of order.  The
result is the cheapest profile that meets every deadline; its block speeds
strictly decrease.  ``exhaustive_oracle`` independently recomputes the
optimum by trying every candidate set of tight deadlines and is the
reference implementation the solver is tested against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .model import (
    REL_TOL,
    DeadlineJob,
    ScheduleResult,
    SpeedProfile,
    TooLarge,
    completion_times,
    energy,
)

ORACLE_LIMIT = 12


def _check_deadline_sorted(jobs: Sequence[DeadlineJob]) -> None:
    for prev, cur in zip(jobs, jobs[1:]):
        if cur.d < prev.d:
            raise ValueError("jobs must be sorted by deadline")
    if jobs and jobs[0].d <= 0.0:
        raise ValueError("first deadline must be positive")


def optimal_profile(
    jobs: Sequence[DeadlineJob], *, ops: dict[str, int] | None = None
) -> SpeedProfile:
    """Cheapest speed profile meeting every deadline.

    ``jobs`` must be deadline-sorted (ties allowed; a zero gap merges
    unconditionally on the next iteration because the out-of-order test
    ``v2 * ell <= v * ell2`` always holds when ``ell = 0``).  Pass ``ops``
    to collect push/pop counts; each pair enters and leaves the stack a
    bounded number of times, so the sweep is linear after sorting.
    """
    _check_deadline_sorted(jobs)
    stack: list[tuple[float, float]] = []
    pushes = 0
    pops = 0
    prev_d = 0.0
    for job in jobs:
        gap = job.d - prev_d
        prev_d = job.d
        stack.append((job.w, gap))
        pushes += 1
        while len(stack) >= 2:
            v, ell = stack[-1]
            v2, ell2 = stack[-2]
            if v2 * ell <= v * ell2:  # speed below <= speed on top: out of order
                stack.pop()
                stack.pop()
                pops += 2
                stack.append((v + v2, ell + ell2))
                pushes += 1
            else:
                break
    if ops is not None:
        ops["pushes"] = pushes
        ops["pops"] = pops
    return SpeedProfile(tuple(stack))


@dataclass(frozen=True)
class Feasibility:
    """Per-job slack of delivered work against required work at each deadline."""

    feasible: bool
    slacks: tuple[float, ...]


def feasibility_check(
    profile: SpeedProfile, jobs: Sequence[DeadlineJob]
) -> Feasibility:
    """Whether the profile delivers each deadline's cumulative work in time.

    ``slacks[i]`` is work delivered by deadline i minus work due by then;
    feasible means every slack >= 0 up to 1e-9 relative.
    """
    cum = 0.0
    slacks: list[float] = []
    feasible = True
    for job in jobs:
        cum += job.w
        slack = profile.work_by(job.d) - cum
        slacks.append(slack)
        if slack < -REL_TOL * cum:
            feasible = False
    return Feasibility(feasible, tuple(slacks))


def exhaustive_oracle(
    jobs: Sequence[DeadlineJob], alpha: float = 2.0
) -> SpeedProfile:
    """Reference optimum by enumerating candidate tight-deadline sets.

    Any optimal profile changes speed only at deadlines and delivers exactly
    the due work at each speed change, so enumerating every subset of the
    interior deadlines as block boundaries (the last deadline is always one)
    and keeping the cheapest feasible candidate with strictly decreasing
    speeds recovers the optimum.  The minimizer itself does not depend on the
    exponent (the optimal profile is cheapest for every convex power at
    once); ``alpha`` only prices the candidates during comparison.  Ties in
    energy resolve to the lexicographically smallest boundary set.
    Exponential in n; refuses n > ORACLE_LIMIT.
    """
    _check_deadline_sorted(jobs)
    if len(jobs) > ORACLE_LIMIT:
        raise TooLarge(
            f"oracle enumerates at most {ORACLE_LIMIT} jobs, got {len(jobs)}"
        )
    # distinct deadlines, each with the cumulative work due by it
    marks: list[tuple[float, float]] = []
    cum = 0.0
    for job in jobs:
        cum += job.w
        if marks and marks[-1][0] == job.d:
            marks[-1] = (job.d, cum)
        else:
            marks.append((job.d, cum))
    m = len(marks)
    feas_tol = 1e-12 * marks[-1][1]
    best_energy = float("inf")
    best_bounds: tuple[float, ...] | None = None
    best_blocks: tuple[tuple[float, float], ...] | None = None
    for mask in range(1 << (m - 1)):
        bounds = [marks[i] for i in range(m - 1) if mask >> i & 1]
        bounds.append(marks[-1])
        prev_d = 0.0
        prev_w = 0.0
        blocks: list[tuple[float, float]] = []
        ok = True
        for d, cw in bounds:
            v = cw - prev_w
            ell = d - prev_d
            if blocks and not v * blocks[-1][1] < blocks[-1][0] * ell:
                ok = False  # speeds not strictly decreasing
                break
            blocks.append((v, ell))
            prev_d, prev_w = d, cw
        if not ok:
            continue
        # interior deadlines that are not boundaries must still get their work
        bi = 0
        seg_d0 = 0.0
        seg_w0 = 0.0
        for d, cw in marks:
            while d > bounds[bi][0]:
                seg_d0, seg_w0 = bounds[bi]
                bi += 1
            v, ell = blocks[bi]
            if seg_w0 + v * ((d - seg_d0) / ell) < cw - feas_tol:
                ok = False
                break
        if not ok:
            continue
        cand_energy = sum(v ** alpha * ell ** (1.0 - alpha) for v, ell in blocks)
        bound_ds = tuple(d for d, _ in bounds)
        if cand_energy < best_energy or (
            cand_energy == best_energy
            and best_bounds is not None
            and bound_ds < best_bounds
        ):
            best_energy = cand_energy
            best_bounds = bound_ds
            best_blocks = tuple(blocks)
    assert best_blocks is not None  # the all-boundaries candidate always qualifies
    return SpeedProfile(best_blocks)


def solve_deadline_schedule(
    jobs: Sequence[DeadlineJob], alpha: float
) -> ScheduleResult:
    """Optimal profile plus per-job completion times, spans, and energy."""
    profile = optimal_profile(jobs)
    order = tuple(j.id for j in jobs)
    times = completion_times(profile, order, {j.id: j.w for j in jobs})
    lengths = tuple(t - prev for t, prev in zip(times, (0.0,) + times[:-1]))
    block_of: list[int] = []
    cum_v = profile.blocks[0][0]
    bi = 0
    target = 0.0
    tol = REL_TOL * max(1.0, profile.total_work)
    for job in jobs:
        target += job.w
        while bi < len(profile.blocks) - 1 and cum_v < target - tol:
            bi += 1
            cum_v += profile.blocks[bi][0]
        block_of.append(bi)
    return ScheduleResult(
        order=order,
        times=times,
        lengths=lengths,
        profile=profile,
        energy=energy(profile, alpha),
        block_of=tuple(block_of),
    )
