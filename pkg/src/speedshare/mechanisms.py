"""Cost-sharing mechanisms over the optimal schedules.

The proportional mechanism charges each deadline user the energy of its own
execution interval; the sum of shares recovers the schedule energy exactly,
which is verified rather than assumed.  The penalty-side mechanism charges
each user the announced-rate-adjusted running cost of every span up to its
own completion; it overcharges relative to energy (the surplus is the delay
externality) and makes truthful rate announcements a best response under a
fixed order.  ``outcome`` assembles shares, completion times, and welfares
for a full announcement profile, honoring opt-outs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

from .model import (
    REL_TOL,
    Announcement,
    DeadlineJob,
    Instance,
    PenaltyJob,
    ScheduleResult,
    welfare_a,
    welfare_b,
)
from .deadline_solver import solve_deadline_schedule
from .penalty_solver import _suffix_penalties, interval_lengths, schedule_penalty_jobs


class ZeroEnergy(ValueError):
    """Budget balance is undefined against a schedule that draws no energy."""


@dataclass(frozen=True)
class ShareVector:
    """Per-user cost shares (utility units, nonnegative) plus a mechanism tag."""

    by_user: dict[int, float]
    mechanism: str

    @property
    def total(self) -> float:
        return sum(self.by_user.values())


@dataclass(frozen=True)
class BudgetBalance:
    """Collected-to-spent ratio; ``undercharged`` flags collection below energy."""

    ratio: float
    undercharged: bool


def budget_balance_ratio(
    shares: ShareVector | Iterable[float], energy_drawn: float
) -> BudgetBalance:
    """Ratio of collected shares to energy; flags undercharging (1e-9 relative)."""
    if isinstance(shares, ShareVector):
        total = shares.total
    else:
        total = sum(shares)
    if not energy_drawn > 0.0:
        raise ZeroEnergy(f"energy must be positive, got {energy_drawn!r}")
    return BudgetBalance(
        ratio=total / energy_drawn,
        undercharged=total < energy_drawn - REL_TOL * energy_drawn,
    )


def proportional_shares(
    schedule: ScheduleResult, w: Mapping[int, float], alpha: float
) -> ShareVector:
    """Charge each user the energy of its own execution interval.

    The user finishing j-th pays ``(t_j - t_{j-1}) ** (1 - alpha) * w ** alpha``.
    Jobs sharing a constant-speed block split the block energy in proportion
    to workload, so the shares sum to the schedule energy.
    """
    shares: dict[int, float] = {}
    prev = 0.0
    for j, u in enumerate(schedule.order):
        t = schedule.times[j]
        shares[u] = (t - prev) ** (1.0 - alpha) * w[u] ** alpha
        prev = t
    return ShareVector(shares, "proportional")


def mechanism_x_shares(
    order: Sequence[int],
    w: Mapping[int, float],
    p_hat: Mapping[int, float],
    alpha: float,
) -> ShareVector:
    """Charge each user the rate-adjusted running cost of spans up to its own.

    The user at rank j pays ``sum_{k<=j} (alpha * s_k**alpha - p_hat_j) * ell_k``
    where ``s_k**alpha`` is the suffix penalty sum at rank k over (alpha - 1).
    An algebraically equivalent form replaces each addend with
    ``(p_hat_j + alpha * (S_k - p_hat_j)) * ell_k / (alpha - 1)``; both are
    computed and must agree within 1e-9 relative.
    """
    lengths = interval_lengths(order, w, p_hat, alpha)
    suffix = _suffix_penalties(order, p_hat)
    speed_pow = [s / (alpha - 1.0) for s in suffix]  # s_k ** alpha per rank
    shares: dict[int, float] = {}
    for j, u in enumerate(order):
        rate = p_hat[u]
        primary = sum(
            (alpha * speed_pow[k] - rate) * lengths[k] for k in range(j + 1)
        )
        alternate = sum(
            (rate + alpha * (suffix[k] - rate)) * lengths[k] for k in range(j + 1)
        ) / (alpha - 1.0)
        if not math.isclose(primary, alternate, rel_tol=REL_TOL, abs_tol=0.0):
            raise RuntimeError(
                f"cost-share forms disagree for user {u}: {primary} vs {alternate}"
            )
        shares[u] = primary
    return ShareVector(shares, "x")


@dataclass(frozen=True)
class MechanismOutcome:
    """Everything a mechanism run produces for one announcement profile.

    ``shares``, ``announced_times`` cover participating users; ``welfares``
    covers every user (opt-outs get exactly 0.0).  ``bb_ratio`` is None only
    when nobody participates.  ``order_method`` records how the penalty-side
    order was picked.
    """

    mechanism: str
    participating: tuple[int, ...]
    shares: dict[int, float]
    announced_times: dict[int, float]
    welfares: dict[int, float]
    total_welfare: float
    bb_ratio: float | None
    undercharged: bool
    schedule: ScheduleResult | None
    order_method: str | None = None


def _resolve_announcements(
    instance: Instance, announcements: Iterable[Announcement] | None
) -> tuple[list[DeadlineJob] | list[PenaltyJob], list[int]]:
    """Split jobs into participating (with declared values applied) and opted out."""
    by_user: dict[int, Announcement] = {}
    ids = {j.id for j in instance.jobs}
    for a in announcements or ():
        if a.user not in ids:
            raise ValueError(f"announcement for unknown user {a.user}")
        if a.user in by_user:
            raise ValueError(f"multiple announcements for user {a.user}")
        if a.participate and a.value is not None:
            if not (isinstance(a.value, (int, float)) and math.isfinite(a.value) and a.value > 0.0):
                raise ValueError(f"user {a.user}: declared value must be positive and finite")
        by_user[a.user] = a
    active = []
    opted_out = []
    for job in instance.jobs:
        a = by_user.get(job.id)
        if a is not None and not a.participate:
            opted_out.append(job.id)
            continue
        if a is not None and a.value is not None:
            declared = float(a.value)
            if isinstance(job, DeadlineJob):
                job = replace(job, d=declared)
            else:
                job = replace(job, p=declared)
        active.append(job)
    return active, opted_out


def outcome(
    instance: Instance,
    announcements: Iterable[Announcement] | None = None,
    mechanism: str | None = None,
) -> MechanismOutcome:
    """Run the instance's mechanism for an announcement profile.

    Scheduling always uses declared values; welfare always uses true private
    values.  Defaults: truthful full participation, proportional sharing for
    deadline instances, the penalty-side mechanism ("x") otherwise.
    """
    kind = instance.kind
    mech = mechanism if mechanism is not None else ("proportional" if kind == "A" else "x")
    if mech not in ("proportional", "x"):
        raise ValueError(f"unknown mechanism {mech!r}")
    if (kind == "A") != (mech == "proportional"):
        raise ValueError(f"mechanism {mech!r} does not apply to user type {kind!r}")
    active, opted_out = _resolve_announcements(instance, announcements)
    welfares: dict[int, float] = {u: 0.0 for u in opted_out}
    shares: dict[int, float] = {u: 0.0 for u in opted_out}
    if not active:
        return MechanismOutcome(
            mechanism=mech,
            participating=(),
            shares=shares,
            announced_times={},
            welfares=welfares,
            total_welfare=0.0,
            bb_ratio=None,
            undercharged=False,
            schedule=None,
        )
    alpha = instance.alpha.value
    order_method: str | None = None
    if kind == "A":
        active.sort(key=lambda j: (j.d, j.id))
        schedule = solve_deadline_schedule(active, alpha)
        share_vec = proportional_shares(schedule, {j.id: j.w for j in active}, alpha)
    else:
        rates = {j.id: j.p for j in active}
        schedule, order_method = schedule_penalty_jobs(active, alpha, p_hat=rates)
        share_vec = mechanism_x_shares(
            schedule.order, {j.id: j.w for j in active}, rates, alpha
        )
    times = {u: schedule.times[j] for j, u in enumerate(schedule.order)}
    for job in active:
        true_job = instance.job(job.id)
        if kind == "A":
            welfares[job.id] = welfare_a(true_job, times[job.id], share_vec.by_user[job.id])
        else:
            welfares[job.id] = welfare_b(true_job, times[job.id], share_vec.by_user[job.id])
        shares[job.id] = share_vec.by_user[job.id]
    balance = budget_balance_ratio(share_vec, schedule.energy)
    return MechanismOutcome(
        mechanism=mech,
        participating=tuple(j.id for j in active),
        shares=shares,
        announced_times=times,
        welfares=welfares,
        total_welfare=sum(welfares.values()),
        bb_ratio=balance.ratio,
        undercharged=balance.undercharged,
        schedule=schedule,
        order_method=order_method,
    )
