"""Numerical truthfulness audits for both mechanisms.

Each audit perturbs one user's announcement while everyone else stays
truthful and measures the welfare consequences.  Deadline users sweep a
multiplicative grid of declared deadlines; penalty users sweep declared
rates, either with the completion order frozen at its truthful optimum
(the regime the fixed-order stationarity argument covers) or with the
regulator free to re-optimize the order (findings logged, not asserted).
``foc_check_b`` probes the same stationarity claim with central finite
differences, and ``payoff_table_a`` classifies a deadline user's payoff into
the six announce/outcome cases (declared below, at, or above the truth,
crossed with finishing strictly before or exactly at the declared deadline).
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    Announcement,
    DeadlineJob,
    Instance,
    PenaltyJob,
    deadline_met,
    quality_a,
    welfare_b,
)
from .mechanisms import mechanism_x_shares, outcome
from .penalty_solver import choose_order, interval_lengths

GRID_TOL_A = 1e-9
GRID_TOL_B = 1e-7


class StepTooLarge(ValueError):
    """A finite-difference step too coarse for the rate it perturbs."""


@dataclass(frozen=True)
class GridSpec:
    """Multiplicative announcement grid: ``points`` factors over [low, high].

    The exact truthful announcement is always evaluated in addition, since
    the factor 1.0 need not land on the grid.
    """

    low: float = 0.5
    high: float = 2.0
    points: int = 201

    def factors(self) -> tuple[float, ...]:
        step = (self.high - self.low) / (self.points - 1)
        return tuple(self.low + k * step for k in range(self.points))


@dataclass(frozen=True)
class BestResponse:
    """One user's welfare across a grid of unilateral announcements."""

    user: int
    truthful_value: float
    truthful_welfare: float
    announced: tuple[float, ...]
    welfares: tuple[float, ...]
    best_value: float
    best_welfare: float
    max_gain: float
    truthful_is_best: bool
    tolerance: float
    mode: str


def _summarize(
    user: int,
    truth: float,
    truthful_welfare: float,
    announced: list[float],
    welfares: list[float],
    tolerance: float,
    mode: str,
) -> BestResponse:
    best_idx = max(range(len(announced)), key=lambda k: welfares[k])
    max_gain = welfares[best_idx] - truthful_welfare
    return BestResponse(
        user=user,
        truthful_value=truth,
        truthful_welfare=truthful_welfare,
        announced=tuple(announced),
        welfares=tuple(welfares),
        best_value=announced[best_idx],
        best_welfare=welfares[best_idx],
        max_gain=max_gain,
        truthful_is_best=max_gain <= tolerance,
        tolerance=tolerance,
        mode=mode,
    )


def best_response_a(
    instance: Instance,
    user: int,
    grid: GridSpec = GridSpec(),
    tolerance: float = GRID_TOL_A,
) -> BestResponse:
    """Sweep declared deadlines for one user, everyone else truthful."""
    if instance.kind != "A":
        raise ValueError("deadline audit requires a deadline instance")
    job = instance.job(user)
    assert isinstance(job, DeadlineJob)
    truth = job.d
    values = sorted({f * truth for f in grid.factors()} | {truth})
    truthful_welfare = outcome(instance).welfares[user]
    welfares = []
    for v in values:
        if v == truth:
            welfares.append(truthful_welfare)
        else:
            welfares.append(outcome(instance, (Announcement(user, v),)).welfares[user])
    return _summarize(user, truth, truthful_welfare, values, welfares, tolerance, "announced-deadline")


def _fixed_order_welfare(
    instance: Instance,
    order: tuple[int, ...],
    user: int,
    declared: float,
) -> float:
    """Welfare of ``user`` when only its declared rate changes and the order stays put."""
    w = {j.id: j.w for j in instance.jobs}
    rates = {j.id: j.p for j in instance.jobs}
    rates[user] = declared
    alpha = instance.alpha.value
    lengths = interval_lengths(order, w, rates, alpha)
    t = 0.0
    t_user = 0.0
    for j, u in enumerate(order):
        t += lengths[j]
        if u == user:
            t_user = t
            break
    shares = mechanism_x_shares(order, w, rates, alpha)
    job = instance.job(user)
    assert isinstance(job, PenaltyJob)
    return welfare_b(job, t_user, shares.by_user[user])


def best_response_b(
    instance: Instance,
    user: int,
    grid: GridSpec = GridSpec(),
    mode: str = "fixed-order",
    tolerance: float = GRID_TOL_B,
) -> BestResponse:
    """Sweep declared penalty rates for one user, everyone else truthful.

    ``mode="fixed-order"`` freezes the truthful optimal order while the
    declared rate varies (the audited stationarity regime);
    ``mode="reorder"`` lets the regulator re-optimize the order for each
    declaration, so findings there are observational.
    """
    if instance.kind != "B":
        raise ValueError("penalty audit requires a penalty instance")
    if mode not in ("fixed-order", "reorder"):
        raise ValueError(f"unknown mode {mode!r}")
    job = instance.job(user)
    assert isinstance(job, PenaltyJob)
    truth = job.p
    values = sorted({f * truth for f in grid.factors()} | {truth})
    if mode == "fixed-order":
        w = {j.id: j.w for j in instance.jobs}
        rates = {j.id: j.p for j in instance.jobs}
        order, method = choose_order(w, rates, instance.alpha.value)
        welfares = [_fixed_order_welfare(instance, order, user, v) for v in values]
        truthful_welfare = welfares[values.index(truth)]
        label = f"fixed-order ({method})"
    else:
        truthful_welfare = outcome(instance).welfares[user]
        welfares = []
        for v in values:
            if v == truth:
                welfares.append(truthful_welfare)
            else:
                welfares.append(outcome(instance, (Announcement(user, v),)).welfares[user])
        label = "reorder"
    return _summarize(user, truth, truthful_welfare, values, welfares, tolerance, label)


@dataclass(frozen=True)
class FocCheck:
    """Central-difference stationarity probe of one user's welfare at truth.

    ``residual`` is the absolute first central difference (should vanish at a
    stationary point); ``second_difference`` should be nonpositive at a local
    maximum.
    """

    user: int
    step: float
    residual: float
    second_difference: float


def foc_check_b(
    instance: Instance, user: int, step: float | None = None
) -> FocCheck:
    """Finite-difference check that truthful rate announcement is stationary.

    The completion order stays frozen at the truthful optimum.  The step
    defaults to 1e-5 times the true rate and must stay below a tenth of it.
    """
    if instance.kind != "B":
        raise ValueError("penalty audit requires a penalty instance")
    job = instance.job(user)
    assert isinstance(job, PenaltyJob)
    h = 1e-5 * job.p if step is None else float(step)
    if h >= job.p / 10.0:
        raise StepTooLarge(f"step {h} too large for rate {job.p}")
    w = {j.id: j.w for j in instance.jobs}
    rates = {j.id: j.p for j in instance.jobs}
    order, _ = choose_order(w, rates, instance.alpha.value)
    w_plus = _fixed_order_welfare(instance, order, user, job.p + h)
    w_zero = _fixed_order_welfare(instance, order, user, job.p)
    w_minus = _fixed_order_welfare(instance, order, user, job.p - h)
    return FocCheck(
        user=user,
        step=h,
        residual=abs((w_plus - w_minus) / (2.0 * h)),
        second_difference=(w_plus - 2.0 * w_zero + w_minus) / (h * h),
    )


@dataclass(frozen=True)
class PayoffCell:
    """Realized payoff pieces for one representative announcement."""

    announced: float
    completion: float
    previous_completion: float
    share: float
    quality: float
    welfare: float
    finishes_at_declared: bool
    met_true_deadline: bool


@dataclass(frozen=True)
class PayoffTableA:
    """Payoff cases for a deadline user, by declared-vs-true deadline and outcome.

    Keys are (column, row) with column in {"below", "truthful", "above"}
    (declared deadline vs the true one) and row in {"early", "at-declared"}
    (finishing strictly before vs exactly at the declared deadline).  Cells
    not realized by any probed announcement are absent.  In the
    ("above", "early") cell the quality depends on whether the completion
    still meets the true deadline; ``met_true_deadline`` records which
    sub-case occurred.
    """

    user: int
    truthful_value: float
    cells: dict[tuple[str, str], PayoffCell]


def payoff_table_a(
    instance: Instance,
    user: int,
    factors: tuple[float, ...] | None = None,
) -> PayoffTableA:
    """Probe announcements around the truth and classify the realized payoffs."""
    if instance.kind != "A":
        raise ValueError("deadline audit requires a deadline instance")
    job = instance.job(user)
    assert isinstance(job, DeadlineJob)
    truth = job.d
    if factors is None:
        below = tuple(0.25 + 0.05 * k for k in range(15))  # 0.25 .. 0.95
        above = tuple(1.05 + 0.05 * k for k in range(60))  # 1.05 .. 4.00
        factors = below + (1.0,) + above
    cells: dict[tuple[str, str], PayoffCell] = {}
    for f in sorted(factors):
        declared = f * truth
        res = outcome(instance, (Announcement(user, declared),))
        t = res.announced_times[user]
        rank = res.schedule.rank_of[user]
        prev = res.schedule.times[rank - 1] if rank > 0 else 0.0
        at_declared = abs(t - declared) <= 1e-9 * max(1.0, declared)
        column = "truthful" if declared == truth else ("below" if declared < truth else "above")
        row = "at-declared" if at_declared else "early"
        if (column, row) in cells:
            continue
        cells[(column, row)] = PayoffCell(
            announced=declared,
            completion=t,
            previous_completion=prev,
            share=res.shares[user],
            quality=quality_a(job, t),
            welfare=res.welfares[user],
            finishes_at_declared=at_declared,
            met_true_deadline=deadline_met(t, job.d),
        )
    return PayoffTableA(user=user, truthful_value=truth, cells=cells)
