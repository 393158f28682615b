"""Command-line harness: solve, share, audit, and generate instances.

Every command reads a strict-JSON instance file and writes two artifacts to
the output directory (flag --out-dir, else $SPEEDSHARE_OUT_DIR, else the
working directory): a structured JSON report and a flat CSV table for
plotting.  Exit codes: 0 success, 1 a solver/mechanism/audit violation was
found (the report is still written), 2 usage or I/O errors.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click

from .model import (
    REL_TOL,
    DeadlineJob,
    Instance,
    InvalidInstance,
    TooLarge,
    energy as profile_energy,
)
from .deadline_solver import exhaustive_oracle, feasibility_check
from .penalty_solver import (
    coordinate_descent_lengths,
    direct_objective,
    foc_residuals,
    social_cost,
)
from .mechanisms import outcome
from .audit import best_response_a, best_response_b, foc_check_b
from .instance_io import (
    SchemaError,
    atomic_write_text,
    dump_json,
    emit_instance,
    generate_instance,
    instance_payload,
    parse_instance,
    write_table,
)

REPORT_VERSION = 1

UNITS = {
    "workload": "work units",
    "time": "time units",
    "speed": "work units per time unit",
    "energy": "utility units",
    "share": "utility units",
    "welfare": "utility units",
    "ratio": "dimensionless",
}

_out_dir_option = click.option(
    "--out-dir",
    envvar="SPEEDSHARE_OUT_DIR",
    default=".",
    show_default=True,
    help="Directory for reports (env: SPEEDSHARE_OUT_DIR).",
)


def _die2(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


def _load(path: str, expect_kind: str | None = None):
    try:
        instance, announcements = parse_instance(path)
    except (SchemaError, InvalidInstance) as exc:
        _die2(str(exc))
    except OSError as exc:
        _die2(f"{path}: {exc.strerror or exc}")
    if expect_kind is not None and instance.kind != expect_kind:
        _die2(f"{path}: expected user_type {expect_kind!r}, found {instance.kind!r}")
    return instance, announcements


def _envelope(command: str, input_path: str | None, instance: Instance) -> dict:
    return {
        "report_version": REPORT_VERSION,
        "command": command,
        "input": Path(input_path).name if input_path else None,
        "alpha": instance.alpha.value,
        "alpha_warning": instance.alpha.outside_typical_range,
        "user_type": instance.kind,
        "units": UNITS,
    }


def _emit(out_dir: str, stem: str, command: str, payload: dict, header, rows) -> None:
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    atomic_write_text(directory / f"{stem}.{command}.json", dump_json(payload))
    write_table(directory / f"{stem}.{command}.csv", header, rows)
    click.echo(f"wrote {directory / f'{stem}.{command}.json'}")


def _schedule_payload(schedule) -> dict:
    return {
        "blocks": [[v, ell] for v, ell in schedule.profile.blocks],
        "speeds": list(schedule.profile.speeds()),
        "order": list(schedule.order),
        "completion_times": {str(u): t for u, t in zip(schedule.order, schedule.times)},
        "lengths": list(schedule.lengths),
        "energy": schedule.energy,
    }


def _solve_outcome(instance, announcements):
    """Mechanism run for declared values; exits 2 on announcement problems."""
    try:
        return outcome(instance, announcements)
    except ValueError as exc:
        _die2(str(exc))


@click.group()
def main() -> None:
    """Speed-scaling scheduling game: solvers, cost sharing, truthfulness audits."""


@main.command("solve-a")
@click.argument("instance_file", type=click.Path())
@_out_dir_option
def solve_a(instance_file: str, out_dir: str) -> None:
    """Energy-optimal schedule for a deadline instance."""
    instance, announcements = _load(instance_file, "A")
    res = _solve_outcome(instance, announcements)
    if res.schedule is None:
        _die2("no participating users to schedule")
    declared = {j.id: j.d for j in instance.jobs}
    for a in announcements or ():
        if a.participate and a.value is not None:
            declared[a.user] = a.value
    feas = feasibility_check(
        res.schedule.profile,
        sorted(
            (DeadlineJob(u, instance.job(u).w, declared[u], instance.job(u).U)
             for u in res.participating),
            key=lambda j: (j.d, j.id),
        ),
    )
    payload = _envelope("solve-a", instance_file, instance)
    payload.update(
        {
            "n": instance.n,
            "participating": list(res.participating),
            "opted_out": [u for u in declared if u not in res.participating],
            "schedule": _schedule_payload(res.schedule),
            "feasibility": {"feasible": feas.feasible, "slacks": list(feas.slacks)},
        }
    )
    rows = []
    sched = res.schedule
    for rank, u in enumerate(sched.order):
        block = sched.block_of[rank]
        v, ell = sched.profile.blocks[block]
        rows.append(
            (rank + 1, u, instance.job(u).w, declared[u], sched.times[rank],
             sched.lengths[rank], block, v / ell)
        )
    _emit(out_dir, Path(instance_file).stem, "solve-a", payload,
          ("rank", "user", "w", "d_declared", "completion", "length", "block", "speed"), rows)
    if not feas.feasible:
        click.echo("violation: schedule misses a declared deadline", err=True)
        sys.exit(1)


@main.command("solve-b")
@click.argument("instance_file", type=click.Path())
@_out_dir_option
def solve_b(instance_file: str, out_dir: str) -> None:
    """Welfare-optimal schedule for a penalty instance."""
    instance, announcements = _load(instance_file, "B")
    res = _solve_outcome(instance, announcements)
    if res.schedule is None:
        _die2("no participating users to schedule")
    declared = {j.id: j.p for j in instance.jobs}
    for a in announcements or ():
        if a.participate and a.value is not None:
            declared[a.user] = a.value
    w = {u: instance.job(u).w for u in res.participating}
    rates = {u: declared[u] for u in res.participating}
    alpha = instance.alpha.value
    closed = social_cost(res.schedule.order, w, rates, alpha)
    direct = direct_objective(res.schedule.order, w, rates, res.schedule.lengths, alpha)
    gap = abs(closed - direct) / max(abs(closed), abs(direct))
    payload = _envelope("solve-b", instance_file, instance)
    payload.update(
        {
            "n": instance.n,
            "participating": list(res.participating),
            "opted_out": [u for u in declared if u not in res.participating],
            "order_method": res.order_method,
            "schedule": _schedule_payload(res.schedule),
            "social_cost": {"closed_form": closed, "direct": direct, "relative_gap": gap},
        }
    )
    sched = res.schedule
    rows = [
        (rank + 1, u, w[u], rates[u], sched.times[rank], sched.lengths[rank],
         w[u] / sched.lengths[rank])
        for rank, u in enumerate(sched.order)
    ]
    _emit(out_dir, Path(instance_file).stem, "solve-b", payload,
          ("rank", "user", "w", "p_declared", "completion", "length", "speed"), rows)
    if gap > REL_TOL:
        click.echo("violation: closed-form and direct social cost disagree", err=True)
        sys.exit(1)


@main.command("shares")
@click.argument("instance_file", type=click.Path())
@click.option("--mechanism", type=click.Choice(["proportional", "x"]), default=None,
              help="Defaults to the instance's natural mechanism.")
@_out_dir_option
def shares_cmd(instance_file: str, mechanism: str | None, out_dir: str) -> None:
    """Cost shares, welfares, and budget balance for an instance."""
    instance, announcements = _load(instance_file)
    try:
        res = outcome(instance, announcements, mechanism)
    except ValueError as exc:
        _die2(str(exc))
    payload = _envelope("shares", instance_file, instance)
    payload.update(
        {
            "mechanism": res.mechanism,
            "participating": list(res.participating),
            "order_method": res.order_method,
            "shares": {str(u): s for u, s in sorted(res.shares.items())},
            "announced_times": {str(u): t for u, t in sorted(res.announced_times.items())},
            "welfares": {str(u): v for u, v in sorted(res.welfares.items())},
            "total_welfare": res.total_welfare,
            "energy": res.schedule.energy if res.schedule else None,
            "bb_ratio": res.bb_ratio,
            "undercharged": res.undercharged,
        }
    )
    rows = []
    rank_of = res.schedule.rank_of if res.schedule else {}
    for u in sorted(res.welfares):
        rows.append(
            (rank_of.get(u, ""), u, res.announced_times.get(u, ""),
             res.shares.get(u, 0.0), res.welfares[u])
        )
    _emit(out_dir, Path(instance_file).stem, "shares", payload,
          ("rank", "user", "completion", "share", "welfare"), rows)
    if res.undercharged:
        click.echo("violation: shares undercharge the schedule energy", err=True)
        sys.exit(1)


def _audit_payload_rows(results, foc=None):
    users = []
    rows = []
    for r in results:
        entry = {
            "user": r.user,
            "mode": r.mode,
            "truthful_value": r.truthful_value,
            "truthful_welfare": r.truthful_welfare,
            "best_value": r.best_value,
            "best_welfare": r.best_welfare,
            "max_gain": r.max_gain,
            "tolerance": r.tolerance,
            "truthful_is_best": r.truthful_is_best,
        }
        if foc is not None:
            f = foc[r.user]
            entry["foc"] = {
                "step": f.step,
                "residual": f.residual,
                "second_difference": f.second_difference,
            }
        users.append(entry)
        for v, wv in zip(r.announced, r.welfares):
            rows.append((r.user, v, wv, wv - r.truthful_welfare))
    return users, rows


@main.command("audit-a")
@click.argument("instance_file", type=click.Path())
@_out_dir_option
def audit_a(instance_file: str, out_dir: str) -> None:
    """Best-response grid audit for every deadline user."""
    instance, announcements = _load(instance_file, "A")
    if announcements:
        _die2("audits run against the truthful profile; remove announcements")
    results = [best_response_a(instance, j.id) for j in instance.jobs]
    users, rows = _audit_payload_rows(results)
    clean = all(r.truthful_is_best for r in results)
    payload = _envelope("audit-a", instance_file, instance)
    payload.update({"users": users, "all_truthful_best": clean})
    _emit(out_dir, Path(instance_file).stem, "audit-a", payload,
          ("user", "announced", "welfare", "gain"), rows)
    if not clean:
        click.echo("violation: a profitable deadline deviation was found", err=True)
        sys.exit(1)


@main.command("audit-b")
@click.argument("instance_file", type=click.Path())
@click.option("--mode", type=click.Choice(["fixed", "reorder"]), default="fixed",
              show_default=True,
              help="fixed: truthful order frozen (asserted); reorder: regulator re-optimizes (logged).")
@_out_dir_option
def audit_b(instance_file: str, mode: str, out_dir: str) -> None:
    """Best-response grid and stationarity audit for every penalty user."""
    instance, announcements = _load(instance_file, "B")
    if announcements:
        _die2("audits run against the truthful profile; remove announcements")
    audit_mode = "fixed-order" if mode == "fixed" else "reorder"
    results = [best_response_b(instance, j.id, mode=audit_mode) for j in instance.jobs]
    foc = {j.id: foc_check_b(instance, j.id) for j in instance.jobs}
    users, rows = _audit_payload_rows(results, foc)
    clean = all(r.truthful_is_best for r in results) and all(
        f.second_difference <= 0.0 for f in foc.values()
    )
    payload = _envelope("audit-b", instance_file, instance)
    payload.update({"mode": audit_mode, "users": users, "all_truthful_best": clean})
    _emit(out_dir, Path(instance_file).stem, "audit-b", payload,
          ("user", "announced", "welfare", "gain"), rows)
    if not clean and mode == "fixed":
        click.echo("violation: a profitable rate deviation was found", err=True)
        sys.exit(1)


@main.command("oracle-a")
@click.argument("instance_file", type=click.Path())
@_out_dir_option
def oracle_a(instance_file: str, out_dir: str) -> None:
    """Cross-check the deadline solver against exhaustive enumeration."""
    instance, announcements = _load(instance_file, "A")
    res = _solve_outcome(instance, announcements)
    if res.schedule is None:
        _die2("no participating users to schedule")
    alpha = instance.alpha.value
    declared = {j.id: j.d for j in instance.jobs}
    for a in announcements or ():
        if a.participate and a.value is not None:
            declared[a.user] = a.value
    declared_jobs = sorted(
        (DeadlineJob(u, instance.job(u).w, declared[u], instance.job(u).U)
         for u in res.participating),
        key=lambda j: (j.d, j.id),
    )
    try:
        reference = exhaustive_oracle(declared_jobs, alpha)
    except TooLarge as exc:
        _die2(str(exc))
    oracle_e = profile_energy(reference, alpha)
    stack_e = res.schedule.energy
    gap = abs(oracle_e - stack_e) / max(abs(oracle_e), abs(stack_e))
    feas = feasibility_check(res.schedule.profile, declared_jobs)
    agree = gap <= REL_TOL
    payload = _envelope("oracle-a", instance_file, instance)
    payload.update(
        {
            "stack_blocks": [[v, ell] for v, ell in res.schedule.profile.blocks],
            "oracle_blocks": [[v, ell] for v, ell in reference.blocks],
            "stack_energy": stack_e,
            "oracle_energy": oracle_e,
            "relative_gap": gap,
            "agree": agree,
            "feasible": feas.feasible,
        }
    )
    rows = [("stack", k, v, ell, v / ell)
            for k, (v, ell) in enumerate(res.schedule.profile.blocks)]
    rows += [("oracle", k, v, ell, v / ell) for k, (v, ell) in enumerate(reference.blocks)]
    _emit(out_dir, Path(instance_file).stem, "oracle-a", payload,
          ("source", "block", "work", "span", "speed"), rows)
    if not agree or not feas.feasible:
        click.echo("violation: solver disagrees with the exhaustive oracle", err=True)
        sys.exit(1)


@main.command("oracle-b")
@click.argument("instance_file", type=click.Path())
@_out_dir_option
def oracle_b(instance_file: str, out_dir: str) -> None:
    """Cross-check closed-form spans against the numerical minimizer."""
    instance, announcements = _load(instance_file, "B")
    res = _solve_outcome(instance, announcements)
    if res.schedule is None:
        _die2("no participating users to schedule")
    alpha = instance.alpha.value
    declared = {j.id: j.p for j in instance.jobs}
    for a in announcements or ():
        if a.participate and a.value is not None:
            declared[a.user] = a.value
    w = {u: instance.job(u).w for u in res.participating}
    rates = {u: declared[u] for u in res.participating}
    order = res.schedule.order
    closed = res.schedule.lengths
    descent = coordinate_descent_lengths(order, w, rates, alpha)
    gaps = [abs(a - b) / max(abs(a), abs(b)) for a, b in zip(closed, descent)]
    max_gap = max(gaps)
    residuals = foc_residuals(order, w, rates, closed, alpha)
    agree = max_gap <= 1e-6
    payload = _envelope("oracle-b", instance_file, instance)
    payload.update(
        {
            "order": list(order),
            "order_method": res.order_method,
            "closed_form_lengths": list(closed),
            "descent_lengths": list(descent),
            "max_relative_gap": max_gap,
            "foc_residuals": list(residuals),
            "agree": agree,
        }
    )
    rows = [
        (rank + 1, u, closed[rank], descent[rank], gaps[rank])
        for rank, u in enumerate(order)
    ]
    _emit(out_dir, Path(instance_file).stem, "oracle-b", payload,
          ("rank", "user", "closed_form_length", "descent_length", "relative_gap"), rows)
    if not agree:
        click.echo("violation: closed form disagrees with the numerical minimizer", err=True)
        sys.exit(1)


@main.command("gen")
@click.option("--seed", type=int, required=True)
@click.option("--n", type=int, required=True)
@click.option("--type", "user_type", type=click.Choice(["A", "B"]), required=True)
@click.option("--alpha", type=float, default=2.0, show_default=True)
@click.option("--out", "out_file", type=click.Path(), default=None,
              help="Instance file path (default: derived name in --out-dir).")
@_out_dir_option
def gen(seed: int, n: int, user_type: str, alpha: float, out_file: str | None, out_dir: str) -> None:
    """Generate a deterministic random instance with calibrated utilities."""
    try:
        instance = generate_instance(seed, n, user_type, alpha)
    except (ValueError, InvalidInstance) as exc:
        _die2(str(exc))
    stem = f"gen-{user_type}-n{n}-seed{seed}"
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    path = Path(out_file) if out_file else directory / f"{stem}.json"
    emit_instance(path, instance)
    value_key = "d" if user_type == "A" else "p"
    rows = [
        (j.id, j.w, getattr(j, value_key), j.U)
        for j in sorted(instance.jobs, key=lambda j: j.id)
    ]
    write_table(directory / f"{stem}.gen.csv", ("user", "w", value_key, "U"), rows)
    click.echo(f"wrote {path}")


@main.command("report")
@click.argument("instance_file", type=click.Path())
@_out_dir_option
def report(instance_file: str, out_dir: str) -> None:
    """One-stop report: schedule, shares, and a truthfulness audit."""
    instance, announcements = _load(instance_file)
    res = _solve_outcome(instance, announcements)
    if res.schedule is None:
        _die2("no participating users to schedule")
    violations: list[str] = []
    if instance.kind == "A" and not announcements:
        audit_results = [best_response_a(instance, j.id) for j in instance.jobs]
    elif instance.kind == "B" and not announcements:
        audit_results = [best_response_b(instance, j.id) for j in instance.jobs]
    else:
        audit_results = []
    users, _ = _audit_payload_rows(audit_results)
    if res.undercharged:
        violations.append("shares undercharge the schedule energy")
    if audit_results and not all(r.truthful_is_best for r in audit_results):
        violations.append("a profitable unilateral deviation was found")
    payload = _envelope("report", instance_file, instance)
    payload.update(
        {
            "mechanism": res.mechanism,
            "order_method": res.order_method,
            "schedule": _schedule_payload(res.schedule),
            "shares": {str(u): s for u, s in sorted(res.shares.items())},
            "welfares": {str(u): v for u, v in sorted(res.welfares.items())},
            "total_welfare": res.total_welfare,
            "bb_ratio": res.bb_ratio,
            "undercharged": res.undercharged,
            "audit": {"users": users, "skipped": not audit_results},
            "violations": violations,
        }
    )
    gain_of = {r.user: r.max_gain for r in audit_results}
    rows = [
        (u, res.announced_times.get(u, ""), res.shares.get(u, 0.0),
         res.welfares[u], gain_of.get(u, ""))
        for u in sorted(res.welfares)
    ]
    _emit(out_dir, Path(instance_file).stem, "report", payload,
          ("user", "completion", "share", "welfare", "max_gain"), rows)
    if violations:
        for v in violations:
            click.echo(f"violation: {v}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
