"""Truthfulness audits: announcement grids, stationarity, payoff cases."""

import math

import pytest

from speedshare.audit import (
    GRID_TOL_A,
    GRID_TOL_B,
    GridSpec,
    StepTooLarge,
    best_response_a,
    best_response_b,
    foc_check_b,
    payoff_table_a,
)
from speedshare.model import DeadlineJob, PenaltyJob, validate_instance


def _instance_a():
    return validate_instance(
        2.0,
        [
            DeadlineJob(1, 1.0, 0.5, 10.0),
            DeadlineJob(2, 3.0, 2.0, 10.0),
            DeadlineJob(3, 1.0, 4.0, 10.0),
        ],
    )


def _instance_b():
    return validate_instance(
        2.0, [PenaltyJob(1, 1.0, 3.0, 10.0), PenaltyJob(2, 2.0, 1.0, 10.0)]
    )


class TestGridSpec:
    def test_default_grid(self):
        factors = GridSpec().factors()
        assert len(factors) == 201
        assert factors[0] == 0.5
        assert factors[-1] == 2.0
        assert 1.0 not in factors

    def test_truth_always_added(self):
        res = best_response_a(_instance_a(), 1)
        assert len(res.announced) == 202
        assert res.truthful_value in res.announced


class TestBestResponseA:
    @pytest.mark.parametrize("user", [1, 2, 3])
    def test_truth_dominates(self, user):
        res = best_response_a(_instance_a(), user)
        assert res.mode == "announced-deadline"
        assert res.tolerance == GRID_TOL_A
        assert res.max_gain <= GRID_TOL_A
        assert res.truthful_is_best
        assert res.best_welfare <= res.truthful_welfare + GRID_TOL_A

    def test_wrong_kind_rejected(self):
        with pytest.raises(ValueError):
            best_response_a(_instance_b(), 1)

    def test_welfares_align_with_grid(self):
        res = best_response_a(_instance_a(), 3)
        assert len(res.welfares) == len(res.announced)
        truth_idx = res.announced.index(4.0)
        assert res.welfares[truth_idx] == res.truthful_welfare == 9.5


class TestBestResponseB:
    @pytest.mark.parametrize("user", [1, 2])
    def test_fixed_order_truth_dominates(self, user):
        res = best_response_b(_instance_b(), user)
        assert res.mode == "fixed-order (brute-force)"
        assert res.tolerance == GRID_TOL_B
        assert res.max_gain <= GRID_TOL_B
        assert res.truthful_is_best

    @pytest.mark.parametrize("user", [1, 2])
    def test_reorder_mode_observational(self, user):
        res = best_response_b(_instance_b(), user, mode="reorder")
        assert res.mode == "reorder"
        # on this instance reordering does not help either
        assert res.truthful_is_best

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError, match="unknown mode"):
            best_response_b(_instance_b(), 1, mode="sideways")

    def test_wrong_kind_rejected(self):
        with pytest.raises(ValueError):
            best_response_b(_instance_a(), 1)

    def test_welfare_concave_in_announcement(self):
        # welfare along the fixed-order axis rises to the truth, then falls
        res = best_response_b(_instance_b(), 1)
        truth_idx = res.announced.index(res.truthful_value)
        below = res.welfares[: truth_idx + 1]
        above = res.welfares[truth_idx:]
        assert all(b <= a + 1e-12 for b, a in zip(below, below[1:]))
        assert all(a >= b - 1e-12 for a, b in zip(above, above[1:]))


class TestFocCheck:
    @pytest.mark.parametrize("user", [1, 2])
    def test_stationary_at_truth(self, user):
        job = _instance_b().job(user)
        res = foc_check_b(_instance_b(), user)
        assert res.step == pytest.approx(1e-5 * job.p)
        assert res.residual <= 1e-4 * job.p
        assert res.second_difference <= 0.0

    def test_step_too_large(self):
        with pytest.raises(StepTooLarge):
            foc_check_b(_instance_b(), 1, step=0.5)

    def test_explicit_step(self):
        res = foc_check_b(_instance_b(), 1, step=1e-4)
        assert res.step == 1e-4
        assert res.residual <= 1e-4 * 3.0

    def test_wrong_kind_rejected(self):
        with pytest.raises(ValueError):
            foc_check_b(_instance_a(), 1)


class TestPayoffTable:
    def test_truthful_cell_first_job(self):
        tab = payoff_table_a(_instance_a(), 1)
        cell = tab.cells[("truthful", "at-declared")]
        assert cell.announced == 0.5
        assert cell.completion == 0.5
        assert cell.share == 2.0
        assert cell.quality == 10.0
        assert cell.welfare == 8.0
        assert cell.finishes_at_declared
        assert cell.met_true_deadline

    def test_below_cell_pays_for_compression(self):
        tab = payoff_table_a(_instance_a(), 1)
        cell = tab.cells[("below", "at-declared")]
        assert cell.announced == 0.125
        assert cell.completion == 0.125
        assert cell.share == 8.0
        assert cell.welfare == 2.0

    def test_above_early_keeps_true_deadline_here(self):
        # a slight relaxation leaves the schedule pinned by the others
        tab = payoff_table_a(_instance_a(), 1)
        cell = tab.cells[("above", "early")]
        assert cell.announced == pytest.approx(0.525)
        assert cell.completion == 0.5
        assert cell.welfare == 8.0
        assert not cell.finishes_at_declared
        assert cell.met_true_deadline

    def test_last_job_cells(self):
        tab = payoff_table_a(_instance_a(), 3)
        above = tab.cells[("above", "at-declared")]
        assert above.announced == pytest.approx(4.2)
        assert above.quality == 0.0
        assert not above.met_true_deadline
        assert above.welfare == pytest.approx(-1.0 / 2.2)
        early = tab.cells[("below", "early")]
        assert early.announced == 1.0
        assert early.completion == pytest.approx(0.8)
        assert early.share == pytest.approx(2.5)
        assert early.met_true_deadline

    def test_no_cell_beats_truth(self):
        for user in (1, 2, 3):
            tab = payoff_table_a(_instance_a(), user)
            truthful = tab.cells[("truthful", "at-declared")]
            for cell in tab.cells.values():
                assert cell.welfare <= truthful.welfare + GRID_TOL_A

    def test_welfare_decomposition(self):
        for user in (1, 2, 3):
            tab = payoff_table_a(_instance_a(), user)
            for cell in tab.cells.values():
                assert cell.welfare == pytest.approx(cell.quality - cell.share)
                assert cell.previous_completion < cell.completion

    def test_wrong_kind_rejected(self):
        with pytest.raises(ValueError):
            payoff_table_a(_instance_b(), 1)

    def test_custom_factors(self):
        tab = payoff_table_a(_instance_a(), 3, factors=(0.5, 1.0, 2.0))
        assert {k[0] for k in tab.cells} == {"below", "truthful", "above"}
