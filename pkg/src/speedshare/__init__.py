"""Speed-scaling scheduling game: solvers, cost-sharing mechanisms, audits."""

from .model import (
    Alpha,
    Announcement,
    BadAlpha,
    DeadlineJob,
    EmptyInstance,
    Instance,
    InvalidInstance,
    NonFiniteField,
    NonPositiveField,
    PenaltyJob,
    ScheduleResult,
    SpeedProfile,
    TooLarge,
    WorkMismatch,
    completion_times,
    energy,
    validate_instance,
    welfare_a,
    welfare_b,
)
from .deadline_solver import (
    exhaustive_oracle,
    feasibility_check,
    optimal_profile,
    solve_deadline_schedule,
)
from .penalty_solver import (
    ClassicalInstance,
    NonPositivePenalty,
    brute_force_order,
    classical_brute_force,
    classical_cost,
    coordinate_descent_lengths,
    direct_objective,
    interval_lengths,
    schedule_penalty_jobs,
    smith_order,
    social_cost,
    to_classical,
)
from .mechanisms import (
    BudgetBalance,
    MechanismOutcome,
    ShareVector,
    ZeroEnergy,
    budget_balance_ratio,
    mechanism_x_shares,
    outcome,
    proportional_shares,
)
from .audit import (
    BestResponse,
    FocCheck,
    GridSpec,
    PayoffTableA,
    StepTooLarge,
    best_response_a,
    best_response_b,
    foc_check_b,
    payoff_table_a,
)
from .instance_io import (
    SchemaError,
    emit_instance,
    generate_instance,
    parse_instance,
)

__version__ = "0.1.0"
