"""l2lab: posting-policy and fee-mechanism lab for L2 rollups."""

from .controller import (
    ControllerState,
    FeeBounds,
    PeriodStats,
    StepSchedule,
    accumulate_block,
    make_controller,
    project,
    select_next,
    step_size,
    update_budget_fee,
    update_congestion_fee,
)
from .costs import CostParams, compensation_owed, cost_upper_bound, stage_cost
from .errors import (
    ConditionViolated,
    ConfigError,
    DivergingQueue,
    InsufficientPeriods,
    L2LabError,
    NoSignChange,
    NonConvergence,
    ThresholdViolation,
)
from .mdp import (
    MdpConfig,
    MdpSolution,
    PriceGrid,
    bellman_backup_full,
    build_price_grid,
    extract_thresholds,
    full_action_table,
    solve,
)
from .oracles import (
    ExistenceCheck,
    FStarResult,
    PnlEstimate,
    RenewalReport,
    SolutionCache,
    SwitchMatrix,
    check_existence_condition,
    congestion_fee_closed_form,
    estimate_expected_cost,
    expected_pnl,
    find_budget_balance_fee,
    pnl_curve,
    renewal_check,
    stationary_split,
)
from .processes import (
    DemandModel,
    PriceModel,
    PriceState,
    RngStream,
    arrival_rate,
    sample_arrivals,
    sample_price_iid,
    stationary_std,
    step_price_ar1,
)
from .simulator import (
    SCENARIO_NAMES,
    ScenarioConfig,
    Trajectory,
    estimate_switch_matrix,
    kappa_sweep,
    run_posting_period,
    run_scenario,
    scenario_variant,
)

__version__ = "0.1.0"
