"""Desk-scale laboratory comparing random and uncertainty-based pair
selection in online preference optimization.

Synthetic prompt universes with exactly solvable softmax policies replace
LLM training, so selection effects (budget-matched win-rates, capability
drift, entropy collapse, selection overhead) can be measured precisely and
reproduced bit-for-bit.
"""

__version__ = "0.1.0"

from .dpo import (
    DpoConfig,
    OptimizerState,
    PreferenceTriple,
    dpo_batch_grad,
    dpo_example_loss,
    implicit_reward,
    lr_at_step,
    optimizer_step,
)
from .errors import ConfigurationError, ContractError, TrainingError
from .evaluation import (
    CapabilityReport,
    WinRateEstimate,
    capability_delta,
    collapse_metrics,
    estimate_win_rate,
    probe_accuracy,
)
from .harness import (
    EvalSettings,
    ExperimentGrid,
    SummaryRow,
    TrainTemplate,
    aggregate_summary,
    emit_pareto,
    parse_config,
    run_cell,
    run_grid,
    write_summary,
)
from .judges import KIND_BRADLEY_TERRY, KIND_DETERMINISTIC, Judge, JudgeSpec, make_judge
from .policy import (
    Policy,
    exact_entropy,
    grad_log_prob,
    log_prob,
    log_prob_vector,
    logits,
    response_probabilities,
    sample_response,
)
from .selection import (
    SELECTOR_APL,
    SELECTOR_RANDOM,
    CandidateSet,
    OpCounters,
    PairPool,
    SelectionConfig,
    counters_report,
    entropy_estimate,
    form_pairs,
    generate_candidates,
    margin_score,
    select_apl,
    select_random,
)
from .trainer import (
    IterationLog,
    RunResult,
    SftConfig,
    TrainConfig,
    reference_preset,
    run_online_dpo,
    sft_fit,
)
from .universe import (
    PromptRecord,
    PromptUniverse,
    UniverseConfig,
    generate_universe,
    make_tabular_features,
    validate_universe,
)
