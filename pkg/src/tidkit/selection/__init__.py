"""Model selection: estimation, criteria, log scores, risk and decisions."""

from .criteria import (
    AIC,
    BIC,
    LOGSCORE0,
    PRESETS,
    RI,
    Criterion,
    ScoringContext,
    aic,
    bic,
    criterion_value,
    neg_log_likelihood,
    preset,
    rank,
    select,
)
from .decision import (
    LossSpec,
    RiskEstimate,
    ThresholdRule,
    bayes_risk,
    bayes_risks,
    bayes_rule,
    risk,
    risk_estimate,
    threshold_family,
)
from .estimate import (
    CandidateModel,
    CandidateSpec,
    IndicatorVector,
    block_registry,
    estimate,
    estimate_all,
    estimate_spec,
    fit_tables,
)
from .logscore import LogScore, LogScoreMonitor, case_scores, sequential_log_score
from .risk import (
    ReferenceQuery,
    RiskTable,
    model_sse,
    perturb,
    perturb_temporal,
    predictive_risk,
    predictive_risk_table,
    reference_vector,
    risk_inflation,
    risk_table,
    sse,
)
