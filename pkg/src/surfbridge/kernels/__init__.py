"""Closed-form transition kernels for SO(3), R^3, the torus, and residue logits."""

from .igso3 import (
    Igso3Table,
    angle_marginal_pdf,
    default_table,
    dlog_density,
    igso3_density,
    igso3_density_domega,
    igso3_sample,
    igso3_score,
    truncation_order,
)
from .logits import (
    DEFAULT_K,
    NUM_TYPES,
    clean_logits_from_eps,
    logit_decode,
    logit_encode,
    logit_forward,
    logit_reverse_renoise,
    logit_sample,
    softmax,
)
from .r3 import com_project, r3_log_density, r3_score, r3_transition
from .schedule import DdpmSchedule
from .torus import (
    torus_forward,
    torus_posterior_mean,
    torus_reverse_step,
    torus_step,
    wrap,
    wrapped_normal_logpdf,
)
