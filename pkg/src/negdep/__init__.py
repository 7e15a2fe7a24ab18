"""Multiple testing under negative dependence.

Simes and weighted Simes merging, the BH procedure, e-value merging, the
anti-conservativeness bounds that hold when p-values (or e-values) are
negatively dependent, samplers of negatively dependent vectors and a
Monte Carlo harness that checks the bounds.
"""
__version__ = "0.1.0"

from .core import (
    CorrMatrix,
    DomainError,
    EVector,
    GroupPartition,
    InputError,
    McEstimate,
    NegdepError,
    NullMask,
    PVector,
    RejectionSet,
    WeightVector,
    harmonic_ell,
    order_statistics,
)
from .emerge import (
    CalibratorSpec,
    SubPsiSpec,
    average_e,
    calibrate,
    chernoff_e,
    convex_combo,
    lambda_product,
    product_e,
    u_statistic,
)
from .fdr import bh, bh_fdr_bound_k2, bh_fdr_bound_negdep, by, fdp, group_simes_bh
from .gendep import RngSeed, SamplerConfig
from .pmerge import (
    bound_report,
    simes,
    simes_bound_additive,
    simes_bound_cubic,
    simes_bound_tilde,
    simes_corrected_p,
    simes_of_simes,
    weighted_simes,
)
