"""Multi-arm longitudinal rank-sum test for trials with several doses and a shared control."""

from ._backend import USE_NUMBA, backend_name
from .dataset import (
    DatasetError,
    Direction,
    DuplicateCell,
    MissingCell,
    NonNumericValue,
    OutcomeSpec,
    SampleRatios,
    SchemaConfig,
    TrialDataset,
    UnknownArm,
    harmonize_directions,
    load_csv,
    load_schema,
    sample_ratios,
    write_csv,
)
from .estimators import (
    PAIRWISE,
    SHARE,
    CovTerms,
    PairwiseEffects,
    SigmaBlocks,
    assemble_sigma,
    c_cross_hat,
    c_hat,
    d_hat,
    sigma_cross,
    sigma_within,
    theta_hat,
)
from .inference import (
    BonferroniResult,
    DegenerateVariance,
    LrstResult,
    PValueMethod,
    bonferroni_univariate,
    component_zscore,
    multi_arm_lrst,
    select_dose,
    two_arm_lrst,
)
from .numerics import Phi, bvn_cdf, factorize, max2_pvalue, mvn_max_tail, phi, quad
from .ranks import PairRankProfile, midranks, pair_rank_profile
from .simulator import SimScenario, StudyReport, bapi_default_scenario, gen_trial, power_study, runtime_bench, type1_study

__version__ = "0.1.0"
