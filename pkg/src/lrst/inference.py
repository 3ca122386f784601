"""The multi-arm longitudinal rank-sum test.

Each dose arm contributes a standardized component

    z_a = J' R_diff^(a) / sqrt(N J' Sigma_a J),

the time-summed pooled mean-rank difference against control over its
estimated standard error. The test statistic is ``max_a z_a`` and its null
law is that of the maximum of ``A`` correlated standard normals.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .dataset import TrialDataset, harmonize_directions, is_harmonized
from .estimators import PAIRWISE, PairwiseEffects, SigmaBlocks, assemble_sigma
from .ranks import pair_rank_profile

DEFAULT_MC_DRAWS = 1_000_000
VARIANCE_EPS = 1e-12


class DegenerateVariance(ValueError):
    """A component's estimated variance is not positive (e.g. constant data)."""


class PValueMethod(str, enum.Enum):
    CLOSED_FORM_NORMAL = "ClosedFormNormal"
    CLOSED_FORM_MAX2 = "ClosedFormMax2"
    MONTE_CARLO = "MonteCarlo"


@dataclass(frozen=True)
class LrstResult:
    dose_arms: tuple[str, ...]
    components: np.ndarray
    rank_diff: np.ndarray  # J' R_diff per dose
    std_error: np.ndarray  # sqrt(N J' Sigma J) per dose
    correlation: np.ndarray
    p_value: float
    p_value_method: PValueMethod
    T: int
    N: int
    per_pair: tuple[PairwiseEffects, ...]
    mc_std_error: float | None = None
    mc_draws: int | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def statistic(self) -> float:
        return float(np.max(self.components))

    @property
    def statistic_per_visit(self) -> float:
        """The statistic divided by T (per-visit scale)."""
        return self.statistic / self.T

    @property
    def selected_index(self) -> int:
        return int(np.argmax(self.components))

    @property
    def selected_dose(self) -> str:
        return self.dose_arms[self.selected_index]

    def reject(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha

    def to_dict(self) -> dict:
        return {
            "dose_arms": list(self.dose_arms),
            "components": [float(z) for z in self.components],
            "statistic": {"z_scale": self.statistic, "per_visit_scale": self.statistic_per_visit},
            "rank_diff_sum": [float(r) for r in self.rank_diff],
            "std_error": [float(s) for s in self.std_error],
            "correlation": self.correlation.tolist(),
            "p_value": self.p_value,
            "p_value_method": self.p_value_method.value,
            "mc_std_error": self.mc_std_error,
            "mc_draws": self.mc_draws,
            "selected_dose": self.selected_dose,
            "theta_hat": {pe.dose: pe.theta_hat.tolist() for pe in self.per_pair},
            "theta_bar": {pe.dose: pe.theta_bar for pe in self.per_pair},
            "T": self.T,
            "N": self.N,
            "diagnostics": dict(self.diagnostics),
        }


def _oriented(ds: TrialDataset) -> TrialDataset:
    return ds if is_harmonized(ds) else harmonize_directions(ds)


def _components(ds: TrialDataset, blocks: SigmaBlocks):
    rank_diff, variances = [], []
    for arm in ds.dose_arms:
        var = blocks.total_variance(arm)
        if not var > VARIANCE_EPS:
            raise DegenerateVariance(
                f"estimated variance of the {arm!r} component is {var:.3g}; data are constant or degenerate"
            )
        rank_diff.append(pair_rank_profile(ds, arm).total_diff)
        variances.append(var)
    rank_diff = np.array(rank_diff)
    variances = np.array(variances)
    se = np.sqrt(ds.N * variances)
    return rank_diff, se, variances


def _correlation(ds: TrialDataset, blocks: SigmaBlocks, variances: np.ndarray) -> np.ndarray:
    A = ds.A
    R = np.eye(A)
    for i in range(A):
        for j in range(i + 1, A):
            cov = blocks.total_covariance(ds.dose_arms[i], ds.dose_arms[j])
            R[i, j] = R[j, i] = cov / math.sqrt(variances[i] * variances[j])
    return numerics.clamp_correlation(R)


def component_zscore(ds: TrialDataset, dose: str, weights: str = PAIRWISE) -> float:
    """Standardized control-vs-``dose`` component."""
    pair = _oriented(ds).pair(dose)
    rank_diff, se, _ = _components(pair, assemble_sigma(pair, weights))
    return float(rank_diff[0] / se[0])


def multi_arm_lrst(
    ds: TrialDataset,
    mc_draws: int = DEFAULT_MC_DRAWS,
    seed=0,
    weights: str = PAIRWISE,
    method: str = "auto",
) -> LrstResult:
    """Run the test on every dose arm of ``ds``.

    ``method`` is ``"auto"`` (closed form for A <= 2, Monte Carlo otherwise)
    or ``"mc"`` to force the Monte-Carlo tail probability.
    """
    if method not in ("auto", "mc"):
        raise ValueError(f"unknown method {method!r}")
    ds = _oriented(ds)
    blocks = assemble_sigma(ds, weights)
    rank_diff, se, variances = _components(ds, blocks)
    z = rank_diff / se
    R = _correlation(ds, blocks, variances)
    per_pair = tuple(PairwiseEffects(arm, blocks.cov.theta[arm]) for arm in ds.dose_arms)
    stat = float(z.max())
    diagnostics = {"weights": weights, "correlation_repaired": False}

    mc_se = None
    draws = None
    if method == "mc" or ds.A >= 3:
        R_used, repaired = numerics.repair_correlation(R)
        diagnostics["correlation_repaired"] = repaired
        p, mc_se = numerics.mvn_max_tail(R_used, stat, draws=mc_draws, seed=seed)
        how = PValueMethod.MONTE_CARLO
        draws = int(mc_draws)
    elif ds.A == 2:
        p = numerics.max2_pvalue(stat, R[0, 1])
        how = PValueMethod.CLOSED_FORM_MAX2
    else:
        p = 1.0 - numerics.Phi(stat)
        how = PValueMethod.CLOSED_FORM_NORMAL
    return LrstResult(
        dose_arms=ds.dose_arms,
        components=z,
        rank_diff=rank_diff,
        std_error=se,
        correlation=R,
        p_value=float(p),
        p_value_method=how,
        T=ds.T,
        N=ds.N,
        per_pair=per_pair,
        mc_std_error=mc_se,
        mc_draws=draws,
        diagnostics=diagnostics,
    )


def two_arm_lrst(ds: TrialDataset, weights: str = PAIRWISE) -> LrstResult:
    """One-sided two-arm test; ``ds`` must have exactly one dose arm."""
    if ds.A != 1:
        raise ValueError(f"two_arm_lrst needs exactly one dose arm, got {ds.A}")
    return multi_arm_lrst(ds, weights=weights)


def select_dose(result: LrstResult) -> str:
    """Dose with the largest component; ties go to the earliest dose."""
    return result.selected_dose


@dataclass(frozen=True)
class BonferroniResult:
    p_values: dict[str, float]
    alpha: float

    @property
    def threshold(self) -> float:
        return self.alpha / len(self.p_values)

    @property
    def min_p(self) -> float:
        return min(self.p_values.values())

    @property
    def rejected(self) -> bool:
        return self.min_p < self.threshold

    def to_dict(self) -> dict:
        return {
            "p_values": dict(self.p_values),
            "alpha": self.alpha,
            "threshold": self.threshold,
            "rejected": self.rejected,
        }


def bonferroni_univariate(ds: TrialDataset, alpha: float = 0.05, weights: str = PAIRWISE) -> BonferroniResult:
    """Separate two-arm tests per dose, rejecting if any p < alpha / A."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    ds = _oriented(ds)
    p = {arm: two_arm_lrst(ds.pair(arm), weights).p_value for arm in ds.dose_arms}
    return BonferroniResult(p, alpha)
