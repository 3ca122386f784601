"""Synthetic multi-arm longitudinal trials and Monte-Carlo operating characteristics.

The default scenario mirrors a 78-week Alzheimer's trial with two co-primary
outcomes (ADAS-cog11, where higher is worse, and DAD, where higher is
better) measured at six post-baseline visits. Subject errors are Gaussian
(or scaled multivariate t) with a separable outcome x AR(1) correlation.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import binomtest

from .dataset import Direction, OutcomeSpec, TrialDataset
from .inference import DEFAULT_MC_DRAWS, bonferroni_univariate, multi_arm_lrst
from .numerics import make_rng

ADAS_MEAN = (0.601, 2.041, 3.139, 4.297, 5.643, 6.567)
ADAS_SD = (5.437, 5.813, 7.201, 8.151, 8.507, 9.511)
DAD_MEAN = (-1.740, -3.539, -6.719, -9.420, -11.287, -12.958)
DAD_SD = (12.05, 12.918, 13.797, 16.649, 17.253, 19.806)
VISIT_WEEKS = (13, 26, 39, 52, 65, 78)
PROTOCOL_EFFECTS = (2.65, 6.56)
BAPI_OUTCOMES = (
    OutcomeSpec("ADAS-cog11", Direction.HIGHER_IS_WORSE),
    OutcomeSpec("DAD", Direction.HIGHER_IS_BETTER),
)

#: Default Monte-Carlo draws per replication inside simulation studies.
STUDY_MC_DRAWS = 100_000


class ScenarioError(ValueError):
    pass


def dose_size(n_control: int) -> int:
    """Per-dose size under 3:2 allocation."""
    return int(round(n_control * 2 / 3))


def nominal_total(n_control: int, n_doses: int) -> int:
    """Total N implied by 3:2:...:2 allocation, ``n_x (3 + 2 A) / 3`` rounded."""
    return int(round(n_control * (3 + 2 * n_doses) / 3))


@dataclass(frozen=True)
class SimScenario:
    """Generative model for one simulated trial design.

    ``mean_change`` and ``sd`` are ``K x T`` control-arm values on the raw
    outcome scale. Dose arm ``a`` adds ``multipliers[a] * effect_sizes[k] *
    ramp(t)`` in the favorable direction of outcome ``k``.
    """

    n: tuple[int, ...]  # control first
    multipliers: tuple[float, ...]
    mean_change: tuple[tuple[float, ...], ...] = (ADAS_MEAN, DAD_MEAN)
    sd: tuple[tuple[float, ...], ...] = (ADAS_SD, DAD_SD)
    outcomes: tuple[OutcomeSpec, ...] = BAPI_OUTCOMES
    effect_sizes: tuple[float, ...] = PROTOCOL_EFFECTS
    rho_time: float = 0.6
    rho_outcome: float = 0.5
    ramp: str = "linear"
    errors: str = "gaussian"
    visits: tuple = VISIT_WEEKS
    arm_names: tuple[str, ...] = ()
    seed: int = 0

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        mult = tuple(float(m) for m in self.multipliers)
        mean = tuple(tuple(float(v) for v in row) for row in self.mean_change)
        sd = tuple(tuple(float(v) for v in row) for row in self.sd)
        outcomes = tuple(o if isinstance(o, OutcomeSpec) else OutcomeSpec(**o) for o in self.outcomes)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "multipliers", mult)
        object.__setattr__(self, "mean_change", mean)
        object.__setattr__(self, "sd", sd)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "effect_sizes", tuple(float(e) for e in self.effect_sizes))
        object.__setattr__(self, "visits", tuple(self.visits))
        if len(n) < 2:
            raise ScenarioError("need a control arm and at least one dose arm")
        if len(mult) != len(n) - 1:
            raise ScenarioError(f"{len(mult)} multipliers for {len(n) - 1} dose arms")
        if min(n) < 2:
            raise ScenarioError("every arm needs at least 2 subjects")
        K, T = len(mean), len(mean[0])
        if any(len(r) != T for r in mean) or len(sd) != K or any(len(r) != T for r in sd):
            raise ScenarioError("mean_change and sd must both be K x T")
        if any(v <= 0 for r in sd for v in r):
            raise ScenarioError("sd entries must be positive")
        if len(outcomes) != K or len(self.effect_sizes) != K:
            raise ScenarioError("outcomes and effect_sizes need one entry per outcome")
        if len(self.visits) != T:
            raise ScenarioError("one visit label per column of mean_change")
        if not (-1 < self.rho_time < 1 and -1 < self.rho_outcome < 1):
            raise ScenarioError("correlations must lie in (-1, 1)")
        if any(m < 0 for m in mult):
            raise ScenarioError("multipliers must be non-negative")
        if self.ramp not in ("linear", "constant"):
            raise ScenarioError(f"unknown ramp {self.ramp!r}")
        if self.errors not in ("gaussian", "t3"):
            raise ScenarioError(f"unknown error law {self.errors!r}")
        names = tuple(self.arm_names) or default_arm_names(len(n) - 1)
        if len(names) != len(n) or len(set(names)) != len(names):
            raise ScenarioError("arm_names must be unique, one per arm")
        object.__setattr__(self, "arm_names", names)

    @property
    def A(self) -> int:
        return len(self.n) - 1

    @property
    def T(self) -> int:
        return len(self.mean_change[0])

    @property
    def K(self) -> int:
        return len(self.mean_change)

    @property
    def N(self) -> int:
        return sum(self.n)

    @property
    def nominal_N(self) -> int:
        return nominal_total(self.n[0], self.A)

    def with_multipliers(self, multipliers: Sequence[float]) -> "SimScenario":
        return replace(self, multipliers=tuple(multipliers))

    def error_correlation(self) -> np.ndarray:
        """``(T*K) x (T*K)`` correlation, cells ordered visit-major like the dataset."""
        t = np.arange(self.T)
        ar1 = self.rho_time ** np.abs(t[:, None] - t[None, :])
        out = np.full((self.K, self.K), self.rho_outcome)
        np.fill_diagonal(out, 1.0)
        return np.kron(ar1, out)

    def ramp_profile(self) -> np.ndarray:
        if self.ramp == "constant":
            return np.ones(self.T)
        return np.arange(1, self.T + 1) / self.T

    def dose_shift(self, index: int) -> np.ndarray:
        """``(T, K)`` mean shift of dose ``index`` on the raw outcome scale."""
        sign = np.array([-1.0 if o.direction is Direction.HIGHER_IS_WORSE else 1.0 for o in self.outcomes])
        return self.multipliers[index] * np.outer(self.ramp_profile(), sign * np.array(self.effect_sizes))

    def to_mapping(self) -> dict:
        d = asdict(self)
        d["outcomes"] = [{"name": o.name, "direction": o.direction.value} for o in self.outcomes]
        return d


def default_arm_names(n_doses: int) -> tuple[str, ...]:
    if n_doses == 1:
        return ("placebo", "dose")
    if n_doses == 2:
        return ("placebo", "low", "high")
    if n_doses == 3:
        return ("placebo", "low", "mid", "high")
    return ("placebo",) + tuple(f"dose{i + 1}" for i in range(n_doses))


def bapi_default_scenario(A: int, n_control: int, multipliers=None, n_doses=None, seed: int = 0, **kw) -> SimScenario:
    """Default design with ``A`` dose arms and 3:2:...:2 allocation.

    ``n_doses`` overrides the rounded per-dose sizes (e.g. ``(238, 226)``).
    """
    if A < 1:
        raise ScenarioError("A must be at least 1")
    if n_control < 10:
        raise ScenarioError("n_control must be at least 10")
    sizes = tuple(n_doses) if n_doses is not None else (dose_size(n_control),) * A
    if len(sizes) != A:
        raise ScenarioError(f"{len(sizes)} dose sizes for A={A}")
    mult = tuple(multipliers) if multipliers is not None else (0.0,) * A
    return SimScenario(n=(int(n_control),) + tuple(sizes), multipliers=mult, seed=seed, **kw)


def gen_trial(sc: SimScenario, rep_index: int) -> TrialDataset:
    """One simulated trial on the raw outcome scale; deterministic in ``(sc.seed, rep_index)``."""
    rng = make_rng((sc.seed, rep_index))
    L = np.linalg.cholesky(sc.error_correlation())
    mean = np.asarray(sc.mean_change).T  # (T, K)
    sd = np.asarray(sc.sd).T
    values = {}
    for a, (name, n) in enumerate(zip(sc.arm_names, sc.n)):
        e = rng.standard_normal((n, sc.T * sc.K)) @ L.T
        if sc.errors == "t3":
            # unit-variance multivariate t with 3 df
            e *= np.sqrt(3.0 / rng.chisquare(3.0, size=(n, 1))) / math.sqrt(3.0)
        mu = mean if a == 0 else mean + sc.dose_shift(a - 1)
        values[name] = mu + sd * e.reshape(n, sc.T, sc.K)
    return TrialDataset(sc.arm_names[0], sc.arm_names[1:], values, sc.outcomes, sc.visits)


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------


def binomial_ci(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    ci = binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="exact")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class StudyReport:
    label: str
    multipliers: tuple[float, ...]
    n: tuple[int, ...]
    replications: int
    alpha: float
    rejections: int
    comparator_rejections: int
    selection_counts: tuple[int, ...]
    dose_arms: tuple[str, ...]
    wall_time: float = 0.0
    nominal_N: int = 0
    mc_draws: int = 0
    seed: int = 0

    @property
    def N(self) -> int:
        return sum(self.n)

    @property
    def rejection_rate(self) -> float:
        return self.rejections / self.replications

    @property
    def comparator_rate(self) -> float:
        return self.comparator_rejections / self.replications

    @property
    def mc_se(self) -> float:
        p = self.rejection_rate
        return math.sqrt(p * (1 - p) / self.replications)

    @property
    def comparator_se(self) -> float:
        p = self.comparator_rate
        return math.sqrt(p * (1 - p) / self.replications)

    @property
    def mc_ci(self) -> tuple[float, float]:
        return binomial_ci(self.rejections, self.replications)

    @property
    def selection_proportions(self) -> tuple[float, ...]:
        """Share of rejected replications in which each dose attained the max (NaN if none rejected)."""
        if self.rejections == 0:
            return tuple(math.nan for _ in self.selection_counts)
        return tuple(c / self.rejections for c in self.selection_counts)

    def row(self) -> dict:
        lo, hi = self.mc_ci
        out = {
            "label": self.label,
            "multipliers": " ".join(f"{m:g}" for m in self.multipliers),
            "n": " ".join(str(v) for v in self.n),
            "N": self.N,
            "nominal_N": self.nominal_N,
            "replications": self.replications,
            "alpha": self.alpha,
            "rejection_rate": self.rejection_rate,
            "ci_low": lo,
            "ci_high": hi,
            "mc_se": self.mc_se,
            "comparator_rate": self.comparator_rate,
            "comparator_se": self.comparator_se,
        }
        for arm, prop in zip(self.dose_arms, self.selection_proportions):
            out[f"selected_{arm}"] = None if math.isnan(prop) else prop
        return out

    def to_dict(self) -> dict:
        d = self.row()
        d["multipliers"] = list(self.multipliers)
        d["n"] = list(self.n)
        d["selection_counts"] = dict(zip(self.dose_arms, self.selection_counts))
        d["mc_draws"] = self.mc_draws
        d["seed"] = self.seed
        return d


def run_replication(sc: SimScenario, rep_index: int, alpha: float = 0.05, mc_draws: int = STUDY_MC_DRAWS):
    """``(rejected, selected_index, comparator_rejected)`` for one simulated trial."""
    ds = gen_trial(sc, rep_index)
    res = multi_arm_lrst(ds, mc_draws=mc_draws, seed=(sc.seed, rep_index, 1))
    bonf = bonferroni_univariate(ds, alpha)
    return res.p_value < alpha, res.selected_index, bonf.rejected


def _run_chunk(args):
    sc, reps, alpha, mc_draws = args
    return [run_replication(sc, r, alpha, mc_draws) for r in reps]


def _simulate(sc: SimScenario, reps: int, alpha: float, mc_draws: int, workers: int, progress=None):
    indices = list(range(reps))
    if workers <= 1:
        out = []
        for r in indices:
            out.append(run_replication(sc, r, alpha, mc_draws))
            if progress is not None:
                progress(r + 1, reps)
        return out
    chunks = [indices[i::workers] for i in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, [(sc, c, alpha, mc_draws) for c in chunks]))
    return [x for part in parts for x in part]


def _aggregate(sc: SimScenario, label: str, results, alpha, mc_draws, wall) -> StudyReport:
    counts = [0] * sc.A
    rej = comp = 0
    for rejected, idx, comp_rej in results:
        if rejected:
            rej += 1
            counts[idx] += 1
        comp += bool(comp_rej)
    return StudyReport(
        label=label,
        multipliers=sc.multipliers,
        n=sc.n,
        replications=len(results),
        alpha=alpha,
        rejections=rej,
        comparator_rejections=comp,
        selection_counts=tuple(counts),
        dose_arms=sc.arm_names[1:],
        wall_time=wall,
        nominal_N=sc.nominal_N,
        mc_draws=mc_draws,
        seed=sc.seed,
    )


def type1_study(
    sc: SimScenario,
    reps: int = 1000,
    alpha: float = 0.05,
    mc_draws: int = STUDY_MC_DRAWS,
    workers: int = 1,
    progress=None,
) -> StudyReport:
    """Empirical size under the null (all multipliers are forced to zero)."""
    if reps < 100:
        raise ScenarioError("a type-I study needs at least 100 replications")
    sc = sc.with_multipliers((0.0,) * sc.A)
    t0 = time.perf_counter()
    results = _simulate(sc, reps, alpha, mc_draws, workers, progress)
    return _aggregate(sc, "type1", results, alpha, mc_draws, time.perf_counter() - t0)


def power_study(
    sc: SimScenario,
    case_grid: Sequence[Sequence[float]],
    reps: int = 1000,
    alpha: float = 0.05,
    mc_draws: int = STUDY_MC_DRAWS,
    workers: int = 1,
    label: str = "power",
    progress=None,
) -> list[StudyReport]:
    """Power, comparator power and dose-selection shares at each multiplier vector."""
    reports = []
    for point in case_grid:
        s = sc.with_multipliers(point)
        t0 = time.perf_counter()
        results = _simulate(s, reps, alpha, mc_draws, workers, progress)
        reports.append(_aggregate(s, label, results, alpha, mc_draws, time.perf_counter() - t0))
    return reports


def case_grid(case: int, A: int) -> list[tuple[float, ...]]:
    """Multiplier vectors of the standard three-arm (A=2) and four-arm (A=3) cases."""
    if A == 2:
        case1 = [round(0.1 * i, 1) for i in range(16)] + [2.0]
        grids = {
            1: [(a, a) for a in case1],
            2: [(0.0, a) for a in case1],
            3: [(0.5, a) for a in (0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.5, 2.0)],
        }
    elif A == 3:
        grids = {
            1: [(0.0, 0.0, a) for a in (0, 0.1, 0.2, 0.3, 0.5, 0.8, 1, 1.5, 2)],
            2: [(0.0, 0.5, a) for a in (0.6, 0.8, 1, 1.2, 1.5, 2, 3, 5)],
            3: [(0.5, 0.8, a) for a in (1, 1.2, 1.5, 2, 2.5, 3, 5)],
        }
    else:
        raise ScenarioError("case grids exist for A = 2 and A = 3 only")
    if case not in grids:
        raise ScenarioError(f"unknown case {case}")
    return [tuple(float(v) for v in p) for p in grids[case]]


# ---------------------------------------------------------------------------
# runtime
# ---------------------------------------------------------------------------

TABLE3_GRID = tuple((n_x, arms - 1) for n_x in (200, 300, 400, 500) for arms in (3, 4, 5, 6, 7))


@dataclass(frozen=True)
class BenchRow:
    n_control: int
    A: int
    N: int
    nominal_N: int
    repeats: int
    median: float
    min: float
    max: float
    std: float
    backend: str

    def row(self) -> dict:
        d = asdict(self)
        d["arms"] = self.A + 1
        return d


def runtime_bench(
    grid: Sequence[tuple[int, int]] = TABLE3_GRID,
    repeats: int = 5,
    mc_draws: int = DEFAULT_MC_DRAWS,
    seed: int = 0,
) -> list[BenchRow]:
    """Wall time of one full test per ``(n_control, A)`` cell (median of ``repeats``)."""
    from ._backend import backend_name

    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    # compile/warm every kernel once before timing
    multi_arm_lrst(gen_trial(bapi_default_scenario(3, 20, seed=seed), 0), mc_draws=1000)
    rows = []
    for n_x, A in grid:
        sc = bapi_default_scenario(A, n_x, seed=seed)
        ds = gen_trial(sc, 0)
        times = []
        for r in range(repeats):
            t0 = time.perf_counter()
            multi_arm_lrst(ds, mc_draws=mc_draws, seed=(seed, r))
            times.append(time.perf_counter() - t0)
        t = np.array(times)
        rows.append(
            BenchRow(n_x, A, sc.N, sc.nominal_N, repeats, float(np.median(t)), float(t.min()), float(t.max()),
                     float(t.std(ddof=1)) if repeats > 1 else 0.0, backend_name())
        )
    return rows


def scenario_from_mapping(data: Mapping) -> SimScenario:
    """Scenario from a parsed TOML/JSON file (see README for keys)."""
    data = dict(data)
    try:
        n_control = int(data.pop("n_control"))
    except KeyError:
        raise ScenarioError("scenario needs n_control") from None
    if "doses" in data:
        A = int(data.pop("doses"))
    elif "arms" in data:
        A = int(data.pop("arms")) - 1
    elif "n_doses" in data:
        A = len(data["n_doses"])
    else:
        raise ScenarioError("scenario needs doses (dose-arm count) or arms (total arm count)")
    known = {f for f in SimScenario.__dataclass_fields__} - {"n", "multipliers"}
    kw = {k: data[k] for k in list(data) if k in known}
    if "outcomes" in kw:
        kw["outcomes"] = tuple(OutcomeSpec(o["name"], o.get("direction", "higher_is_better")) for o in kw["outcomes"])
    return bapi_default_scenario(A, n_control, multipliers=data.get("multipliers"), n_doses=data.get("n_doses"), **kw)
