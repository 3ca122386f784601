"""Multi-arm longitudinal trial panels: container, CSV/schema I/O, validation.

A panel holds change-from-baseline values for one control arm and ``A >= 1``
dose arms, each as an array of shape ``(n_arm, T, K)`` (subject, visit,
outcome). Only complete cases are accepted.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

CSV_COLUMNS = ("subject_id", "arm", "visit", "outcome", "value")


class DatasetError(ValueError):
    """Base class for invalid trial input. ``code`` names the failure kind."""

    code = "DatasetError"


class MissingCell(DatasetError):
    code = "MissingCell"


class UnknownArm(DatasetError):
    code = "UnknownArm"


class UnknownOutcome(DatasetError):
    code = "UnknownOutcome"


class NonNumericValue(DatasetError):
    code = "NonNumericValue"


class DuplicateCell(DatasetError):
    code = "DuplicateCell"


class InsufficientSubjects(DatasetError):
    code = "InsufficientSubjects"


class SchemaError(DatasetError):
    code = "SchemaError"


class Direction(str, enum.Enum):
    HIGHER_IS_BETTER = "higher_is_better"
    HIGHER_IS_WORSE = "higher_is_worse"

    @classmethod
    def parse(cls, value) -> "Direction":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {
            "higherisbetter": cls.HIGHER_IS_BETTER,
            "higher_is_better": cls.HIGHER_IS_BETTER,
            "better": cls.HIGHER_IS_BETTER,
            "higherisworse": cls.HIGHER_IS_WORSE,
            "higher_is_worse": cls.HIGHER_IS_WORSE,
            "worse": cls.HIGHER_IS_WORSE,
        }
        if key not in aliases:
            raise SchemaError(f"unknown outcome direction {value!r}")
        return aliases[key]

    def flipped(self) -> "Direction":
        if self is Direction.HIGHER_IS_BETTER:
            return Direction.HIGHER_IS_WORSE
        return Direction.HIGHER_IS_BETTER


@dataclass(frozen=True)
class OutcomeSpec:
    name: str
    direction: Direction = Direction.HIGHER_IS_BETTER

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction.parse(self.direction))


@dataclass(frozen=True)
class SchemaConfig:
    """Arm and outcome layout of a trial file."""

    control_arm: str
    dose_arms: tuple[str, ...]
    outcomes: tuple[OutcomeSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "dose_arms", tuple(str(a) for a in self.dose_arms))
        outs = tuple(o if isinstance(o, OutcomeSpec) else OutcomeSpec(**o) for o in self.outcomes)
        object.__setattr__(self, "outcomes", outs)
        if not self.dose_arms:
            raise SchemaError("at least one dose arm is required")
        arms = (self.control_arm,) + self.dose_arms
        if len(set(arms)) != len(arms):
            raise SchemaError("arm names must be unique")
        names = [o.name for o in outs]
        if not names:
            raise SchemaError("at least one outcome is required")
        if len(set(names)) != len(names):
            raise SchemaError("outcome names must be unique")

    @classmethod
    def from_mapping(cls, data: Mapping) -> "SchemaConfig":
        try:
            outcomes = []
            for o in data["outcomes"]:
                if isinstance(o, str):
                    outcomes.append(OutcomeSpec(o))
                else:
                    outcomes.append(OutcomeSpec(str(o["name"]), o.get("direction", "higher_is_better")))
            return cls(str(data["control_arm"]), tuple(data["dose_arms"]), tuple(outcomes))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema: {exc}") from exc

    def to_mapping(self) -> dict:
        return {
            "control_arm": self.control_arm,
            "dose_arms": list(self.dose_arms),
            "outcomes": [{"name": o.name, "direction": o.direction.value} for o in self.outcomes],
        }


def read_config_file(path) -> dict:
    """Parse a JSON or TOML file into a dict (chosen by suffix)."""
    path = Path(path)
    if path.suffix.lower() == ".toml":
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_schema(path) -> SchemaConfig:
    try:
        data = read_config_file(path)
    except (OSError, ValueError) as exc:
        raise SchemaError(f"cannot read schema {path}: {exc}") from exc
    return SchemaConfig.from_mapping(data)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TrialDataset:
    """Complete-case panel of change-from-baseline values.

    ``values[arm]`` has shape ``(n_arm, T, K)``. Instances are immutable.
    """

    control_arm: str
    dose_arms: tuple[str, ...]
    values: Mapping[str, np.ndarray]
    outcomes: tuple[OutcomeSpec, ...]
    visits: tuple = ()
    subject_ids: Mapping[str, tuple] = field(default_factory=dict)

    def __post_init__(self):
        dose_arms = tuple(self.dose_arms)
        object.__setattr__(self, "dose_arms", dose_arms)
        if not dose_arms:
            raise InsufficientSubjects("at least one dose arm is required")
        arms = (self.control_arm,) + dose_arms
        if len(set(arms)) != len(arms):
            raise SchemaError("arm names must be unique")
        missing = [a for a in arms if a not in self.values]
        if missing:
            raise UnknownArm(f"no data for arm(s) {missing}")
        extra = [a for a in self.values if a not in arms]
        if extra:
            raise UnknownArm(f"arm(s) {extra} not declared in the schema")

        vals = {a: _readonly(self.values[a]) for a in arms}
        shapes = {v.shape[1:] for v in vals.values()}
        if any(v.ndim != 3 for v in vals.values()) or len(shapes) != 1:
            raise SchemaError("every arm must have shape (n, T, K) with common T, K")
        _, T, K = vals[self.control_arm].shape
        if T < 1 or K < 1:
            raise SchemaError("need at least one visit and one outcome")
        outcomes = tuple(o if isinstance(o, OutcomeSpec) else OutcomeSpec(o) for o in self.outcomes)
        if not outcomes:
            outcomes = tuple(OutcomeSpec(f"outcome{k + 1}") for k in range(K))
        if len(outcomes) != K:
            raise SchemaError(f"{len(outcomes)} outcome specs for K={K}")
        if len({o.name for o in outcomes}) != K:
            raise SchemaError("outcome names must be unique")
        for a, v in vals.items():
            if v.shape[0] < 2:
                raise InsufficientSubjects(f"arm {a!r} has {v.shape[0]} subject(s); at least 2 required")
            if not np.all(np.isfinite(v)):
                raise NonNumericValue(f"arm {a!r} contains non-finite values")
        visits = tuple(self.visits) if self.visits else tuple(range(1, T + 1))
        if len(visits) != T:
            raise SchemaError(f"{len(visits)} visit labels for T={T}")
        sids = dict(self.subject_ids)
        for a in arms:
            if a not in sids:
                sids[a] = tuple(f"{a}-{i + 1}" for i in range(vals[a].shape[0]))
            elif len(sids[a]) != vals[a].shape[0]:
                raise SchemaError(f"subject id count mismatch for arm {a!r}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "visits", visits)
        object.__setattr__(self, "subject_ids", sids)

    @classmethod
    def from_arrays(cls, control, doses, outcomes=(), visits=(), control_arm: str = "control") -> "TrialDataset":
        """Build from a control array and a dose mapping (or sequence) of arrays."""
        if isinstance(doses, Mapping):
            dose_map = dict(doses)
        else:
            dose_map = {f"dose{i + 1}": d for i, d in enumerate(doses)}
        values = {control_arm: control, **dose_map}
        return cls(control_arm, tuple(dose_map), values, tuple(outcomes), tuple(visits))

    @property
    def arms(self) -> tuple[str, ...]:
        return (self.control_arm,) + self.dose_arms

    @property
    def A(self) -> int:
        return len(self.dose_arms)

    @property
    def T(self) -> int:
        return self.values[self.control_arm].shape[1]

    @property
    def K(self) -> int:
        return self.values[self.control_arm].shape[2]

    @property
    def n(self) -> dict[str, int]:
        return {a: self.values[a].shape[0] for a in self.arms}

    @property
    def N(self) -> int:
        return sum(self.n.values())

    @property
    def control(self) -> np.ndarray:
        return self.values[self.control_arm]

    def dose(self, arm: str) -> np.ndarray:
        if arm not in self.dose_arms:
            raise UnknownArm(f"{arm!r} is not a dose arm")
        return self.values[arm]

    def pair(self, arm: str) -> "TrialDataset":
        """Control plus a single dose arm."""
        self.dose(arm)
        return replace(
            self,
            dose_arms=(arm,),
            values={self.control_arm: self.control, arm: self.values[arm]},
            subject_ids={self.control_arm: self.subject_ids[self.control_arm], arm: self.subject_ids[arm]},
        )

    def map_values(self, fn) -> "TrialDataset":
        """Apply ``fn(arm, array) -> array`` to every arm."""
        return replace(self, values={a: fn(a, v) for a, v in self.values.items()})


@dataclass(frozen=True)
class SampleRatios:
    """Finite-sample allocation ratios.

    ``share_*`` are arm shares of the total ``N``; ``control_to_dose`` is
    ``n_x / n_i``; ``control_share_pair`` is ``n_x / (n_x + n_i)``.
    """

    n_control: int
    n_doses: tuple[int, ...]

    @property
    def N(self) -> int:
        return self.n_control + sum(self.n_doses)

    @property
    def share_control(self) -> float:
        return self.n_control / self.N

    @property
    def share_doses(self) -> tuple[float, ...]:
        return tuple(n / self.N for n in self.n_doses)

    @property
    def control_to_dose(self) -> tuple[float, ...]:
        return tuple(self.n_control / n for n in self.n_doses)

    @property
    def control_share_pair(self) -> tuple[float, ...]:
        return tuple(self.n_control / (self.n_control + n) for n in self.n_doses)


def sample_ratios(ds: TrialDataset) -> SampleRatios:
    n = ds.n
    return SampleRatios(n[ds.control_arm], tuple(n[a] for a in ds.dose_arms))


def harmonize_directions(ds: TrialDataset, specs: Sequence[OutcomeSpec] | None = None) -> TrialDataset:
    """Negate every outcome whose spec says higher values are worse.

    Negated outcomes get their direction flipped, so with the dataset's own
    specs the result is all higher-is-better. Applying twice with the same
    explicit ``specs`` restores the original values.
    """
    specs = tuple(ds.outcomes if specs is None else specs)
    if len(specs) != ds.K:
        raise SchemaError(f"{len(specs)} outcome specs for K={ds.K}")
    flip = np.array([s.direction is Direction.HIGHER_IS_WORSE for s in specs])
    if not flip.any():
        return ds
    sign = np.where(flip, -1.0, 1.0)
    outcomes = tuple(
        replace(o, direction=o.direction.flipped()) if f else o for o, f in zip(ds.outcomes, flip)
    )
    return replace(ds.map_values(lambda a, v: v * sign), outcomes=outcomes)


def is_harmonized(ds: TrialDataset) -> bool:
    return all(o.direction is Direction.HIGHER_IS_BETTER for o in ds.outcomes)


def _visit_order(labels: Iterable[str]) -> list[str]:
    labels = list(labels)
    try:
        return sorted(labels, key=lambda s: (float(s), s))
    except ValueError:
        return sorted(labels)


def load_csv(path, config) -> TrialDataset:
    """Read a long-format CSV (``subject_id,arm,visit,outcome,value``).

    ``config`` is a :class:`SchemaConfig`, a mapping, or a path to a JSON/TOML
    schema file. Visits are ordered numerically when every label parses as a
    number, lexicographically otherwise.
    """
    if not isinstance(config, SchemaConfig):
        config = SchemaConfig.from_mapping(config) if isinstance(config, Mapping) else load_schema(config)
    arms = (config.control_arm,) + config.dose_arms
    outcome_index = {o.name: k for k, o in enumerate(config.outcomes)}

    cells: dict[str, dict[str, dict[tuple[str, str], float]]] = {a: {} for a in arms}
    visits: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        absent = [c for c in CSV_COLUMNS if c not in header]
        if absent:
            raise SchemaError(f"missing column(s) {absent} in {path}")
        reader.fieldnames = header
        for lineno, row in enumerate(reader, start=2):
            arm = row["arm"].strip()
            if arm not in cells:
                raise UnknownArm(f"line {lineno}: arm {arm!r} not in schema {list(arms)}")
            outcome = row["outcome"].strip()
            if outcome not in outcome_index:
                raise UnknownOutcome(f"line {lineno}: outcome {outcome!r} not in schema")
            raw = (row["value"] or "").strip()
            try:
                value = float(raw)
            except ValueError:
                raise NonNumericValue(f"line {lineno}: value {raw!r} is not numeric") from None
            if not math.isfinite(value):
                raise NonNumericValue(f"line {lineno}: value {raw!r} is not finite")
            sid, visit = row["subject_id"].strip(), row["visit"].strip()
            subj = cells[arm].setdefault(sid, {})
            key = (visit, outcome)
            if key in subj:
                raise DuplicateCell(f"line {lineno}: subject {sid!r} has two values for visit {visit!r}, outcome {outcome!r}")
            subj[key] = value
            visits.add(visit)

    seen: dict[str, str] = {}
    for arm, subjects in cells.items():
        for sid in subjects:
            if sid in seen:
                raise DuplicateCell(f"subject {sid!r} appears in arms {seen[sid]!r} and {arm!r}")
            seen[sid] = arm

    visit_order = _visit_order(visits)
    T, K = len(visit_order), len(config.outcomes)
    values, sids = {}, {}
    for arm, subjects in cells.items():
        arr = np.empty((len(subjects), T, K))
        for i, (sid, subj) in enumerate(subjects.items()):
            for t, visit in enumerate(visit_order):
                for o in config.outcomes:
                    try:
                        arr[i, t, outcome_index[o.name]] = subj[(visit, o.name)]
                    except KeyError:
                        raise MissingCell(
                            f"subject {sid!r} (arm {arm!r}) has no value for visit {visit!r}, outcome {o.name!r}"
                        ) from None
        values[arm] = arr
        sids[arm] = tuple(subjects)
    for arm in arms:
        if values[arm].shape[0] < 2:
            raise InsufficientSubjects(f"arm {arm!r} has {values[arm].shape[0]} subject(s); at least 2 required")
    return TrialDataset(config.control_arm, config.dose_arms, values, config.outcomes, tuple(visit_order), sids)


def write_csv(ds: TrialDataset, path) -> None:
    """Write ``ds`` in long format; floats use ``repr`` so reloading is exact."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for arm in ds.arms:
            v = ds.values[arm]
            for i, sid in enumerate(ds.subject_ids[arm]):
                for t, visit in enumerate(ds.visits):
                    for k, o in enumerate(ds.outcomes):
                        w.writerow((sid, arm, visit, o.name, repr(float(v[i, t, k]))))


def schema_of(ds: TrialDataset) -> SchemaConfig:
    return SchemaConfig(ds.control_arm, ds.dose_arms, ds.outcomes)
