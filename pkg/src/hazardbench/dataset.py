"""Loading, validating, splitting and standardizing survival datasets."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .rng import SplitMix64, derive_seed


class DatasetError(Exception):
    """Base class for dataset problems."""


class SchemaError(DatasetError):
    def __init__(self, column: str, path=None):
        self.column = column
        where = f" in {path}" if path is not None else ""
        super().__init__(f"missing required column {column!r}{where}")


class EmptyDatasetError(DatasetError):
    pass


class SplitInfeasibleError(DatasetError):
    pass


class Schema(str, enum.Enum):
    PBC = "PBC"
    GBCSG2 = "GBCSG2"
    GENERIC = "GENERIC"


@dataclass(frozen=True)
class SurvivalRecord:
    features: tuple[float, ...]
    time: float
    event: bool


@dataclass(frozen=True)
class LoadMetadata:
    rows_read: int
    rows_dropped: int
    n: int
    n_censored: int
    censoring_fraction: float
    rows_unparseable: int = 0

    def to_json(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_dropped": self.rows_dropped,
            "n": self.n,
            "n_censored": self.n_censored,
            "censoring_fraction": self.censoring_fraction,
        }


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Column-named survival data held as arrays.

    ``X`` has shape (n, m); ``time`` is positive; ``event`` is True where the
    event was observed and False where the subject was right-censored.
    """

    X: np.ndarray
    time: np.ndarray
    event: np.ndarray
    feature_names: tuple[str, ...]
    source_schema: Schema = Schema.GENERIC
    metadata: LoadMetadata | None = field(default=None, compare=False)

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("X must be 2-dimensional")
        time = np.ascontiguousarray(self.time, dtype=np.float64)
        event = np.ascontiguousarray(self.event, dtype=bool)
        if not (X.shape[0] == time.shape[0] == event.shape[0]):
            raise ValueError("X, time and event must have the same length")
        if len(self.feature_names) != X.shape[1]:
            raise ValueError(
                f"{len(self.feature_names)} feature names for {X.shape[1]} columns")
        if time.size and not np.all(time > 0):
            raise ValueError("observed times must be positive")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(time)):
            raise ValueError("non-finite values in dataset")
        for arr in (X, time, event):
            arr.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "event", event)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self) -> int:
        return self.time.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_events(self) -> int:
        return int(self.event.sum())

    @property
    def records(self) -> list[SurvivalRecord]:
        return [SurvivalRecord(tuple(float(v) for v in x), float(t), bool(e))
                for x, t, e in zip(self.X, self.time, self.event)]

    @classmethod
    def from_records(cls, records, feature_names, source_schema=Schema.GENERIC):
        records = list(records)
        m = len(feature_names)
        X = np.array([r.features for r in records], dtype=np.float64).reshape(len(records), m)
        return cls(X, np.array([r.time for r in records], dtype=np.float64),
                   np.array([r.event for r in records], dtype=bool),
                   tuple(feature_names), source_schema)

    def subset(self, idx) -> SurvivalDataset:
        idx = np.asarray(idx, dtype=np.int64)
        return SurvivalDataset(self.X[idx], self.time[idx], self.event[idx],
                               self.feature_names, self.source_schema)

    def with_features(self, X: np.ndarray, feature_names=None) -> SurvivalDataset:
        return SurvivalDataset(X, self.time, self.event,
                               self.feature_names if feature_names is None else feature_names,
                               self.source_schema)

    def drop_features(self, names) -> SurvivalDataset:
        names = set(names)
        keep = [i for i, f in enumerate(self.feature_names) if f not in names]
        return SurvivalDataset(self.X[:, keep], self.time, self.event,
                               tuple(self.feature_names[i] for i in keep),
                               self.source_schema, self.metadata)


# Column schemas.  Each covariate maps a raw string cell to a float.
def _binary(true_value: str, false_value: str):
    def enc(cell: str) -> float:
        c = cell.strip().lower()
        if c == true_value:
            return 1.0
        if c == false_value:
            return 0.0
        raise ValueError(f"unexpected category {cell!r}")
    return enc


def _ordinal(levels: dict[str, float]):
    def enc(cell: str) -> float:
        try:
            return levels[cell.strip()]
        except KeyError:
            raise ValueError(f"unexpected level {cell!r}") from None
    return enc


def _numeric(cell: str) -> float:
    return float(cell)


def _pbc_trt(cell: str) -> float:
    # 1 = D-penicillamine, 2 = placebo
    v = float(cell)
    if v not in (1.0, 2.0):
        raise ValueError(f"unexpected treatment code {cell!r}")
    return 1.0 if v == 1.0 else 0.0


@dataclass(frozen=True)
class _SchemaSpec:
    time: str
    event: str
    covariates: tuple[tuple[str, str, object], ...]  # (column, encoded name, encoder)


GBCSG2_SPEC = _SchemaSpec(
    time="time", event="cens",
    covariates=(
        ("horTh", "horTh=yes", _binary("yes", "no")),
        ("age", "age", _numeric),
        ("menostat", "menostat=post", _binary("post", "pre")),
        ("tsize", "tsize", _numeric),
        ("tgrade", "tgrade", _ordinal({"I": 1.0, "II": 2.0, "III": 3.0})),
        ("pnodes", "pnodes", _numeric),
        ("progrec", "progrec", _numeric),
        ("estrec", "estrec", _numeric),
    ),
)

PBC_SPEC = _SchemaSpec(
    time="time", event="status",
    covariates=(
        ("age", "age", _numeric),
        ("albumin", "albumin", _numeric),
        ("alk.phos", "alk.phos", _numeric),
        ("ascites", "ascites", _numeric),
        ("ast", "ast", _numeric),
        ("bili", "bili", _numeric),
        ("chol", "chol", _numeric),
        ("copper", "copper", _numeric),
        ("edema", "edema", _numeric),
        ("hepato", "hepato", _numeric),
        ("id", "id", _numeric),
        ("platelet", "platelet", _numeric),
        ("protime", "protime", _numeric),
        ("sex", "sex=f", _binary("f", "m")),
        ("spiders", "spiders", _numeric),
        ("stage", "stage", _numeric),
        ("trt", "trt=D-penicillamine", _pbc_trt),
        ("trig", "trig", _numeric),
    ),
)

#: identifier-like PBC column, dropped by ``--drop-id-feature``
PBC_ID_FEATURE = "id"

_MISSING = {"", "na", "nan", "null", "?"}


def _event_value(cell: str, schema: Schema) -> bool:
    v = float(cell)
    if schema is Schema.PBC and v == 2.0:
        # R survival::pbc coding: 0 censored, 1 transplant (censored), 2 dead
        return True
    if v == 1.0:
        return True
    if v == 0.0:
        return False
    raise ValueError(f"event indicator must be 0/1, got {cell!r}")


def load_csv(path, schema: Schema | str = Schema.GENERIC, *,
             time_column: str = "time", event_column: str = "event") -> SurvivalDataset:
    """Read a survival CSV into a fully numeric dataset.

    For ``GENERIC`` files every column other than the time and event columns
    must be numeric.  Rows with a missing cell are dropped; rows with an
    unparseable cell, a non-positive time or a non-finite value are rejected.
    Both are counted in ``metadata.rows_dropped``.

    For a PBC file that uses the R ``survival`` status coding (0/1/2), status
    2 (death) is the event and transplant is treated as censoring.
    """
    schema = Schema(schema)
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDatasetError(f"{path} has no header row") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]

    if schema is Schema.GBCSG2:
        spec = GBCSG2_SPEC
    elif schema is Schema.PBC:
        spec = PBC_SPEC
    else:
        if time_column not in header:
            raise SchemaError(time_column, path)
        if event_column not in header:
            raise SchemaError(event_column, path)
        spec = _SchemaSpec(time=time_column, event=event_column, covariates=tuple(
            (h, h, _numeric) for h in header if h not in (time_column, event_column)))

    col = {}
    for name in (spec.time, spec.event, *(c[0] for c in spec.covariates)):
        if name not in col:
            if name not in header:
                raise SchemaError(name, path)
            col[name] = header.index(name)

    X, times, events = [], [], []
    missing = unparseable = 0
    for row in rows:
        cells = {name: (row[i].strip() if i < len(row) else "") for name, i in col.items()}
        if any(c.lower() in _MISSING for c in cells.values()):
            missing += 1
            continue
        try:
            t = float(cells[spec.time])
            e = _event_value(cells[spec.event], schema)
            x = [enc(cells[c]) for c, _, enc in spec.covariates]
        except ValueError:
            unparseable += 1
            continue
        if not (math.isfinite(t) and t > 0 and all(math.isfinite(v) for v in x)):
            unparseable += 1
            continue
        X.append(x)
        times.append(t)
        events.append(e)

    if not times:
        raise EmptyDatasetError(f"{path} contains no usable rows")
    event = np.array(events, dtype=bool)
    if not event.any():
        raise EmptyDatasetError(f"{path} contains no observed events")
    n = len(times)
    n_cens = int(n - event.sum())
    meta = LoadMetadata(rows_read=len(rows), rows_dropped=missing + unparseable, n=n,
                        n_censored=n_cens, censoring_fraction=n_cens / n,
                        rows_unparseable=unparseable)
    return SurvivalDataset(np.array(X, dtype=np.float64).reshape(n, len(spec.covariates)),
                           np.array(times), event,
                           tuple(c[1] for c in spec.covariates), schema, meta)


def bundled_path(name: str) -> Path:
    """Path of a bundled dataset CSV (``"pbc"`` or ``"gbcsg2"``)."""
    name = name.lower()
    if name not in ("pbc", "gbcsg2"):
        raise ValueError(f"unknown bundled dataset {name!r}")
    return Path(str(resources.files("hazardbench") / "data" / f"{name}.csv"))


def load_bundled(name: str, drop_id_feature: bool = False) -> SurvivalDataset:
    name = name.lower()
    data = load_csv(bundled_path(name), Schema.PBC if name == "pbc" else Schema.GBCSG2)
    if drop_id_feature and name == "pbc":
        data = data.drop_features([PBC_ID_FEATURE])
    return data


@dataclass(frozen=True)
class SplitSpec:
    seed: int
    test_fraction: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")


MAX_SPLIT_RETRIES = 100


def split_indices(n: int, event: np.ndarray, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    if n == 0:
        raise EmptyDatasetError("cannot split an empty dataset")
    n_test = int(round(n * spec.test_fraction))  # round-half-even
    if n_test < 1 or n_test >= n:
        raise SplitInfeasibleError(f"test size {n_test} leaves an empty partition (n={n})")
    for attempt in range(MAX_SPLIT_RETRIES):
        perm = SplitMix64(derive_seed(spec.seed, attempt)).permutation(n)
        test, train = np.sort(perm[:n_test]), np.sort(perm[n_test:])
        if event[test].any() and event[train].any():
            return train, test
    raise SplitInfeasibleError(
        f"no split with events on both sides after {MAX_SPLIT_RETRIES} attempts")


def train_test_split(data: SurvivalDataset, spec: SplitSpec) -> tuple[SurvivalDataset, SurvivalDataset]:
    """Seeded partition into (train, test); test gets ``round(n * test_fraction)`` rows."""
    train, test = split_indices(len(data), data.event, spec)
    return data.subset(train), data.subset(test)


@dataclass(frozen=True)
class Standardization:
    means: np.ndarray
    stds: np.ndarray
    zero_variance: tuple[int, ...]

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.means) / self.stds


def fit_standardization(X: np.ndarray) -> Standardization:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise EmptyDatasetError("cannot standardize an empty training set")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    zero = stds <= 1e-12 * np.maximum(1.0, np.abs(means))
    stds = np.where(zero, 1.0, stds)
    return Standardization(means, stds, tuple(int(i) for i in np.flatnonzero(zero)))


def standardize(train: SurvivalDataset, test: SurvivalDataset):
    """Z-score both partitions with training statistics.

    Returns ``(train, test, stats)``; constant training columns are only
    centered and listed in ``stats.zero_variance``.
    """
    stats = fit_standardization(train.X)
    return train.with_features(stats.transform(train.X)), test.with_features(stats.transform(test.X)), stats
