"""Weather feature tables: loading, validation, standardization and clustering."""

import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.cluster import kmeans_plusplus

from windflex.errors import DataValidationError

log = logging.getLogger(__name__)

WIND_LEVELS = (40, 60, 80, 100, 120, 140, 160, 180, 200)

PRESSURE = "pressure_100m"
HUMIDITY = "relativehumidity_2m"
TEMPERATURE = "temperature_100m"
FORECAST_HUB_SPEED = "forecast_windspeed_100m"


def speed_id(height: int) -> str:
    return f"windspeed_{height}m"


def direction_id(height: int) -> str:
    return f"winddirection_{height}m"


# Column names follow the WIND Toolkit export convention so files load without renaming.
WEATHER_FEATURES: tuple[str, ...] = (
    PRESSURE,
    HUMIDITY,
    TEMPERATURE,
    *(direction_id(h) for h in WIND_LEVELS),
    *(speed_id(h) for h in WIND_LEVELS),
)

HISTORY_FEATURES: tuple[str, ...] = (*WEATHER_FEATURES, FORECAST_HUB_SPEED)


def feature_unit(fid: str) -> str:
    if fid.startswith("pressure"):
        return "Pa"
    if fid.startswith("relativehumidity"):
        return "%"
    if fid.startswith("temperature"):
        return "C"
    if fid.startswith("winddirection"):
        return "deg"
    if "windspeed" in fid:
        return "m/s"
    return ""


def is_direction(fid: str) -> bool:
    return fid.startswith("winddirection")


def is_speed(fid: str) -> bool:
    return "windspeed" in fid


def feature_height(fid: str) -> int | None:
    tail = fid.rsplit("_", 1)[-1]
    if tail.endswith("m") and tail[:-1].isdigit():
        return int(tail[:-1])
    return None


def encode_directions(degrees) -> np.ndarray:
    return np.sin(np.deg2rad(np.asarray(degrees, dtype=float)))


@dataclass(frozen=True)
class FeatureTable:
    timestamps: pd.DatetimeIndex
    data: pd.DataFrame
    resolution: float
    units: Mapping[str, str] = field(default_factory=dict)
    dropped_rows: tuple[int, ...] = ()

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, timestamps: Sequence | None = None,
                   resolution: float | None = None) -> "FeatureTable":
        """Build a validated table from feature columns already in canonical ids."""
        frame = frame.astype(float).reset_index(drop=True)
        if timestamps is None:
            timestamps = pd.date_range("2000-01-01", periods=len(frame), freq="h")
        ts = pd.DatetimeIndex(timestamps)
        if len(ts) != len(frame):
            raise DataValidationError("timestamps and feature rows differ in length")
        step = _check_timestamps(ts) if resolution is None else float(resolution)
        if frame.isna().any().any():
            raise DataValidationError("feature table contains missing values")
        _check_ranges(frame)
        return cls(ts, frame, step, {c: feature_unit(c) for c in frame.columns})

    @property
    def features(self) -> tuple[str, ...]:
        return tuple(self.data.columns)

    @property
    def h(self) -> int:
        return len(self.data)

    @property
    def p(self) -> int:
        return self.data.shape[1]

    def column(self, fid: str) -> np.ndarray:
        if fid not in self.data.columns:
            raise DataValidationError(f"feature {fid!r} not in table")
        return self.data[fid].to_numpy(dtype=float)

    def encoded(self, features: Iterable[str] | None = None) -> pd.DataFrame:
        """Feature values with direction columns mapped through the sine."""
        cols = list(features) if features is not None else list(self.features)
        missing = [c for c in cols if c not in self.data.columns]
        if missing:
            raise DataValidationError(f"features not in table: {missing}")
        out = self.data[cols].copy()
        for c in cols:
            if is_direction(c):
                out[c] = encode_directions(out[c].to_numpy())
        return out

    def select(self, features: Iterable[str]) -> "FeatureTable":
        cols = list(features)
        return FeatureTable(self.timestamps, self.data[cols].copy(), self.resolution,
                            {c: self.units.get(c, feature_unit(c)) for c in cols}, self.dropped_rows)

    def rows(self, start: int, stop: int) -> "FeatureTable":
        return FeatureTable(self.timestamps[start:stop], self.data.iloc[start:stop].reset_index(drop=True),
                            self.resolution, self.units, ())

    def split_days(self, periods: int) -> list["FeatureTable"]:
        if self.h % periods:
            raise DataValidationError(f"{self.h} rows do not split into days of {periods} periods")
        return [self.rows(i, i + periods) for i in range(0, self.h, periods)]


def _check_timestamps(ts: pd.DatetimeIndex) -> float:
    if len(ts) < 2:
        return 3600.0
    steps = np.diff(ts.asi8)
    if np.any(steps <= 0):
        bad = int(np.argmax(steps <= 0)) + 1
        raise DataValidationError(f"non-monotone timestamps at row {bad}")
    if np.any(steps != steps[0]):
        bad = int(np.argmax(steps != steps[0])) + 1
        raise DataValidationError(f"timestamps are not on a fixed step (row {bad})")
    return float(steps[0]) / 1e9


def _check_ranges(frame: pd.DataFrame) -> None:
    for col in frame.columns:
        values = frame[col].to_numpy(dtype=float)
        if is_speed(col):
            bad = values < 0
            what = "wind speed below 0"
        elif col.startswith("relativehumidity"):
            bad = (values < 0) | (values > 100)
            what = "relative humidity outside [0, 100]"
        elif col.startswith("pressure"):
            bad = values <= 0
            what = "pressure not positive"
        elif is_direction(col):
            bad = (values < 0) | (values > 360)
            what = "direction outside [0, 360]"
        elif col.startswith("temperature"):
            bad = values <= -100
            what = "temperature below -100 C"
        else:
            continue
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise DataValidationError(f"{col}: {what} in row {row} (value {values[row]:g})")


def load_feature_table(source: Path | str, schema: Mapping[str, str] | None = None,
                       features: Iterable[str] | None = None,
                       timestamp_column: str = "timestamp") -> FeatureTable:
    """Read a delimited file with an ISO-8601 timestamp column and named feature columns.

    ``schema`` maps feature ids to file columns; features without an entry are
    looked up under their own id. Rows with a missing value in a required feature
    are dropped and reported on the returned table.
    """
    path = Path(source)
    if not path.exists():
        raise DataValidationError(f"weather file not found: {path}")
    schema = dict(schema or {})
    wanted = list(features) if features is not None else list(WEATHER_FEATURES)

    raw = pd.read_csv(path, float_precision="round_trip")
    if timestamp_column not in raw.columns:
        raise DataValidationError(f"{path.name}: missing timestamp column {timestamp_column!r}")
    columns = {fid: schema.get(fid, fid) for fid in wanted}
    missing = [f"{fid} (column {col!r})" for fid, col in columns.items() if col not in raw.columns]
    if missing:
        raise DataValidationError(f"{path.name}: missing columns: {', '.join(missing)}")

    try:
        ts = pd.DatetimeIndex(pd.to_datetime(raw[timestamp_column], format="ISO8601"))
    except (ValueError, TypeError) as e:
        raise DataValidationError(f"{path.name}: unparseable timestamps: {e}") from e
    resolution = _check_timestamps(ts)

    frame = pd.DataFrame({fid: pd.to_numeric(raw[col], errors="coerce") for fid, col in columns.items()})
    na = frame.isna().any(axis=1).to_numpy()
    dropped = tuple(int(i) for i in np.flatnonzero(na))
    if dropped:
        log.warning("[ingest] %s: dropped %d rows with missing values: %s", path.name, len(dropped),
                    list(dropped[:20]))
    _check_ranges(frame)

    keep = ~na
    table = FeatureTable(
        timestamps=ts[keep],
        data=frame.loc[keep].reset_index(drop=True).astype(float),
        resolution=resolution,
        units={fid: feature_unit(fid) for fid in wanted},
        dropped_rows=dropped,
    )
    log.info("[ingest] %s: h=%d p=%d step=%gs", path.name, table.h, table.p, resolution)
    return table


@dataclass(frozen=True)
class StandardizedTable:
    X: np.ndarray
    features: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    direction: np.ndarray

    @property
    def h(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def index(self, fid: str) -> int:
        try:
            return self.features.index(fid)
        except ValueError:
            raise DataValidationError(f"feature {fid!r} not in standardized table") from None


def standardize(table: FeatureTable, features: Iterable[str] | None = None) -> StandardizedTable:
    enc = table.encoded(features)
    if len(enc) < 2:
        raise DataValidationError("standardization needs at least 2 rows")
    values = enc.to_numpy(dtype=float)
    flat = np.ptp(values, axis=0) == 0
    if flat.any():
        names = [enc.columns[i] for i in np.flatnonzero(flat)]
        raise DataValidationError(f"zero-variance feature(s): {', '.join(names)}")
    mean = values.mean(axis=0)
    std = values.std(axis=0, ddof=1)
    X = (values - mean) / std
    direction = np.array([is_direction(c) for c in enc.columns])
    return StandardizedTable(X, tuple(enc.columns), mean, std, direction)


def destandardize(std: StandardizedTable, X: np.ndarray | None = None) -> pd.DataFrame:
    """Inverse of standardize. Direction columns come back in their sine encoding."""
    X = std.X if X is None else np.asarray(X, dtype=float)
    return pd.DataFrame(X * std.std + std.mean, columns=list(std.features))


@dataclass(frozen=True)
class ClusterAssignment:
    k: int
    labels: np.ndarray
    centroids: np.ndarray
    features: tuple[str, ...]
    centroids_native: np.ndarray
    inertia_history: tuple[float, ...]
    iterations: int


def _assign(X: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    return labels, d2[np.arange(len(X)), labels]


def cluster_weather(table: FeatureTable, feature_subset: Iterable[str], k: int, seed: int,
                    max_iter: int = 200) -> ClusterAssignment:
    """k-means on standardized features with k-means++ seeding."""
    if k < 1:
        raise DataValidationError("k must be at least 1")
    std = standardize(table, feature_subset)
    X = std.X
    distinct = np.unique(X, axis=0).shape[0]
    if k > distinct:
        raise DataValidationError(f"k={k} exceeds the {distinct} distinct points")

    centroids, _ = kmeans_plusplus(X, n_clusters=k, random_state=seed)
    labels, d2 = _assign(X, centroids)
    history = [float(d2.sum())]
    iterations = 0
    for iterations in range(1, max_iter + 1):
        new = np.empty_like(centroids)
        for j in range(k):
            members = labels == j
            if members.any():
                new[j] = X[members].mean(axis=0)
            else:
                # reseed an empty cluster at the point farthest from its centroid
                far = int(d2.argmax())
                new[j] = X[far]
                d2[far] = 0.0
        centroids = new
        new_labels, d2 = _assign(X, centroids)
        history.append(float(d2.sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    else:
        log.warning("[cluster] iteration cap %d reached", max_iter)

    log.info("[cluster] k=%d converged after %d iterations, inertia=%.4g", k, iterations, history[-1])
    native = destandardize(std, centroids).to_numpy()
    return ClusterAssignment(k, labels, centroids, std.features, native, tuple(history), iterations)


@dataclass(frozen=True)
class ErrorHistogram:
    label: int
    edges: np.ndarray
    mass: np.ndarray
    count: int


def conditional_error_histogram(forecast, actual, condition_labels, bins: int,
                                labels: Iterable[int] | None = None) -> dict[int, ErrorHistogram]:
    """Normalized histogram of (actual - forecast) per condition label on shared bin edges."""
    forecast = np.asarray(forecast, dtype=float)
    actual = np.asarray(actual, dtype=float)
    cond = np.asarray(condition_labels)
    if not (len(forecast) == len(actual) == len(cond)):
        raise DataValidationError("forecast, actual and labels must have equal lengths")
    if bins < 2:
        raise DataValidationError("bins must be at least 2")
    errors = actual - forecast
    edges = np.histogram_bin_edges(errors, bins=bins)
    wanted = sorted(set(cond.tolist())) if labels is None else list(labels)
    out = {}
    for lab in wanted:
        sel = errors[cond == lab]
        if sel.size == 0:
            raise DataValidationError(f"label {lab} has no observations")
        counts, _ = np.histogram(sel, bins=edges)
        out[lab] = ErrorHistogram(lab, edges, counts / counts.sum(), int(sel.size))
    return out
