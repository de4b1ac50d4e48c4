"""Forecast-interval to power-curve-region transition model and conditional error laws."""

import logging
import warnings
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from windflex.errors import DataValidationError
from windflex.turbine import Region, TurbineSpec, classify_regions

log = logging.getLogger(__name__)

FORMAT_VERSION = 1

FAMILIES: dict[str, object] = {
    "normal": stats.norm,
    "laplace": stats.laplace,
    "logistic": stats.logistic,
    "shifted-gamma": stats.gamma,
    "student-t": stats.t,
}

DEFAULT_PLACEHOLDERS = {Region.I: 1.0, Region.III: 20.0, Region.IV: 30.0}


@dataclass(frozen=True)
class FittedDistribution:
    family: str
    params: tuple[float, ...]
    score: float
    n: int
    fallback: bool = False
    hist_counts: tuple[float, ...] = ()
    hist_edges: tuple[float, ...] = ()

    def frozen(self):
        if self.family == "empirical":
            return stats.rv_histogram((np.asarray(self.hist_counts), np.asarray(self.hist_edges)))
        if self.family == "point":
            return None
        return FAMILIES[self.family](*self.params)

    def ppf(self, u):
        dist = self.frozen()
        if dist is None:
            return np.full(np.shape(u), self.params[0], dtype=float)
        return dist.ppf(u)

    def cdf(self, x):
        dist = self.frozen()
        if dist is None:
            return (np.asarray(x, dtype=float) >= self.params[0]).astype(float)
        return dist.cdf(x)

    def pdf(self, x):
        dist = self.frozen()
        if dist is None:
            raise DataValidationError("point distribution has no density")
        return dist.pdf(x)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": list(self.params),
            "score": self.score,
            "n": self.n,
            "fallback": self.fallback,
            "hist_counts": list(self.hist_counts),
            "hist_edges": list(self.hist_edges),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FittedDistribution":
        return cls(
            family=doc["family"],
            params=tuple(doc["params"]),
            score=doc["score"],
            n=doc["n"],
            fallback=doc.get("fallback", False),
            hist_counts=tuple(doc.get("hist_counts", ())),
            hist_edges=tuple(doc.get("hist_edges", ())),
        )


def _empirical(samples: np.ndarray, bins: int) -> FittedDistribution:
    if np.ptp(samples) == 0:
        return FittedDistribution("point", (float(samples[0]),), 0.0, samples.size, fallback=True)
    counts, edges = np.histogram(samples, bins=min(bins, max(2, samples.size)))
    return FittedDistribution("empirical", (), 0.0, samples.size, True,
                              tuple(float(c) for c in counts), tuple(float(e) for e in edges))


def fit_best_distribution(samples, families: Sequence[str] = tuple(FAMILIES), min_samples: int = 30,
                          bins: int = 50) -> FittedDistribution:
    """Maximum-likelihood fit of each candidate family, ranked by squared error against the histogram."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise DataValidationError("no samples to fit")
    if x.size < min_samples or np.ptp(x) == 0:
        return _empirical(x, bins)

    density, edges = np.histogram(x, bins=bins, density=True)
    centers = (edges[:-1] + edges[1:]) / 2
    fits = []
    for name in families:
        family = FAMILIES[name]
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                params = tuple(float(v) for v in family.fit(x))
                pdf = family.pdf(centers, *params)
        except (ValueError, RuntimeError, FloatingPointError) as e:
            log.debug("[fit] %s failed: %s", name, e)
            continue
        if not np.all(np.isfinite(pdf)):
            continue
        fits.append(FittedDistribution(name, params, float(np.sum((pdf - density) ** 2)), x.size))
    if not fits:
        log.warning("[fit] no family fitted %d samples, using the empirical histogram", x.size)
        return _empirical(x, bins)

    return min(fits, key=lambda f: f.score)


def default_edges(spec: TurbineSpec, width: float = 2.0) -> tuple[float, ...]:
    """Breakpoints 0, 2, 4, ... up to the cut-out; the last interval is open-ended."""
    edges = list(np.arange(0.0, spec.cut_out, width))
    edges.append(spec.cut_out)
    return tuple(float(e) for e in edges)


def interval_index(values, edges: Sequence[float]) -> np.ndarray:
    """Interval per value; -1 below the first edge, the last interval is [edges[-1], inf)."""
    return np.searchsorted(np.asarray(edges, dtype=float), np.asarray(values, dtype=float), side="right") - 1


def _as_pairs(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DataValidationError("pairs must be an (n, 2) array of (forecast, actual) speeds")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise DataValidationError("speed pairs must be finite and non-negative")
    return arr


def merge_empty_intervals(pairs, edges: Sequence[float]) -> tuple[float, ...]:
    """Drop breakpoints until every interval holds an observation.

    An empty interval joins its left neighbour; an empty first interval joins the right one.
    """
    arr = _as_pairs(pairs)
    edges = list(edges)
    while True:
        idx = interval_index(arr[:, 0], edges)
        counts = np.bincount(idx[idx >= 0], minlength=len(edges))
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return tuple(edges)
        if len(edges) == 1:
            raise DataValidationError("no forecast observations fall inside the interval edges")
        k = int(empty[0])
        removed = edges.pop(1 if k == 0 else k)
        log.info("[fit] merged empty interval at %g m/s", removed)


@dataclass(frozen=True)
class TransitionModel:
    edges: tuple[float, ...]
    matrix: np.ndarray
    counts: np.ndarray
    bounds: tuple[float, float, float]
    placeholders: dict = field(default_factory=lambda: dict(DEFAULT_PLACEHOLDERS))
    conditional: tuple[FittedDistribution | None, ...] = ()

    def __post_init__(self):
        lo_i, rated, cut_out = self.bounds
        checks = {
            Region.I: 0 <= self.placeholders[Region.I] < lo_i,
            Region.III: rated <= self.placeholders[Region.III] < cut_out,
            Region.IV: self.placeholders[Region.IV] >= cut_out,
        }
        bad = [r.name for r, ok in checks.items() if not ok]
        if bad:
            raise DataValidationError(f"placeholders outside their regions: {bad}")

    @property
    def n_intervals(self) -> int:
        return len(self.edges)

    def interval_of(self, v_forecast: float) -> int:
        m = int(interval_index(v_forecast, self.edges))
        if m < 0 or not np.isfinite(v_forecast):
            raise DataValidationError(f"forecast {v_forecast:g} m/s outside the interval span [{self.edges[0]:g}, inf)")
        return m

    def with_distributions(self, dists: Sequence[FittedDistribution | None]) -> "TransitionModel":
        if len(dists) != self.n_intervals:
            raise DataValidationError("one distribution slot per interval is required")
        for m, d in enumerate(dists):
            if self.matrix[m, Region.II] > 0 and d is None:
                raise DataValidationError(f"interval {m} has Region II mass but no error distribution")
        return replace(self, conditional=tuple(dists))

    def to_document(self) -> dict:
        return {
            "format": "windflex.transition",
            "version": FORMAT_VERSION,
            "edges": list(self.edges),
            "matrix": self.matrix.tolist(),
            "counts": self.counts.tolist(),
            "bounds": list(self.bounds),
            "placeholders": {r.name: v for r, v in self.placeholders.items()},
            "conditional": [d.to_dict() if d else None for d in self.conditional],
        }

    @classmethod
    def from_document(cls, doc: dict) -> "TransitionModel":
        if doc.get("format") != "windflex.transition" or doc.get("version") != FORMAT_VERSION:
            raise DataValidationError("not a version-1 transition model document")
        return cls(
            edges=tuple(doc["edges"]),
            matrix=np.asarray(doc["matrix"], dtype=float),
            counts=np.asarray(doc["counts"], dtype=np.int64),
            bounds=tuple(doc["bounds"]),
            placeholders={Region[k]: float(v) for k, v in doc["placeholders"].items()},
            conditional=tuple(FittedDistribution.from_dict(d) if d else None for d in doc["conditional"]),
        )


def build_transition_matrix(pairs, edges: Sequence[float], spec: TurbineSpec,
                            placeholders: dict | None = None) -> TransitionModel:
    arr = _as_pairs(pairs)
    edges = tuple(float(e) for e in edges)
    if np.any(np.diff(edges) <= 0):
        raise DataValidationError("interval edges must be strictly increasing")
    m = interval_index(arr[:, 0], edges)
    regions = classify_regions(arr[:, 1], spec)
    inside = m >= 0
    counts = np.zeros((len(edges), len(Region)), dtype=np.int64)
    np.add.at(counts, (m[inside], regions[inside]), 1)
    totals = counts.sum(axis=1)
    empty = np.flatnonzero(totals == 0)
    if empty.size:
        spans = [_interval_label(edges, k) for k in empty]
        raise DataValidationError(f"empty forecast interval(s): {', '.join(spans)}")
    matrix = counts / totals[:, None]
    ph = dict(DEFAULT_PLACEHOLDERS)
    if placeholders:
        ph.update({Region[k] if isinstance(k, str) else Region(k): float(v) for k, v in placeholders.items()})
    log.info("[fit] transition matrix over %d intervals from %d pairs", len(edges), int(inside.sum()))
    return TransitionModel(edges, matrix, counts, (spec.cut_in, spec.rated_speed, spec.cut_out), ph)


def _interval_label(edges: Sequence[float], k: int) -> str:
    hi = f"{edges[k + 1]:g}" if k + 1 < len(edges) else "inf"
    return f"[{edges[k]:g}, {hi})"


def fit_conditional_error_distributions(pairs, edges: Sequence[float], spec: TurbineSpec,
                                        families: Sequence[str] = tuple(FAMILIES), min_samples: int = 30,
                                        bins: int = 50) -> list[FittedDistribution | None]:
    """Per interval, the best-fitting law of actual - forecast over pairs whose actual lands in Region II."""
    arr = _as_pairs(pairs)
    m = interval_index(arr[:, 0], edges)
    in_ii = classify_regions(arr[:, 1], spec) == Region.II
    errors = arr[:, 1] - arr[:, 0]
    out: list[FittedDistribution | None] = []
    for k in range(len(edges)):
        sample = errors[(m == k) & in_ii]
        if sample.size == 0:
            out.append(None)
            continue
        dist = fit_best_distribution(sample, families, min_samples, bins)
        if dist.fallback:
            log.warning("[fit] interval %s: %d Region II samples, empirical fallback",
                        _interval_label(edges, k), sample.size)
        out.append(dist)
    return out


def fit_transition_model(pairs, edges: Sequence[float], spec: TurbineSpec, *, placeholders: dict | None = None,
                         families: Sequence[str] = tuple(FAMILIES), min_samples: int = 30, bins: int = 50,
                         merge: bool = False) -> TransitionModel:
    if merge:
        edges = merge_empty_intervals(pairs, edges)
    model = build_transition_matrix(pairs, edges, spec, placeholders)
    dists = fit_conditional_error_distributions(pairs, model.edges, spec, families, min_samples, bins)
    return model.with_distributions(dists)


def largest_remainder(n: int, probabilities) -> np.ndarray:
    """Integer split of n proportional to probabilities; remainders go to the largest fractions."""
    p = np.asarray(probabilities, dtype=float)
    quotas = np.round(n * p, 9)
    counts = np.floor(quotas).astype(np.int64)
    short = n - int(counts.sum())
    if short > 0:
        order = np.argsort(-(quotas - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def scenario_uniforms(seed: int, n: int, width: int, key: Sequence[int] = (), threads: int = 1) -> np.ndarray:
    """(n, width, 2) uniforms; row i comes from its own stream seeded by (seed, *key, i).

    Rows are independent of how scenarios are split across workers, so serial and
    threaded runs agree bit for bit.
    """
    def rows(lo: int, hi: int) -> np.ndarray:
        return np.stack([np.random.default_rng([seed, *key, i]).random((width, 2)) for i in range(lo, hi)])

    if n == 0:
        return np.empty((0, width, 2))
    if threads <= 1 or n < 2 * threads:
        return rows(0, n)
    bounds = np.linspace(0, n, threads + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(rows, bounds[:-1], bounds[1:]))
    return np.concatenate(parts, axis=0)


def stress_column(v_forecast: float, uniforms: np.ndarray, model: TransitionModel,
                  keep_forecast_in_region: bool = False) -> np.ndarray:
    """Stressed actual speeds for one forecast value from (n, 2) uniforms (rank, draw)."""
    n = uniforms.shape[0]
    k = model.interval_of(v_forecast)
    counts = largest_remainder(n, model.matrix[k])
    rank = np.argsort(uniforms[:, 0], kind="stable")
    region = np.empty(n, dtype=np.int64)
    region[rank] = np.repeat(np.arange(len(Region)), counts)

    out = np.empty(n)
    cut_in, rated, _ = model.bounds
    for r in (Region.I, Region.III, Region.IV):
        out[region == r] = model.placeholders[r]
    if keep_forecast_in_region and rated <= v_forecast < model.bounds[2]:
        out[region == Region.III] = v_forecast

    ii = region == Region.II
    if ii.any():
        dist = model.conditional[k] if model.conditional else None
        if dist is None:
            raise DataValidationError(f"interval {k} has no error distribution")
        draws = v_forecast + dist.ppf(uniforms[ii, 1])
        out[ii] = np.clip(draws, cut_in, np.nextafter(rated, 0.0))
    return out


def sample_speed_errors(v_forecast: float, n: int, model: TransitionModel, seed: int,
                        key: Sequence[int] = (), threads: int = 1,
                        keep_forecast_in_region: bool = False) -> np.ndarray:
    """n stressed actual speeds for a forecast speed; region counts follow the transition row exactly."""
    if n < 1:
        raise DataValidationError("n must be at least 1")
    u = scenario_uniforms(seed, n, 1, key, threads)[:, 0, :]
    return stress_column(v_forecast, u, model, keep_forecast_in_region)
