"""Linear coupling of secondary weather features to the key stressor via correlation-matrix PCA."""

import logging
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from windflex.errors import DataValidationError
from windflex.weather import StandardizedTable, is_direction

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass(frozen=True)
class CouplingCoefficients:
    """Per-feature slope (feature unit per m/s of key-stressor change).

    Direction features carry slopes in sine units.
    """

    features: tuple[str, ...]
    slopes: np.ndarray
    key_stressor: str
    k: int
    eigenvalues: tuple[float, ...] = ()

    def __post_init__(self):
        if self.key_stressor not in self.features:
            raise DataValidationError(f"key stressor {self.key_stressor!r} not among coupled features")
        if self.k < 1:
            raise DataValidationError("at least one component must be retained")

    def slope(self, fid: str) -> float:
        return float(self.slopes[self.features.index(fid)])

    def as_dict(self) -> dict[str, float]:
        return {f: float(s) for f, s in zip(self.features, self.slopes)}

    def degree_slopes(self, forecast_deg: Mapping[str, float]) -> dict[str, float]:
        """Local degree-per-m/s slopes of direction features at the given operating directions."""
        out = {}
        for fid, s in zip(self.features, self.slopes):
            if not is_direction(fid) or fid not in forecast_deg:
                continue
            c = np.cos(np.deg2rad(forecast_deg[fid]))
            out[fid] = float(np.rad2deg(s / c)) if abs(c) > 1e-6 else float("nan")
        return out

    def to_document(self) -> dict:
        return {
            "format": "windflex.coupling",
            "version": FORMAT_VERSION,
            "features": list(self.features),
            "slopes": self.slopes.tolist(),
            "key_stressor": self.key_stressor,
            "k": self.k,
            "eigenvalues": list(self.eigenvalues),
        }

    @classmethod
    def from_document(cls, doc: dict) -> "CouplingCoefficients":
        if doc.get("format") != "windflex.coupling" or doc.get("version") != FORMAT_VERSION:
            raise DataValidationError("not a version-1 coupling document")
        return cls(tuple(doc["features"]), np.asarray(doc["slopes"], dtype=float), doc["key_stressor"],
                   int(doc["k"]), tuple(doc.get("eigenvalues", ())))


def pca_feature_coupling(std: StandardizedTable, key_stressor: str) -> CouplingCoefficients:
    key = std.index(key_stressor)
    X = std.X
    C = X.T @ X / (std.h - 1)
    eigvals, eigvecs = np.linalg.eigh(C)
    order = np.argsort(eigvals)[::-1]
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]

    # Kaiser's rule, keeping at least the leading component
    k = max(1, int(np.sum(eigvals > 1.0)))
    V = eigvecs[:, :k].copy()
    V[:, V[key] < 0] *= -1
    w = V @ eigvals[:k]
    if abs(w[key]) < 1e-9:
        raise DataValidationError(f"key stressor {key_stressor!r} has no loading in the retained components")

    slopes = std.std * w / (std.std[key] * w[key])
    slopes[key] = 1.0
    log.info("[fit] coupling kept %d of %d components (leading eigenvalue %.3f)", k, std.p, eigvals[0])
    return CouplingCoefficients(std.features, slopes, key_stressor, k, tuple(float(v) for v in eigvals))
