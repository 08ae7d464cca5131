"""Archive files for calibrated models, and chart-series data files.

An archive lets calibration and monitoring run as separate invocations. It is
a JSON document::

    {
      "format": "conformal-spc-archive",
      "format_version": 1,
      "checksum": "<sha256 of the canonical payload>",
      "payload": {
        "alpha", "q", "n", "k", "center", "scorer_id",
        "scores": [...],            # sorted ascending
        "scorer": {...},            # scorer or detector descriptor
        "provenance": {"source_digest", "created", "seed"},
        "extras": {...}             # e.g. "calibration_x" for spike charts
      }
    }

Floats are written with Python's shortest round-trip repr, so loading gives
back bit-identical numbers and therefore identical monitoring decisions.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .calibration import conformal_quantile_index
from .charts import ChartSeries, ShewhartLimits
from .core import CalibrationModel, ChartPoint, Signal
from .multivariate import KNN_DISTANCE, MAHALANOBIS, KNNDetector, MahalanobisDetector
from .scores import (
    MODEL_KINDS,
    REFERENCE_KINDS,
    KNNRegressor,
    LeastSquaresLine,
    NonconformityScorer,
)

FORMAT = "conformal-spc-archive"
FORMAT_VERSION = 1


class ArchiveError(ValueError):
    pass


@dataclass(frozen=True)
class ModelArchive:
    calibration: CalibrationModel
    scorer: dict
    provenance: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    @property
    def is_detector(self) -> bool:
        return self.calibration.scorer_id.startswith("detector:")

    def build_scorer(self, models: Optional[Mapping] = None):
        return build_scorer(self.scorer, models)


def digest_bytes(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def _matrix(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def describe_model(model) -> dict:
    if isinstance(model, LeastSquaresLine):
        return {"type": "least_squares", "coef": _matrix(model.coef), "intercept": model.intercept}
    if isinstance(model, KNNRegressor):
        return {"type": "knn", "k": model.k, "X": _matrix(model.X), "y": _matrix(model.y)}
    return {"type": "external", "id": getattr(model, "model_id", "external")}


def describe_scorer(scorer) -> dict:
    """Descriptor for a fitted scorer or trained detector."""
    if isinstance(scorer, KNNDetector):
        return {"kind": KNN_DISTANCE, "k": scorer.k, "train": _matrix(scorer.train)}
    if isinstance(scorer, MahalanobisDetector):
        return {"kind": MAHALANOBIS, "mean": _matrix(scorer.mean),
                "precision": _matrix(scorer.precision), "ridge": scorer.ridge}
    if isinstance(scorer, NonconformityScorer):
        if scorer.kind in REFERENCE_KINDS:
            return {"kind": scorer.kind, "reference": scorer.reference}
        return {"kind": scorer.kind, "model": describe_model(scorer.model)}
    raise ArchiveError(f"cannot archive scorer of type {type(scorer).__name__}")


def build_model(desc: dict, models: Optional[Mapping] = None):
    kind = desc["type"]
    if kind == "least_squares":
        return LeastSquaresLine(desc["coef"], desc["intercept"])
    if kind == "knn":
        return KNNRegressor(np.array(desc["X"], dtype=float), np.array(desc["y"], dtype=float), desc["k"])
    if kind == "external":
        if not models or desc["id"] not in models:
            raise ArchiveError(f"external model {desc['id']!r} must be supplied at load time")
        return models[desc["id"]]
    raise ArchiveError(f"unknown model type {kind!r}")


def build_scorer(desc: dict, models: Optional[Mapping] = None):
    kind = desc["kind"]
    if kind == KNN_DISTANCE:
        return KNNDetector(np.array(desc["train"], dtype=float), desc["k"])
    if kind == MAHALANOBIS:
        return MahalanobisDetector(desc["mean"], desc["precision"], desc["ridge"])
    if kind in REFERENCE_KINDS:
        return NonconformityScorer(kind, reference=float(desc["reference"]))
    if kind in MODEL_KINDS:
        return NonconformityScorer(kind, model=build_model(desc["model"], models))
    raise ArchiveError(f"unknown scorer kind {kind!r}")


def make_archive(model: CalibrationModel, scorer, source_digest: Optional[str] = None,
                 seed: Optional[int] = None, extras: Optional[dict] = None,
                 created: Optional[str] = None) -> ModelArchive:
    if created is None:
        created = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
    prov = {"source_digest": source_digest, "created": created, "seed": seed}
    return ModelArchive(model, describe_scorer(scorer), prov, dict(extras or {}))


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def dumps(archive: ModelArchive) -> str:
    m = archive.calibration
    payload = {
        "alpha": m.alpha,
        "q": m.q,
        "n": m.n,
        "k": m.k,
        "center": m.center,
        "scorer_id": m.scorer_id,
        "scores": list(m.scores),
        "scorer": archive.scorer,
        "provenance": archive.provenance,
        "extras": archive.extras,
    }
    doc = {
        "format": FORMAT,
        "format_version": archive.format_version,
        "checksum": digest_bytes(_canonical(payload).encode()),
        "payload": payload,
    }
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"


def loads(text: str) -> ModelArchive:
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, TypeError):
        raise ArchiveError("corrupt archive") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ArchiveError("corrupt archive")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ArchiveError("unsupported archive version")
    try:
        payload = doc["payload"]
        if doc["checksum"] != digest_bytes(_canonical(payload).encode()):
            raise ArchiveError("corrupt archive")
        model = CalibrationModel(
            scores=tuple(payload["scores"]),
            alpha=payload["alpha"],
            q=payload["q"],
            center=payload["center"],
            scorer_id=payload["scorer_id"],
        )
        if payload["n"] != model.n or payload["k"] != conformal_quantile_index(model.n, model.alpha, warn=False):
            raise ArchiveError("corrupt archive")
        archive = ModelArchive(model, payload["scorer"], payload["provenance"], payload["extras"],
                               doc["format_version"])
        if archive.scorer.get("kind") not in (*REFERENCE_KINDS, *MODEL_KINDS, KNN_DISTANCE, MAHALANOBIS):
            raise ArchiveError("corrupt archive")
    except ArchiveError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError):
        raise ArchiveError("corrupt archive") from None
    return archive


def save(archive: ModelArchive, path) -> None:
    text = dumps(archive)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def load(path) -> ModelArchive:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())


# ---------------------------------------------------------------------------
# chart series data files
# ---------------------------------------------------------------------------

def _signal_names(sig: Signal) -> list:
    return [s.name.lower() for s in (Signal.LIMIT_EXCEEDED, Signal.UNCERTAINTY_SPIKE) if sig & s]


def series_to_dict(series: ChartSeries) -> dict:
    lim = series.limits
    if isinstance(lim, ShewhartLimits):
        lim = {"center": lim.center, "ucl": lim.ucl, "lcl": lim.lcl, "sigma": lim.sigma}
    return {
        "kind": series.kind,
        "alpha": series.alpha,
        "limits": lim,
        "points": [
            {"index": p.index, "value": p.value, "lower": p.lower, "upper": p.upper,
             "signal": _signal_names(p.signal)}
            for p in series.points
        ],
    }


def series_from_dict(d: dict) -> ChartSeries:
    lim = d.get("limits")
    if isinstance(lim, dict):
        lim = ShewhartLimits(**lim)
    points = []
    for p in d["points"]:
        sig = Signal.NONE
        for name in p.get("signal", []):
            sig |= Signal[name.upper()]
        points.append(ChartPoint(p["index"], p["value"], p.get("lower"), p.get("upper"), sig))
    return ChartSeries(d["kind"], tuple(points), d.get("alpha"), lim)


def save_series(series: ChartSeries, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(series_to_dict(series), fh, indent=1, allow_nan=False)
        fh.write("\n")


def load_series(path) -> ChartSeries:
    with open(path, "r", encoding="utf-8") as fh:
        return series_from_dict(json.load(fh))
