"""Model (de)serialization.

Forests are written as versioned JSON documents holding flat node tables
per tree. JSON float round-tripping is exact in Python, so a reloaded model
reproduces predictions bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..exceptions import MissingArtifactError, UnknownFormatError
from ..validation import check_is_fitted
from .forest import RandomForestRegressor
from .tree import DecisionTreeRegressor

FOREST_FORMAT = "forest-regressor"
FOREST_VERSION = 1


def canonical_params(params: dict) -> dict:
    """Drop execution details from stored parameters.

    Worker count affects scheduling only, never results; pinning it keeps
    artifacts byte-identical across --threads settings.
    """
    out = dict(params)
    if "n_jobs" in out:
        out["n_jobs"] = 1
    return out


def forest_to_doc(forest: RandomForestRegressor) -> dict:
    check_is_fitted(forest, "trees_")
    return {
        "format": FOREST_FORMAT,
        "version": FOREST_VERSION,
        "params": canonical_params(forest.get_params()),
        "n_features": int(forest.n_features_in_),
        "n_outputs": int(forest.n_outputs_),
        "y_was_1d": bool(forest._y_was_1d),
        "target_min": forest.target_min_.tolist(),
        "target_max": forest.target_max_.tolist(),
        "trees": [
            {
                "feature": t.feature_.tolist(),
                "threshold": t.threshold_.tolist(),
                "left": t.left_.tolist(),
                "right": t.right_.tolist(),
                "value": t.value_.tolist(),
            }
            for t in forest.trees_
        ],
    }


def forest_from_doc(doc: dict) -> RandomForestRegressor:
    if not isinstance(doc, dict) or doc.get("format") != FOREST_FORMAT:
        raise UnknownFormatError(f"not a {FOREST_FORMAT} document")
    if doc.get("version") != FOREST_VERSION:
        raise UnknownFormatError(f"unsupported {FOREST_FORMAT} version {doc.get('version')!r}")
    forest = RandomForestRegressor(**doc["params"])
    forest.trees_ = [
        DecisionTreeRegressor.from_arrays(
            t["feature"], t["threshold"], t["left"], t["right"], t["value"]
        )
        for t in doc["trees"]
    ]
    forest.n_features_in_ = int(doc["n_features"])
    forest.n_outputs_ = int(doc["n_outputs"])
    forest._y_was_1d = bool(doc["y_was_1d"])
    forest.target_min_ = np.asarray(doc["target_min"], dtype=float)
    forest.target_max_ = np.asarray(doc["target_max"], dtype=float)
    for t in forest.trees_:
        t.n_features_in_ = forest.n_features_in_
        t.n_outputs_ = forest.n_outputs_
        t._y_was_1d = forest.n_outputs_ == 1
    return forest


def save_model(doc: dict, path) -> None:
    Path(path).write_text(
        json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def load_model(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise MissingArtifactError(f"model file not found: {p}")
    return json.loads(p.read_text(encoding="utf-8"))
