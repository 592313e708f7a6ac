import json
import os
from typing import Any, Mapping, Union

import pandas as pd
from pydantic import BaseModel

from Schemas.schemas import BenchResult, UtilityReport
from src import logger
from src.exceptions import ArtifactError


def _prepare(path: str) -> str:
    directory = os.path.dirname(path)
    try:
        if directory:
            os.makedirs(directory, exist_ok=True)
    except OSError as e:
        raise ArtifactError(f"cannot create {directory}: {e}")
    return path


def _plain(payload: Union[BaseModel, Mapping[str, Any]]) -> Any:
    if isinstance(payload, BaseModel):
        return payload.dict()
    return {key: _plain(value) for key, value in payload.items()}


def write_json(payload: Union[BaseModel, Mapping[str, Any]], path: str) -> str:
    """Deterministic JSON (sorted keys) for reports and manifests."""
    text = json.dumps(_plain(payload), indent=2, sort_keys=True)
    try:
        with open(_prepare(path), "w") as handle:
            handle.write(text + "\n")
    except OSError as e:
        raise ArtifactError(f"cannot write {path}: {e}")
    logger.info(f"Wrote {path}")
    return path


def _write_frame(frame: pd.DataFrame, path: str, index: bool = False) -> str:
    try:
        frame.to_csv(_prepare(path), index=index)
    except OSError as e:
        raise ArtifactError(f"cannot write {path}: {e}")
    logger.info(f"Wrote {path}")
    return path


def write_utility_csv(report: UtilityReport, path: str) -> str:
    """One row per C with mean/std of each curve."""
    frame = pd.DataFrame({"C": report.c_grid})
    for name, curve in (("random", report.random), ("cg", report.cg), ("specific", report.specific)):
        frame[f"{name}_mean"] = [point.mean for point in curve.points]
        frame[f"{name}_std"] = [point.std for point in curve.points]
        frame[f"{name}_trials"] = [point.trials for point in curve.points]
    frame["specific_failed"] = [point.failed for point in report.specific.points]
    return _write_frame(frame, path)


def write_bench_csv(result: BenchResult, path: str) -> str:
    """One row per class: precision, recall and test support."""
    frame = pd.DataFrame({
        "label": result.class_labels,
        "name": result.class_names,
        "precision": result.precision,
        "recall": result.recall,
        "support": [sum(row) for row in result.confusion],
        "flagged": [label in result.flagged_classes for label in result.class_labels],
    })
    return _write_frame(frame, path)


def write_confusion_csv(result: BenchResult, path: str) -> str:
    frame = pd.DataFrame(result.confusion, index=result.class_names, columns=result.class_names)
    frame.index.name = "true\\predicted"
    return _write_frame(frame, path, index=True)
