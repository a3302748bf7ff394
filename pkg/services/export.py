"""
CSV and JSON writers. Every file gets a ``<name>.meta.json`` sidecar with the
resolved configuration; output is byte-stable for a fixed config and seed.
"""
import csv
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import orjson
from pydantic import BaseModel

from models.circuit import CountsHistogram
from models.records import TIME_SERIES_COLUMNS, CheckResult, DemonRecord, TimeSeries
from models.trajectory import DetailedFTReport, StochasticFunctional, TrajectoryDistribution

logger = logging.getLogger(__name__)

JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_NON_STR_KEYS


def format_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _default(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (set, tuple)):
        return list(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"Cannot serialize {type(value).__name__}")


def dumps(payload: Any) -> bytes:
    return orjson.dumps(payload, default=_default, option=JSON_OPTIONS) + b"\n"


def write_json(path: Path, payload: Any, metadata: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(payload))
    if metadata is not None:
        write_metadata(path, metadata)
    logger.info(f"Wrote {path}")
    return path


def write_metadata(path: Path, metadata: Dict[str, Any]) -> Path:
    sidecar = Path(path).with_suffix(".meta.json")
    sidecar.write_bytes(dumps(metadata))
    return sidecar


def write_csv(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    metadata: Optional[Dict[str, Any]] = None
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    if metadata is not None:
        write_metadata(path, metadata)
    logger.info(f"Wrote {path}")
    return path


def read_csv(path: Path) -> List[Dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def _suffixed(path: Path, suffix: str) -> Path:
    path = Path(path)
    return path if path.name.endswith(suffix) else path.with_name(path.name + suffix)


def write_timeseries(path: Path, series: TimeSeries, metadata: Dict[str, Any], fmt: str = "csv") -> Path:
    meta = {**series.metadata, **metadata, "initial_mutual_info": series.initial_mutual_info}
    if fmt == "json":
        return write_json(_suffixed(path, ".json"), {c: getattr(series, c) for c in TIME_SERIES_COLUMNS}, meta)
    return write_csv(_suffixed(path, ".csv"), TIME_SERIES_COLUMNS, series.rows(), meta)


def write_rows(path: Path, rows: Sequence[Dict[str, Any]], metadata: Dict[str, Any], fmt: str = "csv") -> Path:
    """
    Table of homogeneous dict rows, header taken from the first row
    """
    if fmt == "json":
        return write_json(_suffixed(path, ".json"), list(rows), metadata)
    header = list(rows[0]) if rows else []
    return write_csv(_suffixed(path, ".csv"), header, ([row[k] for k in header] for row in rows), metadata)


def write_demon_scatter(path: Path, records: Sequence[DemonRecord], metadata: Dict[str, Any], fmt: str = "csv") -> Path:
    return write_rows(path, [r.model_dump() for r in records], metadata, fmt)


def distribution_to_json(dist: TrajectoryDistribution) -> Dict[str, Any]:
    return {
        "direction": dist.direction,
        "scheme": dist.scheme,
        "total": dist.total(),
        "probabilities": dist.to_json_dict(),
        "populations": {name: np.asarray(values).tolist() for name, values in sorted(dist.populations.items())},
    }


def functional_rows(functional: StochasticFunctional, dist_f: TrajectoryDistribution) -> List[Dict[str, Any]]:
    return [
        {
            "outcome": outcome.label(),
            "p_forward": dist_f.probabilities[outcome],
            "sigma": value,
            "p_backward": functional.backward.get(outcome, float("nan")),
        }
        for outcome, value in sorted(functional.values.items())
    ]


def detailed_ft_rows(report: DetailedFTReport) -> List[Dict[str, Any]]:
    return [
        {
            "kind": report.kind,
            "condition": report.condition or "",
            "sigma": b.sigma,
            "p_forward": b.p_forward,
            "p_backward": b.p_backward,
            "log_ratio": b.log_ratio if b.log_ratio is not None else float("nan"),
        }
        for b in report.bins
    ]


def ft_report_to_json(report: BaseModel) -> Dict[str, Any]:
    return report.model_dump(mode="json")


def write_counts(directory: Path, name: str, histogram: CountsHistogram, metadata: Dict[str, Any]) -> List[Path]:
    """
    One (bitstring, count) CSV per replicate
    """
    paths = []
    for rep in range(histogram.reps):
        rows = sorted(histogram.rep_rows(rep).items())
        paths.append(write_csv(Path(directory) / f"{name}_rep{rep}.csv", ("bitstring", "count"), rows,
                               {**metadata, "rep": rep, "shots_per_rep": histogram.shots_per_rep}))
    return paths


def write_checks(path: Path, checks: Sequence[CheckResult], metadata: Dict[str, Any]) -> Path:
    payload = {
        "passed": all(c.passed for c in checks),
        "checks": [c.model_dump(mode="json") for c in checks],
    }
    return write_json(_suffixed(path, ".json"), payload, metadata)
