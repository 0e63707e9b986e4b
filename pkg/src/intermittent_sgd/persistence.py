"""Problem bundles, trace CSVs, summary JSON and SVG line charts.

Floats are written with 17 significant digits (CSV) or ``repr`` (JSON), so
every artifact reads back bit-exactly and reruns produce identical bytes.
"""

import csv
import json
import logging
import math
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from .errors import ArtifactError, IntermittentSGDError
from .types import (
    Algorithm,
    ConditioningTargets,
    Curve,
    FigurePoint,
    LocalObjective,
    ProblemInstance,
    Trace,
    TraceRecord,
    parse_enum,
)
from .utils import format_float, json_float, json_safe

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

BUNDLE_FORMAT = "intermittent-sgd-problem"
BUNDLE_VERSION = 1
TRACE_COLUMNS = ("t", "round", "grad_norm_sq", "f_value", "consensus_sq")
FIGURE_COLUMNS = ("algorithm", "parameter", "value", "round", "metric")

# Pinned so that SVG output is byte-identical across runs.
_SVG_RC = {"svg.hashsalt": "intermittent-sgd", "svg.fonttype": "none", "path.simplify": False}


@contextmanager
def _open(path: PathLike, mode: str) -> Iterator[TextIO]:
    target = Path(path)
    try:
        if "w" in mode:
            target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, mode, newline="" if target.suffix == ".csv" else None) as handle:
            yield handle
    except OSError as e:
        raise ArtifactError(f"Cannot access {target}: {e}", path=str(target), original_error=e)


def read_json(path: PathLike) -> Any:
    """Read a JSON artifact, raising ArtifactError when missing or malformed."""
    with _open(path, "r") as handle:
        try:
            return json.load(handle)
        except json.JSONDecodeError as e:
            raise ArtifactError(f"Malformed JSON in {path}: {e}", path=str(path), original_error=e)


def write_json(data: Any, path: PathLike) -> Path:
    """Write ``data`` as indented, key-sorted JSON with non-finite floats as strings."""
    with _open(path, "w") as handle:
        json.dump(json_safe(data), handle, indent=2, sort_keys=True)
        handle.write("\n")
    logger.info("Wrote %s", path)
    return Path(path)


def save_problem(p: ProblemInstance, path: PathLike) -> Path:
    """Write a problem bundle: every worker's data, targets and anchor, plus metadata."""
    targets = None
    if p.targets is not None:
        targets = {
            "L": p.targets.L,
            "zeta": p.targets.zeta,
            "delta": p.targets.delta,
            "Delta": p.targets.Delta,
        }
    bundle = {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "dimension": p.dimension,
        "num_workers": p.num_workers,
        "seed": p.seed,
        "reg_weight": float(p.reg_weights[0]),
        "scale_rows": p.scale_rows.tolist(),
        "targets": targets,
        "achieved": dict(p.achieved),
        "noise_scale": p.noise_scale,
        "anchor_scale": p.anchor_scale,
        "center_scale": p.center_scale,
        "workers": [
            {
                "data_matrix": obj.data_matrix.tolist(),
                "targets": obj.targets.tolist(),
                "anchor": obj.anchor.tolist(),
                "reg_weight": obj.reg_weight,
            }
            for obj in p.locals
        ],
    }
    with _open(path, "w") as handle:
        json.dump(json_safe(bundle), handle, sort_keys=True)
        handle.write("\n")
    logger.info("Saved problem bundle to %s", path)
    return Path(path)


def load_problem(path: PathLike) -> ProblemInstance:
    """Read a bundle written by :func:`save_problem`.

    Raises:
        ArtifactError: If the file is missing, malformed or of another format
    """
    bundle = read_json(path)
    if not isinstance(bundle, dict) or bundle.get("format") != BUNDLE_FORMAT:
        raise ArtifactError(f"{path} is not a problem bundle", path=str(path))
    if bundle.get("version") != BUNDLE_VERSION:
        raise ArtifactError(
            f"Unsupported bundle version {bundle.get('version')} in {path}", path=str(path)
        )
    try:
        locals_ = tuple(
            LocalObjective(
                data_matrix=np.array(worker["data_matrix"], dtype=np.float64),
                targets=np.array(worker["targets"], dtype=np.float64),
                reg_weight=float(worker["reg_weight"]),
                anchor=np.array(worker["anchor"], dtype=np.float64),
            )
            for worker in bundle["workers"]
        )
        targets = bundle.get("targets")
        return ProblemInstance(
            dimension=int(bundle["dimension"]),
            num_workers=int(bundle["num_workers"]),
            locals=locals_,
            seed=int(bundle["seed"]),
            targets=None if targets is None else ConditioningTargets(**targets),
            scale_rows=np.array(bundle["scale_rows"], dtype=np.float64),
            achieved={k: json_float(v) for k, v in bundle.get("achieved", {}).items()},
            noise_scale=float(bundle.get("noise_scale", 0.0)),
            anchor_scale=float(bundle.get("anchor_scale", 0.0)),
            center_scale=float(bundle.get("center_scale", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ArtifactError(f"Invalid problem bundle {path}: {e}", path=str(path), original_error=e)
    except IntermittentSGDError as e:
        raise ArtifactError(
            f"Inconsistent problem bundle {path}: {e.message}", path=str(path), original_error=e
        )


def sidecar_path(csv_path: PathLike) -> Path:
    """Path of the metadata JSON written next to a trace CSV."""
    return Path(csv_path).with_suffix(".json")


def export_trace_csv(trace: Trace, path: PathLike) -> Path:
    """Write a trace as CSV plus a sidecar JSON of run metadata."""
    with _open(path, "w") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for record in trace.records:
            writer.writerow(
                [
                    record.t,
                    record.round,
                    format_float(record.grad_norm_sq),
                    format_float(record.f_value),
                    format_float(record.consensus_sq),
                ]
            )
    write_json(trace.metadata(), sidecar_path(path))
    return Path(path)


def read_trace_csv(path: PathLike) -> List[TraceRecord]:
    """Read the records of a trace CSV.

    Raises:
        ArtifactError: If the header or a row is malformed
    """
    with _open(path, "r") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_COLUMNS:
            raise ArtifactError(f"Unexpected trace header in {path}: {header}", path=str(path))
        try:
            return [
                TraceRecord(
                    t=int(row[0]),
                    round=int(row[1]),
                    grad_norm_sq=float(row[2]),
                    f_value=float(row[3]),
                    consensus_sq=float(row[4]),
                )
                for row in reader
            ]
        except (IndexError, ValueError) as e:
            raise ArtifactError(
                f"Malformed trace row in {path}: {e}", path=str(path), original_error=e
            )


def load_trace(path: PathLike) -> Trace:
    """Rebuild a trace from its CSV and sidecar JSON."""
    meta = read_json(sidecar_path(path))
    final = meta.get("final_iterate")
    return Trace(
        algorithm=parse_enum(Algorithm, meta["algorithm"], "algorithm"),
        tau=int(meta["tau"]),
        rounds=int(meta["rounds"]),
        records=read_trace_csv(path),
        config=dict(meta.get("config", {})),
        seed=int(meta.get("seed", 0)),
        record_every=int(meta.get("record_every", 1)),
        final_iterate=None if final is None else np.array(final, dtype=np.float64),
        diverged=bool(meta.get("diverged", False)),
    )


def export_summary_json(result: Any, path: PathLike) -> Path:
    """Write a summary (a dict or any object with ``to_dict``) as JSON."""
    data = result.to_dict() if hasattr(result, "to_dict") else result
    return write_json(data, path)


def write_figure_data(points: Sequence[FigurePoint], path: PathLike) -> Path:
    """Write figure points as CSV in the given order."""
    with _open(path, "w") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(FIGURE_COLUMNS)
        for point in points:
            writer.writerow(
                [
                    point.algorithm.value,
                    point.parameter,
                    format_float(point.value),
                    point.round,
                    format_float(point.metric),
                ]
            )
    logger.info("Wrote %s", path)
    return Path(path)


def read_figure_data(path: PathLike) -> List[FigurePoint]:
    """Read points written by :func:`write_figure_data`."""
    with _open(path, "r") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != FIGURE_COLUMNS:
            raise ArtifactError(f"Unexpected figure header in {path}", path=str(path))
        try:
            return [
                FigurePoint(
                    algorithm=parse_enum(Algorithm, row["algorithm"], "algorithm"),
                    parameter=row["parameter"],
                    value=float(row["value"]),
                    round=int(row["round"]),
                    metric=float(row["metric"]),
                )
                for row in reader
            ]
        except (TypeError, ValueError, IntermittentSGDError) as e:
            raise ArtifactError(
                f"Malformed figure row in {path}: {e}", path=str(path), original_error=e
            )


def _plottable(curve: Curve, log_y: bool) -> Tuple[List[float], List[float]]:
    xs, ys = [], []
    for x, y in zip(curve.xs, curve.ys):
        if math.isfinite(y) and (y > 0 or not log_y):
            xs.append(float(x))
            ys.append(float(y))
    return xs, ys


def render_plot_svg(
    curves: Sequence[Curve],
    path: PathLike,
    title: Optional[str] = None,
    xlabel: str = "communication round",
    ylabel: str = "metric",
    log_y: bool = True,
) -> Path:
    """Render a self-contained SVG line chart, one polyline per curve.

    Non-finite values, and non-positive values on a log axis, are skipped.
    An empty curve list produces axes only.
    """
    from matplotlib import rc_context
    from matplotlib.figure import Figure

    with rc_context(_SVG_RC):
        figure = Figure(figsize=(6.0, 4.0))
        axes = figure.add_subplot(1, 1, 1)
        for curve in curves:
            xs, ys = _plottable(curve, log_y)
            axes.plot(xs, ys, marker="o", markersize=3, label=curve.label)
        if log_y:
            axes.set_yscale("log")
        axes.set_xlabel(xlabel)
        axes.set_ylabel(ylabel)
        if title:
            axes.set_title(title)
        if curves:
            axes.legend()
        axes.grid(True, alpha=0.3)
        figure.tight_layout()
        target = Path(path)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            figure.savefig(target, format="svg", metadata={"Date": None})
        except OSError as e:
            raise ArtifactError(f"Cannot write {target}: {e}", path=str(target), original_error=e)
    logger.info("Wrote %s", target)
    return target


def curves_from_points(
    points: Sequence[FigurePoint], label_format: str = "{algorithm}, δ={value:g}"
) -> List[Curve]:
    """Group points into one curve per (algorithm, parameter value), x = round."""
    grouped: Dict[Tuple[str, float], List[FigurePoint]] = {}
    for point in points:
        grouped.setdefault((point.algorithm.value, point.value), []).append(point)
    curves = []
    for (algorithm, value), members in grouped.items():
        members = sorted(members, key=lambda q: q.round)
        curves.append(
            Curve(
                label=label_format.format(algorithm=algorithm, value=value),
                xs=[m.round for m in members],
                ys=[m.metric for m in members],
            )
        )
    return curves


__all__ = [
    "BUNDLE_FORMAT",
    "BUNDLE_VERSION",
    "TRACE_COLUMNS",
    "FIGURE_COLUMNS",
    "read_json",
    "write_json",
    "save_problem",
    "load_problem",
    "sidecar_path",
    "export_trace_csv",
    "read_trace_csv",
    "load_trace",
    "export_summary_json",
    "write_figure_data",
    "read_figure_data",
    "render_plot_svg",
    "curves_from_points",
]
