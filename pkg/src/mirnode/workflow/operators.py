"""Operator registry, the built-in operator library, and pure op functions."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..dicom import RasterImage, parse_part10, raster_from_dataset
from .errors import DimensionMismatch, EmptyCohortData, ShapeMismatch, UnknownOperator

SLOT_KINDS = ("cohort", "raster", "mask", "table", "params", "model")


@dataclass(frozen=True)
class OperatorSpec:
    name: str
    input_slots: tuple[tuple[str, str], ...] = ()   # ordered (name, kind)
    output_slots: tuple[tuple[str, str], ...] = ()
    execution: str = "built-in"                     # or "external-command"
    argv: tuple[str, ...] = ()                      # template, external only

    def __post_init__(self) -> None:
        for slots in (self.input_slots, self.output_slots):
            names = [name for name, _ in slots]
            if len(names) != len(set(names)):
                raise ValueError(f"{self.name}: duplicate slot name")
            for _, kind in slots:
                if kind not in SLOT_KINDS:
                    raise ValueError(f"{self.name}: unknown slot kind {kind!r}")
        if self.execution not in ("built-in", "external-command"):
            raise ValueError(f"{self.name}: unknown execution {self.execution!r}")
        if self.execution == "external-command" and not self.argv:
            raise ValueError(f"{self.name}: external-command needs argv")


class OperatorContext:
    """Handed to built-in operator bodies; read access to platform services."""

    def __init__(self, archive, run_id: str, node_id: str, workdir):
        self.archive = archive
        self.run_id = run_id
        self.node_id = node_id
        self.workdir = workdir


OperatorFn = Callable[[OperatorContext, dict, dict], dict]


class OperatorRegistry:
    def __init__(self):
        self._specs: dict[str, OperatorSpec] = {}
        self._fns: dict[str, OperatorFn] = {}

    def register(self, spec: OperatorSpec, fn: OperatorFn | None = None) -> None:
        if spec.execution == "built-in" and fn is None:
            raise ValueError(f"{spec.name}: built-in operator needs a callable")
        self._specs[spec.name] = spec
        if fn is not None:
            self._fns[spec.name] = fn

    def remove(self, name: str) -> None:
        self._specs.pop(name, None)
        self._fns.pop(name, None)

    def find(self, name: str) -> OperatorSpec | None:
        return self._specs.get(name)

    def spec(self, name: str) -> OperatorSpec:
        found = self.find(name)
        if found is None:
            raise UnknownOperator(name)
        return found

    def fn(self, name: str) -> OperatorFn:
        return self._fns[name]

    def names(self) -> list[str]:
        return sorted(self._specs)


# -- pure op functions (unit-testable without the engine) --------------------


def op_threshold_segment(image: RasterImage, threshold: float) -> RasterImage:
    if threshold >= (1 << image.bits_allocated):
        raise ValueError(
            f"threshold {threshold} out of range for {image.bits_allocated}-bit data")
    mask = (image.pixels >= threshold).astype(image.pixels.dtype)
    return RasterImage(rows=image.rows, cols=image.cols,
                       bits_allocated=image.bits_allocated, pixels=mask)


def op_region_stats(image: RasterImage, mask: RasterImage) -> dict:
    if (image.rows, image.cols) != (mask.rows, mask.cols):
        raise DimensionMismatch(
            f"image {image.rows}x{image.cols} vs mask {mask.rows}x{mask.cols}")
    selected = image.pixels[mask.pixels == 1]
    if selected.size == 0:
        return {"voxel_count": 0, "mean": None, "std": None,
                "min": None, "max": None}
    values = selected.astype(np.float64)
    return {
        "voxel_count": int(selected.size),
        "mean": float(values.mean()),
        "std": float(values.std()),  # population: divide by n
        "min": float(values.min()),
        "max": float(values.max()),
    }


def op_local_train(features, labels, w, lr: float) -> tuple[np.ndarray, int]:
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    w0 = np.asarray(w, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 1 or w0.ndim != 1:
        raise ShapeMismatch(f"X{x.shape} y{y.shape} w{w0.shape}")
    n, d = x.shape
    if n == 0:
        raise EmptyCohortData("no samples")
    if y.shape[0] != n or w0.shape[0] != d:
        raise ShapeMismatch(f"X{x.shape} y{y.shape} w{w0.shape}")
    gradient = (2.0 / n) * (x.T @ (x @ w0 - y))
    return w0 - lr * gradient, n


# -- built-in operator bodies -------------------------------------------------


def _load_series(ctx: OperatorContext, inputs: dict, params: dict) -> dict:
    series_uids = inputs["cohort"]
    index = int(params.get("series_index", 0))
    if not series_uids:
        raise EmptyCohortData("cohort resolves to no series")
    if not 0 <= index < len(series_uids):
        raise ValueError(f"series_index {index} out of range 0..{len(series_uids)-1}")
    series_uid = series_uids[index]
    records = list(ctx.archive.query_index(_series_query(series_uid), "instance"))
    if not records:
        raise EmptyCohortData(f"series {series_uid} has no instances")
    representative = min(records, key=lambda r: r.sop_instance_uid)
    raw = ctx.archive.get_instance_bytes(representative.sop_instance_uid)
    _, ds = parse_part10(raw)
    return {"image": raster_from_dataset(ds)}


def _series_query(series_uid: str):
    from ..archive import CohortQuery, Equals

    return CohortQuery((Equals("SeriesInstanceUID", series_uid),))


def _threshold_segment(ctx: OperatorContext, inputs: dict, params: dict) -> dict:
    return {"mask": op_threshold_segment(inputs["image"],
                                         float(params["threshold"]))}


def _region_stats(ctx: OperatorContext, inputs: dict, params: dict) -> dict:
    return {"stats": op_region_stats(inputs["image"], inputs["mask"])}


def _load_table(ctx: OperatorContext, inputs: dict, params: dict) -> dict:
    raw = ctx.archive.fetch_object(str(params["bucket"]), str(params["key"]))
    return {"table": table_from_csv(raw)}


def _local_train(ctx: OperatorContext, inputs: dict, params: dict) -> dict:
    table = inputs["dataset"]
    x, y = design_matrix(table)
    w = json.loads(params["w"]) if isinstance(params.get("w"), str) \
        else params.get("w", [0.0] * x.shape[1])
    updated, n = op_local_train(x, y, w, float(params.get("lr", 0.01)))
    return {"model": {"w": [float(v) for v in updated], "n": int(n)}}


def builtin_registry() -> OperatorRegistry:
    reg = OperatorRegistry()
    reg.register(OperatorSpec(
        name="load_series",
        input_slots=(("cohort", "cohort"),),
        output_slots=(("image", "raster"),),
    ), _load_series)
    reg.register(OperatorSpec(
        name="threshold_segment",
        input_slots=(("image", "raster"),),
        output_slots=(("mask", "mask"),),
    ), _threshold_segment)
    reg.register(OperatorSpec(
        name="region_stats",
        input_slots=(("image", "raster"), ("mask", "mask")),
        output_slots=(("stats", "table"),),
    ), _region_stats)
    reg.register(OperatorSpec(
        name="load_table",
        input_slots=(),
        output_slots=(("table", "table"),),
    ), _load_table)
    reg.register(OperatorSpec(
        name="local_train",
        input_slots=(("dataset", "table"),),
        output_slots=(("model", "model"),),
    ), _local_train)
    return reg


# -- table helpers ------------------------------------------------------------


def table_to_csv(table) -> bytes:
    """Tables are either a dict (one row) or a list of dicts (many rows);
    serialized as CSV with a header row."""
    import csv
    import io

    rows = [table] if isinstance(table, dict) else list(table)
    if not rows:
        return b""
    headers = list(rows[0].keys())
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=headers, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row.get(k))
                         for k in headers})
    return buf.getvalue().encode("utf-8")


def table_from_csv(raw: bytes) -> list[dict]:
    import csv
    import io

    reader = csv.DictReader(io.StringIO(raw.decode("utf-8")))
    return [dict(row) for row in reader]


def design_matrix(table: list[dict]) -> tuple[np.ndarray, np.ndarray]:
    """Feature columns x0..x{d-1} plus a label column y."""
    if not table:
        raise EmptyCohortData("empty table")
    feature_names = sorted(
        (k for k in table[0] if k.startswith("x")),
        key=lambda k: int(k[1:]))
    x = np.array([[float(row[k]) for k in feature_names] for row in table],
                 dtype=np.float64)
    y = np.array([float(row["y"]) for row in table], dtype=np.float64)
    return x, y
