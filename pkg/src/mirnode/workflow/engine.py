"""Run scheduler: one lock-serialized state machine per run, node bodies on
a shared worker pool, artifacts persisted through the archive object store."""
from __future__ import annotations

import json
import os
import subprocess
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ..archive import Archive, ObjectRef
from .definition import (
    ExecutionPlan,
    WorkflowDefinition,
    plan_execution,
    validate_definition,
)
from .errors import InvalidTransition, UnknownRun, WorkflowError
from .operators import (
    OperatorContext,
    OperatorRegistry,
    OperatorSpec,
    table_from_csv,
    table_to_csv,
)
from .run import (
    CancelRequested,
    NodeFinished,
    NodeStarted,
    READY,
    RetryTimer,
    RUN_TERMINAL,
    WorkflowRun,
    advance_run,
    new_run,
)

ARTIFACT_BUCKET = "runs"

_KIND_EXT = {"cohort": "json", "raster": "npy", "mask": "npy",
             "table": "csv", "params": "json", "model": "json"}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class _RunHandle:
    def __init__(self, run: WorkflowRun, plan: ExecutionPlan, cohort_series: list[str]):
        self.lock = threading.Lock()
        self.run = run
        self.plan = plan
        self.order = {node_id: i for i, node_id in enumerate(plan.linear_order())}
        self.cohort_series = cohort_series
        self.values: dict[tuple[str, str], object] = {}
        self.artifacts: dict[tuple[str, str], ObjectRef] = {}
        self.dispatched: set[str] = set()
        self.done = threading.Event()
        self.start_order: list[str] = []


class WorkflowEngine:
    def __init__(self, archive: Archive, registry: OperatorRegistry,
                 data_dir: str | Path, worker_count: int | None = None):
        self.archive = archive
        self.registry = registry
        self.data_dir = Path(data_dir)
        self.worker_count = worker_count or os.cpu_count() or 2
        self._pool = ThreadPoolExecutor(max_workers=self.worker_count)
        self._runs: dict[str, _RunHandle] = {}
        self._runs_lock = threading.Lock()

    # -- public API -----------------------------------------------------------

    def submit(self, definition: WorkflowDefinition, cohort: str,
               initiated_by: str, run_params: dict | None = None) -> str:
        """Validates, snapshots, resolves the cohort, and starts the run.

        run_params are merged over every node's params (run wins)."""
        defn = validate_definition(definition, self.registry)
        if run_params:
            defn = _merge_run_params(defn, run_params)
        cohort_series = self.archive.resolve_cohort(cohort) if cohort else []
        run_id = uuid.uuid4().hex
        run = new_run(run_id, defn, cohort, initiated_by, created_at=_now())
        handle = _RunHandle(run, plan_execution(defn), cohort_series)
        with self._runs_lock:
            self._runs[run_id] = handle
        with handle.lock:
            self._dispatch_ready(handle)
            self._finish_if_settled(handle)
        return run_id

    def get_run(self, run_id: str) -> WorkflowRun:
        return self._handle(run_id).run

    def run_artifacts(self, run_id: str) -> dict[tuple[str, str], ObjectRef]:
        handle = self._handle(run_id)
        with handle.lock:
            return dict(handle.artifacts)

    def run_value(self, run_id: str, node_id: str, slot: str):
        handle = self._handle(run_id)
        with handle.lock:
            return handle.values[(node_id, slot)]

    def start_order(self, run_id: str) -> list[str]:
        handle = self._handle(run_id)
        with handle.lock:
            return list(handle.start_order)

    def cancel(self, run_id: str) -> WorkflowRun:
        handle = self._handle(run_id)
        with handle.lock:
            handle.run = advance_run(handle.run, CancelRequested(at=_now()))
            self._finish_if_settled(handle)
            return handle.run

    def wait(self, run_id: str, timeout: float = 30.0) -> WorkflowRun:
        handle = self._handle(run_id)
        if not handle.done.wait(timeout):
            raise TimeoutError(f"run {run_id} still {handle.run.state}")
        return handle.run

    def list_runs(self) -> list[WorkflowRun]:
        with self._runs_lock:
            handles = list(self._runs.values())
        return sorted((h.run for h in handles), key=lambda r: r.created_at)

    def shutdown(self) -> None:
        self._pool.shutdown(wait=False, cancel_futures=True)

    # -- internals --------------------------------------------------------------

    def _handle(self, run_id: str) -> _RunHandle:
        with self._runs_lock:
            handle = self._runs.get(run_id)
        if handle is None:
            raise UnknownRun(run_id)
        return handle

    def _dispatch_ready(self, handle: _RunHandle) -> None:
        """Submit ready, undispatched nodes in plan order.

        With one worker the queue order is the start order, and a node must
        not be enqueued while an earlier plan-order node could still start
        later — that is what makes serial execution follow the plan's
        stage-concatenated order exactly. With several workers starts may
        interleave anyway, so ready nodes are dispatched eagerly."""
        states = handle.run.node_states
        for node_id in sorted(states, key=handle.order.__getitem__):
            st = states[node_id]
            if st.state == READY and node_id not in handle.dispatched:
                handle.dispatched.add(node_id)
                self._pool.submit(self._execute_node, handle, node_id)
            elif self.worker_count == 1 and st.state not in (
                    "running", "succeeded", "skipped") and not (
                    st.state == "failed"
                    and st.attempts > handle.run.retry_limit):
                break  # this node may still start later; keep plan order

    def _execute_node(self, handle: _RunHandle, node_id: str) -> None:
        with handle.lock:
            st = handle.run.node_states[node_id]
            if st.state != READY or handle.run.state in RUN_TERMINAL:
                handle.dispatched.discard(node_id)
                return  # canceled or skipped between dispatch and start
            handle.run = advance_run(handle.run, NodeStarted(node_id, at=_now()))
            handle.start_order.append(node_id)
        try:
            with handle.lock:
                node = next(n for n in handle.run.definition.nodes
                            if n.id == node_id)
                spec = self.registry.spec(node.operator)
                inputs = self._collect_inputs(handle, node, spec)
            outputs = self._run_body(handle, node, spec, inputs)
            self._persist_outputs(handle, node, spec, outputs)
        except Exception as exc:
            self._apply_finish(handle, node_id, "failed", _message(exc))
            return
        self._apply_finish(handle, node_id, "succeeded", None)

    def _apply_finish(self, handle: _RunHandle, node_id: str, outcome: str,
                      error: str | None) -> None:
        with handle.lock:
            handle.dispatched.discard(node_id)
            handle.run = advance_run(
                handle.run, NodeFinished(node_id, outcome, at=_now(), error=error))
            st = handle.run.node_states[node_id]
            if (outcome == "failed" and st.state == "failed"
                    and st.attempts <= handle.run.retry_limit
                    and not handle.run.cancel_requested):
                # immediate retry (zero back-off)
                handle.run = advance_run(handle.run, RetryTimer(node_id, at=_now()))
            self._dispatch_ready(handle)
            self._finish_if_settled(handle)

    def _finish_if_settled(self, handle: _RunHandle) -> None:
        if handle.run.state in RUN_TERMINAL:
            handle.done.set()

    def _collect_inputs(self, handle: _RunHandle, node, spec: OperatorSpec) -> dict:
        """Positional binding; unbound cohort/params slots are auto-fed."""
        inputs: dict[str, object] = {}
        for (slot_name, kind), binding in zip(spec.input_slots, node.inputs):
            inputs[slot_name] = handle.values[(binding.from_node, binding.slot)]
        for slot_name, kind in spec.input_slots[len(node.inputs):]:
            if kind == "cohort":
                inputs[slot_name] = list(handle.cohort_series)
            elif kind == "params":
                inputs[slot_name] = dict(node.params)
        return inputs

    def _run_body(self, handle: _RunHandle, node, spec: OperatorSpec,
                  inputs: dict) -> dict:
        workdir = self.data_dir / "runs" / handle.run.run_id / node.id
        workdir.mkdir(parents=True, exist_ok=True)
        if spec.execution == "built-in":
            ctx = OperatorContext(self.archive, handle.run.run_id, node.id, workdir)
            outputs = self.registry.fn(spec.name)(ctx, inputs, dict(node.params))
        else:
            outputs = _run_external(spec, node, inputs, workdir)
        missing = [name for name, _ in spec.output_slots if name not in outputs]
        if missing:
            raise WorkflowError(f"{node.id}: operator produced no {missing}")
        return outputs

    def _persist_outputs(self, handle: _RunHandle, node, spec: OperatorSpec,
                         outputs: dict) -> None:
        refs = {}
        for slot_name, kind in spec.output_slots:
            value = outputs[slot_name]
            key = f"{handle.run.run_id}/{node.id}/{slot_name}.{_KIND_EXT[kind]}"
            refs[(node.id, slot_name)] = self.archive.store_object(
                ARTIFACT_BUCKET, key, _media_type(kind), _encode_value(kind, value))
        with handle.lock:
            for (slot_name, kind) in spec.output_slots:
                handle.values[(node.id, slot_name)] = outputs[slot_name]
            handle.artifacts.update(refs)


def _merge_run_params(defn: WorkflowDefinition, run_params: dict) -> WorkflowDefinition:
    from dataclasses import replace

    nodes = tuple(replace(n, params={**n.params, **run_params})
                  for n in defn.nodes)
    return replace(defn, nodes=nodes)


def _message(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


def _media_type(kind: str) -> str:
    return {"cohort": "application/json", "raster": "application/x-npy",
            "mask": "application/x-npy", "table": "text/csv",
            "params": "application/json",
            "model": "application/json"}[kind]


def _encode_value(kind: str, value) -> bytes:
    import io

    if kind in ("raster", "mask"):
        buf = io.BytesIO()
        np.save(buf, value.pixels)
        return buf.getvalue()
    if kind == "table":
        return table_to_csv(value)
    return json.dumps(value, sort_keys=True).encode("utf-8")


def _decode_value(kind: str, raw: bytes, bits_allocated: int = 16):
    import io

    if kind in ("raster", "mask"):
        pixels = np.load(io.BytesIO(raw))
        from ..dicom import RasterImage

        bits = 8 if pixels.dtype == np.uint8 else 16
        return RasterImage(rows=pixels.shape[0], cols=pixels.shape[1],
                           bits_allocated=bits, pixels=pixels)
    if kind == "table":
        return table_from_csv(raw)
    return json.loads(raw.decode("utf-8"))


def _run_external(spec: OperatorSpec, node, inputs: dict, workdir: Path) -> dict:
    """Exchange-directory protocol: inputs/ holds one file per input slot,
    outputs/ must hold one file per output slot after a zero exit."""
    exchange = workdir
    in_dir = exchange / "inputs"
    out_dir = exchange / "outputs"
    in_dir.mkdir(exist_ok=True)
    out_dir.mkdir(exist_ok=True)
    for slot_name, kind in spec.input_slots:
        path = in_dir / f"{slot_name}.{_KIND_EXT[kind]}"
        path.write_bytes(_encode_value(kind, inputs[slot_name]))
    (exchange / "params.json").write_text(json.dumps(dict(node.params)))
    argv = [arg.replace("{exchange}", str(exchange)) for arg in spec.argv]
    proc = subprocess.run(argv, cwd=exchange, capture_output=True, timeout=120)
    if proc.returncode != 0:
        raise WorkflowError(
            f"{node.id}: external command exited {proc.returncode}:"
            f" {proc.stderr.decode('utf-8', 'replace')[:500]}")
    outputs = {}
    for slot_name, kind in spec.output_slots:
        path = out_dir / f"{slot_name}.{_KIND_EXT[kind]}"
        if not path.exists():
            raise WorkflowError(f"{node.id}: missing output file {path.name}")
        outputs[slot_name] = _decode_value(kind, path.read_bytes())
    return outputs
