"""Workflow engine tests.

Independent oracles used here:
- planning: longest-path layering (recursive) against the engine's
  frontier-peeling, plus brute-force enumeration of topological orders;
- run lifecycle: a shadow state machine transcribed from the documented
  transition rules, driven with the same random event scripts;
- operators: element-wise Python loops, hand-computed statistics, and a
  central finite-difference gradient check.
"""
from __future__ import annotations

import itertools
import json
import random
import sys
import threading

import numpy as np
import pytest

from mirnode.archive import Archive, CohortQuery, Database, Equals
from mirnode.dicom import RasterImage, serialize_part10
from mirnode.workflow import (
    CancelRequested,
    CycleError,
    DanglingInput,
    DimensionMismatch,
    DuplicateNodeId,
    EmptyCohortData,
    InvalidDefinition,
    InvalidTransition,
    NodeFinished,
    NodeStarted,
    OperatorRegistry,
    OperatorSpec,
    RetryTimer,
    ShapeMismatch,
    UnknownOperator,
    WorkflowEngine,
    advance_run,
    builtin_registry,
    definition_from_json,
    definition_to_json,
    new_run,
    op_local_train,
    op_region_stats,
    op_threshold_segment,
    plan_execution,
    validate_definition,
)

from gen_dicom import random_instance


# ---------------------------------------------------------------------------
# Test operator registry
# ---------------------------------------------------------------------------


def _emit(ctx, inputs, params):
    return {"out": dict(params)}


def _flaky_factory(counter):
    def fn(ctx, inputs, params):
        counter[ctx.node_id] = counter.get(ctx.node_id, 0) + 1
        if counter[ctx.node_id] <= int(params.get("fail_times", 0)):
            raise RuntimeError(f"induced failure #{counter[ctx.node_id]}")
        return {"out": dict(params)}
    return fn


def make_registry(extra_fns=()):
    reg = OperatorRegistry()
    for k in range(4):
        reg.register(OperatorSpec(
            name=f"emit{k}",
            input_slots=tuple((f"in{i}", "params") for i in range(k)),
            output_slots=(("out", "params"),),
        ), _emit)
    for spec, fn in extra_fns:
        reg.register(spec, fn)
    return reg


def doc(nodes, retry_limit=1):
    return {"name": "wf", "version": "1.0.0", "retry_limit": retry_limit,
            "nodes": nodes}


def node(node_id, operator, preds=(), params=None):
    return {"id": node_id, "operator": operator,
            "params": params or {},
            "inputs": [{"from_node": p, "slot": "out"} for p in preds]}


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def test_valid_chain_and_canonical_order():
    d = doc([node("c", "emit1", ["b"]), node("a", "emit0"),
             node("b", "emit1", ["a"])])
    validated = validate_definition(definition_from_json(d), make_registry())
    assert [n.id for n in validated.nodes] == ["a", "b", "c"]


def test_two_node_cycle_reported():
    d = doc([node("a", "emit1", ["b"]), node("b", "emit1", ["a"])])
    with pytest.raises(CycleError) as err:
        validate_definition(definition_from_json(d), make_registry())
    assert err.value.cycle == ["a", "b"]


def test_longer_cycle_reported():
    d = doc([node("a", "emit1", ["c"]), node("b", "emit1", ["a"]),
             node("c", "emit1", ["b"])])
    with pytest.raises(CycleError) as err:
        validate_definition(definition_from_json(d), make_registry())
    assert sorted(err.value.cycle) == ["a", "b", "c"]


def test_unknown_output_slot_is_dangling():
    d = doc([node("a", "emit0"),
             {"id": "b", "operator": "emit1", "params": {},
              "inputs": [{"from_node": "a", "slot": "maskX"}]}])
    with pytest.raises(DanglingInput, match="maskX"):
        validate_definition(definition_from_json(d), make_registry())


def test_missing_from_node_is_dangling():
    d = doc([node("b", "emit1", ["ghost"])])
    with pytest.raises(DanglingInput, match="ghost"):
        validate_definition(definition_from_json(d), make_registry())


def test_unknown_operator():
    d = doc([node("a", "mystery")])
    with pytest.raises(UnknownOperator):
        validate_definition(definition_from_json(d), make_registry())


def test_duplicate_node_id():
    d = doc([node("a", "emit0"), node("a", "emit0")])
    with pytest.raises(DuplicateNodeId):
        validate_definition(definition_from_json(d), make_registry())


def test_unbound_required_slot_is_dangling():
    registry = make_registry(extra_fns=[(OperatorSpec(
        name="needs_raster", input_slots=(("image", "raster"),),
        output_slots=(("out", "params"),)), _emit)])
    # a raster slot cannot be auto-fed, so leaving it unbound is an error
    d = doc([node("b", "needs_raster")])
    with pytest.raises(DanglingInput, match="image"):
        validate_definition(definition_from_json(d), registry)
    # unbound cohort/params slots are fine: the engine feeds them itself
    d2 = doc([node("a", "emit0"), node("b", "emit2", ["a"])])
    validate_definition(definition_from_json(d2), registry_with_emits())
    # binding more inputs than the operator declares is also dangling
    d3 = doc([node("a", "emit0"), node("b", "emit1", ["a", "a"])])
    with pytest.raises(DanglingInput, match="declares 1"):
        validate_definition(definition_from_json(d3), make_registry())


def registry_with_emits():
    return make_registry()


def test_definition_json_validation():
    with pytest.raises(InvalidDefinition):
        definition_from_json({"name": "x", "version": "1.0", "nodes": []})
    with pytest.raises(InvalidDefinition):
        definition_from_json(doc([node("Bad_Upper", "emit0")]))
    with pytest.raises(InvalidDefinition):
        definition_from_json(doc([node("a" * 65, "emit0")]))
    with pytest.raises(InvalidDefinition):
        definition_from_json(doc([{"id": "a", "operator": "emit0",
                                   "params": {"k": [1, 2]}, "inputs": []}]))
    with pytest.raises(InvalidDefinition):
        definition_from_json({"name": "x", "version": "1.0.0", "nodes": [],
                              "retry_limit": 1})
    d = doc([node("a", "emit0", params={"s": "v", "n": 3, "f": 1.5, "b": True})])
    assert definition_to_json(definition_from_json(d)) == d


# ---------------------------------------------------------------------------
# Planning
# ---------------------------------------------------------------------------


def _edges(defn):
    return [(b.from_node, n.id) for n in defn.nodes for b in n.inputs]


def _longest_path_stages(defn):
    """Independent layering: layer(n) = 1 + max(layer(preds)), recursively."""
    preds = {n.id: [b.from_node for b in n.inputs] for n in defn.nodes}
    depth: dict[str, int] = {}

    def visit(node_id):
        if node_id not in depth:
            ps = preds[node_id]
            depth[node_id] = 0 if not ps else 1 + max(visit(p) for p in ps)
        return depth[node_id]

    for node_id in preds:
        visit(node_id)
    n_layers = max(depth.values()) + 1
    return tuple(tuple(sorted(n for n, d in depth.items() if d == k))
                 for k in range(n_layers))


def _all_topological_orders(ids, edges):
    return [p for p in itertools.permutations(ids)
            if all(p.index(u) < p.index(v) for u, v in edges)]


def test_diamond_stages_against_enumerated_topological_orders():
    d = doc([node("a", "emit0"), node("b", "emit1", ["a"]),
             node("c", "emit1", ["a"]), node("d", "emit2", ["b", "c"])])
    defn = validate_definition(definition_from_json(d), make_registry())
    plan = plan_execution(defn)
    assert plan.stages == (("a",), ("b", "c"), ("d",))
    edges = _edges(defn)
    orders = _all_topological_orders(["a", "b", "c", "d"], edges)
    assert sorted(orders) == [tuple("abcd"), tuple("acbd")]
    stage_of = {n: k for k, st in enumerate(plan.stages) for n in st}
    # every topological order visits the stages in non-decreasing order,
    # i.e. each order is an intra-stage interleaving of this schedule
    for order in orders:
        stage_seq = [stage_of[n] for n in order]
        assert stage_seq == sorted(stage_seq)
    # and the concatenation of stages is itself one of the enumerated orders
    assert tuple(plan.linear_order()) in orders


def test_single_node_plan():
    d = doc([node("a", "emit0")])
    defn = validate_definition(definition_from_json(d), make_registry())
    assert plan_execution(defn).stages == (("a",),)


def random_dag_doc(rng, max_nodes=12, retry_limit=1):
    n = rng.randrange(1, max_nodes + 1)
    ids = [f"n{i:02d}" for i in range(n)]
    rng.shuffle(ids)
    nodes = []
    for i, node_id in enumerate(ids):
        k = rng.randrange(0, min(i, 3) + 1)
        preds = rng.sample(ids[:i], k)
        nodes.append(node(node_id, f"emit{k}", preds, {"tag": node_id}))
    rng.shuffle(nodes)
    return doc(nodes, retry_limit=retry_limit)


def test_200_random_dags_layering_properties():
    rng = random.Random(200)
    registry = make_registry()
    for _ in range(200):
        defn = validate_definition(
            definition_from_json(random_dag_doc(rng)), registry)
        plan = plan_execution(defn)
        stage_of = {n: k for k, stage in enumerate(plan.stages) for n in stage}
        edges = _edges(defn)
        # per-edge stage monotonicity
        for u, v in edges:
            assert stage_of[u] < stage_of[v]
        # intra-stage lexicographic order
        for stage in plan.stages:
            assert list(stage) == sorted(stage)
        # exact Kahn layers == longest-path layers (independent recursion)
        assert plan.stages == _longest_path_stages(defn)
        # concatenation is a topological order
        order = plan.linear_order()
        pos = {n: i for i, n in enumerate(order)}
        assert all(pos[u] < pos[v] for u, v in edges)
        assert sorted(order) == sorted(stage_of)


def test_snapshot_stability():
    d = doc([node("a", "emit0"), node("b", "emit1", ["a"])])
    defn = validate_definition(definition_from_json(d), make_registry())
    first = plan_execution(defn)
    # later edits to the source document must not affect the stored snapshot
    d["nodes"].append(node("z", "emit0"))
    assert plan_execution(defn) == first


# ---------------------------------------------------------------------------
# advance_run: scripted scenarios
# ---------------------------------------------------------------------------


def _diamond_run(retry_limit):
    d = doc([node("a", "emit0"), node("b", "emit1", ["a"]),
             node("c", "emit1", ["a"]), node("d", "emit2", ["b", "c"])],
            retry_limit=retry_limit)
    defn = validate_definition(definition_from_json(d), make_registry())
    return new_run("r1", defn, "cohort", "tester")


def test_scripted_failure_skips_descendants_and_continues_independents():
    run = _diamond_run(retry_limit=0)
    run = advance_run(run, NodeStarted("a"))
    run = advance_run(run, NodeFinished("a", "succeeded"))
    run = advance_run(run, NodeStarted("b"))
    run = advance_run(run, NodeStarted("c"))
    run = advance_run(run, NodeFinished("b", "failed", error="boom"))
    assert run.node_states["d"].state == "skipped"
    assert run.node_states["c"].state == "running"  # independent branch continues
    assert run.state == "running"
    run = advance_run(run, NodeFinished("c", "succeeded"))
    assert run.node_states["c"].state == "succeeded"
    assert run.state == "failed"
    assert run.node_states["b"].error == "boom"
    with pytest.raises(InvalidTransition):
        advance_run(run, NodeStarted("d"))


def test_scripted_retry_then_success():
    run = _diamond_run(retry_limit=1)
    run = advance_run(run, NodeStarted("a"))
    run = advance_run(run, NodeFinished("a", "succeeded"))
    run = advance_run(run, NodeStarted("b"))
    run = advance_run(run, NodeFinished("b", "failed"))
    assert run.state == "running"  # failure within retry budget is not terminal
    assert run.node_states["d"].state == "pending"  # not skipped
    run = advance_run(run, RetryTimer("b"))
    assert run.node_states["b"].state == "ready"
    run = advance_run(run, NodeStarted("b"))
    run = advance_run(run, NodeFinished("b", "succeeded"))
    run = advance_run(run, NodeStarted("c"))
    run = advance_run(run, NodeFinished("c", "succeeded"))
    run = advance_run(run, NodeStarted("d"))
    run = advance_run(run, NodeFinished("d", "succeeded"))
    assert run.state == "succeeded"
    assert run.node_states["b"].attempts == 2


def test_scripted_cancel_mid_stage():
    # chain a -> b -> c: cancel while b runs
    d = doc([node("a", "emit0"), node("b", "emit1", ["a"]),
             node("c", "emit1", ["b"])])
    defn = validate_definition(definition_from_json(d), make_registry())
    run = new_run("r2", defn, "cohort", "tester")
    run = advance_run(run, NodeStarted("a"))
    run = advance_run(run, NodeFinished("a", "succeeded"))
    run = advance_run(run, NodeStarted("b"))
    run = advance_run(run, CancelRequested())
    assert run.node_states["c"].state == "skipped"
    assert run.node_states["b"].state == "running"  # allowed to finish
    assert run.state == "running"
    run = advance_run(run, NodeFinished("b", "succeeded"))
    assert run.state == "canceled"
    for event in (NodeStarted("c"), CancelRequested(), RetryTimer("b")):
        with pytest.raises(InvalidTransition):
            advance_run(run, event)


def test_cancel_before_any_start():
    run = _diamond_run(retry_limit=0)
    run = advance_run(run, CancelRequested())
    assert run.state == "canceled"
    assert all(st.state == "skipped" for st in run.node_states.values())


def test_invalid_transitions():
    run = _diamond_run(retry_limit=1)
    with pytest.raises(InvalidTransition):
        advance_run(run, NodeStarted("b"))  # pending, not ready
    with pytest.raises(InvalidTransition):
        advance_run(run, NodeFinished("a", "succeeded"))  # never started
    with pytest.raises(InvalidTransition):
        advance_run(run, RetryTimer("a"))  # not failed
    with pytest.raises(InvalidTransition):
        advance_run(run, NodeStarted("ghost"))  # unknown node
    run = advance_run(run, NodeStarted("a"))
    with pytest.raises(InvalidTransition):
        advance_run(run, NodeFinished("a", "exploded"))  # unknown outcome
    run = advance_run(run, NodeFinished("a", "failed"))
    run = advance_run(run, RetryTimer("a"))
    run = advance_run(run, NodeStarted("a"))
    run = advance_run(run, NodeFinished("a", "failed"))
    with pytest.raises(InvalidTransition):
        advance_run(run, RetryTimer("a"))  # attempts exhausted


# ---------------------------------------------------------------------------
# advance_run: randomized scripts against a shadow model
# ---------------------------------------------------------------------------


class ShadowModel:
    """Literal transcription of the documented transition rules."""

    def __init__(self, preds: dict[str, list[str]], retry_limit: int):
        self.preds = preds
        self.succ: dict[str, set[str]] = {n: set() for n in preds}
        for n, ps in preds.items():
            for p in ps:
                self.succ[p].add(n)
        self.retry_limit = retry_limit
        self.state = {n: ("ready" if not ps else "pending", 0)
                      for n, ps in preds.items()}
        self.cancel = False

    def descendants(self, root):
        seen, frontier = set(), [root]
        while frontier:
            for nxt in self.succ[frontier.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return seen

    def apply(self, kind, node=None, outcome=None):
        if kind == "start":
            st, att = self.state[node]
            self.state[node] = ("running", att + 1)
        elif kind == "finish":
            st, att = self.state[node]
            if outcome == "succeeded":
                self.state[node] = ("succeeded", att)
                if not self.cancel:
                    for n, ps in self.preds.items():
                        if self.state[n][0] == "pending" and all(
                                self.state[p][0] == "succeeded" for p in ps):
                            self.state[n] = ("ready", self.state[n][1])
            else:
                self.state[node] = ("failed", att)
                if att > self.retry_limit or self.cancel:
                    for ds in self.descendants(node):
                        s, a = self.state[ds]
                        if s in ("pending", "ready"):
                            self.state[ds] = ("skipped", a)
        elif kind == "retry":
            st, att = self.state[node]
            self.state[node] = ("ready", att)
        elif kind == "cancel":
            self.cancel = True
            for n, (s, a) in self.state.items():
                if s in ("pending", "ready"):
                    self.state[n] = ("skipped", a)

    def run_state(self):
        states = [s for s, _ in self.state.values()]
        if self.cancel:
            return "running" if "running" in states else "canceled"
        if all(s == "succeeded" for s in states):
            return "succeeded"
        retriable = any(s == "failed" and a <= self.retry_limit
                        for s, a in self.state.values())
        if retriable or any(s in ("running", "ready", "pending") for s in states):
            return "running" if any(a > 0 for _, a in self.state.values()) \
                else "pending"
        return "failed"


def test_random_event_scripts_match_shadow_model():
    rng = random.Random(42)
    registry = make_registry()
    for trial in range(120):
        retry_limit = rng.randrange(0, 3)
        defn = validate_definition(definition_from_json(
            random_dag_doc(rng, max_nodes=7, retry_limit=retry_limit)), registry)
        run = new_run(f"run{trial}", defn, "c", "t")
        preds = {n.id: [b.from_node for b in n.inputs] for n in defn.nodes}
        shadow = ShadowModel(preds, retry_limit)
        for _ in range(60):
            if run.state in ("succeeded", "failed", "canceled"):
                # terminal states absorb: any event must be rejected
                with pytest.raises(InvalidTransition):
                    advance_run(run, CancelRequested())
                break
            choices = []
            for node_id, st in run.node_states.items():
                if st.state == "ready":
                    choices.append(("start", node_id, None))
                if st.state == "running":
                    choices.append(("finish", node_id,
                                    rng.choice(["succeeded", "failed"])))
                if (st.state == "failed" and st.attempts <= retry_limit
                        and not run.cancel_requested):
                    choices.append(("retry", node_id, None))
            if not run.cancel_requested and rng.random() < 0.05:
                choices.append(("cancel", None, None))
            if not choices:
                break
            kind, node_id, outcome = rng.choice(choices)
            if kind == "start":
                run = advance_run(run, NodeStarted(node_id))
            elif kind == "finish":
                run = advance_run(run, NodeFinished(node_id, outcome))
            elif kind == "retry":
                run = advance_run(run, RetryTimer(node_id))
            else:
                run = advance_run(run, CancelRequested())
            shadow.apply(kind, node_id, outcome)
            assert {n: (st.state, st.attempts)
                    for n, st in run.node_states.items()} == shadow.state
            assert run.state == shadow.run_state()
            assert all(st.attempts <= retry_limit + 1
                       for st in run.node_states.values())


# ---------------------------------------------------------------------------
# Pure operators
# ---------------------------------------------------------------------------


def _raster(values, bits=8):
    arr = np.array(values, dtype=np.uint8 if bits == 8 else np.uint16)
    return RasterImage(rows=arr.shape[0], cols=arr.shape[1],
                       bits_allocated=bits, pixels=arr)


def test_threshold_examples():
    img = _raster([[0, 50, 100, 200]])
    assert op_threshold_segment(img, 100).pixels.tolist() == [[0, 0, 1, 1]]
    assert op_threshold_segment(img, 0).pixels.tolist() == [[1, 1, 1, 1]]
    with pytest.raises(ValueError):
        op_threshold_segment(img, 256)


def test_threshold_random_vs_elementwise_scan():
    rng = random.Random(301)
    values = [[rng.randrange(4096) for _ in range(64)] for _ in range(64)]
    img = _raster(values, bits=16)
    threshold = rng.randrange(4096)
    mask = op_threshold_segment(img, threshold)
    for i in range(64):
        for j in range(64):
            assert mask.pixels[i][j] == (1 if values[i][j] >= threshold else 0)
    assert (mask.rows, mask.cols) == (64, 64)


def test_region_stats_hand_computed():
    img = _raster([[2, 4, 9]])
    mask = _raster([[1, 1, 0]])
    stats = op_region_stats(img, mask)
    # population std = sqrt(((2-3)^2 + (4-3)^2) / 2) = 1
    assert stats == {"voxel_count": 2, "mean": 3.0, "std": 1.0,
                     "min": 2.0, "max": 4.0}


def test_region_stats_empty_and_uniform():
    img = _raster([[7, 7], [7, 7]])
    empty = op_region_stats(img, _raster([[0, 0], [0, 0]]))
    assert empty == {"voxel_count": 0, "mean": None, "std": None,
                     "min": None, "max": None}
    full = op_region_stats(img, _raster([[1, 1], [1, 1]]))
    assert full["mean"] == 7.0 and full["std"] == 0.0 and full["voxel_count"] == 4
    with pytest.raises(DimensionMismatch):
        op_region_stats(img, _raster([[1, 1]]))


def test_local_train_identity_and_hand_computed_step():
    w, n = op_local_train([[1.0, 2.0]], [3.0], [0.5, 0.5], lr=0.0)
    assert w.tolist() == [0.5, 0.5] and n == 1
    # gradient = (2/1) * 1 * (0 - 2) = -4; w' = 0 - 0.5 * (-4) = 2
    w, n = op_local_train([[1.0]], [2.0], [0.0], lr=0.5)
    assert w.tolist() == [2.0] and n == 1


def test_local_train_gradient_vs_central_finite_differences():
    rng = np.random.default_rng(302)
    for _ in range(25):
        n = int(rng.integers(1, 12))
        d = int(rng.integers(1, 6))
        x = rng.uniform(-1, 1, size=(n, d))
        y = rng.uniform(-1, 1, size=n)
        w = rng.uniform(-1, 1, size=d)
        lr = 0.37
        w_next, _ = op_local_train(x, y, w, lr)
        implied_gradient = (w - w_next) / lr

        def loss(wv):
            r = x @ wv - y
            return float(r @ r) / n

        eps = 1e-6
        for j in range(d):
            step = np.zeros(d)
            step[j] = eps
            fd = (loss(w + step) - loss(w - step)) / (2 * eps)
            denom = max(1.0, abs(fd))
            assert abs(fd - implied_gradient[j]) / denom < 1e-6


def test_local_train_shape_errors():
    with pytest.raises(ShapeMismatch):
        op_local_train([[1.0, 2.0]], [1.0], [0.0], lr=0.1)  # w wrong width
    with pytest.raises(ShapeMismatch):
        op_local_train([[1.0]], [1.0, 2.0], [0.0], lr=0.1)  # y wrong length
    with pytest.raises(EmptyCohortData):
        op_local_train(np.zeros((0, 2)), np.zeros(0), [0.0, 0.0], lr=0.1)


# ---------------------------------------------------------------------------
# Engine integration
# ---------------------------------------------------------------------------


@pytest.fixture()
def platform(tmp_path):
    db = Database(tmp_path / "index.sqlite3")
    archive = Archive(db, tmp_path / "blobs")
    engines = []

    def build(registry, workers=2):
        engine = WorkflowEngine(archive, registry, tmp_path, worker_count=workers)
        engines.append(engine)
        return engine

    yield archive, build
    for engine in engines:
        engine.shutdown()
    db.close()


def test_serial_executor_starts_in_plan_order(platform):
    archive, build = platform
    rng = random.Random(400)
    registry = make_registry()
    engine = build(registry, workers=1)
    for _ in range(10):
        defn = validate_definition(
            definition_from_json(random_dag_doc(rng, max_nodes=9)), registry)
        run_id = engine.submit(defn, "", "tester")
        run = engine.wait(run_id, 30)
        assert run.state == "succeeded"
        assert engine.start_order(run_id) == plan_execution(defn).linear_order()


def test_edge_ordering_and_artifact_completeness(platform):
    archive, build = platform
    rng = random.Random(401)
    registry = make_registry()
    engine = build(registry, workers=4)
    for _ in range(6):
        defn = validate_definition(
            definition_from_json(random_dag_doc(rng, max_nodes=10)), registry)
        run_id = engine.submit(defn, "", "tester")
        run = engine.wait(run_id, 30)
        assert run.state == "succeeded"
        for n in defn.nodes:
            for b in n.inputs:
                up = run.node_states[b.from_node]
                down = run.node_states[n.id]
                assert up.ended_at <= down.started_at
        artifacts = engine.run_artifacts(run_id)
        for n in defn.nodes:
            spec = registry.spec(n.operator)
            for slot_name, _ in spec.output_slots:
                assert (n.id, slot_name) in artifacts
                ref = artifacts[(n.id, slot_name)]
                assert archive.fetch_object(ref.bucket, ref.key)


def test_engine_retry_then_success(platform):
    archive, build = platform
    counter = {}
    registry = make_registry(extra_fns=[(OperatorSpec(
        name="flaky", input_slots=(), output_slots=(("out", "params"),)),
        _flaky_factory(counter))])
    engine = build(registry)
    d = doc([node("a", "flaky", params={"fail_times": 1}),
             node("b", "emit1", ["a"])], retry_limit=1)
    run_id = engine.submit(definition_from_json(d), "", "tester")
    run = engine.wait(run_id, 30)
    assert run.state == "succeeded"
    assert run.node_states["a"].attempts == 2
    assert counter["a"] == 2


def test_engine_exhausted_retries_skip_descendants(platform):
    archive, build = platform
    counter = {}
    registry = make_registry(extra_fns=[(OperatorSpec(
        name="flaky", input_slots=(("in0", "params"),),
        output_slots=(("out", "params"),)), _flaky_factory(counter))])
    engine = build(registry)
    d = doc([node("src", "emit0"),
             node("bad", "flaky", ["src"], params={"fail_times": 99}),
             node("down", "emit1", ["bad"]),
             node("side", "emit1", ["src"])], retry_limit=1)
    run_id = engine.submit(definition_from_json(d), "", "tester")
    run = engine.wait(run_id, 30)
    assert run.state == "failed"
    assert run.node_states["bad"].state == "failed"
    assert run.node_states["bad"].attempts == 2
    assert run.node_states["down"].state == "skipped"
    assert run.node_states["side"].state == "succeeded"  # failure isolation
    assert run.node_states["bad"].error.startswith("RuntimeError")


def test_engine_cancel_lets_running_finish(platform):
    archive, build = platform
    gate = threading.Event()
    release = threading.Event()

    def blocking(ctx, inputs, params):
        gate.set()
        assert release.wait(10)
        return {"out": {}}

    registry = make_registry(extra_fns=[(OperatorSpec(
        name="block", input_slots=(("in0", "params"),),
        output_slots=(("out", "params"),)), blocking)])
    engine = build(registry, workers=2)
    d = doc([node("a", "emit0"), node("b", "block", ["a"]),
             node("c", "emit1", ["b"])])
    run_id = engine.submit(definition_from_json(d), "", "tester")
    assert gate.wait(10)
    mid = engine.cancel(run_id)
    assert mid.state == "running"  # b still running
    assert mid.node_states["c"].state == "skipped"
    release.set()
    run = engine.wait(run_id, 30)
    assert run.state == "canceled"
    assert run.node_states["b"].state == "succeeded"
    assert run.node_states["c"].state == "skipped"


def test_run_params_override_node_params(platform):
    archive, build = platform
    registry = make_registry()
    engine = build(registry)
    d = doc([node("a", "emit0", params={"alpha": 1, "keep": "yes"})])
    run_id = engine.submit(definition_from_json(d), "", "tester",
                           run_params={"alpha": 99})
    engine.wait(run_id, 30)
    assert engine.run_value(run_id, "a", "out") == {"alpha": 99, "keep": "yes"}


def test_external_command_operator(platform, tmp_path):
    archive, build = platform
    script = tmp_path / "adder.py"
    script.write_text(
        "import json, pathlib, sys\n"
        "ex = pathlib.Path(sys.argv[1])\n"
        "params = json.loads((ex / 'params.json').read_text())\n"
        "seed = json.loads((ex / 'inputs' / 'seed.json').read_text())\n"
        "out = {'sum': seed['value'] + params['add']}\n"
        "(ex / 'outputs' / 'result.json').write_text(json.dumps(out))\n")
    registry = make_registry(extra_fns=[(OperatorSpec(
        name="adder", execution="external-command",
        argv=(sys.executable, str(script), "{exchange}"),
        input_slots=(("seed", "params"),),
        output_slots=(("result", "params"),)), None)])
    engine = build(registry)
    d = doc([node("src", "emit0", params={"value": 5}),
             node("add", "adder", ["src"], params={"add": 37})])
    run_id = engine.submit(definition_from_json(d), "", "tester")
    run = engine.wait(run_id, 30)
    assert run.state == "succeeded"
    assert engine.run_value(run_id, "add", "result") == {"sum": 42}
    ref = engine.run_artifacts(run_id)[("add", "result")]
    assert json.loads(archive.fetch_object(ref.bucket, ref.key)) == {"sum": 42}


def test_external_command_failure_modes(platform, tmp_path):
    archive, build = platform
    bad = tmp_path / "bad.py"
    bad.write_text("import sys; sys.exit(3)\n")
    silent = tmp_path / "silent.py"
    silent.write_text("pass\n")
    registry = make_registry(extra_fns=[
        (OperatorSpec(name="crasher", execution="external-command",
                      argv=(sys.executable, str(bad), "{exchange}"),
                      output_slots=(("out", "params"),)), None),
        (OperatorSpec(name="no-output", execution="external-command",
                      argv=(sys.executable, str(silent), "{exchange}"),
                      output_slots=(("out", "params"),)), None),
    ])
    engine = build(registry)
    for op_name, expect in (("crasher", "exited 3"), ("no-output", "missing output")):
        d = doc([node("x", op_name)], retry_limit=0)
        run_id = engine.submit(definition_from_json(d), "", "tester")
        run = engine.wait(run_id, 30)
        assert run.state == "failed"
        assert expect in run.node_states["x"].error


def test_builtin_pipeline_over_cohort(platform):
    archive, build = platform
    rng = random.Random(402)
    meta, ds = random_instance(rng, rows=6, cols=6, series_uid="11.1",
                               modality="CT")
    archive.ingest_instance(meta, ds, serialize_part10(meta, ds))
    archive.create_cohort("ct", CohortQuery((Equals("Modality", "CT"),)), "t")
    engine = build(builtin_registry())
    d = doc([
        node("load", "load_series", params={"series_index": 0}),
        node("seg", "threshold_segment", ["load"], params={"threshold": 0}),
        node("stats", "region_stats"),
    ])
    d["nodes"][1]["inputs"] = [{"from_node": "load", "slot": "image"}]
    d["nodes"][2]["inputs"] = [{"from_node": "load", "slot": "image"},
                               {"from_node": "seg", "slot": "mask"}]
    run_id = engine.submit(definition_from_json(d), "ct", "tester")
    run = engine.wait(run_id, 30)
    assert run.state == "succeeded"
    stats = engine.run_value(run_id, "stats", "stats")
    assert stats["voxel_count"] == 36  # threshold 0 selects every voxel
    ref = engine.run_artifacts(run_id)[("stats", "stats")]
    csv_text = archive.fetch_object(ref.bucket, ref.key).decode()
    header, row = csv_text.strip().split("\n")
    assert header == "voxel_count,mean,std,min,max"
    assert row.split(",")[0] == "36"
