"""Workflow definitions: JSON codec, validation, and execution planning."""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .errors import (
    CycleError,
    DanglingInput,
    DuplicateNodeId,
    InvalidDefinition,
    UnknownOperator,
)

NODE_ID_RE = re.compile(r"^[a-z0-9_-]{1,64}$")
SEMVER_RE = re.compile(r"^\d+\.\d+\.\d+$")

_SCALAR = (str, int, float, bool)


@dataclass(frozen=True)
class InputBinding:
    from_node: str
    slot: str


@dataclass(frozen=True)
class WorkflowNode:
    id: str
    operator: str
    params: dict = field(default_factory=dict)
    inputs: tuple[InputBinding, ...] = ()


@dataclass(frozen=True)
class WorkflowDefinition:
    name: str
    version: str
    nodes: tuple[WorkflowNode, ...]
    retry_limit: int = 1


@dataclass(frozen=True)
class ExecutionPlan:
    stages: tuple[tuple[str, ...], ...]

    def linear_order(self) -> list[str]:
        return [node_id for stage in self.stages for node_id in stage]


# -- JSON codec -------------------------------------------------------------


def definition_from_json(doc: dict) -> WorkflowDefinition:
    if not isinstance(doc, dict):
        raise InvalidDefinition("definition must be a JSON object")
    name = doc.get("name")
    version = doc.get("version")
    if not isinstance(name, str) or not name:
        raise InvalidDefinition("'name' must be a non-empty string")
    if not isinstance(version, str) or not SEMVER_RE.match(version):
        raise InvalidDefinition(f"'version' must be MAJOR.MINOR.PATCH, got {version!r}")
    retry_limit = doc.get("retry_limit", 1)
    if not isinstance(retry_limit, int) or isinstance(retry_limit, bool) \
            or retry_limit < 0:
        raise InvalidDefinition("'retry_limit' must be a non-negative integer")
    raw_nodes = doc.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        raise InvalidDefinition("'nodes' must be a non-empty list")
    nodes = []
    for item in raw_nodes:
        if not isinstance(item, dict):
            raise InvalidDefinition("each node must be an object")
        node_id = item.get("id")
        operator = item.get("operator")
        if not isinstance(node_id, str) or not NODE_ID_RE.match(node_id):
            raise InvalidDefinition(
                f"node id {node_id!r} must match [a-z0-9_-]{{1,64}}")
        if not isinstance(operator, str) or not operator:
            raise InvalidDefinition(f"node {node_id}: 'operator' required")
        params = item.get("params", {})
        if not isinstance(params, dict):
            raise InvalidDefinition(f"node {node_id}: 'params' must be an object")
        for key, value in params.items():
            if not isinstance(key, str) or not isinstance(value, _SCALAR):
                raise InvalidDefinition(
                    f"node {node_id}: param {key!r} must map string to scalar")
        inputs = []
        raw_inputs = item.get("inputs", [])
        if not isinstance(raw_inputs, list):
            raise InvalidDefinition(f"node {node_id}: 'inputs' must be a list")
        for binding in raw_inputs:
            if (not isinstance(binding, dict)
                    or not isinstance(binding.get("from_node"), str)
                    or not isinstance(binding.get("slot"), str)):
                raise InvalidDefinition(
                    f"node {node_id}: inputs need 'from_node' and 'slot' strings")
            inputs.append(InputBinding(binding["from_node"], binding["slot"]))
        nodes.append(WorkflowNode(id=node_id, operator=operator,
                                  params=dict(params), inputs=tuple(inputs)))
    return WorkflowDefinition(name=name, version=version, nodes=tuple(nodes),
                              retry_limit=retry_limit)


def definition_to_json(defn: WorkflowDefinition) -> dict:
    return {
        "name": defn.name,
        "version": defn.version,
        "retry_limit": defn.retry_limit,
        "nodes": [
            {
                "id": n.id,
                "operator": n.operator,
                "params": dict(n.params),
                "inputs": [{"from_node": b.from_node, "slot": b.slot}
                           for b in n.inputs],
            }
            for n in defn.nodes
        ],
    }


# -- validation -------------------------------------------------------------


def validate_definition(defn: WorkflowDefinition, registry) -> WorkflowDefinition:
    """All invariants checked; returns the canonical form (nodes sorted by id)."""
    seen: set[str] = set()
    for node in defn.nodes:
        if not NODE_ID_RE.match(node.id):
            raise InvalidDefinition(
                f"node id {node.id!r} must match [a-z0-9_-]{{1,64}}")
        if node.id in seen:
            raise DuplicateNodeId(node.id)
        seen.add(node.id)
    by_id = {node.id: node for node in defn.nodes}
    for node in defn.nodes:
        spec = registry.find(node.operator)
        if spec is None:
            raise UnknownOperator(f"node {node.id}: operator {node.operator!r}")
        for binding in node.inputs:
            upstream = by_id.get(binding.from_node)
            if upstream is None:
                raise DanglingInput(
                    f"node {node.id}: from_node {binding.from_node!r} missing")
            up_spec = registry.find(upstream.operator)
            if up_spec is None:
                raise UnknownOperator(
                    f"node {binding.from_node}: operator {upstream.operator!r}")
            if binding.slot not in dict(up_spec.output_slots):
                raise DanglingInput(
                    f"node {node.id}: operator {upstream.operator!r}"
                    f" has no output slot {binding.slot!r}")
        # positional binding: inputs fill the operator's input slots in
        # declaration order; unbound trailing slots must be auto-fed kinds
        if len(node.inputs) > len(spec.input_slots):
            raise DanglingInput(
                f"node {node.id}: {len(node.inputs)} inputs but operator"
                f" {spec.name!r} declares {len(spec.input_slots)} input slots")
        for slot_name, kind in spec.input_slots[len(node.inputs):]:
            if kind not in ("cohort", "params"):
                raise DanglingInput(
                    f"node {node.id}: input slot {slot_name!r} ({kind}) unbound")
    _check_acyclic(defn)
    ordered = tuple(sorted(defn.nodes, key=lambda n: n.id))
    return replace(defn, nodes=ordered)


def _check_acyclic(defn: WorkflowDefinition) -> None:
    adjacency = {node.id: [b.from_node for b in node.inputs] for node in defn.nodes}
    WHITE, GREY, BLACK = 0, 1, 2
    color = {node_id: WHITE for node_id in adjacency}
    stack_path: list[str] = []

    def visit(node_id: str) -> None:
        color[node_id] = GREY
        stack_path.append(node_id)
        for dep in adjacency[node_id]:
            if color[dep] == GREY:
                cycle = stack_path[stack_path.index(dep):]
                raise CycleError(sorted(cycle))
            if color[dep] == WHITE:
                visit(dep)
        stack_path.pop()
        color[node_id] = BLACK

    for node_id in sorted(adjacency):
        if color[node_id] == WHITE:
            visit(node_id)


# -- planning ---------------------------------------------------------------


def plan_execution(defn: WorkflowDefinition) -> ExecutionPlan:
    """Kahn layering: stage k holds the nodes whose predecessors all lie in
    stages < k; ids sorted lexicographically within each stage."""
    preds = {node.id: {b.from_node for b in node.inputs} for node in defn.nodes}
    placed: set[str] = set()
    stages: list[tuple[str, ...]] = []
    remaining = set(preds)
    while remaining:
        layer = sorted(n for n in remaining if preds[n] <= placed)
        if not layer:  # pragma: no cover - validation prevents cycles
            raise CycleError(sorted(remaining))
        stages.append(tuple(layer))
        placed.update(layer)
        remaining.difference_update(layer)
    return ExecutionPlan(stages=tuple(stages))
