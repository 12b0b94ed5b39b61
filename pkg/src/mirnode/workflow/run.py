"""Run lifecycle as a pure state machine.

advance_run(run, event) -> run is side-effect free; the scheduler owns a
run's state and applies events sequentially. Node states: pending, ready,
running, succeeded, failed, skipped. Run states: pending, running,
succeeded, failed, canceled.

A node that fails with attempts <= retry_limit stays `failed` until a
retry-timer event returns it to `ready`; the run-state derivation treats
such a node as still active, so the run only becomes `failed` once a
failure is past retries and nothing else can make progress. `canceled` is
terminal and absorbing: once cancellation is requested the run can no
longer succeed, even if every node ends `succeeded`.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .definition import WorkflowDefinition
from .errors import InvalidTransition

PENDING = "pending"
READY = "ready"
RUNNING = "running"
SUCCEEDED = "succeeded"
FAILED = "failed"
SKIPPED = "skipped"

RUN_TERMINAL = ("succeeded", "failed", "canceled")


@dataclass(frozen=True)
class NodeStatus:
    state: str = PENDING
    attempts: int = 0
    started_at: str | None = None
    ended_at: str | None = None
    error: str | None = None


# -- events -------------------------------------------------------------------


@dataclass(frozen=True)
class NodeStarted:
    node_id: str
    at: str = ""


@dataclass(frozen=True)
class NodeFinished:
    node_id: str
    outcome: str  # "succeeded" | "failed"
    at: str = ""
    error: str | None = None


@dataclass(frozen=True)
class CancelRequested:
    at: str = ""


@dataclass(frozen=True)
class RetryTimer:
    node_id: str
    at: str = ""


Event = NodeStarted | NodeFinished | CancelRequested | RetryTimer


@dataclass(frozen=True)
class WorkflowRun:
    run_id: str
    definition: WorkflowDefinition  # frozen snapshot
    cohort: str
    initiated_by: str
    state: str
    node_states: dict[str, NodeStatus]
    cancel_requested: bool = False
    created_at: str = ""

    @property
    def retry_limit(self) -> int:
        return self.definition.retry_limit

    def node(self, node_id: str) -> NodeStatus:
        try:
            return self.node_states[node_id]
        except KeyError:
            raise InvalidTransition(f"unknown node {node_id!r}") from None


def new_run(run_id: str, definition: WorkflowDefinition, cohort: str,
            initiated_by: str, created_at: str = "") -> WorkflowRun:
    """Nodes without inputs start ready; the rest wait on predecessors."""
    node_states = {
        node.id: NodeStatus(state=READY if not node.inputs else PENDING)
        for node in definition.nodes
    }
    return WorkflowRun(run_id=run_id, definition=definition, cohort=cohort,
                       initiated_by=initiated_by, state=PENDING,
                       node_states=dict(node_states), created_at=created_at)


def _successors(defn: WorkflowDefinition) -> dict[str, set[str]]:
    out: dict[str, set[str]] = {node.id: set() for node in defn.nodes}
    for node in defn.nodes:
        for binding in node.inputs:
            out[binding.from_node].add(node.id)
    return out


def _descendants(defn: WorkflowDefinition, root: str) -> set[str]:
    succ = _successors(defn)
    seen: set[str] = set()
    frontier = [root]
    while frontier:
        for nxt in succ[frontier.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen


def advance_run(run: WorkflowRun, event: Event) -> WorkflowRun:
    """Pure transition; raises InvalidTransition for impossible events."""
    if run.state in RUN_TERMINAL:
        raise InvalidTransition(f"run is {run.state}; no further events")
    states = dict(run.node_states)
    cancel = run.cancel_requested

    if isinstance(event, NodeStarted):
        st = run.node(event.node_id)
        if st.state != READY:
            raise InvalidTransition(
                f"{event.node_id}: started while {st.state}")
        states[event.node_id] = replace(
            st, state=RUNNING, attempts=st.attempts + 1, started_at=event.at,
            ended_at=None, error=None)

    elif isinstance(event, NodeFinished):
        st = run.node(event.node_id)
        if st.state != RUNNING:
            raise InvalidTransition(
                f"{event.node_id}: finished while {st.state}")
        if event.outcome == "succeeded":
            states[event.node_id] = replace(st, state=SUCCEEDED, ended_at=event.at)
            if not cancel:
                _promote_ready(run, states)
        elif event.outcome == "failed":
            states[event.node_id] = replace(
                st, state=FAILED, ended_at=event.at, error=event.error)
            if st.attempts > run.retry_limit or cancel:
                # past retries (or canceled): the whole subtree is dead
                for node_id in _descendants(run.definition, event.node_id):
                    if states[node_id].state in (PENDING, READY):
                        states[node_id] = replace(
                            states[node_id], state=SKIPPED, ended_at=event.at)
        else:
            raise InvalidTransition(f"unknown outcome {event.outcome!r}")

    elif isinstance(event, RetryTimer):
        st = run.node(event.node_id)
        if cancel:
            raise InvalidTransition(
                f"{event.node_id}: retry after cancellation")
        if st.state != FAILED or st.attempts > run.retry_limit:
            raise InvalidTransition(
                f"{event.node_id}: retry while {st.state}"
                f" after {st.attempts} attempts")
        states[event.node_id] = replace(st, state=READY)

    elif isinstance(event, CancelRequested):
        cancel = True
        for node_id, st in states.items():
            if st.state in (PENDING, READY):
                states[node_id] = replace(st, state=SKIPPED, ended_at=event.at)
    else:
        raise InvalidTransition(f"unknown event {event!r}")

    return replace(run, node_states=states, cancel_requested=cancel,
                   state=_derive_run_state(run, states, cancel))


def _promote_ready(run: WorkflowRun, states: dict[str, NodeStatus]) -> None:
    for node in run.definition.nodes:
        st = states[node.id]
        if st.state != PENDING:
            continue
        if all(states[b.from_node].state == SUCCEEDED for b in node.inputs):
            states[node.id] = replace(st, state=READY)


def _derive_run_state(run: WorkflowRun, states: dict[str, NodeStatus],
                      cancel: bool) -> str:
    values = [st.state for st in states.values()]
    if cancel:
        return RUNNING if RUNNING in values else "canceled"
    if all(v == SUCCEEDED for v in values):
        return "succeeded"
    retriable = any(
        st.state == FAILED and st.attempts <= run.retry_limit
        for st in states.values())
    if RUNNING in values or READY in values or PENDING in values or retriable:
        started = any(st.attempts > 0 for st in states.values())
        return RUNNING if started else PENDING
    # everything terminal, at least one exhausted failure
    return "failed"
