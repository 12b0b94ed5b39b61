"""DAG workflow engine: definitions, planning, run lifecycle, operators."""
from .definition import (
    ExecutionPlan,
    InputBinding,
    WorkflowDefinition,
    WorkflowNode,
    definition_from_json,
    definition_to_json,
    plan_execution,
    validate_definition,
)
from .engine import ARTIFACT_BUCKET, WorkflowEngine
from .errors import (
    CycleError,
    DanglingInput,
    DimensionMismatch,
    DuplicateNodeId,
    EmptyCohortData,
    InvalidDefinition,
    InvalidTransition,
    OperatorFailed,
    ShapeMismatch,
    UnknownOperator,
    UnknownRun,
    WorkflowError,
)
from .operators import (
    OperatorContext,
    OperatorRegistry,
    OperatorSpec,
    builtin_registry,
    design_matrix,
    op_local_train,
    op_region_stats,
    op_threshold_segment,
    table_from_csv,
    table_to_csv,
)
from .run import (
    CancelRequested,
    NodeFinished,
    NodeStarted,
    NodeStatus,
    RetryTimer,
    RUN_TERMINAL,
    WorkflowRun,
    advance_run,
    new_run,
)

__all__ = [
    "ARTIFACT_BUCKET",
    "CancelRequested",
    "CycleError",
    "DanglingInput",
    "DimensionMismatch",
    "DuplicateNodeId",
    "EmptyCohortData",
    "ExecutionPlan",
    "InputBinding",
    "InvalidDefinition",
    "InvalidTransition",
    "NodeFinished",
    "NodeStarted",
    "NodeStatus",
    "RUN_TERMINAL",
    "OperatorContext",
    "OperatorFailed",
    "OperatorRegistry",
    "OperatorSpec",
    "RetryTimer",
    "ShapeMismatch",
    "UnknownOperator",
    "UnknownRun",
    "WorkflowDefinition",
    "WorkflowEngine",
    "WorkflowNode",
    "WorkflowRun",
    "advance_run",
    "builtin_registry",
    "definition_from_json",
    "definition_to_json",
    "design_matrix",
    "new_run",
    "op_local_train",
    "op_region_stats",
    "op_threshold_segment",
    "plan_execution",
    "table_from_csv",
    "table_to_csv",
    "validate_definition",
    "WorkflowError",
]
