"""Workflow engine error taxonomy."""


class WorkflowError(Exception):
    """Base for all workflow failures."""


class InvalidDefinition(WorkflowError):
    """Document shape, field types, id syntax, or version string is wrong."""


class DuplicateNodeId(WorkflowError):
    pass


class CycleError(WorkflowError):
    def __init__(self, cycle: list[str]):
        self.cycle = list(cycle)
        super().__init__(" -> ".join(self.cycle))


class UnknownOperator(WorkflowError):
    pass


class DanglingInput(WorkflowError):
    """Input references a missing node or slot, or a slot is left unbound."""


class InvalidTransition(WorkflowError):
    """Event impossible in the run's current state; signals a scheduler bug."""


class UnknownRun(WorkflowError):
    pass


class DimensionMismatch(WorkflowError):
    pass


class ShapeMismatch(WorkflowError):
    pass


class EmptyCohortData(WorkflowError):
    pass


class OperatorFailed(WorkflowError):
    """A node body raised; carries the node id and underlying message."""
