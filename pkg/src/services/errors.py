"""Exception hierarchy shared by the services and the command layer."""
from typing import Optional


class WorkbenchError(Exception):
    """Base error with a machine-readable code and a human-readable detail."""

    code = "workbench-error"

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail

    def to_record(self, command: Optional[str] = None) -> dict:
        record = {"error": self.code, "detail": self.detail}
        if command is not None:
            record["command"] = command
        return record


class InvalidLatticeError(WorkbenchError, ValueError):
    code = "invalid-lattice"


class BudgetExceededError(WorkbenchError):
    code = "budget-exceeded"

    def __init__(self, detail: str, estimated_states: int):
        super().__init__(detail)
        self.estimated_states = estimated_states

    def to_record(self, command: Optional[str] = None) -> dict:
        record = super().to_record(command)
        record["estimated_states"] = self.estimated_states
        return record


class SingularRecurrenceError(WorkbenchError):
    code = "singular-recurrence"

    def __init__(self, detail: str, index: int):
        super().__init__(detail)
        self.index = index

    def to_record(self, command: Optional[str] = None) -> dict:
        record = super().to_record(command)
        record["index"] = self.index
        return record


class NonIntegralTermError(WorkbenchError):
    code = "non-integral-term"

    def __init__(self, detail: str, index: int):
        super().__init__(detail)
        self.index = index

    def to_record(self, command: Optional[str] = None) -> dict:
        record = super().to_record(command)
        record["index"] = self.index
        return record


class DuplicatePrimeError(WorkbenchError, ValueError):
    code = "duplicate-prime"


class ReconstructionError(WorkbenchError):
    code = "reconstruction-failed"


class InsufficientTermsError(WorkbenchError):
    code = "need-more-terms"

    def __init__(self, detail: str, required: Optional[int] = None):
        super().__init__(detail)
        self.required = required

    def to_record(self, command: Optional[str] = None) -> dict:
        record = super().to_record(command)
        if self.required is not None:
            record["required_terms"] = self.required
        return record


class TermFileError(WorkbenchError):
    code = "bad-term-file"


class OperatorFormatError(WorkbenchError, ValueError):
    code = "bad-operator"


class InvalidJobError(WorkbenchError):
    """Job options that validate on their own but contradict their inputs."""

    code = "invalid-job"


class InternalError(WorkbenchError):
    code = "internal-error"
