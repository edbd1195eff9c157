"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: structural/parse problems to 2,
domain errors to 3 and exhausted evaluation budgets to 4.
"""


class NcdetError(Exception):
    """Base class for all errors raised by ncdet."""


class StructuralError(NcdetError, ValueError):
    """Shapes, tables or file contents that do not describe a valid object."""


class DomainError(NcdetError, ValueError):
    """A well-formed input outside the domain of the requested operation."""


class BudgetError(NcdetError, RuntimeError):
    """An iterative computation ran out of evaluations before converging.

    ``last_values`` holds the last two refinement values (oldest first).
    """

    def __init__(self, message, last_values=()):
        super().__init__(message)
        self.last_values = tuple(last_values)
