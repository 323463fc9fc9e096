"""Exception types shared across the package."""


class SpecError(ValueError):
    """A carpet specification violates its structural invariants."""


class BudgetExceededError(RuntimeError):
    """A cell graph would exceed the configured cell budget."""

    def __init__(self, cells, budget, level=None):
        self.cells = cells
        self.budget = budget
        self.level = level
        where = f" at level {level}" if level is not None else ""
        super().__init__(f"(#S)^n = {cells} cells{where} exceeds budget {budget}")


class ConvergenceError(RuntimeError):
    """The iterative solver hit its iteration cap."""

    def __init__(self, message, residual=None, iterations=None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)


class IsolatedRegionError(RuntimeError):
    """Free cells exist that touch neither boundary set."""

    def __init__(self, message, cells=None):
        self.cells = cells
        super().__init__(message)


class SymmetryError(ValueError):
    """A cube symmetry does not map the cell set onto itself."""

    def __init__(self, message, witness=None):
        self.witness = witness
        super().__init__(message)


class GluingError(ValueError):
    """The level-n solution cannot be glued self-similarly."""


class WalkGuardError(RuntimeError):
    """A simulated walk exceeded its step guard."""
