"""Exception types shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 1, numerical aborts (blow-up, unreachable quadrature tolerance)
with 2, and I/O failures with 3.
"""


class ConfigError(ValueError):
    """A parameter combination that the solver refuses to run."""


class QuadratureError(RuntimeError):
    """Certified quadrature failed to reach the requested tolerance.

    Carries the best tolerance actually achieved so callers can report
    how far the refinement got before the point budget ran out.
    """

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


class BlowUpError(ArithmeticError):
    """Non-finite nodal values appeared during time stepping."""

    def __init__(self, message: str, step_index: int, time: float):
        super().__init__(message)
        self.step_index = step_index
        self.time = time
