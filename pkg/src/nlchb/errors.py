"""Exception hierarchy shared by every module.

Each exception carries the CLI exit code it maps to, so the command line
layer never needs to know which subsystem raised.
"""


class NLCBError(Exception):
    exit_code = 4


class ConfigError(NLCBError):
    exit_code = 2


class ParseError(ConfigError):
    def __init__(self, line, key, message=""):
        self.line = line
        self.key = key
        where = f"line {line}" if line is not None else "unknown line"
        super().__init__(f"{where}: key {key!r}: {message}".rstrip(": "))


class HypothesisViolated(NLCBError):
    exit_code = 3

    def __init__(self, hypothesis, message=""):
        self.hypothesis = hypothesis
        super().__init__(f"({hypothesis}) violated: {message}")


class GridMismatch(NLCBError, ValueError):
    pass


class NonZeroMean(NLCBError, ValueError):
    pass


class NegativeA(NLCBError):
    pass


class NumericalFailure(NLCBError):
    """Base for failures of the discretization or of a solver."""


class RangeViolation(NumericalFailure):
    pass


class NewtonDivergence(NumericalFailure):
    pass


class LinearSolveFailure(NumericalFailure):
    pass


class NonConvergence(NumericalFailure):
    def __init__(self, iterations, residual, what="Krylov solve"):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"{what} did not converge: {iterations} iterations, residual {residual:.3e}")


class PermeabilityTooSmall(HypothesisViolated):
    def __init__(self, message=""):
        super().__init__("H8", message)


class SlopeUndefined(NumericalFailure):
    pass


class IoFailure(NLCBError):
    exit_code = 4


class AcceptanceFailure(NLCBError):
    exit_code = 5
