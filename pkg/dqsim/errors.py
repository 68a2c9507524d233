"""Exception hierarchy. The category decides the CLI exit code."""


class DqsimError(RuntimeError):
    exit_code = 1


class ConfigError(DqsimError, ValueError):
    """Invalid input: malformed text, inconsistent shapes, bad parameters."""

    exit_code = 2


class ParseError(ConfigError):
    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"Line {line_number}: {message}")


class ShapeError(ConfigError):
    pass


class PartitionError(ConfigError):
    pass


class DomainError(ConfigError):
    pass


class TopologyError(ConfigError):
    pass


class CapabilityError(DqsimError):
    """A qubit, dense-matrix or enumeration cap would be exceeded."""

    exit_code = 3


class NumericalError(DqsimError):
    exit_code = 4


class PostSelectionError(NumericalError):
    pass


class PhaseSynthesisError(NumericalError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


class ModeError(NumericalError):
    pass


class MisuseError(NumericalError):
    pass
