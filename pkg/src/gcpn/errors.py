"""Exception hierarchy shared across the package."""


class GcpnError(Exception):
    """Base class for all package errors."""


class DimensionError(GcpnError, ValueError):
    pass


class RankError(GcpnError, ValueError):
    pass


class EmptySupportError(GcpnError, ValueError):
    pass


class EmptyBatchError(GcpnError, ValueError):
    pass


class TrainingDivergenceError(GcpnError, FloatingPointError):
    def __init__(self, message: str, parameter: str | None = None, checkpoint: str | None = None):
        super().__init__(message)
        self.parameter = parameter
        self.checkpoint = checkpoint


class UnknownAtomError(GcpnError, ValueError):
    pass


class UnsupportedSizeError(GcpnError, ValueError):
    pass


class PreconditionError(GcpnError, ValueError):
    pass


class ContractError(GcpnError, RuntimeError):
    pass


class ConfigError(GcpnError, ValueError):
    pass


class EmptyCorpusError(GcpnError, ValueError):
    pass


class UndefinedMetricError(GcpnError, ValueError):
    pass


class IntegrityError(GcpnError, ValueError):
    pass
