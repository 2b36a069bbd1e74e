"""Exception types shared across graphmill modules."""


class GraphMillError(Exception):
    """Base class for graphmill failures."""


class EdgeListParseError(GraphMillError):
    """Malformed edge-list input; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ConfigError(GraphMillError):
    """Invalid configuration or arguments; maps to CLI usage errors."""


class CollectiveTimeout(GraphMillError):
    """A worker failed to contribute to a collective in time."""

    def __init__(self, worker: int, what: str):
        super().__init__(f"worker {worker} missing during {what}")
        self.worker = worker


class TrainingDiverged(GraphMillError):
    """Non-finite loss or gradients during training."""


class WorkerFault(GraphMillError):
    """A worker thread raised; carries the originating worker id."""

    def __init__(self, worker: int, cause: BaseException):
        super().__init__(f"worker {worker} failed: {cause!r}")
        self.worker = worker
        self.cause = cause


class VerificationFailed(GraphMillError):
    """An oracle-equivalence check found a divergence."""
