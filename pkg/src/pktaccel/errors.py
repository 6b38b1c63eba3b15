"""Exception types shared by the compiled and pure-Python backends."""


class OutOfHorizonError(ValueError):
    """Priority falls outside the queue's current window."""


class QueueFullError(RuntimeError):
    pass


class InvalidHandleError(KeyError):
    """Handle is stale, foreign, or was already extracted."""


class TraceFormatError(ValueError):
    def __init__(self, message, row=None, column=None, offset=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if offset is not None:
            where.append(f"offset {offset}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.row = row
        self.column = column
        self.offset = offset


class TraceOrderError(TraceFormatError):
    pass


class TruncatedCaptureError(TraceFormatError):
    pass


class InvariantViolation(AssertionError):
    """An internal conservation or ordering check failed."""
