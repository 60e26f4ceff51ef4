"""Exception types raised across the package."""


class DilatronError(Exception):
    """Base class for every error raised by dilatron."""


class NegativeEntry(DilatronError, ValueError):
    def __init__(self, i, j, value, where=""):
        self.i, self.j, self.value = i, j, value
        prefix = f"{where}: " if where else ""
        super().__init__(f"{prefix}negative entry {value!r} at row {i}, column {j}")


class RowSumViolation(DilatronError, ValueError):
    def __init__(self, i, total, where=""):
        self.i, self.total = i, total
        prefix = f"{where}: " if where else ""
        super().__init__(f"{prefix}row {i} sums to {total!r}, expected 1")


class DimensionMismatch(DilatronError, ValueError):
    pass


class HorizonExceeded(DilatronError, ValueError):
    pass


class HorizonExceedsWindow(DilatronError, ValueError):
    pass


class WindowTooShort(DilatronError, ValueError):
    pass


class SizeGuardExceeded(DilatronError, ValueError):
    pass


class SupportExplosion(DilatronError, ValueError):
    pass


class NonConvergence(DilatronError, RuntimeError):
    """Greedy peeling left a residual; indicates a bug, not bad input."""


class InputFormatError(DilatronError, ValueError):
    pass
