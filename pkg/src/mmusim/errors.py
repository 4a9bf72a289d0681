"""Exception hierarchy shared across the simulator."""


class MmuSimError(Exception):
    """Base class for all simulator errors."""


class PageFault(MmuSimError):
    def __init__(self, va: int, level: int):
        super().__init__(f"page fault at va {va:#x} (walk level {level})")
        self.va = va
        self.level = level


class ConflictingMapping(MmuSimError):
    pass


class InvalidGeometry(MmuSimError, ValueError):
    pass


class ParseError(MmuSimError):
    def __init__(self, message: str, lineno: int | None = None):
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(where + message)
        self.lineno = lineno


class ConfigError(MmuSimError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class MismatchedRuns(MmuSimError):
    pass


class InvariantViolation(MmuSimError):
    pass
