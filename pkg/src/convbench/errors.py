"""Exception types shared across the engine and the benchmark harness."""


class InvalidGeometryError(ValueError):
    """Convolution geometry produces a non-positive output extent."""


class StaleBufferError(RuntimeError):
    """An indirection buffer was used with arguments it was not built for.

    Reinitialization is the caller's responsibility; the engine refuses to
    recompute silently.
    """


class SuiteParseError(ValueError):
    """A shape-suite file is malformed."""


class CorrectnessGateError(RuntimeError):
    """A benchmark variant disagreed with the direct-convolution reference."""
