"""Exception types shared across the package."""


class ParseError(Exception):
    """A config, task, or robot description file failed to parse or validate."""


class SingularityError(RuntimeError):
    """A manifold trace was started at a rank-deficient configuration."""

    def __init__(self, message: str, config=None):
        super().__init__(message)
        self.config = config
