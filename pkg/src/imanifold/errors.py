"""Exception hierarchy shared by all modules."""


class ManifoldError(ValueError):
    """Base class for validation errors raised by this package."""


class InvalidGridError(ManifoldError):
    pass


class UnsupportedRegistrationError(ManifoldError):
    pass


class GridMismatchError(ManifoldError):
    pass


class InvalidMeshError(ManifoldError):
    pass


class ObjParseError(ManifoldError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class WrongGridKindError(ManifoldError):
    pass


class DimensionError(ManifoldError):
    pass


class ShapeMismatchError(ManifoldError):
    pass


class UndefinedStressError(ManifoldError):
    pass


class ConnectivityError(ManifoldError):
    def __init__(self, n_components):
        super().__init__(f"neighbor graph is disconnected ({n_components} components)")
        self.n_components = n_components


class DegenerateManifoldError(ManifoldError):
    pass


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
