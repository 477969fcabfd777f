"""Exception hierarchy shared by all modules."""


class RodHomogError(Exception):
    """Base class; ``code`` is the machine-readable tag used by the CLI."""

    code = "error"
    exit_status = 1


class InputError(RodHomogError):
    code = "input-error"
    exit_status = 2


class InvalidParameterError(InputError, ValueError):
    code = "invalid-parameter"


class MeshFormatError(InputError):
    code = "mesh-format"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MeshInvalidError(InputError):
    code = "mesh-invalid"


class MeshNotFoundError(InputError, FileNotFoundError):
    code = "mesh-not-found"


class MaterialConfigError(InputError):
    code = "material-config"


class MaterialNotFoundError(MaterialConfigError, FileNotFoundError):
    code = "material-not-found"


class UnsupportedMaterialError(InputError):
    code = "unsupported-material"


class ConsistencyError(RodHomogError, ValueError):
    """Right-hand side not orthogonal to the declared kernel."""

    code = "inconsistent-rhs"


class ConvergenceError(RodHomogError):
    """Iterative method hit its cap; ``best`` holds the last iterate."""

    code = "no-convergence"

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ResolutionError(RodHomogError, ValueError):
    """Frame increment too large for an unambiguous logarithm."""

    code = "resolution"


class SizeError(RodHomogError):
    code = "size-limit"
