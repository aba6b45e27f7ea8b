"""Exception types shared across the toolkit."""


class MeshFormatError(ValueError):
    """Malformed input record; carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MeshValidationError(ValueError):
    """Mesh content violates a structural invariant (bad index, degenerate face)."""


class TextureResolutionError(KeyError):
    """A referenced texture could not be resolved; carries the texture name."""

    def __init__(self, name):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"texture not found: {self.name}"


class DegenerateGeometryError(ValueError):
    """Geometry too degenerate for the requested computation (e.g. zero total area)."""


class EmptyInputError(ValueError):
    """An operation requiring non-empty input received an empty one."""


class ProtocolError(RuntimeError):
    """A sorting session or study service was driven out of protocol order."""
