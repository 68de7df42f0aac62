"""Exception types shared across the library."""


class MeshError(Exception):
    """Base class for all errors raised by meshforge."""


class MeshFormatError(MeshError):
    """A mesh file could not be parsed.

    Carries the file path and, when known, the 1-based line number (text
    formats) or byte offset (binary formats) of the offending content.
    """

    def __init__(self, message, path=None, line=None, offset=None):
        self.path = path
        self.line = line
        self.offset = offset
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte {offset}")
        prefix = ": ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class StructuralError(MeshError):
    """Mesh arrays are inconsistent (bad index, bad shape, degenerate facet)."""


class InfeasibleTargetError(MeshError):
    """A decimation target cannot be reached on the given mesh.

    `achievable_vertices` is the smallest vertex count a single run could
    have produced.
    """

    def __init__(self, message, achievable_vertices=None):
        self.achievable_vertices = achievable_vertices
        super().__init__(message)


class CheckpointError(MeshError):
    """A kernel checkpoint file is malformed or has an unsupported version."""
