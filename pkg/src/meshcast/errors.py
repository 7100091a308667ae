"""Exception types shared across the package."""


class MeshcastError(Exception):
    """Base class for all package errors."""


class ShapeError(MeshcastError):
    """Operands have incompatible shapes."""


class NumericsError(MeshcastError):
    """A computation produced NaN/Inf or otherwise left the finite domain."""


class GraphBuildError(MeshcastError):
    """A graph construction rule could not be satisfied."""


class ConfigError(MeshcastError):
    """Invalid run configuration or malformed input file."""
