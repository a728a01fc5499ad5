"""Exception types shared across the package."""


class LatticeError(Exception):
    """Base class for all latticebrep errors."""


class ParseError(LatticeError):
    """Malformed lattice graph text. Carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GraphError(LatticeError):
    """Graph-level invariant violation (dangling reference, duplicate edge, ...)."""


class DegenerateAngleError(LatticeError):
    """Strut pair too close to parallel/antiparallel for a finite cut."""

    def __init__(self, message: str, strut_ids: tuple[int, int] | None = None):
        self.strut_ids = strut_ids
        super().__init__(message)


class CornerCaseError(LatticeError):
    """Cut lengths exceed what a strut can host (paper-style corner case)."""

    def __init__(self, message: str, strut_id: int | None = None):
        self.strut_id = strut_id
        super().__init__(message)


class TopologyError(LatticeError):
    """Nodal direction set too degenerate for a convex-hull topology."""


class DegeneratePatchError(LatticeError):
    """Patch geometry collapsed (coincident vertices / zero-length edges)."""


class NodeDesignError(LatticeError):
    """Shape optimization could not reach a barrier-free nodal patch set."""

    def __init__(self, message: str, node_id: int | None = None, diagnostics: dict | None = None):
        self.node_id = node_id
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class BRepError(LatticeError):
    """Inconsistent boundary representation input or document."""


class MeshError(LatticeError):
    """Tessellation refused or produced an inconsistent mesh."""
