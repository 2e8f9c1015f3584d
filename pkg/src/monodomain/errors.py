"""Exception hierarchy shared across the solver.

Every error raised on purpose by this package derives from
:class:`MonodomainError`, so callers can catch one type at the boundary
(the CLI maps them onto exit codes).  Parse errors carry the offending
line number; configuration errors carry the parameter path they refer to.
"""


class MonodomainError(Exception):
    """Base class for all errors raised by this package."""


# --------------------------------------------------------------------------
# geometry
# --------------------------------------------------------------------------

class NonDivisibleExtent(MonodomainError):
    """Slab extent is not an integer multiple of the requested spacing."""


class ZeroSpacing(MonodomainError):
    """Requested element size is zero, negative, or larger than the slab."""


class MixedElementTypes(MonodomainError):
    """A mesh file mixes volume element types (tetrahedra and hexahedra)."""


class UnsupportedElementType(MonodomainError):
    """A mesh file contains a volume element type this solver cannot use."""


class MalformedFile(MonodomainError):
    """A mesh or fiber file violates its format; carries the line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvertedElement(MonodomainError):
    """An element has non-positive volume (wrong node ordering)."""


class DegenerateThickness(MonodomainError):
    """The slab has zero thickness along the requested transmural axis."""


class MissingArray(MonodomainError):
    """A fiber file lacks one of the requested vector arrays."""

    def __init__(self, name):
        super().__init__(f"fiber file has no vector array named {name!r}")
        self.name = name


class NodeCountMismatch(MonodomainError):
    """Imported point cloud has a different size than the mesh."""


class NodeCoordinateMismatch(MonodomainError):
    """Imported points do not coincide with mesh nodes within tolerance."""


class ZeroVectorAtNode(MonodomainError):
    """A fiber vector has (near-)zero length and cannot be normalized."""

    def __init__(self, index):
        super().__init__(f"zero-length fiber vector at node {index}")
        self.index = index


# --------------------------------------------------------------------------
# ionic
# --------------------------------------------------------------------------

class NonFiniteState(MonodomainError):
    """An ionic update produced NaN or infinity."""


class HistoryTooShort(MonodomainError):
    """The solution history holds fewer vectors than the BDF order needs."""


# --------------------------------------------------------------------------
# timestepping
# --------------------------------------------------------------------------

class UnsupportedOrder(MonodomainError):
    """BDF order outside {1, 2, 3}."""


# --------------------------------------------------------------------------
# fem
# --------------------------------------------------------------------------

class NonOrthonormalFrame(MonodomainError):
    """Fiber triplet (f0, s0, n0) is not orthonormal within tolerance."""


class MissingConductivity(MonodomainError):
    """A conducting material ID has no conductivity entry."""

    def __init__(self, material_id):
        super().__init__(f"no conductivities given for material ID {material_id}")
        self.material_id = material_id


class KeyMismatch(MonodomainError):
    """Per-subdomain operators and nodal vectors disagree on material IDs."""


# --------------------------------------------------------------------------
# monodomain time loop
# --------------------------------------------------------------------------

class SolverDivergence(MonodomainError):
    """The linear solver failed to reach the requested tolerance."""

    def __init__(self, iterations, residual):
        super().__init__(
            f"conjugate gradient did not converge: relative residual "
            f"{residual:.3e} after {iterations} iterations"
        )
        self.iterations = iterations
        self.residual = residual


class NonFiniteSolution(MonodomainError):
    """The linear solve returned NaN or infinity."""


class VersionMismatch(MonodomainError):
    """Checkpoint file was written by an incompatible format version."""


class DofCountMismatch(MonodomainError):
    """Checkpoint DOF count differs from the configured discretization."""


class CorruptFile(MonodomainError):
    """Checkpoint payload does not match its checksum."""


# --------------------------------------------------------------------------
# parameter files and outputs
# --------------------------------------------------------------------------

class ParseError(MonodomainError):
    """Base for parameter-file syntax errors; carries the line number."""

    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnbalancedSubsection(ParseError):
    """A subsection is never closed, or an `end` has no matching opener."""


class MalformedSet(ParseError):
    """A statement is neither `subsection`, `end`, `set`, nor key = value."""


class DuplicateKey(ParseError):
    """The same key is assigned twice within one subsection."""


class DuplicateLabel(MonodomainError):
    """Volume labels passed to the template generator are not distinct."""


class IoFailure(MonodomainError):
    """An output file could not be written."""


class LengthMismatch(MonodomainError):
    """A nodal field does not match the mesh node count."""


class ConfigError(MonodomainError):
    """A parameter failed validation; carries the parameter path."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
