"""Exception hierarchy shared by all modules."""


class LipextError(Exception):
    """Base class for every error raised by the package."""


class InputError(LipextError):
    """Malformed input (wrong shapes, bad parameters, unparseable files)."""


# -- metric axioms ----------------------------------------------------------

class MetricError(InputError):
    pass


class NotSquare(MetricError):
    pass


class AsymmetricMatrix(MetricError):
    def __init__(self, i, j):
        super().__init__(f"dist[{i}][{j}] != dist[{j}][{i}]")
        self.pair = (i, j)


class NonzeroDiagonal(MetricError):
    def __init__(self, i):
        super().__init__(f"dist[{i}][{i}] != 0")
        self.index = i


class NegativeDistance(MetricError):
    def __init__(self, i, j):
        super().__init__(f"dist[{i}][{j}] < 0")
        self.pair = (i, j)


class DuplicatePoints(MetricError):
    def __init__(self, i, j):
        super().__init__(f"points {i} and {j} are at distance 0")
        self.pair = (i, j)


class TriangleViolation(MetricError):
    """``dist[i][j] > dist[i][k] + dist[k][j]``."""

    def __init__(self, i, j, k):
        super().__init__(f"triangle inequality fails: d({i},{j}) > d({i},{k}) + d({k},{j})")
        self.triple = (i, j, k)


class EmptySubset(InputError):
    pass


class NonScalarTarget(InputError):
    pass


class UnsupportedTarget(InputError):
    pass


class MixedTargetSpaces(InputError):
    pass


class PointInDomain(InputError):
    pass


# -- search budgets / sizes -------------------------------------------------

class SearchBudgetExceeded(LipextError):
    pass


class EnumerationTooLarge(LipextError):
    pass


class TooLarge(LipextError):
    pass


class NotUniform(InputError):
    pass


class NotEnumerated(InputError):
    pass


class UnsupportedDimension(InputError):
    pass


class ZeroSamples(InputError):
    pass


class DomainTooSmall(InputError):
    pass


# -- construction failures --------------------------------------------------

class BaseNotNagata(LipextError):
    pass


class InternalCoverGap(LipextError):
    pass


class OracleNotNagata(LipextError):
    pass


class OracleNotColored(LipextError):
    pass


class EmptyComplement(InputError):
    pass


class RTooSmall(InputError):
    pass


class UncoveredPoint(LipextError):
    pass


class CoverNotVerified(LipextError):
    pass


class DisjointSimplices(InputError):
    pass


class DifferentComplexes(InputError):
    pass


class MissingVertexValue(InputError):
    pass


class Disconnected(InputError):
    pass


class NotPure(InputError):
    pass


class PropertyViolation(LipextError):
    """A guaranteed property failed on a concrete instance."""
