"""Exception types raised across the toolkit."""


class TerrainSegError(Exception):
    """Base class for all processing errors."""


class ParseError(TerrainSegError):
    pass


class MissingProperty(TerrainSegError):
    pass


class EmptyCloud(TerrainSegError):
    pass


class InsufficientNeighbors(TerrainSegError):
    pass


class DegenerateNeighborhood(TerrainSegError):
    pass


class NonUnitVector(TerrainSegError):
    pass


class EmptyRoofSet(TerrainSegError):
    pass


class LengthMismatch(TerrainSegError):
    pass


class SpecError(TerrainSegError):
    pass


class CrsMismatch(TerrainSegError):
    pass


class MissingGeoreference(TerrainSegError):
    pass


class DegenerateCorrespondences(TerrainSegError):
    pass


class NoCorrespondences(TerrainSegError):
    pass


class EmptyBorder(TerrainSegError):
    pass


class ConfigError(TerrainSegError):
    pass
