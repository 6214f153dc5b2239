"""Exception hierarchy.

Two families matter to callers (and to the CLI exit codes): bad input, and
numerical degeneracy that a caller may be able to work around by jittering
positions.
"""


class GeoError(Exception):
    pass


class InputError(GeoError, ValueError):
    pass


class NumericalDegeneracy(GeoError, ArithmeticError):
    pass


class NonSymmetric(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ShapeMismatch(InputError):
    pass


class SingularCell(InputError):
    pass


class CutoffExceedsCell(InputError):
    pass


class AllAtomsRemoved(InputError):
    pass


class NonPeriodicSystem(InputError):
    pass


class BasisCellMismatch(InputError):
    pass


class AllZeroEmbeddings(InputError):
    pass


class DegenerateSpectrum(NumericalDegeneracy):
    pass


class DegenerateColumns(NumericalDegeneracy):
    pass
