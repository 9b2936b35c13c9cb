"""Exception hierarchy shared by all flatcount modules."""


class FlatcountError(Exception):
    """Base class for every error raised by the package."""


class ParseError(FlatcountError):
    """A surface file could not be parsed."""


class GeometryError(FlatcountError):
    """Edge vectors or gluings violate a translation-surface invariant."""


class ToleranceError(FlatcountError):
    """A cone angle is not a multiple of 2*pi within tolerance."""


class InconsistencyError(FlatcountError):
    """Gauss-Bonnet or Euler characteristic checks disagree."""


class CatalogError(FlatcountError):
    pass


class ModeError(FlatcountError):
    """Operation requires an exact-integer surface."""


class BudgetError(FlatcountError):
    """A configured iteration, crossing or enumeration budget was exceeded."""


class CertificateError(FlatcountError):
    """A radius exceeds the certified completeness radius of a holonomy set."""


class MatrixError(FlatcountError):
    pass
