"""Exception types raised across photonlab."""


class PhotonlabError(Exception):
    """Base class for all library errors."""


class ConfigError(PhotonlabError, ValueError):
    """Invalid user input: bad parameters, schema violations, missing keys."""


class UnsupportedRepresentation(PhotonlabError, TypeError):
    """The source has no representation of the requested kind."""


class PhysicalityError(PhotonlabError):
    """The detector array collects more than unit total efficiency.

    ``eigenvalue`` is the largest eigenvalue of the summed detector matrix.
    """

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class ConvergenceError(PhotonlabError):
    """A quadrature failed to reach its tolerance within the allowed budget."""

    def __init__(self, message, achieved=None, order=None):
        super().__init__(message)
        self.achieved = achieved
        self.order = order


class ExpensiveComputation(PhotonlabError):
    """The requested grid exceeds the desk-scale budget without opt-in."""


class ShapeMismatch(PhotonlabError, ValueError):
    """Two distributions live on incompatible outcome grids."""


class ZeroProbabilityCondition(PhotonlabError, ValueError):
    """Conditioning on an outcome whose probability is (numerically) zero."""


class MultimodalSlice(PhotonlabError, ValueError):
    """A unimodal slice was required but several modes were found."""


class NoPhaseSolution(PhotonlabError, ValueError):
    """The count lies outside the range spanned by the mean-field curve."""
