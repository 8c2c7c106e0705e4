"""Exception hierarchy shared by all solver and I/O modules."""


class AlphaWeightsError(Exception):
    """Base class for all errors raised by this package."""


# --- input validation ------------------------------------------------------

class DimensionMismatch(AlphaWeightsError):
    """Vector/matrix sizes disagree."""


class NotPositiveDefinite(AlphaWeightsError):
    """A covariance input failed the symmetric factorization check."""


class NotCorrelation(AlphaWeightsError):
    """Matrix is not a valid correlation matrix (unit diagonal, symmetric, PSD)."""


class DegenerateWeights(AlphaWeightsError):
    """Weight vector is identically zero and cannot be normalized."""


class DegenerateStream(AlphaWeightsError):
    """A time-series column has zero variance."""


class DegenerateInput(AlphaWeightsError):
    """Inputs violate the genericity assumptions a closed form relies on."""


class NegativeAlpha(AlphaWeightsError):
    """Diagonal-case routine requires non-negative expected returns."""


class EmptyInput(AlphaWeightsError):
    """Operation requires at least one stream."""


class MissingTurnovers(AlphaWeightsError):
    """Cost model requires per-stream turnovers that were not supplied."""


class SharpeUndefined(AlphaWeightsError):
    """Risk is numerically zero while P&L is not."""


# --- target feasibility ----------------------------------------------------

class InvalidTarget(AlphaWeightsError):
    """Target value is outside its admissible sign/range."""


class InfeasibleSharpe(AlphaWeightsError):
    """Requested Sharpe ratio exceeds the attainable maximum."""


class InfeasibleTarget(AlphaWeightsError):
    """Requested P&L or risk bound cannot be met by any admissible portfolio."""


class BelowSharpeMaxPnl(AlphaWeightsError):
    """P&L target lies below the maximum-Sharpe point; that range is dominated."""


class CapacityExceeded(AlphaWeightsError):
    """Effective trading costs exceed every alpha; no positive P&L exists."""


class UnboundedCapacity(AlphaWeightsError):
    """Without a nonlinear impact term the optimal investment level is unbounded."""


class NoProfitableScale(AlphaWeightsError):
    """Optimized P&L is non-positive over the whole investment range."""


# --- solver failures -------------------------------------------------------

class NumericalFailure(AlphaWeightsError):
    """A root bracket or closed form failed numerically; message carries state."""


class SingularSystem(AlphaWeightsError):
    """The reduced linear system is not invertible for the current support."""


class NonConvergence(AlphaWeightsError):
    """Iteration cycled or hit its cap without reaching an exact fixed point.

    ``best`` holds the lowest-risk iterate seen (flagged unconverged) when one
    is available.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


# --- I/O -------------------------------------------------------------------

class ParseError(AlphaWeightsError):
    """Malformed input file; message carries row/column location."""


class IllConditioned(AlphaWeightsError):
    """Spectrum is too degenerate for the requested decomposition."""
