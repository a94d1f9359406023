"""
Exception hierarchy for hartogs_kit.

Every error carries a machine-readable ``code`` and a distinct process
exit code so the runner can report failures in one line.
"""


class HartogsKitError(Exception):
    """Base exception for all toolkit operations"""
    code = "internal"
    exit_code = 1


class ConfigError(HartogsKitError):
    """Raised when a run configuration cannot be parsed or validated"""
    code = "config"
    exit_code = 2


# power series

class SeriesError(HartogsKitError):
    """Base exception for power series calculus"""
    code = "series"
    exit_code = 10


class OutOfRadius(SeriesError):
    code = "out_of_radius"
    exit_code = 11


class NonFinite(SeriesError):
    code = "non_finite"
    exit_code = 12


class InsufficientTerms(SeriesError):
    code = "insufficient_terms"
    exit_code = 13


# quadrature

class QuadratureError(HartogsKitError):
    """Base exception for contour quadrature"""
    code = "quadrature"
    exit_code = 20


class NonFiniteSample(QuadratureError):
    code = "non_finite_sample"
    exit_code = 21


class GridTooSmall(QuadratureError):
    code = "grid_too_small"
    exit_code = 22


# hartogs

class ExtensionError(HartogsKitError):
    """Base exception for Hartogs extension"""
    code = "extension"
    exit_code = 30


class NotHolomorphic(ExtensionError):
    code = "not_holomorphic"
    exit_code = 31


class OverlapMismatch(ExtensionError):
    code = "overlap_mismatch"
    exit_code = 32


class SlowDecay(ExtensionError):
    code = "slow_decay"
    exit_code = 33


class InductionDepthExceeded(ExtensionError):
    code = "induction_depth_exceeded"
    exit_code = 34


class DirectionInconsistency(ExtensionError):
    code = "direction_inconsistency"
    exit_code = 35


# dbar and Cousin problems

class DbarError(HartogsKitError):
    """Base exception for the dbar and Cousin solvers"""
    code = "dbar"
    exit_code = 40


class ResolutionTooCoarse(DbarError):
    code = "resolution_too_coarse"
    exit_code = 41


class CocycleViolation(DbarError):
    code = "cocycle_violation"
    exit_code = 42


class DegenerateDomain(DbarError):
    code = "degenerate_domain"
    exit_code = 43


# royden

class RoydenError(HartogsKitError):
    """Base exception for tubular normalization"""
    code = "royden"
    exit_code = 50


class NotImmersion(RoydenError):
    code = "not_immersion"
    exit_code = 51


class NotNearIdentity(RoydenError):
    code = "not_near_identity"
    exit_code = 52


class RadiusCollapse(RoydenError):
    code = "radius_collapse"
    exit_code = 53


class ChartDisagreement(RoydenError):
    code = "chart_disagreement"
    exit_code = 54


# continuation

class ContinuationError(HartogsKitError):
    """Base exception for the continuity principle engine"""
    code = "continuation"
    exit_code = 60


class BoundaryEscape(ContinuationError):
    code = "boundary_escape"
    exit_code = 61


class StepCollapse(ContinuationError):
    code = "step_collapse"
    exit_code = 62


# loopspace

class LoopError(HartogsKitError):
    """Base exception for Sobolev loop operations"""
    code = "loop"
    exit_code = 70


class LoopEscapesBall(LoopError):
    code = "loop_escapes_ball"
    exit_code = 71


class NormBlowup(LoopError):
    code = "norm_blowup"
    exit_code = 72
