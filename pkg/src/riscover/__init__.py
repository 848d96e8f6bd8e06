"""Coverage of RIS-aided indoor links under correlated disk blockages."""
from .channel import ChannelParams, QosTarget, gamma_threshold
from .coverage import CoverageInputs, coverage_at, coverage_avg, min_ris_required, outage
from .errors import ConfigError, GeometryError, NonConvergenceError, PoleError
from .scene import SceneConfig, equispaced_angles

__all__ = [
    "ChannelParams", "QosTarget", "gamma_threshold", "CoverageInputs", "coverage_at",
    "coverage_avg", "min_ris_required", "outage", "ConfigError", "GeometryError",
    "NonConvergenceError", "PoleError", "SceneConfig", "equispaced_angles",
]
