"""Quaternion unscented particle filter for visual-inertial navigation.

Quaternions are stored ``[w, x, y, z]`` with ``w >= 0``. The attitude error used
by covariances and boxplus/boxminus is a world-frame rotation vector:
``q = q_r(dr) (x) q_hat``.
"""

from .errors import (ConfigError, DatasetError, FilterStepError, NotPositiveDefiniteError, OrderingError,
                     PreconditionError, QuatNavError, QuaternionMeanAmbiguityError)
from .kinematics import ImuSample, ImuStream, NavState, WorldParams
from .qukf import UkfMoments, UkfTuning
from .qupf import Ensemble, Estimate, FilterConfig, Particle
from .sensing import ImuNoiseParams, LandmarkFrame, LandmarkNoise

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DatasetError", "FilterStepError", "NotPositiveDefiniteError", "OrderingError",
    "PreconditionError", "QuatNavError", "QuaternionMeanAmbiguityError", "ImuSample", "ImuStream", "NavState",
    "WorldParams", "UkfMoments", "UkfTuning", "Ensemble", "Estimate", "FilterConfig", "Particle",
    "ImuNoiseParams", "LandmarkFrame", "LandmarkNoise",
]
