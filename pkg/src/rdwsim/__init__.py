"""rdwsim: planning library and batch simulator for multi-user redirected walking."""

from .gaincurve import CurvatureCandidate, GainBounds, RedirectionCommand
from .geom import PhysEnv, Point2, Pose
from .sim import Simulation, TrialConfig, TrialStats, run_trial

__version__ = "0.1.0"

__all__ = [
    "CurvatureCandidate",
    "GainBounds",
    "PhysEnv",
    "Point2",
    "Pose",
    "RedirectionCommand",
    "Simulation",
    "TrialConfig",
    "TrialStats",
    "run_trial",
]
