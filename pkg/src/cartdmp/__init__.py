"""Temporally coupled dynamical movement primitives for Cartesian poses."""
from .controller import ErrorFilterState, Gains
from .dmp import CoupledState, DmpModel
from .learning import Demonstration, synth_demo, train
from .quaternion import DomainError
from .sim import EpisodeLog, Perturbation, RobotState, run_batch, run_episode

__all__ = [
    "CoupledState", "Demonstration", "DmpModel", "DomainError", "EpisodeLog",
    "ErrorFilterState", "Gains", "Perturbation", "RobotState", "run_batch",
    "run_episode", "synth_demo", "train",
]
