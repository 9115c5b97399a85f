"""Contention-calibrated performance models for distributed dense linear algebra."""

from dlaperf.algomodel import ModelOptions, Prediction, Scenario, predict
from dlaperf.oracle import trace
from dlaperf.profile import MachineProfile, load_profile, load_profile_path
from dlaperf.synthetic import gen_synthetic_profile

__all__ = [
    "MachineProfile",
    "ModelOptions",
    "Prediction",
    "Scenario",
    "gen_synthetic_profile",
    "load_profile",
    "load_profile_path",
    "predict",
    "trace",
]
