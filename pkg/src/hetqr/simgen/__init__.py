"""Synthetic-data scenarios with known truth, evaluation metrics, and the
Monte-Carlo study harness."""

from .scenarios import Scenario, OracleTruth, generate, scenario_p
from .metrics import model_size, f_measure, pee, qpe, pe
from .study import StudyConfig, StudyResult, run_study

__all__ = [
    "Scenario",
    "OracleTruth",
    "generate",
    "scenario_p",
    "model_size",
    "f_measure",
    "pee",
    "qpe",
    "pe",
    "StudyConfig",
    "StudyResult",
    "run_study",
]
