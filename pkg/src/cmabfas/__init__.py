"""Contextual multi-armed bandits for a self-learning SPIT filter."""

from .baseline import BaselineConfig, NaiveBaseline
from .context import CallClass, LabeledCall, SipHeader, distance, hamming_agreement
from .corpus import CorpusSpec, draw_call, generate_corpus
from .env import (
    RewardModelConfig,
    Scenario,
    default_scenario,
    expected_reward,
    generate_scenario,
    regret_of,
)
from .harness import ExperimentConfig, run_experiment, sweep
from .learner import Cmabfas, LearnerConfig
from .snapshot import restore, snapshot

__all__ = [
    "BaselineConfig",
    "CallClass",
    "Cmabfas",
    "CorpusSpec",
    "ExperimentConfig",
    "LabeledCall",
    "LearnerConfig",
    "NaiveBaseline",
    "RewardModelConfig",
    "Scenario",
    "SipHeader",
    "default_scenario",
    "distance",
    "draw_call",
    "expected_reward",
    "generate_corpus",
    "generate_scenario",
    "hamming_agreement",
    "regret_of",
    "restore",
    "run_experiment",
    "snapshot",
    "sweep",
]
