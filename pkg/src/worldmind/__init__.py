"""Training-free world-model alignment for embodied agents through experience."""
from .core import (
    SKIP_STRING,
    ActionSpec,
    AgentResponse,
    Feedback,
    Goal,
    GoalPredicate,
    PlanStep,
    PredicateKind,
    Profile,
    is_skip,
    validate_response,
)
from .engine import EpisodeConfig, EpisodeResult, run_episode
from .repository import Kind, Repository
from .sim import load_world

__version__ = "0.1.0"
