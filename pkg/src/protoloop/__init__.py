"""Protocol-audited closed-loop candidate-pool design with compressed agent memory."""

from .control import Action, EpisodeResult, LoopConfig, Mode, run_episode
from .diagnosis import ActionBias, CorrectiveRecord, FailureFamily, diagnose
from .kernels import BACKEND
from .memory import AgentState, Budgets, adapt, render_channel
from .protocol import (
    AggregationKind,
    AuditReport,
    CandidatePool,
    Comparison,
    MetricField,
    Molecule,
    Requirement,
    RequirementSet,
    gate,
    load_requirements,
    residual_vector,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ActionBias",
    "AgentState",
    "AggregationKind",
    "AuditReport",
    "BACKEND",
    "Budgets",
    "CandidatePool",
    "Comparison",
    "CorrectiveRecord",
    "EpisodeResult",
    "FailureFamily",
    "LoopConfig",
    "MetricField",
    "Mode",
    "Molecule",
    "Requirement",
    "RequirementSet",
    "adapt",
    "diagnose",
    "gate",
    "load_requirements",
    "render_channel",
    "residual_vector",
    "run_episode",
]
