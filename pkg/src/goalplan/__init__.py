from .adapters.checkpoint import (
    CheckpointIntegrityError,
    load_checkpoint,
    save_checkpoint,
)
from .adapters.config import (
    ConfigError,
    ConfigParseError,
    ProfileDocument,
    dump_document,
    load_document,
    load_profile,
)
from .adapters.metrics import emit_metrics
from .core.agent import AgentConfig, DQNAgent, EpsilonSchedule, TrainingDivergenceError
from .core.environment import EpisodeDoneError, GoalPlanningEnv, StepResult
from .core.goals import ClientProfile, Goal, GoalKind, GoalSet, RewardConfig
from .core.hooks import ProgressLogger, TrainingHook
from .core.market import AccountBalances, MarketModel
from .core.mdp import ConvergenceError, TabularMDP, value_iteration
from .core.network import QNetwork
from .core.oracle import OracleConfig, run_oracle
from .core.replay import BufferNotReadyError, ReplayBuffer
from .core.training import (
    Checkpoint,
    CheckpointCompatibilityError,
    Trainer,
    TrainingConfig,
    evaluate_policy,
    train,
)

__all__ = [
    "ClientProfile",
    "Goal",
    "GoalKind",
    "GoalSet",
    "RewardConfig",
    "AccountBalances",
    "MarketModel",
    "GoalPlanningEnv",
    "StepResult",
    "QNetwork",
    "ReplayBuffer",
    "AgentConfig",
    "EpsilonSchedule",
    "DQNAgent",
    "TrainingHook",
    "ProgressLogger",
    "TrainingConfig",
    "Trainer",
    "Checkpoint",
    "train",
    "evaluate_policy",
    "TabularMDP",
    "value_iteration",
    "OracleConfig",
    "run_oracle",
    "ProfileDocument",
    "load_document",
    "load_profile",
    "dump_document",
    "load_checkpoint",
    "save_checkpoint",
    "emit_metrics",
    "ConvergenceError",
    "EpisodeDoneError",
    "BufferNotReadyError",
    "TrainingDivergenceError",
    "CheckpointCompatibilityError",
    "CheckpointIntegrityError",
    "ConfigError",
    "ConfigParseError",
]
