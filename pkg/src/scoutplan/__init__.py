"""Planning library and simulation harness for mixed ground/air robot
teams navigating road graphs with probabilistically blocked edges.
"""
from .graph import (BLOCKED, TRAVERSABLE, UNKNOWN, Edge, GraphError,
                    GraphView, WorldGraph, WorldSample, sample_world,
                    shortest_path)
from .belief import (IDLE, BeliefError, BeliefState, Observation, Pose,
                     SingleAction, legal_actions)
from .envgen import EnvSpec, GenerationError, TeamConfig, generate, load_env, save_env
from .planner import (EpisodeResult, JointAction, PlannerConfig, PlannerError,
                      PruningConfig, TransitionOutcome, advance, plan_step,
                      run_episode)
from .pruning import (OracleConfig, PredictorClient, PredictorError,
                      PruneScore, ValueChangeQuery, dap_score, iap_priority,
                      prune_drone_actions, value_change_mc,
                      value_change_mc_stderr, value_change_table)

__version__ = "0.1.0"

__all__ = [
    "BLOCKED", "TRAVERSABLE", "UNKNOWN", "IDLE",
    "Edge", "WorldGraph", "WorldSample", "GraphView", "GraphError",
    "sample_world", "shortest_path",
    "BeliefState", "BeliefError", "Pose", "SingleAction", "Observation",
    "legal_actions",
    "EnvSpec", "TeamConfig", "GenerationError", "generate",
    "save_env", "load_env",
    "PlannerConfig", "PruningConfig", "PlannerError", "JointAction",
    "TransitionOutcome", "EpisodeResult", "advance", "plan_step",
    "run_episode",
    "OracleConfig", "PruneScore", "ValueChangeQuery", "dap_score",
    "iap_priority", "prune_drone_actions", "value_change_mc",
    "value_change_mc_stderr", "value_change_table",
    "PredictorClient", "PredictorError",
    "__version__",
]
