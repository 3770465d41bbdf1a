from .scenario_config import ScenarioConfig, load_scenario
from .reward import RewardConfig, reward_preset
from .agents.qlearning import TrainConfig
from .trainer import DecentralizedTrainer, train
from .evaluation import Evaluator, evaluate, inactivation_study
from .metrics import importance_report, summarize
from .experiment_config import ExperimentConfig

__all__ = [
    "ScenarioConfig",
    "load_scenario",
    "RewardConfig",
    "reward_preset",
    "TrainConfig",
    "DecentralizedTrainer",
    "train",
    "Evaluator",
    "evaluate",
    "inactivation_study",
    "importance_report",
    "summarize",
    "ExperimentConfig",
]
