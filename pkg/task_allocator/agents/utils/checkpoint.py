import json
import os
from typing import List, Optional
import numpy as np
from pydantic import BaseModel, Field, ValidationError
from ...scenario_config import ScenarioConfig, format_validation_error
from ...utils.errors import CheckpointError
from ..qnet import QNet

CHECKPOINT_SUFFIX = ".qnet"


class QNetCheckpoint(BaseModel):
    """On-disk form of one agent's trained Q-network"""
    agent_id: int = Field(description="1-based id of the agent that owns the network", ge=1)
    layer_dims: List[int] = Field(description="Width of every layer, input first")
    weights: List[List[List[float]]] = Field(description="Weight matrices, (fan_out, fan_in) each")
    biases: List[List[float]] = Field(description="Bias vectors, one per weight matrix")
    scenario_fingerprint: str = Field(description="Fingerprint of the scenario the network was trained on")
    seed: Optional[int] = Field(description="Seed of the training run", default=None)

    def to_qnet(self) -> QNet:
        net = QNet(
            tuple(self.layer_dims),
            [np.asarray(w, dtype=float) for w in self.weights],
            [np.asarray(b, dtype=float) for b in self.biases],
        )
        expected = list(zip(self.layer_dims[:-1], self.layer_dims[1:]))
        actual = [(w.shape[1], w.shape[0]) if w.ndim == 2 else None for w in net.weights]
        if actual != expected or [b.shape for b in net.biases] != [(d,) for d in self.layer_dims[1:]]:
            raise CheckpointError(f"Checkpoint of agent {self.agent_id} has parameters that do not match its layer_dims")
        return net

    @classmethod
    def from_qnet(cls, net: QNet, agent_id: int, config: ScenarioConfig, seed: Optional[int] = None) -> "QNetCheckpoint":
        return cls(
            agent_id=agent_id,
            layer_dims=list(net.layer_dims),
            weights=[w.tolist() for w in net.weights],
            biases=[b.tolist() for b in net.biases],
            scenario_fingerprint=config.fingerprint(),
            seed=seed,
        )


def checkpoint_filename(agent_id: int) -> str:
    return f"agent_{agent_id}{CHECKPOINT_SUFFIX}"


def save_checkpoint(
    net: QNet,
    agent_id: int,
    config: ScenarioConfig,
    directory: str,
    seed: Optional[int] = None,
) -> str:
    """Write one agent's network to ``directory`` and return the file path"""
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, checkpoint_filename(agent_id))
    checkpoint = QNetCheckpoint.from_qnet(net, agent_id, config, seed)
    with open(path, "w", encoding="utf-8") as f:
        f.write(checkpoint.model_dump_json())
    return path


def load_checkpoint(path: str) -> QNetCheckpoint:
    if not os.path.exists(path):
        raise CheckpointError("Checkpoint file not found", path)
    with open(path, "r", encoding="utf-8") as f:
        raw = f.read()
    try:
        return QNetCheckpoint.model_validate(json.loads(raw))
    except json.JSONDecodeError:
        raise CheckpointError("Checkpoint is not valid JSON", path)
    except ValidationError as e:
        raise CheckpointError(f"Malformed checkpoint: {format_validation_error(e)}", path)


def load_team(directory: str, config: ScenarioConfig) -> List[QNet]:
    """
    Load one network per agent of ``config`` from a checkpoint directory.

    Every checkpoint must have been trained on this exact scenario and must fit its feature and action widths.
    """
    fingerprint = config.fingerprint()
    expected_in, expected_out = config.feature_width, config.num_actions
    nets = []
    for agent in config.agents:
        path = os.path.join(directory, checkpoint_filename(agent.id))
        checkpoint = load_checkpoint(path)
        if checkpoint.agent_id != agent.id:
            raise CheckpointError(f"{path} belongs to agent {checkpoint.agent_id}, not agent {agent.id}")
        if checkpoint.scenario_fingerprint != fingerprint:
            raise CheckpointError(f"{path} was trained on a different scenario than '{config.name}'")
        net = checkpoint.to_qnet()
        if net.input_width != expected_in or net.output_width != expected_out:
            raise CheckpointError(
                f"{path} maps {net.input_width} features to {net.output_width} actions; "
                f"the scenario needs {expected_in} -> {expected_out}"
            )
        nets.append(net)
    return nets
