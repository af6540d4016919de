"""Versioned plain-text checkpoints

Layout of format 1:

    goalplan-checkpoint 1
    step <global step>
    agent <YAML flow mapping of the agent config>
    layers <d0> <d1> ... <dL>
    bias <0|1>
    param W<i> <rows> <cols>     followed by <rows> lines of floats
    param b<i> <n>               followed by one line of floats
    end <total parameter count>

Floats are written with `repr`, which round-trips float64 exactly.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Iterator, Union

import numpy as np
import yaml

from ..core.agent import AgentConfig, EpsilonSchedule
from ..core.network import QNetwork
from ..core.training import (
    CHECKPOINT_FORMAT_VERSION,
    Checkpoint,
    CheckpointCompatibilityError,
)

logger = logging.getLogger(__name__)

MAGIC = "goalplan-checkpoint"


class CheckpointIntegrityError(ValueError):
    pass


def _agent_to_dict(cfg: AgentConfig) -> dict:
    return {
        "gamma": cfg.gamma,
        "learning_rate": cfg.learning_rate,
        "batch_size": cfg.batch_size,
        "target_sync_period": cfg.target_sync_period,
        "warmup_transitions": cfg.warmup_transitions,
        "replay_capacity": cfg.replay_capacity,
        "hidden_sizes": list(cfg.hidden_sizes),
        "bias": cfg.bias,
        "epsilon": {
            "start": cfg.epsilon.start,
            "end": cfg.epsilon.end,
            "decay_steps": cfg.epsilon.decay_steps,
        },
    }


def _agent_from_dict(data: dict) -> AgentConfig:
    data = dict(data)
    data["hidden_sizes"] = tuple(data["hidden_sizes"])
    data["epsilon"] = EpsilonSchedule(**data["epsilon"])
    return AgentConfig(**data)


def _format_row(values: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in values)


def dumps_checkpoint(checkpoint: Checkpoint) -> str:
    net = checkpoint.net
    agent = yaml.safe_dump(
        _agent_to_dict(checkpoint.agent),
        default_flow_style=True,
        sort_keys=False,
        width=math.inf,
    ).strip()
    lines = [
        f"{MAGIC} {checkpoint.format_version}",
        f"step {checkpoint.step}",
        f"agent {agent}",
        "layers " + " ".join(str(n) for n in net.layer_sizes),
        f"bias {int(net.bias)}",
    ]
    total = 0
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        lines.append(f"param W{i} {w.shape[0]} {w.shape[1]}")
        lines.extend(_format_row(row) for row in w)
        total += w.size
        if net.bias:
            lines.append(f"param b{i} {b.shape[0]}")
            lines.append(_format_row(b))
            total += b.size
    lines.append(f"end {total}")
    return "\n".join(lines) + "\n"


def save_checkpoint(path: Union[str, Path], checkpoint: Checkpoint) -> None:
    path = Path(path)
    path.write_text(dumps_checkpoint(checkpoint), encoding="utf-8")
    logger.info("checkpoint written to %s (step %d)", path, checkpoint.step)


class _Reader:
    def __init__(self, text: str):
        self._lines: Iterator[str] = iter(text.splitlines())
        self.line_no = 0

    def next(self, what: str) -> str:
        try:
            line = next(self._lines)
        except StopIteration:
            raise CheckpointIntegrityError(
                f"checkpoint truncated: expected {what} after line {self.line_no}"
            ) from None
        self.line_no += 1
        return line

    def keyed(self, key: str) -> list[str]:
        fields = self.next(key).split(" ")
        if fields[0] != key:
            raise CheckpointIntegrityError(
                f"line {self.line_no}: expected '{key}', got '{fields[0]}'"
            )
        return fields[1:]

    def floats(self, n: int, what: str) -> np.ndarray:
        tokens = self.next(what).split()
        if len(tokens) != n:
            raise CheckpointIntegrityError(
                f"line {self.line_no}: {what} needs {n} values, got {len(tokens)}"
            )
        try:
            return np.array([float(t) for t in tokens])
        except ValueError as e:
            raise CheckpointIntegrityError(f"line {self.line_no}: {e}") from e


def _check_header(reader: _Reader) -> int:
    fields = reader.next("header").split(" ")
    if len(fields) != 2 or fields[0] != MAGIC:
        raise CheckpointIntegrityError("not a goalplan checkpoint")
    try:
        version = int(fields[1])
    except ValueError:
        raise CheckpointIntegrityError(f"bad format version '{fields[1]}'") from None
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointCompatibilityError(
            f"checkpoint format {version} is not supported "
            f"(expected {CHECKPOINT_FORMAT_VERSION})"
        )
    return version


def _read_param(reader: _Reader, name: str, shape: tuple[int, ...]) -> np.ndarray:
    fields = reader.keyed("param")
    expected = [name, *(str(n) for n in shape)]
    if fields != expected:
        raise CheckpointIntegrityError(
            f"line {reader.line_no}: expected param {' '.join(expected)}"
        )
    if len(shape) == 1:
        return reader.floats(shape[0], name)
    return np.stack([reader.floats(shape[1], name) for _ in range(shape[0])])


def loads_checkpoint(text: str) -> Checkpoint:
    """Parse checkpoint text

    Raises:
        CheckpointCompatibilityError: on an unsupported format version.
        CheckpointIntegrityError: on truncated or malformed content.
    """
    reader = _Reader(text)
    version = _check_header(reader)
    try:
        (step,) = reader.keyed("step")
        step = int(step)
        agent_line = reader.next("agent")
        if not agent_line.startswith("agent "):
            raise CheckpointIntegrityError(f"line {reader.line_no}: expected 'agent'")
        agent = _agent_from_dict(yaml.safe_load(agent_line[len("agent ") :]))
        layers = tuple(int(n) for n in reader.keyed("layers"))
        (bias,) = reader.keyed("bias")
        bias = bool(int(bias))
    except CheckpointIntegrityError:
        raise
    except (ValueError, TypeError, KeyError, yaml.YAMLError) as e:
        raise CheckpointIntegrityError(
            f"line {reader.line_no}: malformed header ({e})"
        ) from e

    if agent.hidden_sizes != layers[1:-1] or agent.bias != bias:
        raise CheckpointIntegrityError(
            f"agent config {agent.hidden_sizes} does not match layers {layers}"
        )
    net = QNetwork(layers, bias=bias)
    total = 0
    for i in range(net.n_layers):
        net.weights[i] = _read_param(reader, f"W{i}", net.weights[i].shape)
        total += net.weights[i].size
        if bias:
            net.biases[i] = _read_param(reader, f"b{i}", net.biases[i].shape)
            total += net.biases[i].size
    end = reader.keyed("end")
    if end != [str(total)]:
        raise CheckpointIntegrityError(
            f"parameter count mismatch: footer {end}, read {total}"
        )
    return Checkpoint(net, agent, step, version)


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    checkpoint = loads_checkpoint(path.read_text(encoding="utf-8"))
    logger.debug("checkpoint loaded from %s (step %d)", path, checkpoint.step)
    return checkpoint
