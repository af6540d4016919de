from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .training import EpisodeMetrics, Trainer

logger = logging.getLogger(__name__)


class TrainingHook(ABC):
    """Code a `Trainer` calls after every finished episode

    Hooks run in ascending `priority`; disabled hooks are skipped. An
    exception from `on_episode_end` goes to `on_error`, which re-raises by
    default. `shutdown` runs once when training stops, also after a failure.
    """

    def __init__(self, priority: float = 10.0, enabled: bool = True) -> None:
        self.priority = priority
        self.enabled = enabled

    @abstractmethod
    def on_episode_end(self, trainer: Trainer, metrics: EpisodeMetrics) -> None:
        pass

    def shutdown(self, trainer: Trainer) -> None:
        pass

    def on_error(self, trainer: Trainer, ex: Exception) -> None:
        raise ex


class ProgressLogger(TrainingHook):
    """Logs the moving-average reward every `every` episodes

    `shutdown` logs one closing line with the average over the last
    `window` episodes, even when training stopped early.
    """

    def __init__(self, every: int = 100, window: int = 100, **kwargs) -> None:
        super().__init__(**kwargs)
        if every < 1 or window < 1:
            raise ValueError("every and window must be >= 1")
        self.every = every
        self.window = window

    def _recent_mean(self, trainer: Trainer) -> tuple[int, float]:
        recent = trainer.metrics[-self.window :]
        return len(recent), sum(m.accumulated_reward for m in recent) / len(recent)

    def on_episode_end(self, trainer: Trainer, metrics: EpisodeMetrics) -> None:
        if (metrics.episode + 1) % self.every != 0:
            return
        n, mean_reward = self._recent_mean(trainer)
        logger.info(
            "episode %d  step %d  epsilon %.3f  reward %.2f  avg(%d) %.2f",
            metrics.episode + 1,
            trainer.global_step,
            metrics.epsilon,
            metrics.accumulated_reward,
            n,
            mean_reward,
        )

    def shutdown(self, trainer: Trainer) -> None:
        if not trainer.metrics:
            return
        n, mean_reward = self._recent_mean(trainer)
        logger.info(
            "stopped after %d episodes  avg(%d) %.2f",
            len(trainer.metrics),
            n,
            mean_reward,
        )
