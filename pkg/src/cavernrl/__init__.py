"""Caverns RL: asynchronous PPO with intrinsic rewards synthesized online
from annotation feedback on environment captions.

Subpackages and modules:

- ``env``: procedural captioned caverns gridworld (dungeon generation,
  environment dynamics, caption grammar, task definitions).
- ``annotate``: candidate queues, annotation stores, prompt construction,
  mock and HTTP chat-completions backends, the batching annotation service.
- ``rewards``: intrinsic reward mechanisms (retrieval, classification,
  ranking), episodic normalization, running statistics, composite rewards,
  and the hashed bag-of-words baseline.
- ``nn``: minimal numpy MLP with explicit backprop and Adam.
- ``reward_models``: training steps for the caption classifier and ranker.
- ``ppo``: GAE, clipped PPO updates, policy-staleness bookkeeping.
- ``rollouts``: vectorized experience collection over env instances.
- ``orchestrator``: the training loop wiring everything together, plus
  throughput measurement.
- ``cli``: the ``cavernrl`` command line entry point.
"""

__version__ = "0.1.0"

from .config import ConfigError, RunConfig, load_config  # noqa: E402
from .env import CavernsEnv, GenParams, TaskSpec, make_task  # noqa: E402
from .orchestrator import (RunResult, ThroughputReport, Trainer,  # noqa: E402
                           measure_throughput, run_training)
from .rewards import IntrinsicRewardConfig  # noqa: E402

__all__ = [
    "CavernsEnv", "ConfigError", "GenParams", "IntrinsicRewardConfig",
    "RunConfig", "RunResult", "TaskSpec", "ThroughputReport", "Trainer",
    "load_config", "make_task", "measure_throughput", "run_training",
    "__version__",
]
