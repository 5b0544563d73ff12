"""Forward-dynamics model: reward generator and self-supervised learner.

The model predicts the next state from (state, action).  Its squashed
prediction error is the curiosity reward, so the reward function drifts as
the model improves; the version counter tracks how many gradient updates
produced the current parameters, and every labeled batch is tagged with the
version that labeled it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import neural
from .core import LabeledTrajectory, Trajectory, Transition
from .neural import AdamState, MLPParams, MLPSpec

DEFAULT_HIDDEN = (256, 256)
DEFAULT_LR = 3e-4
DEFAULT_REWARD_SCALE = 10.0


class WorldModelError(RuntimeError):
    pass


@dataclass(frozen=True)
class WorldModel:
    """Versioned forward-dynamics approximator.

    version equals the number of optimizer steps applied; updates return a
    new WorldModel value rather than mutating in place.
    """

    spec: MLPSpec
    params: MLPParams
    adam: AdamState
    version: int = 0
    lr: float = DEFAULT_LR
    reward_scale: float = DEFAULT_REWARD_SCALE

    @property
    def state_dim(self) -> int:
        return self.spec.output_dim

    @property
    def action_dim(self) -> int:
        return self.spec.input_dim - self.spec.output_dim

    @classmethod
    def create(cls, state_dim: int, action_dim: int, hidden: tuple[int, ...] = DEFAULT_HIDDEN,
               lr: float = DEFAULT_LR, reward_scale: float = DEFAULT_REWARD_SCALE,
               seed: int = 0) -> "WorldModel":
        spec = neural.mlp_spec(state_dim + action_dim, hidden, state_dim)
        params = neural.init_params(spec, seed)
        return cls(spec=spec, params=params, adam=AdamState.for_params(params),
                   lr=lr, reward_scale=reward_scale)


def predict(model: WorldModel, s: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Predicted next state for one (state, action) pair."""
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if s.shape != (model.state_dim,) or a.shape != (model.action_dim,):
        raise ValueError(
            f"expected state ({model.state_dim},) and action ({model.action_dim},), "
            f"got {s.shape} and {a.shape}"
        )
    return neural.forward(model.params, model.spec, np.concatenate([s, a]))


def predict_batch(model: WorldModel, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    return neural.forward_batch(model.params, model.spec, np.hstack([states, actions]))


def _rewards_from_errors(model: WorldModel, sq_err: np.ndarray) -> np.ndarray:
    # mean over state dimensions, not sum: a summed error saturates the tanh
    # for any nontrivial mistake once states have more than a few dimensions,
    # flattening the reward signal the policy is supposed to follow
    return np.tanh(model.reward_scale * sq_err.mean(axis=1))


def curiosity_reward(model: WorldModel, t: Transition) -> float:
    """Squashed prediction error for one transition; always in [0, 1)."""
    err = predict(model, t.s, t.a) - np.asarray(t.s_next, dtype=np.float64)
    return float(np.tanh(model.reward_scale * np.mean(err * err)))


def curiosity_rewards(model: WorldModel, traj: Trajectory) -> np.ndarray:
    """Per-transition curiosity rewards for a whole trajectory."""
    pred = predict_batch(model, traj.state_matrix, traj.actions)
    err = pred - traj.next_state_matrix
    return _rewards_from_errors(model, err * err)


def label_and_update(model: WorldModel, batch: list[Trajectory]
                     ) -> tuple[list[LabeledTrajectory], float, WorldModel]:
    """Label a batch with the current model, then take one optimizer step.

    The ordering is load-bearing: rewards always come from the pre-update
    parameters, and the labels are tagged with the pre-update version.  The
    training loss is the plain sum of squared prediction errors over every
    transition in the batch.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    lengths = [len(t) for t in batch]
    inputs = np.vstack([np.hstack([t.state_matrix, t.actions]) for t in batch])
    targets = np.vstack([t.next_state_matrix for t in batch])

    loss, grads, outputs = neural.sse_loss_grad_outputs(model.params, model.spec, inputs, targets)
    if not np.isfinite(loss):
        raise WorldModelError(
            f"non-finite dynamics loss at version {model.version} "
            f"(batch of {len(batch)} trajectories, {inputs.shape[0]} transitions); "
            "model left unchanged"
        )

    err = outputs - targets
    rewards = _rewards_from_errors(model, err * err)
    labeled = []
    offset = 0
    for traj, length in zip(batch, lengths):
        labeled.append(LabeledTrajectory(
            trajectory=traj,
            rewards=rewards[offset : offset + length],
            model_version=model.version,
        ))
        offset += length

    new_params, new_adam = neural.adam_step(model.params, grads, model.adam, model.lr)
    updated = replace(model, params=new_params, adam=new_adam, version=model.version + 1)
    return labeled, loss, updated
