"""Shared domain types: environment specs, transitions, trajectory chunks.

Trajectories are the unit of currency between the actor, the two replay
buffers, and both learners.  They are stored array-backed: a chunk of L
transitions keeps a single (L+1, state_dim) state matrix, so the chaining
invariant (each transition's next state is the following transition's state)
holds by construction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    """Static description of an environment's observation and action space.

    obs_low/obs_high are the raw per-dimension observation bounds used for
    normalization; episode_length is the control-step time limit.
    """

    state_dim: int
    action_dim: int
    obs_low: np.ndarray
    obs_high: np.ndarray
    episode_length: int
    control_dt: float

    def __post_init__(self):
        object.__setattr__(self, "obs_low", np.asarray(self.obs_low, dtype=np.float64))
        object.__setattr__(self, "obs_high", np.asarray(self.obs_high, dtype=np.float64))
        if self.state_dim < 1 or self.action_dim < 1:
            raise ValueError("state_dim and action_dim must be positive")
        if self.obs_low.shape != (self.state_dim,) or self.obs_high.shape != (self.state_dim,):
            raise ValueError("obs bounds must have length state_dim")
        if not np.all(self.obs_low < self.obs_high):
            raise ValueError("obs_low must be strictly below obs_high in every dimension")
        if self.episode_length < 1:
            raise ValueError("episode_length must be >= 1")


class Transition(NamedTuple):
    """One environment step (s, a, s_next, terminal), all values in [-1, 1].

    terminal is True only for an early termination (constraint violation),
    never for running out the episode clock.
    """

    s: np.ndarray
    a: np.ndarray
    s_next: np.ndarray
    terminal: bool


def normalize(raw_obs: np.ndarray, spec: EnvSpec) -> np.ndarray:
    """Map a raw observation onto [-1, 1] per dimension, clipping overshoot.

    Physics integrators can transiently leave the nominal bounds, so values
    outside [obs_low, obs_high] are clipped rather than rejected.
    """
    raw_obs = np.asarray(raw_obs, dtype=np.float64)
    if raw_obs.shape != (spec.state_dim,):
        raise ValueError(f"expected observation of shape ({spec.state_dim},), got {raw_obs.shape}")
    scaled = 2.0 * (raw_obs - spec.obs_low) / (spec.obs_high - spec.obs_low) - 1.0
    return np.clip(scaled, -1.0, 1.0)


def denormalize(obs: np.ndarray, spec: EnvSpec) -> np.ndarray:
    """Inverse of normalize for in-range vectors."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != (spec.state_dim,):
        raise ValueError(f"expected observation of shape ({spec.state_dim},), got {obs.shape}")
    return spec.obs_low + (obs + 1.0) * 0.5 * (spec.obs_high - spec.obs_low)


class TrajectoryIds:
    """Monotonically increasing trajectory id allocator, unique per run."""

    def __init__(self, start: int = 0):
        self._counter = itertools.count(start)

    def next_id(self) -> int:
        return next(self._counter)


_DEFAULT_IDS = TrajectoryIds()


@dataclass(frozen=True)
class Trajectory:
    """A fixed-length chunk of chained transitions.

    states has shape (L+1, state_dim): row k is transition k's state and row
    k+1 its next state.  terminal marks the final transition only; a chunk
    never continues past an early termination.
    """

    traj_id: int
    states: np.ndarray
    actions: np.ndarray
    terminal: bool

    def __post_init__(self):
        if self.states.ndim != 2 or self.actions.ndim != 2:
            raise ValueError("states and actions must be 2-D arrays")
        if self.states.shape[0] != self.actions.shape[0] + 1:
            raise ValueError("states must hold one more row than actions")
        if self.actions.shape[0] < 1:
            raise ValueError("a trajectory holds at least one transition")

    def __len__(self) -> int:
        return self.actions.shape[0]

    @property
    def state_matrix(self) -> np.ndarray:
        return self.states[:-1]

    @property
    def next_state_matrix(self) -> np.ndarray:
        return self.states[1:]

    @property
    def terminal_flags(self) -> np.ndarray:
        flags = np.zeros(len(self), dtype=bool)
        flags[-1] = self.terminal
        return flags

    @property
    def transitions(self) -> list[Transition]:
        return list(self.iter_transitions())

    def iter_transitions(self) -> Iterator[Transition]:
        last = len(self) - 1
        for k in range(len(self)):
            yield Transition(
                s=self.states[k],
                a=self.actions[k],
                s_next=self.states[k + 1],
                terminal=self.terminal and k == last,
            )

    @classmethod
    def from_transitions(
        cls, transitions: Sequence[Transition], ids: TrajectoryIds | None = None
    ) -> "Trajectory":
        """Build a chunk from chained transitions, validating the chain."""
        if not transitions:
            raise ValueError("cannot build a trajectory from zero transitions")
        _validate_chain(transitions)
        states = np.empty((len(transitions) + 1, transitions[0].s.shape[0]), dtype=np.float64)
        actions = np.empty((len(transitions), transitions[0].a.shape[0]), dtype=np.float64)
        for k, t in enumerate(transitions):
            states[k] = t.s
            actions[k] = t.a
        states[-1] = transitions[-1].s_next
        ids = ids if ids is not None else _DEFAULT_IDS
        return cls(
            traj_id=ids.next_id(),
            states=states,
            actions=actions,
            terminal=bool(transitions[-1].terminal),
        )


@dataclass(frozen=True)
class LabeledTrajectory:
    """A trajectory plus one curiosity reward per transition.

    model_version records which forward-model state produced the labels; the
    policy learner therefore sees a mixture of reward-function versions.
    """

    trajectory: Trajectory
    rewards: np.ndarray
    model_version: int

    def __post_init__(self):
        object.__setattr__(self, "rewards", np.asarray(self.rewards, dtype=np.float64))
        if self.rewards.shape != (len(self.trajectory),):
            raise ValueError("need exactly one reward per transition")
        if np.any(self.rewards < 0.0) or np.any(self.rewards >= 1.0):
            raise ValueError("rewards must lie in [0, 1)")
        if self.model_version < 0:
            raise ValueError("model_version must be non-negative")


def _validate_chain(transitions: Sequence[Transition]) -> None:
    for k in range(len(transitions) - 1):
        if transitions[k].terminal:
            raise ValueError(f"terminal transition at index {k} is not last")
        if not np.array_equal(transitions[k].s_next, transitions[k + 1].s):
            raise ValueError(f"transitions {k} and {k + 1} do not chain")


def chunk_episode(
    episode: Sequence[Transition], chunk_length: int, ids: TrajectoryIds | None = None
) -> list[Trajectory]:
    """Split an episode into consecutive non-overlapping chunks.

    The final chunk keeps its short remainder (>=1 transition): discarding it
    would bias the data against episode ends, and padding would corrupt the
    dynamics loss.  An empty episode yields an empty list.
    """
    if chunk_length < 1:
        raise ValueError("chunk_length must be positive")
    if not episode:
        return []
    _validate_chain(episode)
    chunks = []
    for start in range(0, len(episode), chunk_length):
        chunks.append(Trajectory.from_transitions(episode[start : start + chunk_length], ids))
    return chunks
