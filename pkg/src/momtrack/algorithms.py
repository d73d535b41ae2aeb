"""Synchronous rounds of DSGD, DSGDm, Gradient Tracking and Momentum Tracking.

The swarm is stored column-stacked as in the matrix form of the updates, but
with one row per node: ``x[k]`` is the parameter of node ``k`` (0-based).
Mixing ``sum_j W_ij x_j`` is then ``W @ x``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .exceptions import ConfigError, DivergenceError
from .problem import ObjectiveSuite
from .rng import RandomStream
from .topology import MixingMatrix

__all__ = [
    "Variant",
    "InitMode",
    "AlgorithmSpec",
    "NodeState",
    "SwarmState",
    "init_swarm",
    "step",
    "step_dsgd",
    "step_dsgdm",
    "step_momentum_tracking",
    "average_iterate",
    "vectors_per_link",
]


class Variant(str, Enum):
    DSGD = "dsgd"
    DSGDM = "dsgdm"
    GRADIENT_TRACKING = "gradient_tracking"
    MOMENTUM_TRACKING = "momentum_tracking"

    @property
    def tracks(self) -> bool:
        return self in (Variant.GRADIENT_TRACKING, Variant.MOMENTUM_TRACKING)


class InitMode(str, Enum):
    THEOREM = "theorem"
    ZERO = "zero"


@dataclass(frozen=True)
class AlgorithmSpec:
    """Optimizer choice and hyperparameters.

    ``gradient_tracking`` is Momentum Tracking with the momentum coefficient
    forced to zero; ``effective_beta`` applies that rule (and ignores beta for
    plain DSGD).
    """

    variant: Variant = Variant.MOMENTUM_TRACKING
    eta: float = 1e-4
    beta: float = 0.9
    init_mode: InitMode = InitMode.THEOREM

    def __post_init__(self):
        try:
            object.__setattr__(self, "variant", Variant(self.variant))
        except ValueError:
            choices = ", ".join(v.value for v in Variant)
            raise ConfigError(f"algorithm.variant: unknown variant {self.variant!r} (choose from {choices})") from None
        try:
            object.__setattr__(self, "init_mode", InitMode(self.init_mode))
        except ValueError:
            raise ConfigError(f"algorithm.init: unknown init mode {self.init_mode!r} (choose theorem or zero)") from None
        if not (0.0 <= self.beta < 1.0):
            raise ConfigError(f"algorithm.beta: beta must be in [0,1), got {self.beta}")
        if not (self.eta >= 0.0 and np.isfinite(self.eta)):
            raise ConfigError(f"algorithm.eta: eta must be a finite number >= 0, got {self.eta}")

    @property
    def effective_beta(self) -> float:
        if self.variant in (Variant.DSGD, Variant.GRADIENT_TRACKING):
            return 0.0
        return float(self.beta)


class NodeState(NamedTuple):
    x: np.ndarray
    u: np.ndarray
    c: np.ndarray


@dataclass(frozen=True, eq=False)
class SwarmState:
    """All node states after ``round`` completed rounds.

    ``grads`` holds the stochastic gradients consumed by the round that
    produced this state (``None`` for the initial state).
    """

    x: np.ndarray
    u: np.ndarray
    c: np.ndarray
    round: int = 0
    grads: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def node(self, k: int) -> NodeState:
        return NodeState(self.x[k], self.u[k], self.c[k])

    def __iter__(self):
        return (self.node(k) for k in range(self.n))


def average_iterate(swarm: SwarmState) -> np.ndarray:
    return swarm.x.mean(axis=0)


def vectors_per_link(variant: Variant | str) -> int:
    """Vectors a node sends to each neighbor per round."""
    return 2 if Variant(variant).tracks else 1


def init_swarm(p: ObjectiveSuite, spec: AlgorithmSpec, x0, stream: RandomStream) -> SwarmState:
    """Place every node at ``x0`` and initialize momentum and corrector.

    Under the theorem initialization the tracking variants start from
    ``u_i = c_i = (g_i - mean_j g_j) / (1 - beta)`` with ``g_i`` the round-0
    stochastic gradient. The global mean is computed exactly here; a
    deployment would need one extra consensus round for it.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (p.d,):
        raise ConfigError(f"x0 must have shape ({p.d},), got {x0.shape}")
    if not np.all(np.isfinite(x0)):
        raise ConfigError("x0 must be finite")
    x = np.tile(x0, (p.n, 1))
    u = np.zeros_like(x)
    c = np.zeros_like(x)
    if spec.variant.tracks and spec.init_mode is InitMode.THEOREM:
        g = p.stochastic_gradients(x, stream, 0)
        u = (1.0 / (1.0 - spec.effective_beta)) * (g - g.mean(axis=0))
        c = u.copy()
    return SwarmState(x=x, u=u, c=c, round=0)


# overflow is reported as DivergenceError by _checked instead
_quiet_overflow = np.errstate(over="ignore", invalid="ignore")


def _checked(x, u, c, round: int, grads) -> SwarmState:
    if np.isfinite(x.sum() + u.sum() + c.sum()):
        return SwarmState(x=x, u=u, c=c, round=round, grads=grads)
    for name, arr in (("x", x), ("u", u), ("c", c)):
        bad = ~np.isfinite(arr)
        if bad.any():
            node = int(np.argmax(bad.any(axis=1)))
            raise DivergenceError(round, node, name)
    return SwarmState(x=x, u=u, c=c, round=round, grads=grads)


@_quiet_overflow
def step_dsgd(swarm: SwarmState, w: MixingMatrix, p: ObjectiveSuite, spec: AlgorithmSpec, stream: RandomStream) -> SwarmState:
    """``x_i <- sum_j W_ij (x_j - eta g_j)``."""
    g = p.stochastic_gradients(swarm.x, stream, swarm.round)
    x = w.w @ (swarm.x - spec.eta * g)
    return _checked(x, swarm.u, swarm.c, swarm.round + 1, g)


@_quiet_overflow
def step_dsgdm(swarm: SwarmState, w: MixingMatrix, p: ObjectiveSuite, spec: AlgorithmSpec, stream: RandomStream) -> SwarmState:
    """``u_i <- beta u_i + g_i``, then ``x_i <- sum_j W_ij (x_j - eta u_j)``."""
    g = p.stochastic_gradients(swarm.x, stream, swarm.round)
    u = spec.effective_beta * swarm.u + g
    x = w.w @ (swarm.x - spec.eta * u)
    return _checked(x, u, swarm.c, swarm.round + 1, g)


@_quiet_overflow
def step_momentum_tracking(swarm: SwarmState, w: MixingMatrix, p: ObjectiveSuite, spec: AlgorithmSpec, stream: RandomStream) -> SwarmState:
    """One Momentum Tracking round.

    Order per node: momentum update, gossip of ``x`` and of ``c - u_new``,
    parameter update with the old corrector, corrector update::

        u_new = beta u + g
        x_new = sum_j W_ij x_j - eta (u_new - c)
        c_new = sum_j W_ij (c_j - u_new_j) + u_new
    """
    g = p.stochastic_gradients(swarm.x, stream, swarm.round)
    u = spec.effective_beta * swarm.u + g
    x = w.w @ swarm.x - spec.eta * (u - swarm.c)
    c = w.w @ (swarm.c - u) + u
    return _checked(x, u, c, swarm.round + 1, g)


_STEPS = {
    Variant.DSGD: step_dsgd,
    Variant.DSGDM: step_dsgdm,
    Variant.GRADIENT_TRACKING: step_momentum_tracking,
    Variant.MOMENTUM_TRACKING: step_momentum_tracking,
}


def step(swarm: SwarmState, w: MixingMatrix, p: ObjectiveSuite, spec: AlgorithmSpec, stream: RandomStream) -> SwarmState:
    """Advance ``swarm`` by one round of ``spec.variant``."""
    return _STEPS[spec.variant](swarm, w, p, spec, stream)
