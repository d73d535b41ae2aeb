"""Per-node objectives and the heterogeneous least-squares benchmark.

Node indices in the per-node API (``full_gradient``, ``local_value``, ...)
are 1-based, because the benchmark's coefficients ``a_i = i / sqrt(n)`` and
target variances ``zeta2 / i**2`` are defined on ``i = 1..n``. Batched
methods take and return row-stacked ``(n, d)`` arrays, where row ``k`` holds
node ``k + 1``.
"""

from __future__ import annotations

import abc
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import ConfigError
from .rng import RandomStream

__all__ = [
    "ObjectiveSuite",
    "QuadraticProblem",
    "synth_quadratic",
    "full_gradient",
    "stochastic_gradient",
    "global_gradient",
    "global_minimizer",
    "measure_heterogeneity",
    "dump_problem",
    "load_problem",
]

NOISE_TAG = "grad-noise"
TARGET_TAG = "quadratic-targets"


class ObjectiveSuite(abc.ABC):
    """Interface every objective plugged into the simulator implements."""

    n: int
    d: int
    sigma2: float

    @abc.abstractmethod
    def local_value(self, i: int, x: np.ndarray) -> float: ...

    @abc.abstractmethod
    def full_gradient(self, i: int, x: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def gradients(self, X: np.ndarray) -> np.ndarray:
        """Full gradients of every node, row ``k`` evaluated at ``X[k]``."""

    @property
    @abc.abstractmethod
    def smoothness(self) -> float:
        """Largest per-node gradient Lipschitz constant."""

    def noise(self, stream: RandomStream, round: int, nodes=None) -> np.ndarray:
        """Additive gradient noise with ``E||eps||^2 = sigma2`` per node."""
        nodes = np.arange(self.n) if nodes is None else np.asarray(nodes)
        if self.sigma2 == 0.0:
            return np.zeros((len(nodes), self.d))
        return np.sqrt(self.sigma2 / self.d) * stream.normal(NOISE_TAG, round, nodes, self.d)

    def stochastic_gradients(self, X: np.ndarray, stream: RandomStream, round: int) -> np.ndarray:
        """One noisy gradient per node, drawn at ``round``."""
        G = self.gradients(X)
        if self.sigma2 == 0.0:
            return G
        return G + self.noise(stream, round)

    def stochastic_gradient(self, i: int, x: np.ndarray, stream: RandomStream, round: int = 0) -> np.ndarray:
        g = self.full_gradient(i, x)
        if self.sigma2 == 0.0:
            return g
        return g + self.noise(stream, round, [i - 1])[0]

    def global_value(self, x: np.ndarray) -> float:
        return float(np.mean([self.local_value(i, x) for i in range(1, self.n + 1)]))

    def global_gradient(self, x: np.ndarray) -> np.ndarray:
        X = np.broadcast_to(np.asarray(x, dtype=float), (self.n, self.d))
        return self.gradients(X).mean(axis=0)

    def measure_heterogeneity(self, x: np.ndarray) -> float:
        """Mean squared deviation of local gradients from the global one at ``x``."""
        X = np.broadcast_to(np.asarray(x, dtype=float), (self.n, self.d))
        G = self.gradients(X)
        return float(np.mean(np.sum((G - G.mean(axis=0)) ** 2, axis=1)))


@dataclass(frozen=True, eq=False)
class QuadraticProblem(ObjectiveSuite):
    """``f_i(x) = 0.5 * ||a_i x - b_i||^2`` with scalar ``a_i``.

    Attributes:
        a: shape ``(n,)`` coefficients.
        b: shape ``(n, d)`` targets, row ``k`` belongs to node ``k + 1``.
        sigma2: total variance of the additive gradient noise.
        zeta2: heterogeneity level used to draw ``b`` (metadata only).
        seed: generator seed used to draw ``b`` (metadata only).
    """

    a: np.ndarray
    b: np.ndarray
    sigma2: float = 1.0
    zeta2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64).reshape(-1)
        b = np.asarray(self.b, dtype=np.float64)
        if b.ndim != 2 or b.shape[0] != a.shape[0]:
            raise ConfigError(f"problem.b must have shape (n, d) with n = {a.shape[0]}, got {b.shape}")
        if self.sigma2 < 0:
            raise ConfigError(f"problem.sigma2 must be >= 0, got {self.sigma2}")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def d(self) -> int:
        return self.b.shape[1]

    @property
    def smoothness(self) -> float:
        return float(np.max(self.a**2))

    def _check_node(self, i: int) -> int:
        if not 1 <= i <= self.n:
            raise IndexError(f"node index must be in [1, {self.n}], got {i}")
        return i - 1

    def local_value(self, i, x):
        k = self._check_node(i)
        r = self.a[k] * np.asarray(x, dtype=float) - self.b[k]
        return 0.5 * float(r @ r)

    def full_gradient(self, i, x):
        k = self._check_node(i)
        a = self.a[k]
        return a * a * np.asarray(x, dtype=float) - a * self.b[k]

    @cached_property
    def _a2(self) -> np.ndarray:
        return (self.a * self.a)[:, None]

    @cached_property
    def _ab(self) -> np.ndarray:
        return self.a[:, None] * self.b

    @cached_property
    def _mean_a2(self) -> float:
        return float(np.mean(self.a**2))

    @cached_property
    def _mean_ab(self) -> np.ndarray:
        return np.mean(self._ab, axis=0)

    @cached_property
    def _mean_b2(self) -> float:
        return float(np.mean(np.sum(self.b * self.b, axis=1)))

    def gradients(self, X):
        return self._a2 * X - self._ab

    def global_value(self, x):
        # mean_i 0.5 ||a_i x - b_i||^2 expanded around the cached moments
        x = np.asarray(x, dtype=float)
        return 0.5 * (self._mean_a2 * float(x @ x) - 2.0 * float(self._mean_ab @ x) + self._mean_b2)

    def global_gradient(self, x):
        # closed form: mean(a^2) x - mean(a b)
        return self._mean_a2 * np.asarray(x, dtype=float) - self._mean_ab

    def global_minimizer(self) -> np.ndarray:
        s = float(np.sum(self.a**2))
        if s == 0.0:
            raise ConfigError("degenerate problem: all coefficients a_i are zero")
        return np.sum(self.a[:, None] * self.b, axis=0) / s

    def optimal_value(self) -> float:
        return self.global_value(self.global_minimizer())


def synth_quadratic(d: int, n: int, zeta2: float, seed: int, sigma2: float = 1.0) -> QuadraticProblem:
    """Draw the heterogeneous benchmark.

    ``a_i = i / sqrt(n)`` and every coordinate of ``b_i`` is
    ``Normal(0, zeta2 / i**2)``, for ``i = 1..n``.
    """
    if d < 1:
        raise ConfigError(f"problem.d must be >= 1, got {d}")
    if n < 1:
        raise ConfigError(f"topology.n must be >= 1, got {n}")
    if zeta2 < 0:
        raise ConfigError(f"problem.zeta2 must be >= 0, got {zeta2}")
    idx = np.arange(1, n + 1, dtype=np.float64)
    a = idx / np.sqrt(n)
    if zeta2 == 0:
        b = np.zeros((n, d))
    else:
        z = RandomStream(seed).normal(TARGET_TAG, 0, np.arange(n), d)
        b = z * (np.sqrt(zeta2) / idx)[:, None]
    return QuadraticProblem(a=a, b=b, sigma2=float(sigma2), zeta2=float(zeta2), seed=int(seed))


def full_gradient(p: ObjectiveSuite, i: int, x) -> np.ndarray:
    return p.full_gradient(i, x)


def stochastic_gradient(p: ObjectiveSuite, i: int, x, stream: RandomStream, round: int = 0) -> np.ndarray:
    return p.stochastic_gradient(i, x, stream, round)


def global_gradient(p: ObjectiveSuite, x) -> np.ndarray:
    return p.global_gradient(x)


def global_minimizer(p: QuadraticProblem) -> np.ndarray:
    return p.global_minimizer()


def measure_heterogeneity(p: ObjectiveSuite, x) -> float:
    return p.measure_heterogeneity(x)


_HEADER = "# momtrack quadratic problem v1"


def dump_problem(p: QuadraticProblem, path: str | os.PathLike) -> None:
    """Write ``p`` as text. Floats use shortest round-trip repr, so a load is exact.

    Layout: a header line, ``key value`` lines for d, n, sigma2, zeta2, seed,
    then one row per node: ``a_i b_i1 ... b_id``.
    """
    lines = [
        _HEADER,
        f"d {p.d}",
        f"n {p.n}",
        f"sigma2 {float(p.sigma2)!r}",
        f"zeta2 {float(p.zeta2)!r}",
        f"seed {int(p.seed)}",
    ]
    for k in range(p.n):
        lines.append(" ".join(repr(float(v)) for v in (p.a[k], *p.b[k])))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_problem(path: str | os.PathLike) -> QuadraticProblem:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != _HEADER:
        raise ConfigError(f"{path}: not a momtrack problem file")
    meta = dict(ln.split(None, 1) for ln in lines[1:6])
    d, n = int(meta["d"]), int(meta["n"])
    rows = np.array([[float(v) for v in ln.split()] for ln in lines[6:]])
    if rows.shape != (n, d + 1):
        raise ConfigError(f"{path}: expected {n} rows of {d + 1} values, got shape {rows.shape}")
    return QuadraticProblem(
        a=rows[:, 0],
        b=rows[:, 1:],
        sigma2=float(meta["sigma2"]),
        zeta2=float(meta["zeta2"]),
        seed=int(meta["seed"]),
    )
