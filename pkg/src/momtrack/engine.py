"""Multi-round runs, per-round metrics, and parameter sweeps."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .algorithms import SwarmState, Variant, init_swarm, step, vectors_per_link
from .config import RunConfig, TopologyConfig
from .exceptions import ConfigError, DivergenceError
from .problem import ObjectiveSuite, QuadraticProblem, synth_quadratic
from .rng import RandomStream, derive_seed
from .topology import MixingMatrix, build_mixing_matrix, build_topology, spectral_gap

__all__ = [
    "RoundMetrics",
    "RunResult",
    "build_mixing",
    "build_problem",
    "consensus_distance",
    "run",
    "sweep",
    "sweep_configs",
    "parse_axis_value",
    "SWEEP_AXES",
    "METRIC_COLUMNS",
]

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ("round", "f_xbar", "grad_norm_sq", "consensus_xi", "c_sum_norm", "u_bar_norm", "vectors_tx")


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    f_xbar: float
    grad_norm_sq: float
    consensus_xi: float
    c_sum_norm: float
    u_bar_norm: float
    vectors_tx: int

    def as_row(self) -> tuple:
        return tuple(getattr(self, c) for c in METRIC_COLUMNS)


@dataclass(eq=False)
class RunResult:
    """Outcome of one run.

    ``xbar`` / ``ubar`` are per-round averages (rows ``0..R``) and
    ``gradients`` the ``(R, n, d)`` log of stochastic gradients; they are only
    filled when requested from :func:`run`.
    """

    config: RunConfig
    metrics: list[RoundMetrics]
    status: str = "completed"
    diverged_round: int | None = None
    xbar_final: np.ndarray | None = None
    distance_to_opt: float | None = None
    spectral_gap: float | None = None
    smoothness: float | None = None
    optimal_value: float | None = None
    x0: np.ndarray | None = None
    xbar: np.ndarray | None = None
    ubar: np.ndarray | None = None
    gradients: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    def series(self, column: str) -> np.ndarray:
        return np.array([getattr(m, column) for m in self.metrics])

    def tail_mean(self, column: str = "grad_norm_sq", window: float = 0.1) -> float:
        """Mean of ``column`` over recorded rounds in the final ``window`` fraction of the run."""
        rounds = self.series("round")
        last = rounds[-1]
        cutoff = last - window * last
        vals = self.series(column)
        return float(vals[rounds > cutoff].mean()) if np.any(rounds > cutoff) else float(vals[-1])

    def summary(self) -> dict:
        out = {
            "schema_version": 1,
            "status": self.status if self.completed else f"diverged@{self.diverged_round}",
            "config": self.config.to_dict(),
            "spectral_gap": self.spectral_gap,
            "smoothness": self.smoothness,
            "optimal_value": self.optimal_value,
            "distance_to_opt": self.distance_to_opt,
            "xbar_final": None if self.xbar_final is None else [float(v) for v in self.xbar_final],
        }
        if self.metrics:
            out["final"] = dict(zip(METRIC_COLUMNS, self.metrics[-1].as_row()))
            out["tail_mean_grad_norm_sq"] = self.tail_mean("grad_norm_sq", self.config.window)
        return out


def consensus_distance(swarm: SwarmState | np.ndarray) -> float:
    """``(1/n) sum_i ||x_i - xbar||^2``."""
    x = swarm.x if isinstance(swarm, SwarmState) else np.asarray(swarm)
    dev = x - x.mean(axis=0)
    return float(np.sum(dev * dev) / x.shape[0])


def build_mixing(topology: TopologyConfig) -> MixingMatrix:
    return build_mixing_matrix(build_topology(topology.kind, topology.n), topology.scheme)


def build_problem(config: RunConfig) -> QuadraticProblem:
    pc = config.problem
    return synth_quadratic(pc.d, config.topology.n, pc.zeta2, pc.seed, sigma2=pc.sigma2)


@np.errstate(over="ignore", invalid="ignore")
def _metrics(r: int, swarm: SwarmState, problem: ObjectiveSuite, tx: int) -> RoundMetrics:
    xbar = swarm.x.mean(axis=0)
    g = problem.global_gradient(xbar)
    return RoundMetrics(
        round=r,
        f_xbar=float(problem.global_value(xbar)),
        grad_norm_sq=float(g @ g),
        consensus_xi=consensus_distance(swarm),
        c_sum_norm=float(np.linalg.norm(swarm.c.sum(axis=0))),
        u_bar_norm=float(np.linalg.norm(swarm.u.mean(axis=0))),
        vectors_tx=tx,
    )


def run(
    config: RunConfig,
    *,
    problem: ObjectiveSuite | None = None,
    mixing: MixingMatrix | None = None,
    record_trajectory: bool = False,
    record_gradients: bool = False,
    swarm: SwarmState | None = None,
) -> RunResult:
    """Execute ``config.rounds`` synchronous rounds and record metrics.

    Metrics are recorded at round 0, every ``config.cadence`` rounds, and at
    the final round. Divergence ends the run early with status ``diverged``
    and the metrics gathered so far.

    ``problem``, ``mixing`` and ``swarm`` override what the config would
    build; they exist for replays and test hooks.
    """
    problem = problem if problem is not None else build_problem(config)
    mixing = mixing if mixing is not None else build_mixing(config.topology)
    if problem.n != mixing.n:
        raise ConfigError(f"problem has {problem.n} nodes but the mixing matrix has {mixing.n}")
    spec = config.algorithm
    stream = RandomStream(config.seed)
    x0 = config.x0.resolve(problem.d)
    if swarm is None:
        swarm = init_swarm(problem, spec, x0, stream)
    tx = mixing.directed_links() * vectors_per_link(spec.variant)

    result = RunResult(config=config, metrics=[_metrics(0, swarm, problem, 0)], x0=x0)
    try:
        result.spectral_gap = spectral_gap(mixing)
    except ValueError:
        result.spectral_gap = None
    result.smoothness = problem.smoothness
    R = config.rounds
    xbar = np.empty((R + 1, problem.d)) if record_trajectory else None
    ubar = np.empty((R + 1, problem.d)) if record_trajectory else None
    grads = np.empty((R, problem.n, problem.d)) if record_gradients else None
    if record_trajectory:
        xbar[0] = swarm.x.mean(axis=0)
        ubar[0] = swarm.u.mean(axis=0)

    last = 0
    for r in range(1, R + 1):
        try:
            swarm = step(swarm, mixing, problem, spec, stream)
            if r % config.cadence == 0 or r == R:
                m = _metrics(r, swarm, problem, tx)
                if not all(np.isfinite(m.as_row())):
                    raise DivergenceError(r, None, "metrics")
        except DivergenceError as exc:
            logger.warning("run diverged: %s", exc)
            result.status = "diverged"
            result.diverged_round = exc.round
            break
        last = r
        if record_trajectory:
            xbar[r] = swarm.x.mean(axis=0)
            ubar[r] = swarm.u.mean(axis=0)
        if record_gradients:
            grads[r - 1] = swarm.grads
        if r % config.cadence == 0 or r == R:
            result.metrics.append(m)

    result.xbar_final = swarm.x.mean(axis=0)
    if record_trajectory:
        result.xbar, result.ubar = xbar[: last + 1], ubar[: last + 1]
    if record_gradients:
        result.gradients = grads[:last]
    if isinstance(problem, QuadraticProblem):
        xstar = problem.global_minimizer()
        result.distance_to_opt = float(np.linalg.norm(result.xbar_final - xstar))
        result.optimal_value = problem.global_value(xstar)
    return result


def _parse_float(raw):
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {raw!r}") from None


def _parse_int(raw):
    try:
        v = float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"expected an integer, got {raw!r}") from None
    if v != int(v):
        raise ConfigError(f"expected an integer, got {raw!r}")
    return int(v)


def _set_zeta2(c, v):
    return c.replace(problem=replace(c.problem, zeta2=v))


def _set_sigma2(c, v):
    return c.replace(problem=replace(c.problem, sigma2=v))


def _set_beta(c, v):
    return c.replace(algorithm=replace(c.algorithm, beta=v))


def _set_eta(c, v):
    return c.replace(algorithm=replace(c.algorithm, eta=v))


def _set_variant(c, v):
    return c.replace(algorithm=replace(c.algorithm, variant=v))


def _set_topology(c, v):
    return c.replace(topology=replace(c.topology, kind=v))


def _set_n(c, v):
    return c.replace(topology=replace(c.topology, n=v))


# axis -> (parser, config updater)
SWEEP_AXES = {
    "zeta2": (_parse_float, _set_zeta2),
    "sigma2": (_parse_float, _set_sigma2),
    "beta": (_parse_float, _set_beta),
    "eta": (_parse_float, _set_eta),
    "variant": (str, _set_variant),
    "topology": (str, _set_topology),
    "n": (_parse_int, _set_n),
}


def parse_axis_value(axis: str, raw):
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r} (choose from {', '.join(SWEEP_AXES)})")
    value = SWEEP_AXES[axis][0](raw)
    if axis == "variant":
        value = Variant(value).value if value in {v.value for v in Variant} else value
    return value


def sweep_configs(base: RunConfig, axis: str, values, repeats: int = 1) -> list[tuple[object, int, RunConfig]]:
    """Expand a sweep into ``(value, repeat, config)`` triples, validating all of them.

    Each run's noise seed is a hash of ``(base seed, axis, value, repeat)``.
    The problem seed only depends on the repeat index, so runs that differ in
    ``zeta2`` share the same normalized targets.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r} (choose from {', '.join(SWEEP_AXES)})")
    if repeats < 1:
        raise ConfigError(f"repeats must be >= 1, got {repeats}")
    update = SWEEP_AXES[axis][1]
    out = []
    for raw in values:
        value = parse_axis_value(axis, raw)
        for k in range(repeats):
            cfg = update(base, value)
            cfg = cfg.replace(
                seed=derive_seed(base.seed, axis, value, k),
                problem=replace(cfg.problem, seed=base.problem.seed + k),
            )
            out.append((value, k, cfg))
    return out


def _run_plain(cfg: RunConfig) -> RunResult:
    return run(cfg)


def sweep(base: RunConfig, axis: str, values, repeats: int = 1, workers: int | None = None) -> list[RunResult]:
    """Run ``base`` once per (value, repeat), value-major order.

    Runs are independent; with ``workers > 1`` they execute in a process pool
    and the results are identical to a serial sweep.
    """
    jobs = [cfg for _, _, cfg in sweep_configs(base, axis, values, repeats)]
    if not jobs:
        return []
    workers = workers or base.workers or os.cpu_count() or 1
    workers = min(workers, len(jobs))
    if workers == 1:
        return [_run_plain(cfg) for cfg in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_plain, jobs))
