"""Rate-bound diagnostics, heterogeneity verdicts, and independent oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .algorithms import AlgorithmSpec, InitMode, Variant, init_swarm, step
from .config import RunConfig
from .engine import RunResult, build_mixing, build_problem, consensus_distance, run
from .exceptions import ConfigError
from .problem import ObjectiveSuite
from .rng import RandomStream
from .topology import MixingMatrix, mixing_residuals, spectral_gap

__all__ = [
    "RateBoundInputs",
    "RateBound",
    "mt_rate_bound",
    "admissible_step_size",
    "HeterogeneityVerdict",
    "heterogeneity_independence_test",
    "reference_sgdm_xbar",
    "reference_gt_init",
    "reference_gt_step",
    "InvariantCheck",
    "run_invariant_battery",
]


@dataclass(frozen=True)
class RateBoundInputs:
    r0: float
    sigma2: float
    L: float
    p: float
    beta: float
    n: int
    R: int

    def __post_init__(self):
        for name in ("r0", "sigma2", "L"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be a finite number >= 0, got {v!r}")
        if not (0.0 < self.p <= 1.0):
            raise ConfigError(f"p must be in (0, 1], got {self.p!r}")
        if not (0.0 <= self.beta < 1.0):
            raise ConfigError(f"beta must be in [0,1), got {self.beta!r}")
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n!r}")
        if self.R < 1:
            raise ConfigError(f"R must be >= 1, got {self.R!r}")


class RateBound(NamedTuple):
    """Structural terms of the Momentum Tracking rate, unit constants.

    A scaling diagnostic, not a guarantee: the true bound hides constants.
    """

    term1: float
    term2: float
    term3: float
    total: float


def mt_rate_bound(inp: RateBoundInputs) -> RateBound:
    """Evaluate the three terms of the Momentum Tracking bound.

    There is deliberately no heterogeneity argument.
    """
    r0, s2, L, p, b, n, R = inp.r0, inp.sigma2, inp.L, inp.p, inp.beta, inp.n, inp.R
    term1 = math.sqrt(r0 * s2 * L / (n * R))
    term2 = (r0**2 * s2 * L**2 / (p**4 * R**2 * (1 - b)) * (1 + p * b**2 / (1 - b))) ** (1.0 / 3.0)
    term3 = L * r0 / ((1 - b) * p**2 * R) * math.sqrt(1 + b**2 / ((1 - b**2) ** 3 * p))
    return RateBound(term1, term2, term3, term1 + term2 + term3)


def admissible_step_size(L: float, p: float, beta: float) -> float:
    """Conservative step size from the convergence proof's step-size condition.

    ``(1-beta)^2 p^2 / (16 L sqrt(7836 beta^2 / ((1-beta^2)^3 p) + 282))``.
    Far smaller than what works in practice.
    """
    return (1 - beta) ** 2 * p**2 / (16 * L * math.sqrt(7836 * beta**2 / ((1 - beta**2) ** 3 * p) + 282))


@dataclass(frozen=True)
class HeterogeneityVerdict:
    passed: bool
    ratio: float
    means: dict
    monotone_increasing: bool
    threshold: float
    window: float

    def to_dict(self) -> dict:
        return {
            "verdict": "PASS" if self.passed else "FAIL",
            "ratio": self.ratio,
            "means": {repr(k): v for k, v in self.means.items()},
            "monotone_increasing": self.monotone_increasing,
            "threshold": self.threshold,
            "window": self.window,
            "note": "threshold chosen for the d=50, n=25 ring benchmark; recalibrate for other configs",
        }


def heterogeneity_independence_test(
    results_by_zeta2: dict, threshold: float = 1.5, window: float = 0.1
) -> HeterogeneityVerdict:
    """Compare final-window gradient norms across heterogeneity levels.

    For each level, averages ``||grad f(xbar)||^2`` over the final ``window``
    fraction of rounds and across seeds. Passes when the max/min ratio of
    those means is at most ``threshold``. ``monotone_increasing`` reports
    whether the means strictly increase with the level, which is what a
    heterogeneity-sensitive method shows.
    """
    if len(results_by_zeta2) < 2:
        raise ConfigError("need at least two heterogeneity levels")
    lengths = {len(r.metrics) for rs in results_by_zeta2.values() for r in rs}
    if len(lengths) != 1:
        raise ConfigError(f"mismatched series lengths across runs: {sorted(lengths)}")
    means = {}
    for z in sorted(results_by_zeta2):
        runs = results_by_zeta2[z]
        if not runs:
            raise ConfigError(f"no runs for zeta2={z}")
        means[z] = float(np.mean([r.tail_mean("grad_norm_sq", window) for r in runs]))
    vals = list(means.values())
    lo, hi = min(vals), max(vals)
    ratio = hi / lo if lo > 0 else (1.0 if hi == 0 else math.inf)
    monotone = all(b > a for a, b in zip(vals, vals[1:]))
    return HeterogeneityVerdict(ratio <= threshold, ratio, means, monotone, threshold, window)


def reference_sgdm_xbar(
    p: ObjectiveSuite | None, gradients, eta: float, beta: float, x0, u0_mean=None
) -> np.ndarray:
    """Replay the averaged recursion from a gradient log.

    ``ubar <- beta ubar + mean_i g_i``, ``xbar <- xbar - eta ubar``. Uses the
    logged gradients only; the topology never enters.

    Args:
        p: objective the log came from (only used to check shapes).
        gradients: ``(R, n, d)`` stochastic gradients, one slice per round.
        x0: common starting point.
        u0_mean: average initial momentum, zero for every initialization.

    Returns:
        ``(R + 1, d)`` array of averaged iterates.
    """
    grads = np.asarray(gradients, dtype=float)
    if grads.ndim != 3:
        raise ConfigError(f"gradient log must have shape (R, n, d), got {grads.shape}")
    if p is not None and grads.shape[1:] != (p.n, p.d):
        raise ConfigError(f"gradient log shape {grads.shape[1:]} does not match problem ({p.n}, {p.d})")
    xbar = np.empty((grads.shape[0] + 1, grads.shape[2]))
    xbar[0] = np.asarray(x0, dtype=float)
    ubar = np.zeros(grads.shape[2]) if u0_mean is None else np.asarray(u0_mean, dtype=float)
    for r, g in enumerate(grads):
        ubar = beta * ubar + g.mean(axis=0)
        xbar[r + 1] = xbar[r] - eta * ubar
    return xbar


def reference_gt_init(p: ObjectiveSuite, x0, stream: RandomStream):
    """Gradient Tracking start: every node at ``x0``, ``u = c = g - mean(g)``."""
    x = np.tile(np.asarray(x0, dtype=np.float64), (p.n, 1))
    g = p.stochastic_gradients(x, stream, 0)
    u = 1.0 * (g - g.mean(axis=0))
    return x, u, u.copy()


def reference_gt_step(x, c, w: np.ndarray, p: ObjectiveSuite, eta: float, stream: RandomStream, round: int):
    """One Gradient Tracking round written without any momentum term.

    Returns ``(x, u, c)`` where ``u`` is the freshly drawn gradient.
    """
    g = p.stochastic_gradients(x, stream, round)
    x_new = w @ x - eta * (g - c)
    c_new = w @ (c - g) + g
    return x_new, g, c_new


@dataclass
class InvariantCheck:
    name: str
    passed: bool
    residual: float
    detail: str = ""
    extra: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: worst residual {self.residual:.3e}" + (f" ({self.detail})" if self.detail else "")


def _scale(*arrays) -> float:
    return max(1.0, *(float(np.max(np.abs(a))) for a in arrays))


def run_invariant_battery(
    config: RunConfig,
    rounds: int = 200,
    mixing: MixingMatrix | None = None,
    samples: int = 200,
    tol: float = 1e-9,
) -> list[InvariantCheck]:
    """Fast checks of the structural invariants on ``config`` at reduced length."""
    cfg = config.replace(rounds=rounds, cadence=1)
    mixing = mixing if mixing is not None else build_mixing(cfg.topology)
    problem = build_problem(cfg)
    checks: list[InvariantCheck] = []

    res = mixing_residuals(mixing)
    stoch = max(res["row_sum"], res["col_sum"])
    checks.append(InvariantCheck("double_stochasticity", stoch <= 1e-12, stoch))
    checks.append(InvariantCheck("symmetry", res["symmetry"] == 0.0, res["symmetry"]))

    try:
        p = spectral_gap(mixing)
    except ValueError as exc:
        checks.append(InvariantCheck("mixing_contraction", False, math.inf, str(exc)))
        p = None
    if p is not None:
        rng = np.random.default_rng(cfg.seed)
        worst = -math.inf
        for _ in range(samples):
            X = rng.standard_normal((mixing.n, problem.d))
            Xbar = X.mean(axis=0)
            lhs = np.sum((mixing.w @ X - Xbar) ** 2)
            rhs = np.sum((X - Xbar) ** 2)
            worst = max(worst, (lhs - (1 - p) * rhs) / max(rhs, 1e-300))
        checks.append(InvariantCheck("mixing_contraction", worst <= tol, max(worst, 0.0), f"p={p:.6g}"))

        # pure gossip from a scattered start: consensus distance contracts by (1 - p)
        spread = np.random.default_rng(cfg.seed + 1).standard_normal((mixing.n, problem.d))
        swarm = init_swarm(problem, replace(cfg.algorithm, eta=0.0), np.zeros(problem.d), RandomStream(cfg.seed))
        swarm = replace(swarm, x=spread)
        stream = RandomStream(cfg.seed)
        spec0 = replace(cfg.algorithm, eta=0.0)
        worst = 0.0
        xi = consensus_distance(swarm)
        for _ in range(min(rounds, 50)):
            swarm = step(swarm, mixing, problem, spec0, stream)
            xi_new = consensus_distance(swarm)
            worst = max(worst, xi_new - (1 - p) * xi)
            xi = xi_new
        checks.append(InvariantCheck("gossip_contraction", worst <= tol, worst))

    result = run(cfg, problem=problem, mixing=mixing, record_trajectory=True, record_gradients=True)
    if not result.completed:
        checks.append(InvariantCheck("run_completed", False, math.inf, f"diverged at round {result.diverged_round}"))
        return checks

    if cfg.algorithm.variant.tracks:
        c_sum = _c_sum_residual(cfg, problem, mixing)
        checks.append(InvariantCheck("c_sum_zero", c_sum <= tol, c_sum))

    replay = reference_sgdm_xbar(problem, result.gradients, cfg.algorithm.eta, cfg.algorithm.effective_beta, result.x0)
    err = float(np.max(np.abs(replay - result.xbar))) / _scale(result.xbar)
    checks.append(InvariantCheck("xbar_recursion", err <= tol, err))

    eq = _gt_equivalence_residual(cfg, problem, mixing)
    checks.append(InvariantCheck("beta0_equivalence", eq == 0.0, eq))
    return checks


def _c_sum_residual(cfg: RunConfig, problem, mixing) -> float:
    stream = RandomStream(cfg.seed)
    swarm = init_swarm(problem, cfg.algorithm, cfg.x0.resolve(problem.d), stream)
    worst = 0.0
    for _ in range(cfg.rounds + 1):
        s = float(np.linalg.norm(swarm.c.sum(axis=0)))
        worst = max(worst, s / max(1.0, float(np.max(np.linalg.norm(swarm.c, axis=1)))))
        if swarm.round == cfg.rounds:
            break
        swarm = step(swarm, mixing, problem, cfg.algorithm, stream)
    return worst


def _gt_equivalence_residual(cfg: RunConfig, problem, mixing) -> float:
    """Max abs difference between MT(beta=0), the GT alias, and the reference GT."""
    x0 = cfg.x0.resolve(problem.d)
    mt = AlgorithmSpec(Variant.MOMENTUM_TRACKING, cfg.algorithm.eta, 0.0, InitMode.THEOREM)
    gt = AlgorithmSpec(Variant.GRADIENT_TRACKING, cfg.algorithm.eta, 0.9, InitMode.THEOREM)
    stream = RandomStream(cfg.seed)
    a = init_swarm(problem, mt, x0, stream)
    b = init_swarm(problem, gt, x0, stream)
    x, u, c = reference_gt_init(problem, x0, stream)
    worst = 0.0
    for r in range(cfg.rounds):
        a = step(a, mixing, problem, mt, stream)
        b = step(b, mixing, problem, gt, stream)
        x, u, c = reference_gt_step(x, c, mixing.w, problem, cfg.algorithm.eta, stream, r)
        for arr_a, arr_b, arr_ref in ((a.x, b.x, x), (a.u, b.u, u), (a.c, b.c, c)):
            worst = max(worst, float(np.max(np.abs(arr_a - arr_b))), float(np.max(np.abs(arr_a - arr_ref))))
    return worst
