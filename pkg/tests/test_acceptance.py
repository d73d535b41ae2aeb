"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line."""

import inspect
import itertools
import math
from pathlib import Path

import numpy as np
import pytest

from momtrack.algorithms import AlgorithmSpec, SwarmState, init_swarm, step
from momtrack.analysis import (
    RateBoundInputs,
    heterogeneity_independence_test,
    mt_rate_bound,
    reference_gt_init,
    reference_gt_step,
    reference_sgdm_xbar,
)
from momtrack.config import ProblemConfig, RunConfig, TopologyConfig, X0Config, load_config
from momtrack.engine import build_mixing, build_problem, consensus_distance, run, sweep
from momtrack.exceptions import ConfigError
from momtrack.rng import RandomStream
from momtrack.topology import TopologyKind, WeightScheme, spectral_gap

REFERENCE = load_config(Path(__file__).resolve().parent.parent / "configs" / "reference.yaml")
ZETA2_LEVELS = [0.0, 25.0, 50.0]
SEEDS = 3


def with_algorithm(cfg: RunConfig, **kw) -> RunConfig:
    a = cfg.algorithm
    fields = dict(variant=a.variant, eta=a.eta, beta=a.beta, init_mode=a.init_mode)
    fields.update(kw)
    return cfg.replace(algorithm=AlgorithmSpec(**fields))


@pytest.fixture(scope="module")
def reference_sweeps():
    """Reference benchmark at every heterogeneity level, 3 seeds each, for MT and DSGDm."""
    out = {}
    for variant in ("momentum_tracking", "dsgdm"):
        base = with_algorithm(REFERENCE, variant=variant)
        results = sweep(base, "zeta2", ZETA2_LEVELS, repeats=SEEDS)
        out[variant] = {z: results[k * SEEDS : (k + 1) * SEEDS] for k, z in enumerate(ZETA2_LEVELS)}
    return out


def random_configs(count: int, seed: int, variants=("momentum_tracking",)):
    """Small randomized configs over topology, scheme, beta, eta and init mode."""
    rng = np.random.default_rng(seed)
    shapes = [(k, n) for k in TopologyKind for n in (4, 8, 16) if not (k is TopologyKind.RING and n < 3)]
    configs = []
    for _ in range(count):
        kind, n = shapes[rng.integers(len(shapes))]
        configs.append(
            RunConfig(
                topology=TopologyConfig(kind, n, list(WeightScheme)[rng.integers(2)]),
                problem=ProblemConfig(d=int(rng.integers(2, 9)), zeta2=float(rng.uniform(0, 50)), seed=int(rng.integers(1000))),
                algorithm=AlgorithmSpec(
                    variants[rng.integers(len(variants))],
                    eta=float(10 ** rng.uniform(-4, -2.5)),
                    beta=float(rng.choice([0.0, 0.5, 0.9, 0.99])),
                    init_mode=["theorem", "zero"][rng.integers(2)],
                ),
                rounds=500,
                seed=int(rng.integers(10**6)),
                x0=X0Config("sphere", radius=float(rng.uniform(0, 5)), seed=int(rng.integers(1000))),
            )
        )
    return configs


def test_criterion_1_heterogeneity_independence(reference_sweeps, report):
    mt = heterogeneity_independence_test(reference_sweeps["momentum_tracking"], threshold=1.5, window=0.1)
    dm = heterogeneity_independence_test(reference_sweeps["dsgdm"], threshold=1.5, window=0.1)
    means = [dm.means[z] for z in ZETA2_LEVELS]
    dm_ok = all(b > a for a, b in zip(means, means[1:])) and means[-1] / means[0] > 1.5
    passed = mt.passed and mt.ratio <= 1.5 and dm_ok
    detail = f"MT ratio {mt.ratio:.3f}; DSGDm means " + ", ".join(f"{m:.3e}" for m in means) + f", ratio {means[-1] / means[0]:.2f}"
    assert report(1, "heterogeneity independence", passed, detail), detail


def test_criterion_2_corrector_sum_vanishes(report):
    worst, runs = 0.0, 0
    for cfg in random_configs(50, seed=2):
        problem = build_problem(cfg)
        mixing = build_mixing(cfg.topology)
        stream = RandomStream(cfg.seed)
        swarm = init_swarm(problem, cfg.algorithm, cfg.x0.resolve(problem.d), stream)
        for r in range(cfg.rounds + 1):
            if r:
                swarm = step(swarm, mixing, problem, cfg.algorithm, stream)
            scale = max(1.0, float(np.max(np.linalg.norm(swarm.c, axis=1))))
            worst = max(worst, float(np.linalg.norm(swarm.c.sum(axis=0))) / scale)
        runs += 1
    passed = runs == 50 and worst <= 1e-9
    assert report(2, "corrector sum is zero", passed, f"{runs} configs x 500 rounds, worst |sum c|/scale {worst:.2e}"), worst


def test_criterion_3_average_recursion_replay(report):
    variants = ("momentum_tracking", "gradient_tracking", "dsgdm", "dsgd")
    worst, stored = 0.0, 0
    for cfg in random_configs(40, seed=3, variants=variants):
        result = run(cfg, record_trajectory=True, record_gradients=True)
        assert result.completed
        replay = reference_sgdm_xbar(
            build_problem(cfg), result.gradients, cfg.algorithm.eta, cfg.algorithm.effective_beta, result.x0, u0_mean=result.ubar[0]
        )
        scale = max(1.0, float(np.max(np.abs(result.xbar))))
        worst = max(worst, float(np.max(np.abs(replay - result.xbar))) / scale)
        stored += 1
    passed = worst <= 1e-9
    assert report(3, "average iterate recursion", passed, f"{stored} stored runs, worst deviation/scale {worst:.2e}"), worst


def test_criterion_4_beta0_equals_gradient_tracking(report):
    identical = 0
    for cfg in random_configs(5, seed=4):
        problem = build_problem(cfg)
        mixing = build_mixing(cfg.topology)
        x0 = cfg.x0.resolve(problem.d)
        eta = cfg.algorithm.eta
        stream = RandomStream(cfg.seed)
        specs = [AlgorithmSpec("momentum_tracking", eta, 0.0, "theorem"), AlgorithmSpec("gradient_tracking", eta, 0.5, "theorem")]
        swarms = [init_swarm(problem, s, x0, stream) for s in specs]
        x, u, c = reference_gt_init(problem, x0, stream)
        same = all(np.array_equal(s.x, x) and np.array_equal(s.u, u) and np.array_equal(s.c, c) for s in swarms)
        for r in range(1000):
            swarms = [step(s, mixing, problem, spec, stream) for s, spec in zip(swarms, specs)]
            x, u, c = reference_gt_step(x, c, mixing.w, problem, eta, stream, r)
            same = same and all(np.array_equal(s.x, x) and np.array_equal(s.u, u) and np.array_equal(s.c, c) for s in swarms)
        identical += same
    passed = identical == 5
    assert report(4, "beta=0 equals gradient tracking", passed, f"{identical}/5 configs bit-identical over 1000 rounds"), identical


def test_criterion_5_mixing_contraction(report):
    rng = np.random.default_rng(5)
    worst_static, worst_run, cases = -np.inf, -np.inf, 0
    for kind, scheme, n in itertools.product(TopologyKind, WeightScheme, (4, 8, 16, 25)):
        try:
            topo = TopologyConfig(kind, n, scheme)
        except ConfigError:
            continue  # e.g. hypercube at n = 25
        mixing = build_mixing(topo)
        p = spectral_gap(mixing)
        for _ in range(200):
            X = rng.standard_normal((n, 6)) * rng.uniform(0.1, 10)
            before = float(np.sum((X - X.mean(axis=0)) ** 2))
            after = float(np.sum((mixing.w @ X - X.mean(axis=0)) ** 2))
            worst_static = max(worst_static, after - (1 - p + 1e-9) * before)

        cfg = RunConfig(
            topology=topo,
            problem=ProblemConfig(d=6, zeta2=25.0),
            algorithm=AlgorithmSpec("dsgd", eta=0.0),
            rounds=60,
        )
        X = rng.standard_normal((n, 6))
        start = SwarmState(x=X, u=np.zeros_like(X), c=np.zeros_like(X))
        xi = run(cfg, swarm=start).series("consensus_xi")
        assert xi[0] == pytest.approx(consensus_distance(X))
        worst_run = max(worst_run, float(np.max(xi[1:] - ((1 - p) * xi[:-1] + 1e-9))))
        cases += 1
    passed = worst_static <= 0 and worst_run <= 0
    detail = f"{cases} topology/scheme/n cases, worst slack {worst_static:.2e} (matrix), {worst_run:.2e} (eta=0 run)"
    assert report(5, "gossip contraction", passed, detail), detail


def test_criterion_6_noise_free_convergence(report):
    rng = np.random.default_rng(6)
    worst = 0.0
    for k in range(10):
        problem = ProblemConfig(d=int(rng.integers(2, 11)), zeta2=float(rng.uniform(1, 50)), sigma2=0.0, seed=int(rng.integers(10**4)))
        x0 = X0Config("sphere", radius=float(rng.uniform(0.5, 5)), seed=k)
        for beta in (0.0, 0.5, 0.9):
            cfg = RunConfig(
                topology=TopologyConfig("complete", 8),
                problem=problem,
                algorithm=AlgorithmSpec("momentum_tracking", eta=0.02, beta=beta),
                rounds=2000,
                cadence=2000,
                x0=x0,
            )
            result = run(cfg)
            assert result.completed
            worst = max(worst, result.distance_to_opt)
    passed = worst <= 1e-8
    assert report(6, "noise-free convergence to the minimizer", passed, f"worst |xbar - x*| {worst:.2e} over 30 runs"), worst


def test_criterion_7_zero_init_ablation(reference_sweeps, report):
    zeta2 = REFERENCE.problem.zeta2
    theorem = [r.tail_mean(window=0.1) for r in reference_sweeps["momentum_tracking"][zeta2]]
    zero_cfg = with_algorithm(REFERENCE, variant="momentum_tracking", init_mode="zero")
    zero = [r.tail_mean(window=0.1) for r in sweep(zero_cfg, "zeta2", [zeta2], repeats=SEEDS)]
    a, b = float(np.mean(theorem)), float(np.mean(zero))
    ratio = max(a, b) / min(a, b)
    passed = ratio <= 1.2
    assert report(7, "zero-init ablation", passed, f"theorem {a:.4e}, zero {b:.4e}, ratio {ratio:.4f}"), ratio


def test_criterion_8_rate_bound_scaling(report):
    worst = 0.0

    def rel(a, b):
        return abs(a - b) / abs(b)

    def shape(p, beta):
        return math.sqrt(1 + beta**2 / ((1 - beta**2) ** 3 * p)) / p**2

    for r0, s2, L, p, beta, n in itertools.product((0.5, 4.0), (0.25, 3.0), (1.0, 25.0), (0.05, 0.3, 1.0), (0.0, 0.5, 0.9), (1, 25)):
        base = dict(r0=r0, sigma2=s2, L=L, p=p, beta=beta, n=n)
        for R in (10, 1000, 20000):
            a = mt_rate_bound(RateBoundInputs(**base, R=R))
            for k in (2, 4, 9):
                b = mt_rate_bound(RateBoundInputs(**base, R=k * R))
                worst = max(worst, rel(a.term1 / b.term1, k**0.5), rel(a.term2 / b.term2, k ** (2 / 3)), rel(a.term3 / b.term3, k))
            for q in (0.02, 0.5, 1.0):
                c = mt_rate_bound(RateBoundInputs(**{**base, "p": q}, R=R))
                worst = max(worst, rel(a.term3 / c.term3, shape(p, beta) / shape(q, beta)))
            assert a.total == a.term1 + a.term2 + a.term3

    names = set(inspect.signature(RateBoundInputs).parameters) | set(inspect.signature(mt_rate_bound).parameters)
    no_zeta = not any("zeta" in name for name in names)
    try:
        RateBoundInputs(r0=1, sigma2=1, L=1, p=1, beta=0, n=1, R=1, zeta2=1.0)
        no_zeta = False
    except TypeError:
        pass
    passed = worst <= 1e-12 and no_zeta
    assert report(8, "rate-bound scaling", passed, f"worst relative error {worst:.1e}, heterogeneity input absent: {no_zeta}"), worst
