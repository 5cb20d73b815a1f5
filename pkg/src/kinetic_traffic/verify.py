"""Self-checks for the model invariants, runnable from the command line.

Each group exercises one structural property end to end:

  stochasticity   interaction tables are exact probability distributions
  conservation    density is preserved along trajectories
  continuity      nearby initial data stay within the growth bound
  uniqueness      one attracting equilibrium per density, matching the
                  closed form
  attractivity    random initial data relax onto that equilibrium
  sigma           the detected critical density sits at one half

The table builder is injectable so the stochasticity group can be pointed
at a deliberately broken construction; it must then fail.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .diagrams import METHOD_RECURSIVE, build_grid, sweep
from .dynamics import (
    DEFAULT_SEED,
    IntegrationConfig,
    KineticState,
    continuity_gap,
    integrate_batch,
    random_state_batch,
)
from .equilibrium import (
    BRUTEFORCE_MAX_N,
    equilibrium_bruteforce,
    equilibrium_recursive,
    is_attracting,
)
from .lattice import GameTable, ModelParams, build_game_table

__all__ = ["CheckResult", "run_suite", "VERIFY_DENSITIES"]

# densities probed by the equilibrium groups; both phases, away from the
# critical point where relaxation is algebraically slow
VERIFY_DENSITIES = (0.2, 0.4, 0.6, 0.8)

_ATTRACT_TOL = 1e-6
_MATCH_TOL = 1e-10

TableBuilder = Callable[[int, float], GameTable]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _check_stochasticity(n_max: int, table_builder: TableBuilder) -> CheckResult:
    rng = np.random.default_rng(DEFAULT_SEED)
    worst = 0.0
    for n in range(2, n_max + 1):
        densities = [0.0, 0.25, 0.5, 0.75, 1.0] + list(rng.uniform(0, 1, 8))
        for rho in densities:
            A = table_builder(n, float(rho)).A
            if A.min() < 0.0 or A.max() > 1.0:
                return CheckResult(
                    "stochasticity", False, f"entry outside [0, 1] at n={n}, rho={rho:g}"
                )
            sums = A.sum(axis=2)
            dev = float(np.abs(sums - 1.0).max())
            worst = max(worst, dev)
            if dev != 0.0:
                return CheckResult(
                    "stochasticity",
                    False,
                    f"row sum off by {dev:.3e} at n={n}, rho={rho:g}",
                )
            support = np.count_nonzero(A, axis=2)
            if support.max() > 2:
                return CheckResult(
                    "stochasticity", False, f"row with >2 outcomes at n={n}, rho={rho:g}"
                )
    return CheckResult("stochasticity", True, f"max row-sum deviation {worst:g}")


def _check_conservation(n_max: int) -> CheckResult:
    config = IntegrationConfig(dt=0.02, t_final=60.0)
    worst = 0.0
    for n in range(2, n_max + 1):
        F0 = np.concatenate(
            [random_state_batch(n, rho, 4, seed=DEFAULT_SEED + n) for rho in VERIFY_DENSITIES]
        )
        _, _, _, stats = integrate_batch(F0, ModelParams(n=n), config)
        worst = max(worst, stats.max_drift)
        if stats.max_drift > 1e-12:
            return CheckResult(
                "conservation", False, f"density drifted by {stats.max_drift:.3e} at n={n}"
            )
    return CheckResult("conservation", True, f"max density drift {worst:.3e}")


def _check_continuity(n_max: int) -> CheckResult:
    t = 5.0
    for n in range(2, n_max + 1):
        for rho in VERIFY_DENSITIES:
            pairs = random_state_batch(n, rho, 6, seed=DEFAULT_SEED + 7 * n)
            for i in range(0, 6, 2):
                gap, bound = continuity_gap(
                    KineticState(pairs[i]), KineticState(pairs[i + 1]), t, ModelParams(n=n)
                )
                if gap > bound:
                    return CheckResult(
                        "continuity",
                        False,
                        f"gap {gap:.3e} exceeds bound {bound:.3e} at n={n}, rho={rho:g}",
                    )
    return CheckResult("continuity", True, f"all sampled pairs within the growth bound up to t={t:g}")


def _check_uniqueness(n_max: int) -> CheckResult:
    for n in range(2, min(n_max, BRUTEFORCE_MAX_N) + 1):
        params = ModelParams(n=n)
        for rho in VERIFY_DENSITIES:
            candidates = equilibrium_bruteforce(n, rho, params)
            attracting = [
                c for c in candidates if is_attracting(c.verdict, c.from_larger_roots)
            ]
            if len(attracting) != 1:
                return CheckResult(
                    "uniqueness",
                    False,
                    f"{len(attracting)} attracting equilibria at n={n}, rho={rho:g}",
                )
            closed = equilibrium_recursive(n, rho).f_inf
            err = float(np.abs(attracting[0].f - closed).max())
            if err > _MATCH_TOL:
                return CheckResult(
                    "uniqueness",
                    False,
                    f"attracting equilibrium off the closed form by {err:.3e} "
                    f"at n={n}, rho={rho:g}",
                )
    return CheckResult(
        "uniqueness", True, f"one attracting equilibrium per density, matching within {_MATCH_TOL:g}"
    )


def _check_attractivity(n_max: int) -> CheckResult:
    # slowest relaxation rate among these densities is about 0.024, so a
    # horizon of 1500 leaves ~36 decay factors, ample for the tolerance;
    # converged runs freeze early and cost nothing
    config = IntegrationConfig(dt=0.02, t_final=1500.0)
    samples = 3
    worst = 0.0
    for n in range(2, n_max + 1):
        F0 = np.concatenate(
            [
                random_state_batch(n, rho, samples, seed=DEFAULT_SEED + 13 * n)
                for rho in VERIFY_DENSITIES
            ]
        )
        F, conv, _, _ = integrate_batch(F0, ModelParams(n=n), config)
        if not conv.all():
            return CheckResult(
                "attractivity", False, f"{int((~conv).sum())} runs never went steady at n={n}"
            )
        targets = np.concatenate(
            [
                np.tile(equilibrium_recursive(n, rho).f_inf, (samples, 1))
                for rho in VERIFY_DENSITIES
            ]
        )
        err = float(np.abs(F - targets).max())
        worst = max(worst, err)
        if err > _ATTRACT_TOL:
            return CheckResult(
                "attractivity", False, f"final state off by {err:.3e} at n={n}"
            )
    return CheckResult("attractivity", True, f"max distance to equilibrium {worst:.3e}")


def _check_sigma(n_max: int) -> CheckResult:
    grid = build_grid(101)
    spacing = 1.0 / 100.0
    for n in range(2, n_max + 1):
        d = sweep(n, grid, METHOD_RECURSIVE)
        if abs(d.sigma - 0.5) > spacing / 2:
            return CheckResult(
                "sigma", False, f"detected sigma {d.sigma:g} at n={n}, expected 0.5"
            )
    return CheckResult("sigma", True, "critical density 0.5 recovered for every n")


def run_suite(n_max: int = 6, table_builder: TableBuilder = build_game_table) -> list[CheckResult]:
    """Run every invariant group for n = 2 .. n_max.

    Returns one CheckResult per group, in a fixed order.
    """
    if n_max < 2:
        raise ValueError(f"n_max must be at least 2, got {n_max}")
    return [
        _check_stochasticity(n_max, table_builder),
        _check_conservation(n_max),
        _check_continuity(n_max),
        _check_uniqueness(n_max),
        _check_attractivity(n_max),
        _check_sigma(n_max),
    ]
