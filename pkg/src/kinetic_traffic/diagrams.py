"""Fundamental and speed diagrams swept over the density range."""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import IntegrationConfig, integrate_batch
from .equilibrium import (
    CRITICAL_DENSITY,
    PHASE_CONGESTED,
    PHASE_FREE,
    equilibrium_recursive,
)
from .errors import MalformedDiagramError
from .lattice import ModelParams, build_lattice

__all__ = [
    "METHOD_RECURSIVE",
    "METHOD_INTEGRATE",
    "UNITS_DIMENSIONLESS",
    "UNITS_PHYSICAL",
    "U_TOL",
    "INTEGRATE_U_TOL",
    "DiagramPoint",
    "Diagram",
    "build_grid",
    "sweep",
    "detect_sigma",
    "rescale_dimensional",
]

METHOD_RECURSIVE = "recursive"
METHOD_INTEGRATE = "integrate"

UNITS_DIMENSIONLESS = "dimensionless"
UNITS_PHYSICAL = "physical"

# mean-speed slack for calling a point free flow
U_TOL = 1e-9

# integrated steady states stop at a finite derivative norm, which leaves
# the mean speed up to ~1e-7 below one in the free phase, so those sweeps
# need a coarser threshold; congested speeds sit percent-level below one,
# leaving four orders of margin
INTEGRATE_U_TOL = 1e-6

# integrate sweeps start from a uniform split, so near-critical and very
# thin grid points need a long horizon before the derivative dies down
_SWEEP_CONFIG = IntegrationConfig(dt=0.02, t_final=4000.0, steady_tol=1e-10)


@dataclass(frozen=True)
class DiagramPoint:
    rho: float
    q: float
    u: float
    phase: str
    converged: bool = True


@dataclass(frozen=True)
class Diagram:
    n: int
    method: str
    units: str
    sigma: float
    q_max: float
    points: tuple[DiagramPoint, ...]

    def __post_init__(self):
        r = [p.rho for p in self.points]
        if len(r) < 2:
            raise ValueError("a diagram needs at least two grid points")
        if any(b <= a for a, b in zip(r, r[1:])):
            raise ValueError("grid densities must be strictly increasing")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])


def build_grid(steps: int = 201) -> np.ndarray:
    """Uniform density grid on [0, 1] with the critical point inserted.

    The flux has a kink at density 1/2; sampling it exactly keeps the
    peak of the diagram on the grid for every step count.
    """
    if steps < 2:
        raise ValueError(f"grid needs at least 2 points, got {steps}")
    grid = np.linspace(0.0, 1.0, steps)
    return np.unique(np.concatenate([grid, [CRITICAL_DENSITY]]))


def _phase_of(rho: float) -> str:
    return PHASE_FREE if rho <= CRITICAL_DENSITY else PHASE_CONGESTED


def _sweep_chunk(args) -> list[tuple[float, float, float, str, bool]]:
    # module-level so process pools can pickle it
    n, rhos, method, eta0, config = args
    speeds = build_lattice(n).speeds
    rows = []
    if method == METHOD_RECURSIVE:
        for r in rhos:
            f = equilibrium_recursive(n, float(r)).f_inf
            q = float(speeds @ f)
            u = q / r if r > 0 else 1.0
            rows.append((float(r), q, u, _phase_of(float(r)), True))
        return rows
    F0 = np.outer(rhos, np.full(n, 1.0 / n))
    params = ModelParams(n=n, eta0=eta0)
    F, conv, _, _ = integrate_batch(F0, params, config)
    Q = F @ speeds
    for i, r in enumerate(rhos):
        q = float(Q[i])
        u = q / r if r > 0 else 1.0
        rows.append((float(r), q, u, _phase_of(float(r)), bool(conv[i])))
    return rows


def sweep(
    n: int,
    grid: np.ndarray | None = None,
    method: str = METHOD_RECURSIVE,
    params: ModelParams | None = None,
    config: IntegrationConfig | None = None,
    jobs: int = 1,
) -> Diagram:
    """Equilibrium observables across a density grid.

    Args:
        n: number of speed classes.
        grid: densities to sample; defaults to build_grid().
        method: "recursive" evaluates the closed form, "integrate" relaxes
            a uniform split at each density until steady.  Points whose
            derivative never drops below the steady tolerance are kept but
            marked converged=False.
        params: model constants; defaults to ModelParams(n).
        config: stepper settings for the integrate method.
        jobs: number of worker processes; the grid is split into
            contiguous chunks, so results do not depend on jobs.

    Returns:
        Diagram over the grid with the detected critical density.
    """
    if method not in (METHOD_RECURSIVE, METHOD_INTEGRATE):
        raise ValueError(f"unknown sweep method {method!r}")
    params = params or ModelParams(n=n)
    if params.n != n:
        raise ValueError(f"params expect n={params.n}, got n={n}")
    grid = build_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be a vector of at least 2 densities")
    if grid.min() < 0.0 or grid.max() > 1.0:
        raise ValueError("grid densities must lie in [0, 1]")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid densities must be strictly increasing")
    if jobs < 1:
        raise ValueError(f"jobs must be at least 1, got {jobs}")
    config = config or _SWEEP_CONFIG
    chunks = np.array_split(grid, jobs) if jobs > 1 else [grid]
    tasks = [(int(n), chunk, method, params.eta0, config) for chunk in chunks if chunk.size]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows_lists = list(pool.map(_sweep_chunk, tasks))
    else:
        rows_lists = [_sweep_chunk(t) for t in tasks]
    points = tuple(
        DiagramPoint(rho=r, q=q, u=u, phase=ph, converged=cv)
        for rows in rows_lists
        for (r, q, u, ph, cv) in rows
    )
    good = [p.q for p in points if p.converged]
    q_max = max(good) if good else float("nan")
    diagram = Diagram(
        n=int(n),
        method=method,
        units=UNITS_DIMENSIONLESS,
        sigma=float("nan"),
        q_max=q_max,
        points=points,
    )
    u_tol = INTEGRATE_U_TOL if method == METHOD_INTEGRATE else U_TOL
    sigma = detect_sigma(diagram, u_tol)
    return Diagram(
        n=diagram.n,
        method=method,
        units=UNITS_DIMENSIONLESS,
        sigma=sigma,
        q_max=q_max,
        points=points,
    )


def detect_sigma(diagram: Diagram, u_tol: float = U_TOL) -> float:
    """End of the free phase: largest density still moving at full speed.

    Scans converged points for the largest rho with u >= 1 - u_tol.  The
    flux peaks there, so this locates the capacity of the road without
    relying on the argmax of q, which is flat to first order.
    """
    if diagram.units != UNITS_DIMENSIONLESS:
        raise ValueError("sigma detection expects a dimensionless diagram")
    free = [
        p.rho
        for p in diagram.points
        if p.converged and p.rho > 0.0 and p.u >= 1.0 - u_tol
    ]
    if not free:
        raise MalformedDiagramError(
            "no converged point with positive density moves at full speed; "
            "there is no free phase to delimit"
        )
    sigma = max(free)
    if sigma >= diagram.points[-1].rho:
        warnings.warn("free phase spans the whole density range", stacklevel=2)
    return float(sigma)


def rescale_dimensional(diagram: Diagram, params: ModelParams) -> Diagram:
    """Convert a dimensionless diagram to vehicles/km and km/h."""
    if diagram.units != UNITS_DIMENSIONLESS:
        raise ValueError("diagram is already in physical units")
    rm, vm = params.rho_max, params.v_max
    points = tuple(
        DiagramPoint(
            rho=p.rho * rm,
            q=p.q * rm * vm,
            u=p.u * vm,
            phase=p.phase,
            converged=p.converged,
        )
        for p in diagram.points
    )
    return Diagram(
        n=diagram.n,
        method=diagram.method,
        units=UNITS_PHYSICAL,
        sigma=diagram.sigma * rm,
        q_max=diagram.q_max * rm * vm,
        points=points,
    )
