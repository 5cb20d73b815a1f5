"""Steady states of the interaction dynamics and their stability.

Setting the time derivative to zero decouples into one scalar quadratic
per class, solvable from the bottom class upward.  The stationary share
of stopped vehicles is 0 below the critical density 1/2 and 2*rho - 1
above it; each intermediate class solves

    -rho f_j^2 + B f_j + C = 0,
    B = (1 - 3 rho) * (f_1 + ... + f_{j-1}) + rho (2 rho - 1),
    C = (1 - rho) * f_{j-1} * (rho - (f_1 + ... + f_{j-2})),

whose larger root is the attracting one, and the top class takes the
remaining mass.  Enumerating both roots at every level instead gives
every stationary point, which is how the brute-force cross-check works.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import _rhs_batch
from .errors import ConsistencyError
from .lattice import ModelParams, build_game_table

__all__ = [
    "STABLE",
    "UNSTABLE",
    "MARGINAL",
    "PHASE_FREE",
    "PHASE_CONGESTED",
    "CRITICAL_DENSITY",
    "BRUTEFORCE_MAX_N",
    "BranchRecord",
    "EquilibriumResult",
    "EquilibriumCandidate",
    "StabilityReport",
    "equilibrium_f1",
    "equilibrium_quadratic",
    "equilibrium_recursive",
    "equilibrium_bruteforce",
    "jacobian",
    "stability_report",
    "classify_stability",
]

STABLE = "stable"
UNSTABLE = "unstable"
MARGINAL = "marginal"

PHASE_FREE = "free"
PHASE_CONGESTED = "congested"

CRITICAL_DENSITY = 0.5

# brute force doubles its branch count per class
BRUTEFORCE_MAX_N = 12

_TINY = 1e-12
_EIG_TOL = 1e-9


@dataclass(frozen=True)
class BranchRecord:
    """How one component of an equilibrium vector was produced.

    rule is one of "empty", "free", "congested", "quadratic" or
    "remainder"; delta and the coefficients b, c are set on quadratic
    levels only.
    """

    j: int
    rule: str
    root: float
    delta: float | None = None
    b: float | None = None
    c: float | None = None


@dataclass(frozen=True)
class EquilibriumResult:
    n: int
    rho: float
    f_inf: np.ndarray = field(repr=False)
    phase: str
    branch_data: tuple[BranchRecord, ...]

    def __post_init__(self):
        self.f_inf.setflags(write=False)


@dataclass(frozen=True)
class EquilibriumCandidate:
    """One admissible stationary point found by enumeration."""

    f: np.ndarray = field(repr=False)
    residual: float
    verdict: str
    stable: bool
    choices: tuple[str, ...]
    from_larger_roots: bool


@dataclass(frozen=True)
class StabilityReport:
    """Linearization summary at a stationary point.

    verdict reflects the spectrum restricted to the zero-sum hyperplane;
    the conserved-mass direction always contributes one zero eigenvalue
    to the full spectrum and is reported separately.
    """

    verdict: str
    eigen_real_parts: tuple[float, ...]
    zero_mode_index: int
    hyperplane_real_parts: tuple[float, ...]
    degenerate_zero_density: bool = False
    nilpotent_hyperplane: bool = False


def equilibrium_f1(rho: float) -> float:
    """Stationary share of stopped vehicles."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"density {rho} outside [0, 1]")
    return 0.0 if rho <= CRITICAL_DENSITY else 2.0 * rho - 1.0


def _quadratic_terms(rho: float, prefix: np.ndarray) -> tuple[float, float]:
    S = float(prefix.sum())
    B = (1.0 - 3.0 * rho) * S + rho * (2.0 * rho - 1.0)
    C = (1.0 - rho) * float(prefix[-1]) * (rho - (S - float(prefix[-1])))
    if C < 0.0:
        if C < -_TINY:
            raise ConsistencyError(
                f"negative constant term {C!r} in the level quadratic; "
                "the prefix is not a valid equilibrium head"
            )
        C = 0.0
    return B, C


def _larger_root(B: float, C: float, rho: float) -> tuple[float, float]:
    """Larger root of -rho f^2 + B f + C = 0 and the discriminant."""
    delta = B * B + 4.0 * rho * C
    if delta < 0.0:
        raise ConsistencyError(
            f"negative discriminant {delta!r}; no real stationary branch"
        )
    if C == 0.0:
        return max(0.0, B / rho), delta
    if B >= 0.0:
        return (B + math.sqrt(delta)) / (2.0 * rho), delta
    # avoid cancellation between B and sqrt(delta)
    return 2.0 * C / (math.sqrt(delta) - B), delta


def equilibrium_quadratic(
    j: int, rho: float, prefix: np.ndarray
) -> tuple[float, float]:
    """Stationary value of class j given the classes below it.

    Args:
        j: class index, 2-based through n-1.
        rho: total density, in (0, 1].
        prefix: stationary values of classes 1 .. j-1.

    Returns:
        (f_j, delta): the larger quadratic root and its discriminant.
    """
    if j < 2:
        raise ValueError(f"the level quadratic starts at class 2, got j={j}")
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"density {rho} outside (0, 1]")
    prefix = np.asarray(prefix, dtype=float)
    if prefix.ndim != 1 or prefix.size != j - 1:
        raise ValueError(f"prefix for class {j} must hold {j - 1} values")
    if prefix.min() < -_TINY:
        raise ValueError(f"negative prefix entry {prefix.min()!r}")
    if prefix.sum() > rho + _TINY:
        raise ValueError("prefix mass exceeds the total density")
    B, C = _quadratic_terms(rho, prefix)
    return _larger_root(B, C, rho)


def equilibrium_recursive(n: int, rho: float) -> EquilibriumResult:
    """Closed-form stationary state at density rho.

    Builds the vector class by class: the stopped class by the phase
    rule, intermediate classes from the larger quadratic root and the
    top class from mass conservation.  For rho <= 1/2 this collapses to
    all mass sitting in the top class.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError(f"need at least two speed classes, got n={n}")
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"density {rho} outside [0, 1]")
    n = int(n)
    rho = float(rho)
    phase = PHASE_FREE if rho <= CRITICAL_DENSITY else PHASE_CONGESTED
    if rho == 0.0:
        records = tuple(BranchRecord(j=j, rule="empty", root=0.0) for j in range(1, n + 1))
        return EquilibriumResult(n=n, rho=rho, f_inf=np.zeros(n), phase=phase,
                                 branch_data=records)
    f = np.zeros(n)
    records: list[BranchRecord] = []
    f[0] = equilibrium_f1(rho)
    records.append(BranchRecord(j=1, rule=phase, root=f[0]))
    for j in range(2, n):
        B, C = _quadratic_terms(rho, f[: j - 1])
        root, delta = _larger_root(B, C, rho)
        f[j - 1] = root
        records.append(BranchRecord(j=j, rule="quadratic", root=root,
                                    delta=delta, b=B, c=C))
    tail = rho - float(f[: n - 1].sum())
    if tail < -_TINY:
        raise ConsistencyError(
            f"top class would need mass {tail!r}; recursion inconsistent"
        )
    f[n - 1] = max(0.0, tail)
    records.append(BranchRecord(j=n, rule="remainder", root=f[n - 1]))
    return EquilibriumResult(n=n, rho=rho, f_inf=f, phase=phase,
                             branch_data=tuple(records))


def _table_density_derivative(n: int) -> np.ndarray:
    """Entrywise d/d rho of the game table; entries are +-1 constants."""
    D = np.zeros((n, n, n))
    for h in range(1, n + 1):
        for k in range(1, n + 1):
            if h <= k:
                if h != n:
                    D[h - 1, k - 1, h - 1] = 1.0
                    D[h - 1, k - 1, h] = -1.0
            else:
                D[h - 1, k - 1, k - 1] = 1.0
                D[h - 1, k - 1, h - 1] = -1.0
    return D


def jacobian(f: np.ndarray, rho: float, params: ModelParams) -> np.ndarray:
    """Derivative matrix of the interaction dynamics at state f.

    The density is treated as a function of the state, so the derivative
    includes the response of the encounter rate and of the game table to
    mass moving between classes.  Mass conservation makes every column
    sum to zero up to roundoff.

    Args:
        f: state vector; its sum must match rho to within 1e-9.
        rho: declared density of the state.
        params: model constants (eta0 scales the whole matrix).

    Returns:
        n x n matrix J with J[j, i] = d rhs_j / d f_i.
    """
    f = np.asarray(f, dtype=float)
    n = f.size
    if n != params.n:
        raise ValueError(f"state has {n} classes, params expect {params.n}")
    s = float(f.sum())
    if abs(s - rho) > 1e-9:
        raise ValueError(f"declared density {rho} does not match sum(f)={s!r}")
    A = build_game_table(n, min(max(s, 0.0), 1.0)).A
    D = _table_density_derivative(n)
    G = np.einsum("hkj,h,k->j", A, f, f)
    M1 = np.einsum("ikj,k->ji", A, f)
    M2 = np.einsum("hij,h->ji", A, f)
    W = np.einsum("hkj,h,k->j", D, f, f)
    Q = G - s * f
    eye = np.eye(n)
    J = params.eta0 * (
        Q[:, None] + s * (M1 + M2 + (W - f)[:, None] - s * eye)
    )
    return J


def _helmert_basis(n: int) -> np.ndarray:
    """Orthonormal rows spanning the zero-sum hyperplane."""
    H = np.zeros((n - 1, n))
    for i in range(1, n):
        H[i - 1, :i] = 1.0
        H[i - 1, i] = -float(i)
        H[i - 1] /= math.sqrt(i * (i + 1.0))
    return H


def stability_report(
    f: np.ndarray, params: ModelParams, eig_tol: float = _EIG_TOL
) -> StabilityReport:
    """Classify a stationary state by its linearization.

    The verdict is read off the spectrum restricted to the zero-sum
    hyperplane, the directions that keep the density fixed: stable means
    every real part is below -eig_tol, unstable means some real part
    exceeds +eig_tol, marginal covers the rest.  A nilpotent restricted
    Jacobian (which happens exactly at the critical density, where the
    whole hyperplane spectrum collapses to zero) is reported as marginal
    regardless of the scattered eigenvalues the solver returns for it.
    An all-zero state has a frozen linearization (the encounter rate
    vanishes), which is flagged instead of classified.
    """
    f = np.asarray(f, dtype=float)
    n = f.size
    s = float(f.sum())
    J = jacobian(f, s, params)
    eigvals, eigvecs = np.linalg.eig(J)
    order = np.argsort(-eigvals.real, kind="stable")
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    re = eigvals.real

    # conserved-mass mode: a near-zero eigenvalue whose eigenvector has
    # mass (nonzero component sum); at degenerate points several
    # eigenvalues sit near zero and the sum criterion picks the right one
    mags = np.abs(eigvals)
    near = np.flatnonzero(mags <= max(eig_tol, 10.0 * mags.min()))
    sums = np.abs(eigvecs[:, near].sum(axis=0))
    zero_mode = int(near[int(np.argmax(sums))])

    degenerate = s <= _TINY
    if not degenerate and sums.max() <= 1e-10:
        raise ConsistencyError(
            "no near-zero eigenvalue carries the conserved-mass direction"
        )

    H = _helmert_basis(n)
    R = H @ J @ H.T
    hyper = np.linalg.eigvals(R).real
    hyper = np.sort(hyper)[::-1]

    # at the critical density the restricted Jacobian is nilpotent: every
    # hyperplane eigenvalue is exactly zero, but the matrix is not, and
    # solvers then scatter the spectrum by ~norm * eps^(1/(n-1)), far
    # beyond eig_tol.  Detect that case structurally: a nilpotent m x m
    # matrix has R^m = 0, while any spectrum of genuine size lambda keeps
    # ||R^m|| >= |lambda|^m well above rounding.
    norm = float(np.linalg.norm(R, 2))
    nilpotent = norm == 0.0
    if not nilpotent and n >= 2:
        power = float(np.linalg.norm(np.linalg.matrix_power(R, n - 1), 2))
        nilpotent = power <= 1e-8 * norm ** (n - 1)

    if degenerate or nilpotent:
        verdict = MARGINAL
    elif np.all(hyper < -eig_tol):
        verdict = STABLE
    elif np.any(hyper > eig_tol):
        verdict = UNSTABLE
    else:
        verdict = MARGINAL
    return StabilityReport(
        verdict=verdict,
        eigen_real_parts=tuple(float(x) for x in re),
        zero_mode_index=zero_mode,
        hyperplane_real_parts=tuple(float(x) for x in hyper),
        degenerate_zero_density=degenerate,
        nilpotent_hyperplane=bool(nilpotent and not degenerate),
    )


def classify_stability(
    eq: EquilibriumResult, params: ModelParams, eig_tol: float = _EIG_TOL
) -> StabilityReport:
    """Stability report for a closed-form equilibrium."""
    return stability_report(eq.f_inf, params, eig_tol=eig_tol)


def is_attracting(verdict: str, from_larger_roots: bool) -> bool:
    """Resolve a linearization verdict into an attractivity flag.

    A marginal verdict occurs at the critical density, where the slow
    direction is a double root of the level quadratic: the downward
    parabola still attracts from inside the admissible cone, so a
    marginal point built entirely from larger (or double) roots counts
    as attracting.  The same resolution covers the empty road.
    """
    return verdict == STABLE or (verdict == MARGINAL and from_larger_roots)


def _bruteforce_levels(n: int, rho: float):
    """Yield (vector, choice labels) for every real root combination."""
    f1_branches = []
    lo, hi = 0.0, 2.0 * rho - 1.0
    if abs(hi - lo) <= 1e-14:
        f1_branches.append((0.0, "double"))
    else:
        f1_branches.append((lo, "larger" if lo > hi else "smaller"))
        f1_branches.append((hi, "larger" if hi > lo else "smaller"))
    stack = [(np.array([v]), (label,)) for v, label in f1_branches if v >= -_TINY]
    for j in range(2, n):
        nxt = []
        for head, labels in stack:
            if head.sum() > rho + _TINY:
                continue
            try:
                B, C = _quadratic_terms(rho, head)
            except ConsistencyError:
                continue
            delta = B * B + 4.0 * rho * C
            if delta < 0.0:
                continue
            if C == 0.0:
                r_minus, r_plus = sorted((0.0, B / rho))
            else:
                sq = math.sqrt(delta)
                r_plus = (B + sq) / (2.0 * rho) if B >= 0.0 else 2.0 * C / (sq - B)
                r_minus = (B - sq) / (2.0 * rho) if B <= 0.0 else -2.0 * C / (sq + B)
            if abs(r_plus - r_minus) <= 1e-14:
                pairs = [(max(r_plus, 0.0), "double")]
            else:
                pairs = [(r_minus, "smaller"), (r_plus, "larger")]
            for val, label in pairs:
                if val < -_TINY:
                    continue
                nxt.append((np.append(head, max(val, 0.0)), labels + (label,)))
        stack = nxt
    out = []
    for head, labels in stack:
        tail = rho - float(head.sum())
        if tail < -_TINY:
            continue
        out.append((np.append(head, max(tail, 0.0)), labels + ("remainder",)))
    return out


def equilibrium_bruteforce(
    n: int, rho: float, params: ModelParams | None = None
) -> list[EquilibriumCandidate]:
    """Every admissible stationary point, found by exhausting root choices.

    Enumerates both branches of the stopped class and both roots of every
    level quadratic, keeps the nonnegative vectors whose derivative
    vanishes (1-norm below 1e-10), and attaches a stability verdict to
    each.  Independent of the closed-form recursion, which should appear
    in the output as the single attracting candidate.

    Args:
        n: number of classes, 2 through 12 (the branch count doubles per
            class, so larger n is refused).
        rho: density in (0, 1].
        params: optional constants for the linearization; defaults to
            ModelParams(n).
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError(f"need at least two speed classes, got n={n}")
    if n > BRUTEFORCE_MAX_N:
        raise ValueError(
            f"brute-force enumeration is limited to n <= {BRUTEFORCE_MAX_N}, got {n}"
        )
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"density {rho} outside (0, 1]")
    params = params or ModelParams(n=int(n))
    if params.n != n:
        raise ValueError(f"params expect n={params.n}, got n={n}")
    candidates = []
    seen: list[np.ndarray] = []
    for vec, labels in _bruteforce_levels(int(n), float(rho)):
        residual = float(np.abs(_rhs_batch(vec[None, :], params.eta0)).sum())
        if residual > 1e-10:
            continue
        if any(np.abs(vec - prev).max() <= 1e-10 for prev in seen):
            continue
        seen.append(vec)
        report = stability_report(vec, params)
        larger = all(lab in ("larger", "double", "remainder") for lab in labels)
        candidates.append(
            EquilibriumCandidate(
                f=vec,
                residual=residual,
                verdict=report.verdict,
                stable=is_attracting(report.verdict, larger),
                choices=labels,
                from_larger_roots=larger,
            )
        )
    return candidates
