"""Speed lattice and interaction rules of the discrete kinetic traffic model.

Vehicles are sorted into n speed classes with dimensionless speeds

    v_j = (j - 1) / (n - 1),        j = 1, ..., n,

so class 1 stands still and class n travels at the maximum speed.  When two
vehicles interact, the candidate (travelling at v_h) meets a field vehicle
(travelling at v_k) and jumps to a new class j with a probability that
depends on the normalized macroscopic density rho:

* slower or equal candidate (h <= k, h != n): it stays in class h with
  probability rho and accelerates one class with probability 1 - rho;
* top-speed candidate meeting top speed (h = k = n): nothing can change;
* faster candidate (h > k): it is forced down to the field vehicle's class
  with probability rho and keeps its own speed with probability 1 - rho.

These transition probabilities form the game table A[h][k][j].  Each (h, k)
row is an exact probability distribution over j with at most two nonzero
entries.  Interactions fire at rate eta(rho) = eta0 * rho, vanishing in an
empty road.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelParams",
    "SpeedLattice",
    "GameTable",
    "build_lattice",
    "interaction_rate",
    "build_game_table",
]


@dataclass(frozen=True)
class ModelParams:
    """Model-wide constants.

    Attributes:
        n: number of speed classes, at least 2.
        rho_max: physical jam density in vehicles/km, used only when
            rescaling dimensionless results to physical units.
        v_max: physical maximum speed in km/h, same role as rho_max.
        eta0: interaction-rate constant; the dimensionless clock runs at
            eta(rho) = eta0 * rho.
    """

    n: int
    rho_max: float = 200.0
    v_max: float = 100.0
    eta0: float = 1.0

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise ValueError(f"need at least two speed classes, got n={self.n}")
        if not self.rho_max > 0:
            raise ValueError(f"rho_max must be positive, got {self.rho_max}")
        if not self.v_max > 0:
            raise ValueError(f"v_max must be positive, got {self.v_max}")
        if not self.eta0 > 0:
            raise ValueError(f"eta0 must be positive, got {self.eta0}")


@dataclass(frozen=True)
class SpeedLattice:
    """Uniform grid of dimensionless speeds on [0, 1].

    Attributes:
        n: number of classes.
        speeds: array of length n with speeds[j-1] = (j-1)/(n-1).
    """

    n: int
    speeds: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.speeds.setflags(write=False)

    def speed(self, j: int) -> float:
        """Speed of class j, indexed 1 through n."""
        if not 1 <= j <= self.n:
            raise ValueError(f"class index {j} outside 1..{self.n}")
        return float(self.speeds[j - 1])


@dataclass(frozen=True)
class GameTable:
    """Dense transition-probability table at a fixed density.

    A[h-1, k-1, j-1] is the probability that a candidate of class h ends
    in class j after meeting a field vehicle of class k.  The dense cube
    is convenient for inspection and cross-checks; the time stepper never
    materializes it.
    """

    n: int
    rho: float
    A: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.A.setflags(write=False)

    def prob(self, h: int, k: int, j: int) -> float:
        """Transition probability for 1-based class indices (h, k, j)."""
        for name, idx in (("h", h), ("k", k), ("j", j)):
            if not 1 <= idx <= self.n:
                raise ValueError(f"index {name}={idx} outside 1..{self.n}")
        return float(self.A[h - 1, k - 1, j - 1])


def build_lattice(n: int) -> SpeedLattice:
    """Build the uniform speed lattice with n classes.

    Args:
        n: number of speed classes, at least 2.

    Returns:
        SpeedLattice with speeds 0, 1/(n-1), ..., 1.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError(f"need at least two speed classes, got n={n}")
    speeds = np.arange(n, dtype=float) / (n - 1)
    return SpeedLattice(n=int(n), speeds=speeds)


def interaction_rate(rho: float, params: ModelParams) -> float:
    """Encounter rate eta(rho) = eta0 * rho.

    Args:
        rho: normalized density in [0, 1].
        params: model constants supplying eta0.

    Returns:
        The nonnegative interaction rate; zero on an empty road.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"density {rho} outside [0, 1]")
    return params.eta0 * rho


def build_game_table(n: int, rho: float) -> GameTable:
    """Assemble the dense game table at density rho.

    Args:
        n: number of speed classes, at least 2.
        rho: normalized density in [0, 1].

    Returns:
        GameTable whose (h, k) rows sum to one exactly; the entries are
        rho and 1 - rho placed according to the interaction rules, so no
        floating-point slack is needed.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError(f"need at least two speed classes, got n={n}")
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"density {rho} outside [0, 1]")
    rho = float(rho)
    stay = rho
    move = 1.0 - rho
    A = np.zeros((n, n, n))
    for h in range(1, n + 1):
        for k in range(1, n + 1):
            if h <= k:
                if h == n:
                    # both at top speed: nothing to negotiate
                    A[h - 1, k - 1, n - 1] = 1.0
                else:
                    A[h - 1, k - 1, h - 1] = stay
                    A[h - 1, k - 1, h] = move
            else:
                A[h - 1, k - 1, k - 1] = stay
                A[h - 1, k - 1, h - 1] = move
    return GameTable(n=int(n), rho=rho, A=A)
