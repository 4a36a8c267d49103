"""Microscopic model: configurations, parameters and transition rates.

The dynamics lives on the sites 1..n-1 of a 1d lattice.  Three mechanisms
act together:

* constrained bond exchanges ("porous medium" moves): a swap across the
  bond {x, x+1} is allowed only in the presence of occupied neighbours,
  with rate equal to the number of enabling neighbour patterns;
* unconstrained symmetric exchanges, weighted by ``n**(a-2)`` with
  ``1 < a < 2`` so they vanish under diffusive scaling;
* birth/death at the two boundary sites 1 and n-1 with strength
  ``m / n**theta``, modelling particle reservoirs of densities alpha
  (left) and beta (right).

Sites 0 and n are virtual: reading them yields the reservoir densities
alpha and beta.  All rates returned here are *unscaled*; the diffusive
``n**2`` speed-up is applied exactly once, by the simulation engine.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np


class ContractViolation(ValueError):
    """An argument broke a documented precondition."""


@dataclass(frozen=True)
class ModelParams:
    """Static parameters of the particle system.

    n: number of lattice cells; the dynamic sites are 1..n-1.
    theta: reservoir slowing exponent (>= 0).
    m: reservoir strength (> 0).
    a: exponent of the weak unconstrained-exchange perturbation, in (1, 2).
    alpha, beta: reservoir densities, both in (0, 1).
    big_m: constraint order, 2 or 3 (selects the exchange-rate family).
    """

    n: int
    theta: float
    m: float
    a: float
    alpha: float
    beta: float
    big_m: int = 2

    def __post_init__(self):
        if self.n < 4:
            raise ValueError(f"n must be >= 4, got {self.n}")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must lie in (0,1), got {self.alpha}")
        if not (0.0 < self.beta < 1.0):
            raise ValueError(f"beta must lie in (0,1), got {self.beta}")
        if self.m <= 0.0:
            raise ValueError(f"m must be positive, got {self.m}")
        if self.theta < 0.0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")
        if not (1.0 < self.a < 2.0):
            raise ValueError(f"a must lie in (1,2), got {self.a}")
        if self.big_m not in (2, 3):
            raise ValueError(f"big_m must be 2 or 3, got {self.big_m}")

    @property
    def ssep_weight(self) -> float:
        """Prefactor n**(a-2) of the unconstrained exchanges."""
        return float(self.n) ** (self.a - 2.0)

    @property
    def reservoir_rate(self) -> float:
        """Prefactor m/n**theta of the boundary flips."""
        return self.m / float(self.n) ** self.theta


@dataclass(frozen=True)
class Configuration:
    """Occupation state of sites 1..n-1 plus virtual boundary values.

    ``occ`` has length n+1; entries 1..n-1 are the physical sites (0/1)
    and entries 0 and n are storage padding, never read directly.  Site
    reads go through :meth:`value`, which returns ``virtual_left`` at 0,
    ``virtual_right`` at n, and 0 outside [0, n].
    """

    occ: np.ndarray
    virtual_left: float
    virtual_right: float

    @classmethod
    def from_sites(cls, sites: Sequence[int], alpha: float, beta: float) -> "Configuration":
        sites = np.asarray(sites, dtype=np.int8)
        if sites.ndim != 1 or len(sites) < 3:
            raise ValueError("need at least 3 site values (n >= 4)")
        if not np.isin(sites, (0, 1)).all():
            raise ValueError("occupation values must be 0 or 1")
        occ = np.zeros(len(sites) + 2, dtype=np.int8)
        occ[1:-1] = sites
        return cls(occ=occ, virtual_left=float(alpha), virtual_right=float(beta))

    @classmethod
    def pure_pmm(cls, sites: Sequence[int]) -> "Configuration":
        """Configuration for constraint-only dynamics: virtual cells read 0."""
        return cls.from_sites(sites, 0.0, 0.0)

    @property
    def n(self) -> int:
        return len(self.occ) - 1

    @property
    def sites(self) -> np.ndarray:
        """The n-1 physical occupation values (read-only view)."""
        v = self.occ[1:-1]
        v.flags.writeable = False
        return v

    def value(self, x: int):
        """Occupation at x, with the virtual boundary convention."""
        if x < 0 or x > self.n:
            return 0
        if x == 0:
            return self.virtual_left
        if x == self.n:
            return self.virtual_right
        return int(self.occ[x])

    def particle_count(self) -> int:
        return int(self.occ[1:-1].sum())


def _check_bond(config: Configuration, x: int):
    if not (1 <= x <= config.n - 2):
        raise ContractViolation(f"bond index {x} outside 1..{config.n - 2}")


def _check_boundary_site(config: Configuration, z: int):
    if z not in (1, config.n - 1):
        raise ContractViolation(f"site {z} is not a boundary site (1 or {config.n - 1})")


def constraint_factor(config: Configuration, x: int, big_m: int):
    """Neighbour-dependent prefactor of the exchange across bond {x, x+1}.

    Order 2 counts occupied outer neighbours; order 3 counts adjacent
    occupied pairs within two sites of the bond.  Virtual cells enter
    through the boundary convention; sites beyond the virtual cells
    read 0.
    """
    v = config.value
    if big_m == 2:
        return v(x - 1) + v(x + 2)
    if big_m == 3:
        return v(x - 2) * v(x - 1) + v(x - 1) * v(x + 2) + v(x + 2) * v(x + 3)
    raise ValueError(f"big_m must be 2 or 3, got {big_m}")


def ssep_exchange_rate(config: Configuration, x: int) -> int:
    """1 if exactly one of sites x, x+1 is occupied, else 0 (unscaled)."""
    _check_bond(config, x)
    return int(config.occ[x] != config.occ[x + 1])


def pmm_exchange_rate(config: Configuration, x: int, params: ModelParams):
    """Constrained exchange rate across bond {x, x+1} (unscaled).

    Equals the constraint factor times the exchangeability indicator.
    Real-valued at the outermost bonds, where the constraint reads the
    virtual reservoir densities.
    """
    _check_bond(config, x)
    a_sum = ssep_exchange_rate(config, x)
    if a_sum == 0:
        return 0
    return constraint_factor(config, x, params.big_m)


def boundary_flip_rate(config: Configuration, z: int, params: ModelParams) -> float:
    """Reservoir flip rate at boundary site z (unscaled).

    Insertion at rate (m/n**theta)*b when empty, removal at rate
    (m/n**theta)*(1-b) when occupied, with b = alpha at site 1 and
    b = beta at site n-1.
    """
    _check_boundary_site(config, z)
    b = params.alpha if z == 1 else params.beta
    intensity = b * (1 - config.occ[z]) + (1.0 - b) * config.occ[z]
    return params.reservoir_rate * intensity


def apply_exchange(config: Configuration, x: int) -> Configuration:
    """New configuration with the values at sites x and x+1 swapped."""
    _check_bond(config, x)
    occ = config.occ.copy()
    occ[x], occ[x + 1] = occ[x + 1], occ[x]
    return replace(config, occ=occ)


def apply_flip(config: Configuration, z: int) -> Configuration:
    """New configuration with the occupation at boundary site z complemented."""
    _check_boundary_site(config, z)
    occ = config.occ.copy()
    occ[z] = 1 - occ[z]
    return replace(config, occ=occ)


def transitions(config: Configuration, params: ModelParams, pure_pmm: bool = False):
    """All transitions out of ``config`` with positive unscaled rate.

    Yields ``(kind, index, rate, successor)`` with kind "exchange" or
    "flip".  With ``pure_pmm`` only the constrained exchanges act and the
    caller is expected to pass a configuration whose virtual cells read 0.
    """
    n = config.n
    s = 0.0 if pure_pmm else params.ssep_weight
    for x in range(1, n - 1):
        a_sum = ssep_exchange_rate(config, x)
        if a_sum == 0:
            continue
        rate = constraint_factor(config, x, params.big_m) + s
        if rate > 0:
            yield ("exchange", x, rate, apply_exchange(config, x))
    if not pure_pmm:
        for z in (1, n - 1):
            rate = boundary_flip_rate(config, z, params)
            if rate > 0:
                yield ("flip", z, rate, apply_flip(config, z))


def generator_apply(
    config: Configuration,
    f: Callable[[Configuration], float],
    params: ModelParams,
    pure_pmm: bool = False,
) -> float:
    """Action of the unscaled generator on the observable f at ``config``.

    Sums rate * (f(successor) - f(config)) over every transition.  The
    diffusive n**2 factor is left to the caller.
    """
    f0 = f(config)
    total = 0.0
    for _, _, rate, succ in transitions(config, params, pure_pmm=pure_pmm):
        total += rate * (f(succ) - f0)
    return total


def all_configurations(n: int, alpha: float, beta: float):
    """Every configuration on sites 1..n-1 (2**(n-1) of them); test helper."""
    n_sites = n - 1
    for bits in range(1 << n_sites):
        sites = [(bits >> i) & 1 for i in range(n_sites)]
        yield Configuration.from_sites(sites, alpha, beta)
