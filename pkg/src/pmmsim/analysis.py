"""Microscopic observables and mobility algorithms.

Contents: empirical measures and box averages, the local gradient
function tau_h and the instantaneous bond currents, martingale
decomposition records, detection of absorbing states of the
constraint-only dynamics, and constructive transport plans that move a
single particle with a mobile cluster of two helper particles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .model import (
    Configuration,
    ContractViolation,
    ModelParams,
    constraint_factor,
    ssep_exchange_rate,
)


class InsufficientDensity(ValueError):
    """The helper window does not contain the two particles a plan needs."""


# ---------------------------------------------------------------------------
# boxes and empirical measures


@dataclass(frozen=True)
class BoxSpec:
    """A block of ell sites ending (side="left") or starting (side="right") at x."""

    x: int
    ell: int
    side: str = "left"

    def __post_init__(self):
        if self.ell < 1:
            raise ValueError("box width must be >= 1")
        if self.side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")

    def sites(self) -> range:
        if self.side == "left":
            return range(self.x - self.ell + 1, self.x + 1)
        return range(self.x, self.x + self.ell)

    def validate(self, n: int):
        s = self.sites()
        if s.start < 1 or s.stop > n:
            raise ValueError(f"box {list(s)[:2]}..{s.stop - 1} leaves the lattice 1..{n - 1}")


def replacement_box_width(n: int, a: float, delta: float) -> int:
    """Mesoscopic box width floor(n**(a-1-delta)) used by the transport bounds."""
    if delta < 0 or a - 1.0 - delta < 0:
        raise ValueError("need 0 <= delta <= a-1")
    return int(math.floor(float(n) ** (a - 1.0 - delta)))


def empirical_pairing(config: Configuration, G: Callable[[float], float], n: Optional[int] = None) -> float:
    """(1/n) sum_x G(x/n) eta(x): the empirical measure paired with G."""
    if n is None:
        n = config.n
    sites = config.occ[1 : config.n]
    return sum(G(x / n) for x in np.nonzero(sites)[0] + 1) / n


def box_average(config: Configuration, spec: BoxSpec) -> float:
    """Mean occupation over the box (in [0,1])."""
    spec.validate(config.n)
    s = spec.sites()
    return float(config.occ[s.start : s.stop].mean())


# ---------------------------------------------------------------------------
# currents


def tau_h(config: Configuration, x: int, params) -> float:
    """Local function whose discrete gradient gives the bulk current.

    eta(x-1)eta(x) + eta(x)eta(x+1) - eta(x-1)eta(x+1) + n^(a-2) eta(x),
    with boundary reads through the virtual-cell convention.  ``params``
    only needs an ``ssep_weight`` attribute, so exact numeric types can
    be driven through for verification.
    """
    if not (1 <= x <= config.n - 1):
        raise ContractViolation(f"site {x} outside 1..{config.n - 1}")
    vm, v0, vp = config.value(x - 1), config.value(x), config.value(x + 1)
    return vm * v0 + v0 * vp - vm * vp + params.ssep_weight * v0


def instantaneous_current(config: Configuration, bond: int, params) -> float:
    """Instantaneous current across bond {bond, bond+1}.

    Bond 0 and bond n-1 carry the reservoir exchange currents; interior
    bonds are the discrete gradient of tau_h.
    """
    n = config.n
    if not (0 <= bond <= n - 1):
        raise ContractViolation(f"bond {bond} outside 0..{n - 1}")
    if bond == 0:
        return params.reservoir_rate * (params.alpha - config.occ[1])
    if bond == n - 1:
        return params.reservoir_rate * (config.occ[n - 1] - params.beta)
    return tau_h(config, bond, params) - tau_h(config, bond + 1, params)


# ---------------------------------------------------------------------------
# martingale decomposition records


@dataclass(frozen=True)
class DynkinWeights:
    """Lattice coefficients of the martingale decomposition for one test function.

    bulk[x] = (1/n) * n^2 (G((x-1)/n) - 2G(x/n) + G((x+1)/n)) for sites x,
    gcoef = (forward gradient of G at 0, backward gradient at 1,
             m n^(1-theta) G(1/n), m n^(1-theta) G((n-1)/n)).
    """

    n: int
    gvals: np.ndarray  # G at lattice points 0..n
    bulk: np.ndarray   # index by site x, entry 0 unused
    gcoef: np.ndarray

    @classmethod
    def from_function(cls, G: Callable[[float], float], params: ModelParams) -> "DynkinWeights":
        n = params.n
        gv = np.array([float(G(x / n)) for x in range(n + 1)])
        bulk = np.zeros(n)
        for x in range(1, n):
            bulk[x] = n * (gv[x - 1] - 2.0 * gv[x] + gv[x + 1])  # (1/n) * n^2 * ...
        gp0 = n * (gv[1] - gv[0])
        gm1 = n * (gv[n] - gv[n - 1])
        pref = params.m * float(n) ** (1.0 - params.theta)
        gcoef = np.array([gp0, gm1, pref * gv[1], pref * gv[n - 1]])
        return cls(n=n, gvals=gv, bulk=bulk, gcoef=gcoef)


def dynkin_integrands(config: Configuration, weights: DynkinWeights, params: ModelParams):
    """Current values of the (bulk, gradient, reservoir) compensator integrands."""
    n = config.n
    taus = np.array([tau_h(config, x, params) for x in range(1, n)])
    bulk = float(np.dot(weights.bulk[1:n], taus))
    grad = weights.gcoef[0] * taus[0] - weights.gcoef[1] * taus[-1]
    res = weights.gcoef[2] * (params.alpha - config.occ[1]) + weights.gcoef[3] * (
        params.beta - config.occ[n - 1]
    )
    return bulk, grad, res


@dataclass(frozen=True)
class DynkinRecord:
    """Per-sample terms of the martingale decomposition along one trajectory.

    ``mode`` says how the time integrals were computed: "event-exact"
    (piecewise-constant integrand between events) or "sampled-trapezoid"
    (quadrature on the sample lattice).
    """

    n: int
    times: np.ndarray
    pairings: np.ndarray
    bulk_int: np.ndarray
    grad_int: np.ndarray
    res_int: np.ndarray
    mode: str

    def residual(self, t: float) -> float:
        """Martingale value M_t: pairing increment minus the compensator."""
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} not covered by the record")
        return float(
            self.pairings[k]
            - self.pairings[0]
            - self.bulk_int[k]
            - self.grad_int[k]
            - self.res_int[k]
        )

    @classmethod
    def from_samples(
        cls,
        configs: Sequence[Configuration],
        times: Sequence[float],
        G: Callable[[float], float],
        params: ModelParams,
    ) -> "DynkinRecord":
        """Trapezoidal fallback when only sampled configurations exist."""
        if len(configs) != len(times) or len(configs) < 1:
            raise ValueError("need one configuration per sample time")
        weights = DynkinWeights.from_function(G, params)
        n = params.n
        pair = [float(np.dot(weights.gvals[1:n], c.occ[1:n])) / n for c in configs]
        vals = [dynkin_integrands(c, weights, params) for c in configs]
        vals = np.asarray(vals)
        t = np.asarray([float(s) for s in times])
        ints = np.zeros((len(t), 3))
        for k in range(1, len(t)):
            ints[k] = ints[k - 1] + 0.5 * (vals[k] + vals[k - 1]) * (t[k] - t[k - 1])
        return cls(
            n=n,
            times=t,
            pairings=np.asarray(pair),
            bulk_int=ints[:, 0],
            grad_int=ints[:, 1],
            res_int=ints[:, 2],
            mode="sampled-trapezoid",
        )


def dynkin_residual(record: DynkinRecord, t: float) -> float:
    return record.residual(t)


# ---------------------------------------------------------------------------
# absorbing states of the constraint-only dynamics


def detect_blocked(config: Configuration, mode: str = "pure-pmm", big_m: int = 2) -> bool:
    """True iff no constrained exchange is enabled anywhere.

    Only defined for the constraint-only dynamics (virtual cells read 0);
    with reservoirs or free exchanges on, no state is absorbing, so any
    other mode is refused.
    """
    if mode != "pure-pmm":
        raise ValueError("blocked detection is only defined for mode='pure-pmm'")
    bare = Configuration(occ=config.occ, virtual_left=0.0, virtual_right=0.0)
    for x in range(1, config.n - 1):
        if ssep_exchange_rate(bare, x) and constraint_factor(bare, x, big_m) > 0:
            return False
    return True


# ---------------------------------------------------------------------------
# mobile-cluster transport plans

PHASE_ASSEMBLE = "ssep-assemble"
PHASE_TRANSPORT = "pmm-transport"
PHASE_RESTORE = "ssep-restore"


@dataclass(frozen=True)
class Move:
    bond: int
    phase: str
    certificate: float


@dataclass(frozen=True)
class MovePlan:
    """An ordered bond-exchange sequence realizing one particle transfer.

    Replaying the moves on the start configuration transfers exactly one
    particle from ``source`` to ``target``, restores every other site, and
    each move carries the positive exchange rate it had when executed.
    """

    moves: List[Move]
    source: int
    target: int
    helpers: tuple
    window: BoxSpec

    @property
    def ssep_moves(self) -> int:
        return sum(1 for m in self.moves if m.phase != PHASE_TRANSPORT)

    @property
    def pmm_moves(self) -> int:
        return sum(1 for m in self.moves if m.phase == PHASE_TRANSPORT)

    def budget_ok(self) -> bool:
        """Move counts within the 4*ell and 6*(ell + distance) allowances."""
        ell = self.window.ell
        dist = abs(self.target - self.source)
        return self.ssep_moves <= 4 * ell and self.pmm_moves <= 6 * (ell + dist)

    def replay(self, config: Configuration, params: ModelParams) -> Configuration:
        """Apply the moves, revalidating every certificate; returns the result."""
        occ = config.occ.copy()
        work = Configuration(occ=occ, virtual_left=config.virtual_left,
                             virtual_right=config.virtual_right)
        for mv in self.moves:
            cert = _exchange_rate_value(work, mv.bond, params)
            if cert <= 0.0:
                raise RuntimeError(f"move at bond {mv.bond} has zero rate on replay")
            if not math.isclose(cert, mv.certificate, rel_tol=1e-12):
                raise RuntimeError(
                    f"certificate mismatch at bond {mv.bond}: {cert} vs {mv.certificate}"
                )
            occ[mv.bond], occ[mv.bond + 1] = occ[mv.bond + 1], occ[mv.bond]
        return work

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": "pmmsim-moveplan-v1",
                "source": self.source,
                "target": self.target,
                "helpers": list(self.helpers),
                "window": {"x": self.window.x, "ell": self.window.ell, "side": self.window.side},
                "moves": [
                    {"bond": m.bond, "phase": m.phase, "certificate": m.certificate}
                    for m in self.moves
                ],
            },
            sort_keys=True,
        )


def _exchange_rate_value(config: Configuration, bond: int, params: ModelParams) -> float:
    """Exchange rate at a bond under the bulk dynamics (constraint + weak part)."""
    a_sum = ssep_exchange_rate(config, bond)
    if a_sum == 0:
        return 0.0
    return float(constraint_factor(config, bond, params.big_m)) + params.ssep_weight


class _PlanBuilder:
    """Records bond exchanges on a working copy, with certificates."""

    def __init__(self, config: Configuration, params: ModelParams):
        self.occ = config.occ.copy()
        self.work = Configuration(
            occ=self.occ,
            virtual_left=config.virtual_left,
            virtual_right=config.virtual_right,
        )
        self.params = params
        self.moves: List[Move] = []

    def do(self, bond: int, phase: str):
        a_sum = ssep_exchange_rate(self.work, bond)
        c = constraint_factor(self.work, bond, self.params.big_m)
        if a_sum == 0:
            raise RuntimeError(f"internal: exchange at bond {bond} moves nothing")
        if phase == PHASE_TRANSPORT and c <= 0:
            raise RuntimeError(f"internal: constrained move at bond {bond} has zero rate")
        self.moves.append(Move(bond=bond, phase=phase, certificate=float(c) + self.params.ssep_weight))
        self.occ[bond], self.occ[bond + 1] = self.occ[bond + 1], self.occ[bond]

    def translate_right(self, lo: int, hi: int):
        """Shift the occupied block [lo, hi] one site right (hi+1 empty)."""
        for w in range(hi, lo - 1, -1):
            self.do(w, PHASE_TRANSPORT)

    def translate_left(self, lo: int, hi: int):
        """Shift the occupied block [lo, hi] one site left (lo-1 empty)."""
        for w in range(lo - 1, hi):
            self.do(w, PHASE_TRANSPORT)


def mobile_cluster_path(
    config: Configuration,
    source: int,
    target: int,
    window: BoxSpec,
    params: ModelParams,
) -> MovePlan:
    """Plan a single-particle transfer escorted by a two-particle cluster.

    The window must sit directly against the source on the side opposite
    the target.  The two occupied window sites nearest the source (ties
    toward the smaller index) are moved together by free exchanges, the
    resulting pair is walked next to the source by constrained exchanges,
    the source particle is ferried to the target (constrained exchanges
    only, crossing occupied stretches by whole-block shifts), and then
    everything retraces: the pair walks home and the helpers are put back.
    """
    n = config.n
    window.validate(n)
    if not (1 <= source <= n - 1 and 1 <= target <= n - 1):
        raise ContractViolation("source and target must be lattice sites")
    if config.occ[source] != 1:
        raise ContractViolation(f"source site {source} is empty")
    if config.occ[target] != 0:
        raise ContractViolation(f"target site {target} is occupied")
    w_sites = window.sites()
    if target > source:
        if w_sites.stop - 1 != source - 1:
            raise ContractViolation(
                "window must end at source-1 when the target lies to the right"
            )
        return _plan_rightward(config, source, target, window, params)
    if w_sites.start != source + 1:
        raise ContractViolation(
            "window must start at source+1 when the target lies to the left"
        )
    return _plan_leftward(config, source, target, window, params)


def _plan_rightward(config, source, target, window, params) -> MovePlan:
    n = config.n
    helpers = [w for w in window.sites() if config.occ[w] == 1 and w != source]
    if len(helpers) < 2:
        raise InsufficientDensity(
            f"window holds {len(helpers)} helper particles, need 2"
        )
    h2 = max(helpers)           # nearest to the source
    h1 = max(h for h in helpers if h < h2)
    b = _PlanBuilder(config, params)

    # bring the far helper next to the near one (sites between are empty)
    for w in range(h1, h2 - 1):
        b.do(w, PHASE_ASSEMBLE)
    # walk the pair right until it sits at (source-2, source-1)
    for p in range(h2 - 1, source - 2):
        b.translate_right(p, p + 1)

    # ferry across [source, target]: queue of block shifts over the empty slots
    empties = [u for u in range(source + 1, target + 1) if b.occ[u] == 0]
    k = len(empties)
    Q = [source - 2, source - 1, source] + empties
    for j in range(1, k):
        b.translate_right(Q[j - 1], Q[j + 2] - 1)
    b.translate_right(Q[k + 1], target - 1)
    for r in range(k - 2, -1, -1):
        b.translate_left(Q[r] + 1, Q[r + 2])

    # walk the pair home and split the helpers back to their sites
    for p in range(source - 2, h2 - 1, -1):
        b.translate_left(p, p + 1)
    for w in range(h2 - 1, h1, -1):
        b.do(w - 1, PHASE_RESTORE)

    _verify_net_transfer(config.occ, b.occ, source, target)
    return MovePlan(moves=b.moves, source=source, target=target,
                    helpers=(h1, h2), window=window)


def _plan_leftward(config, source, target, window, params) -> MovePlan:
    """Mirror image of the rightward plan via lattice reflection x -> n-x."""
    n = config.n
    mocc = np.zeros_like(config.occ)
    mocc[1:n] = config.occ[1:n][::-1]
    mconfig = Configuration(
        occ=mocc, virtual_left=config.virtual_right, virtual_right=config.virtual_left
    )
    mwindow = BoxSpec(x=n - window.x, ell=window.ell,
                      side="left" if window.side == "right" else "right")
    mplan = _plan_rightward(mconfig, n - source, n - target, mwindow, params)
    moves = [Move(bond=n - 1 - m.bond, phase=m.phase, certificate=m.certificate)
             for m in mplan.moves]
    plan = MovePlan(
        moves=moves,
        source=source,
        target=target,
        helpers=tuple(sorted(n - h for h in mplan.helpers)),
        window=window,
    )
    final = plan.replay(config, params)  # reflection preserves rates; revalidate
    _verify_net_transfer(config.occ, final.occ, source, target)
    return plan


def _verify_net_transfer(before: np.ndarray, after: np.ndarray, source: int, target: int):
    expect = before.copy()
    expect[source] = 0
    expect[target] = 1
    if not np.array_equal(after, expect):
        raise RuntimeError("internal: plan does not realize the intended transfer")
