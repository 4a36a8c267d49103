"""Exact continuous-time simulation of the speeded-up particle system.

The engine draws exponential waiting times against the total scheduled
rate and picks transitions proportionally via a binary partial-sum tree,
so a step costs O(log n).  All scheduled rates carry the diffusive n^2
factor, hence recorded times are directly the macroscopic time variable.

Randomness comes from numpy's counter-based Philox generator seeded
through SeedSequence; a seed is mandatory and fully determines a run.
Replicas use spawn keys, so results never depend on scheduling order.
A run on a constraint-only system can reach a state with no enabled
transition; that is reported as absorption, not as an error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import _kernel
from .analysis import DynkinRecord, DynkinWeights
from .model import Configuration, ModelParams

REBUILD_EVERY = 1 << 20
_BUFFER_LEN = 1 << 20

SeedLike = Union[int, np.random.SeedSequence]


def _seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def _sample_sites(g: Callable[[float], float], n: int, rng: np.random.Generator) -> np.ndarray:
    probs = np.array([float(g(x / n)) for x in range(1, n)])
    if (probs < 0).any() or (probs > 1).any():
        raise ValueError("initial profile must take values in [0,1]")
    return (rng.random(n - 1) < probs).astype(np.int8)


def sample_initial(
    g: Callable[[float], float],
    n: int,
    rng: np.random.Generator,
    alpha: float = 0.0,
    beta: float = 0.0,
) -> Configuration:
    """Product-measure sample: site x occupied with probability g(x/n)."""
    return Configuration.from_sites(_sample_sites(g, n, rng), alpha, beta)


@dataclass
class EventSchedule:
    """Partial-sum tree over the n schedule entries (n-2 bonds + 2 flips)."""

    tree: np.ndarray
    tsize: int
    n: int

    @property
    def total(self) -> float:
        return float(self.tree[1])

    @property
    def entries(self) -> np.ndarray:
        """Current leaf rates: bonds 1..n-2 first, then the two flips."""
        return self.tree[self.tsize : self.tsize + self.n].copy()

    def leaf_sum(self) -> float:
        return float(self.tree[self.tsize : self.tsize + self.n].sum())


def _build_schedule(occ, params: ModelParams, pure_pmm: bool) -> EventSchedule:
    n = params.n
    tsize = 1
    while tsize < n:
        tsize *= 2
    tree = np.zeros(2 * tsize)
    alpha, beta, s, res = _dynamics_constants(params, pure_pmm)
    _kernel.tree_build(
        tree, tsize, n, occ, n, alpha, beta, params.big_m, s, res, float(n) ** 2
    )
    return EventSchedule(tree=tree, tsize=tsize, n=n)


def _dynamics_constants(params: ModelParams, pure_pmm: bool):
    """(alpha, beta, ssep weight, reservoir prefactor) seen by the kernel."""
    if pure_pmm:
        return 0.0, 0.0, 0.0, 0.0
    return params.alpha, params.beta, params.ssep_weight, params.reservoir_rate


def rebuild_schedule(config: Configuration, params: ModelParams, pure_pmm: bool = False) -> EventSchedule:
    """Every rate recomputed from scratch; the oracle for incremental updates."""
    return _build_schedule(config.occ, params, pure_pmm)


class Absorbed:
    """Marker result of a step from a state with no enabled transition."""


@dataclass
class ObserverSpec:
    """What to record and when.

    sample_times must be strictly increasing and non-negative; the run
    ends at the last one.  ``box_width`` requests coarse block averages,
    ``dynkin`` (a spatial test function) requests the martingale
    decomposition terms, ``avg_windows`` requests exact time-averaged
    occupation profiles over [t0, t1] intervals.
    """

    sample_times: Sequence[float]
    profile: bool = True
    box_width: Optional[int] = None
    boundary: bool = True
    dynkin: Optional[Callable[[float], float]] = None
    avg_windows: Sequence[tuple] = ()

    def __post_init__(self):
        ts = [float(t) for t in self.sample_times]
        if not ts:
            raise ValueError("need at least one sample time")
        if ts[0] < 0 or any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample times must be strictly increasing and >= 0")
        self.sample_times = tuple(ts)
        for t0, t1 in self.avg_windows:
            if not (0 <= t0 < t1 <= ts[-1]):
                raise ValueError(f"averaging window ({t0},{t1}) outside [0, T]")
        if self.box_width is not None and self.box_width < 1:
            raise ValueError("box width must be >= 1")

    @property
    def horizon(self) -> float:
        return self.sample_times[-1]


@dataclass
class ObservationRecord:
    """Everything a simulation run produced, serializable for provenance."""

    params: ModelParams
    seed_entropy: object
    spawn_key: tuple
    times: np.ndarray
    profiles: Optional[np.ndarray]          # (n_samples, n-1) or None
    boxes: Optional[np.ndarray]             # (n_samples, n_blocks) or None
    box_width: Optional[int]
    boundary_occ: Optional[np.ndarray]      # (n_samples, 2)
    particle_counts: np.ndarray             # (n_samples,)
    cum_flips: np.ndarray                   # (n_samples, 4)
    occ_time: np.ndarray                    # (n_samples, n-1) cumulative site-occupation time
    avg_profiles: dict                      # (t0, t1) -> array of n-1 site means
    dynkin: Optional[DynkinRecord]
    absorbed: bool
    absorbed_time: Optional[float]
    n_events: int
    pure_pmm: bool

    def net_flux_density(self, t0: float, t1: float) -> tuple:
        """Time-averaged boundary current densities over [t0, t1].

        Returns (left, right): left is the mean of m n^(1-theta) (alpha -
        occ(1)) over the window (positive = net inflow), right the mirror
        expression at site n-1; both are exact time integrals.
        """
        i0 = self._time_index(t0)
        i1 = self._time_index(t1)
        span = self.times[i1] - self.times[i0]
        p = self.params
        pref = p.m * float(p.n) ** (1.0 - p.theta)
        mean_left = (self.occ_time[i1, 0] - self.occ_time[i0, 0]) / span
        mean_right = (self.occ_time[i1, -1] - self.occ_time[i0, -1]) / span
        return pref * (p.alpha - mean_left), pref * (p.beta - mean_right)

    def _time_index(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} was not sampled")
        return k

    def to_csv(self) -> str:
        """Long-format CSV: replica-free body, one row per observable value."""
        lines = ["time,observable,index,value"]

        def add(t, name, idx, val):
            lines.append(f"{t!r},{name},{idx},{val!r}")

        for k, t in enumerate(self.times):
            t = float(t)
            if self.profiles is not None:
                for x, v in enumerate(self.profiles[k], start=1):
                    add(t, "site", x, int(v))
            if self.boxes is not None:
                for j, v in enumerate(self.boxes[k]):
                    add(t, "box", j, float(v))
            if self.boundary_occ is not None:
                add(t, "boundary_left", 1, int(self.boundary_occ[k, 0]))
                add(t, "boundary_right", self.params.n - 1, int(self.boundary_occ[k, 1]))
            add(t, "particles", 0, int(self.particle_counts[k]))
            for j, name in enumerate(
                ("inserted_left", "removed_left", "inserted_right", "removed_right")
            ):
                add(t, name, 0, int(self.cum_flips[k, j]))
            if self.dynkin is not None:
                add(t, "martingale", 0, float(self.dynkin.residual(t)))
        for (t0, t1), prof in sorted(self.avg_profiles.items()):
            for x, v in enumerate(prof, start=1):
                lines.append(f"{t0!r},avg_profile[{t0!r}:{t1!r}],{x},{v!r}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "schema": "pmmsim-observation-v1",
            "params": {
                "n": self.params.n,
                "theta": self.params.theta,
                "m": self.params.m,
                "a": self.params.a,
                "alpha": self.params.alpha,
                "beta": self.params.beta,
                "big_m": self.params.big_m,
            },
            "seed_entropy": str(self.seed_entropy),
            "spawn_key": list(self.spawn_key),
            "pure_pmm": self.pure_pmm,
            "times": [float(t) for t in self.times],
            "absorbed": self.absorbed,
            "absorbed_time": self.absorbed_time,
            "n_events": self.n_events,
            "particle_counts": [int(c) for c in self.particle_counts],
        }
        return json.dumps(doc, sort_keys=True)


class SimState:
    """Mutable single-run state; not shareable across threads mid-run."""

    def __init__(
        self,
        params: ModelParams,
        g: Callable[[float], float],
        seed: SeedLike,
        pure_pmm: bool = False,
        dynkin: Optional[Callable[[float], float]] = None,
    ):
        self.params = params
        self.pure_pmm = pure_pmm
        n = params.n
        ss = _seed_sequence(seed)
        self.seed_entropy = ss.entropy
        self.spawn_key = tuple(ss.spawn_key)
        self.rng = np.random.Generator(np.random.Philox(ss))
        sites = _sample_sites(g, n, self.rng)
        self.occ = np.zeros(n + 1, dtype=np.int8)
        self.occ[1:n] = sites
        self.initial_sites = sites.copy()
        self.time = 0.0
        self.schedule = _build_schedule(self.occ, params, pure_pmm)
        self._alpha, self._beta, self._s, self._res = _dynamics_constants(params, pure_pmm)
        self._n2 = float(n) ** 2
        self._buf = np.empty(0)
        self._pos = np.zeros(1, dtype=np.int64)
        self._t_state = np.zeros(1)
        self.occ_int = np.zeros(n + 1)
        self.lazy_t = np.zeros(n + 1)
        self.flips = np.zeros(4, dtype=np.int64)
        self.counts = np.zeros(n, dtype=np.int64)
        self._ctrs = np.array([REBUILD_EVERY, 0], dtype=np.int64)
        self.absorbed = False
        # Dynkin decomposition bookkeeping (optional)
        self._dyn_on = dynkin is not None
        self.tau = np.zeros(n + 1)
        self.dyn = np.zeros(6)
        if self._dyn_on:
            self.weights = DynkinWeights.from_function(dynkin, params)
            self._wb = self.weights.bulk
            self._gcoef = self.weights.gcoef
            self._refresh_dynkin_integrands()
        else:
            self.weights = None
            self._wb = np.zeros(n)
            self._gcoef = np.zeros(4)

    @property
    def config(self) -> Configuration:
        vl, vr = (0.0, 0.0) if self.pure_pmm else (self.params.alpha, self.params.beta)
        return Configuration(occ=self.occ.copy(), virtual_left=vl, virtual_right=vr)

    @property
    def n_events(self) -> int:
        return int(self._ctrs[1])

    def _refresh_dynkin_integrands(self):
        n = self.params.n
        for x in range(1, n):
            self.tau[x] = _kernel.tau_of(self.occ, x, n, self._alpha, self._beta, self._s)
        self.dyn[0] = float(np.dot(self._wb[1:n], self.tau[1:n]))
        self.dyn[1] = self._gcoef[0] * self.tau[1] - self._gcoef[1] * self.tau[n - 1]
        self.dyn[2] = self._gcoef[2] * (self._alpha - self.occ[1]) + self._gcoef[3] * (
            self._beta - self.occ[n - 1]
        )

    def rebuild(self):
        """Exact schedule rebuild; also refreshes the Dynkin integrands."""
        self.schedule = _build_schedule(self.occ, self.params, self.pure_pmm)
        self._ctrs[0] = REBUILD_EVERY
        if self._dyn_on:
            self._refresh_dynkin_integrands()

    def _refill(self):
        self._buf = self.rng.random(_BUFFER_LEN)
        self._pos[0] = 0

    def _advance(self, t_stop: float, max_events: int) -> int:
        self._t_state[0] = self.time
        code = _kernel.advance(
            self.occ,
            self.schedule.tree,
            self.schedule.tsize,
            self.params.n,
            self.params.big_m,
            self._alpha,
            self._beta,
            self._s,
            self._res,
            self._n2,
            self._t_state,
            t_stop,
            self._buf,
            self._pos,
            self.occ_int,
            self.lazy_t,
            self.flips,
            self.counts,
            self._dyn_on,
            self.tau,
            self._wb,
            self._gcoef,
            self.dyn,
            self._ctrs,
            max_events,
        )
        self.time = float(self._t_state[0])
        return code

    def run_to(self, t_stop: float):
        """Advance the dynamics to macroscopic time t_stop (or absorption)."""
        while True:
            code = self._advance(t_stop, 1 << 62)
            if code == _kernel.STOP:
                return
            if code == _kernel.REFILL:
                self._refill()
            elif code == _kernel.REBUILD:
                self.rebuild()
            elif code == _kernel.ABSORBED:
                self._freeze_to(t_stop)
                return
            else:  # MAXEVENTS cannot trigger with the huge budget
                raise AssertionError("unexpected kernel return code")

    def _freeze_to(self, t_stop: float):
        """Advance clocks over an absorbing state (occupations frozen)."""
        if not self.absorbed:
            self.absorbed = True
            self.absorbed_time = self.time
        seg = t_stop - self.time
        if seg > 0 and self._dyn_on:
            self.dyn[3] += self.dyn[0] * seg
            self.dyn[4] += self.dyn[1] * seg
            self.dyn[5] += self.dyn[2] * seg
        self.time = t_stop

    def step(self):
        """Execute exactly one transition.

        Returns the elapsed macroscopic time, or the Absorbed class when no
        transition is enabled (possible only for constraint-only dynamics).
        """
        t_before = self.time
        while True:
            code = self._advance(np.inf, 1)
            if code == _kernel.MAXEVENTS:
                return self.time - t_before
            if code == _kernel.REBUILD:
                # the rebuild budget hit right after the event ran
                self.rebuild()
                return self.time - t_before
            if code == _kernel.REFILL:
                self._refill()
            elif code == _kernel.ABSORBED:
                self.absorbed = True
                self.absorbed_time = self.time
                return Absorbed
            else:
                raise AssertionError("unexpected kernel return code")

    def flush_occupation_time(self):
        """Bring every site's lazily accumulated occupation time up to now."""
        dt = self.time - self.lazy_t
        self.occ_int += self.occ * dt
        self.lazy_t[:] = self.time


def _box_averages(sites: np.ndarray, width: int) -> np.ndarray:
    nblocks = math.ceil(len(sites) / width)
    out = np.empty(nblocks)
    for j in range(nblocks):
        out[j] = sites[j * width : (j + 1) * width].mean()
    return out


def box_centers(n: int, width: int) -> np.ndarray:
    """Macroscopic coordinates of the coarse-block centres for sites 1..n-1."""
    edges = list(range(1, n, width)) + [n]
    return np.array([(lo + min(hi, n) - 1) / 2.0 / n for lo, hi in zip(edges, edges[1:])])


def simulate(
    params: ModelParams,
    g: Callable[[float], float],
    spec: ObserverSpec,
    seed: SeedLike,
    pure_pmm: bool = False,
) -> ObservationRecord:
    """Run one replica and collect the requested observables.

    Fully deterministic given (params, g, spec, seed).  Absorption (only
    possible in constraint-only mode) is recorded and the remaining sample
    times are reported with the frozen configuration.
    """
    state = SimState(params, g, seed, pure_pmm=pure_pmm, dynkin=spec.dynkin)
    n = params.n
    stops = sorted(set(spec.sample_times) | {t for w in spec.avg_windows for t in w})
    sample_set = set(spec.sample_times)

    profiles = [] if spec.profile else None
    boxes = [] if spec.box_width else None
    boundary = [] if spec.boundary else None
    particle_counts = []
    cum_flips = []
    occ_time = []
    times = []
    window_marks = {}
    dyn_pairings = []
    dyn_ints = []

    for t_stop in stops:
        if t_stop > 0:
            state.run_to(t_stop)
        state.flush_occupation_time()
        if t_stop in sample_set:
            times.append(t_stop)
            sites = state.occ[1:n].copy()
            if profiles is not None:
                profiles.append(sites)
            if boxes is not None:
                boxes.append(_box_averages(sites.astype(float), spec.box_width))
            if boundary is not None:
                boundary.append((state.occ[1], state.occ[n - 1]))
            particle_counts.append(int(sites.sum()))
            cum_flips.append(state.flips.copy())
            occ_time.append(state.occ_int[1:n].copy())
            if spec.dynkin is not None:
                dyn_pairings.append(float(np.dot(state.weights.gvals[1:n], sites)) / n)
                dyn_ints.append(state.dyn[3:6].copy())
        window_marks[t_stop] = state.occ_int[1:n].copy()

    avg_profiles = {}
    for t0, t1 in spec.avg_windows:
        avg_profiles[(t0, t1)] = (window_marks[t1] - window_marks[t0]) / (t1 - t0)

    dynkin_record = None
    if spec.dynkin is not None:
        ints = np.asarray(dyn_ints)
        dynkin_record = DynkinRecord(
            n=n,
            times=np.asarray(times),
            pairings=np.asarray(dyn_pairings),
            bulk_int=ints[:, 0],
            grad_int=ints[:, 1],
            res_int=ints[:, 2],
            mode="event-exact",
        )

    return ObservationRecord(
        params=params,
        seed_entropy=state.seed_entropy,
        spawn_key=state.spawn_key,
        times=np.asarray(times),
        profiles=None if profiles is None else np.asarray(profiles),
        boxes=None if boxes is None else np.asarray(boxes),
        box_width=spec.box_width,
        boundary_occ=None if boundary is None else np.asarray(boundary, dtype=np.int8),
        particle_counts=np.asarray(particle_counts, dtype=np.int64),
        cum_flips=np.asarray(cum_flips, dtype=np.int64),
        occ_time=np.asarray(occ_time),
        avg_profiles=avg_profiles,
        dynkin=dynkin_record,
        absorbed=state.absorbed,
        absorbed_time=getattr(state, "absorbed_time", None),
        n_events=state.n_events,
        pure_pmm=pure_pmm,
    )
