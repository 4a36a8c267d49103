"""Command line interface and the simulation-vs-PDE comparison harness.

Subcommands
-----------
simulate    run particle replicas, write the observation records
solve       integrate the macroscopic equation, write the field as CSV
stationary  evaluate the closed-form stationary profile on a grid
compare     run replicas and one solve, report L1/Linf distances
diagnose    fast structural self-checks on small lattices

Configuration is a plain-text file of ``key=value`` lines (``#`` starts
a comment).  Unknown keys are rejected.  Recognized keys:

    mode        simulate | solve | stationary | compare | diagnose
    n           lattice size (or comma list for compare ladders)
    theta, m, a, alpha, beta, big_m     model parameters
    kappa_override   explicit boundary kappa (otherwise theta decides:
                     theta<1 Dirichlet, theta=1 Robin kappa=m,
                     theta>1 Robin kappa=0)
    J           PDE grid intervals
    T           time horizon
    samples     number of sample times (uniform on [0, T]), or
    sample_times  explicit comma list
    burn_in     start of the stationary averaging window (compare)
    replicas    independent runs
    seed        base seed (required for stochastic modes)
    coarse_width  block width for empirical profiles (default n//50, min 1)
    initial     uniform:<v> | linear:<l>,<r> | step:<l>,<r>@<u0> | stationary
    workers     process count for replicas (default: cpu count)
    out         output directory

The regime-to-boundary mapping follows the slow-reservoir limit theorem;
overriding kappa requires the explicit ``kappa_override`` key.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import analysis, engine, pde
from .model import (
    Configuration,
    ModelParams,
    all_configurations,
    apply_exchange,
    apply_flip,
    boundary_flip_rate,
    pmm_exchange_rate,
    ssep_exchange_rate,
    transitions,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(ValueError):
    """Invalid configuration or command line."""


MODES = ("simulate", "solve", "stationary", "compare", "diagnose")

_KEYS = {
    "mode": str,
    "n": str,
    "theta": float,
    "m": float,
    "a": float,
    "alpha": float,
    "beta": float,
    "big_m": int,
    "kappa_override": float,
    "J": int,
    "T": float,
    "samples": int,
    "sample_times": str,
    "burn_in": float,
    "replicas": int,
    "seed": int,
    "coarse_width": int,
    "initial": str,
    "workers": int,
    "out": str,
}

_DEFAULTS = dict(
    mode="compare",
    n="100",
    theta=0.0,
    m=1.0,
    a=1.5,
    alpha=0.3,
    beta=0.7,
    big_m=2,
    kappa_override=None,
    J=256,
    T=1.0,
    samples=5,
    sample_times=None,
    burn_in=None,
    replicas=10,
    seed=None,
    coarse_width=None,
    initial="uniform:0.5",
    workers=None,
    out=None,
)


@dataclass(frozen=True)
class RunConfig:
    mode: str
    n_values: tuple
    theta: float
    m: float
    a: float
    alpha: float
    beta: float
    big_m: int
    kappa_override: Optional[float]
    J: int
    T: float
    samples: int
    sample_times: Optional[tuple]
    burn_in: Optional[float]
    replicas: int
    seed: Optional[int]
    coarse_width: Optional[int]
    initial: str
    workers: Optional[int]
    out: Optional[str]

    def params(self, n: Optional[int] = None) -> ModelParams:
        return ModelParams(
            n=self.n_values[0] if n is None else n,
            theta=self.theta,
            m=self.m,
            a=self.a,
            alpha=self.alpha,
            beta=self.beta,
            big_m=self.big_m,
        )

    def boundary(self) -> pde.BoundaryCondition:
        return regime_boundary(
            self.theta, self.m, self.alpha, self.beta, self.kappa_override
        )

    def effective_coarse_width(self, n: int) -> int:
        if self.coarse_width is not None:
            return self.coarse_width
        return max(n // 50, 1)

    def times(self) -> tuple:
        if self.sample_times is not None:
            return self.sample_times
        k = max(self.samples, 1)
        return tuple(self.T * (i + 1) / k for i in range(k))

    def emit(self) -> str:
        """Round-trippable key=value text."""
        lines = [
            f"mode={self.mode}",
            "n=" + ",".join(str(v) for v in self.n_values),
            f"theta={self.theta!r}",
            f"m={self.m!r}",
            f"a={self.a!r}",
            f"alpha={self.alpha!r}",
            f"beta={self.beta!r}",
            f"big_m={self.big_m}",
            f"J={self.J}",
            f"T={self.T!r}",
            f"replicas={self.replicas}",
            f"initial={self.initial}",
        ]
        if self.kappa_override is not None:
            lines.append(f"kappa_override={self.kappa_override!r}")
        if self.sample_times is not None:
            lines.append("sample_times=" + ",".join(repr(t) for t in self.sample_times))
        else:
            lines.append(f"samples={self.samples}")
        if self.burn_in is not None:
            lines.append(f"burn_in={self.burn_in!r}")
        if self.seed is not None:
            lines.append(f"seed={self.seed}")
        if self.coarse_width is not None:
            lines.append(f"coarse_width={self.coarse_width}")
        if self.workers is not None:
            lines.append(f"workers={self.workers}")
        if self.out is not None:
            lines.append(f"out={self.out}")
        return "\n".join(lines) + "\n"


def regime_boundary(
    theta: float,
    m: float,
    alpha: float,
    beta: float,
    kappa_override: Optional[float] = None,
) -> pde.BoundaryCondition:
    """Boundary condition of the macroscopic limit for a given theta.

    theta < 1 pins the boundary densities; theta = 1 gives a Robin
    condition with kappa = m; theta > 1 gives zero-flux.  An explicit
    kappa_override always wins.
    """
    if kappa_override is not None:
        return pde.BoundaryCondition.robin(kappa_override, alpha, beta)
    if theta < 1.0:
        return pde.BoundaryCondition.dirichlet(alpha, beta)
    if theta == 1.0:
        return pde.BoundaryCondition.robin(m, alpha, beta)
    return pde.BoundaryCondition.robin(0.0, alpha, beta)


def parse_config(text: str) -> RunConfig:
    """Parse key=value configuration text; unknown keys are usage errors."""
    raw = dict(_DEFAULTS)
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise UsageError(f"unknown configuration key {key!r}")
        try:
            raw[key] = _KEYS[key](value)
        except ValueError as exc:
            raise UsageError(f"key {key!r}: cannot parse {value!r}") from exc
    return _validate(raw)


def _validate(raw: dict) -> RunConfig:
    if raw["mode"] not in MODES:
        raise UsageError(f"key 'mode': must be one of {MODES}")
    try:
        n_values = tuple(int(s) for s in str(raw["n"]).split(","))
    except ValueError as exc:
        raise UsageError("key 'n': expected an integer or comma list") from exc
    for key, lo, hi in (("alpha", 0.0, 1.0), ("beta", 0.0, 1.0)):
        if not (lo < raw[key] < hi):
            raise UsageError(f"key {key!r}: must lie in ({lo},{hi}), got {raw[key]}")
    if raw["theta"] < 0:
        raise UsageError("key 'theta': must be >= 0")
    if raw["m"] <= 0:
        raise UsageError("key 'm': must be positive")
    if not (1.0 < raw["a"] < 2.0):
        raise UsageError("key 'a': must lie in (1,2)")
    if raw["big_m"] not in (2, 3):
        raise UsageError("key 'big_m': must be 2 or 3")
    if any(n < 4 for n in n_values):
        raise UsageError("key 'n': every lattice size must be >= 4")
    if raw["J"] < 8:
        raise UsageError("key 'J': grid too coarse, need >= 8")
    if raw["T"] <= 0:
        raise UsageError("key 'T': must be positive")
    if raw["kappa_override"] is not None and raw["kappa_override"] < 0:
        raise UsageError("key 'kappa_override': must be >= 0")
    sample_times = None
    if raw["sample_times"] is not None:
        try:
            sample_times = tuple(float(s) for s in str(raw["sample_times"]).split(","))
        except ValueError as exc:
            raise UsageError("key 'sample_times': expected a comma list of times") from exc
        if any(b <= a for a, b in zip(sample_times, sample_times[1:])) or sample_times[0] < 0:
            raise UsageError("key 'sample_times': must be strictly increasing and >= 0")
        if sample_times[-1] > raw["T"] + 1e-12:
            raise UsageError("key 'sample_times': must not exceed T")
    if raw["burn_in"] is not None and not (0 <= raw["burn_in"] < raw["T"]):
        raise UsageError("key 'burn_in': must lie in [0, T)")
    if raw["replicas"] < 0:
        raise UsageError("key 'replicas': must be >= 0")
    if raw["coarse_width"] is not None and raw["coarse_width"] < 1:
        raise UsageError("key 'coarse_width': must be >= 1")
    if raw["workers"] is not None and raw["workers"] < 1:
        raise UsageError("key 'workers': must be >= 1")
    _initial_profile(raw["initial"], regime_boundary(
        raw["theta"], raw["m"], raw["alpha"], raw["beta"], raw["kappa_override"]))
    return RunConfig(
        mode=raw["mode"],
        n_values=n_values,
        theta=raw["theta"],
        m=raw["m"],
        a=raw["a"],
        alpha=raw["alpha"],
        beta=raw["beta"],
        big_m=raw["big_m"],
        kappa_override=raw["kappa_override"],
        J=raw["J"],
        T=raw["T"],
        samples=raw["samples"],
        sample_times=sample_times,
        burn_in=raw["burn_in"],
        replicas=raw["replicas"],
        seed=raw["seed"],
        coarse_width=raw["coarse_width"],
        initial=raw["initial"],
        workers=raw["workers"],
        out=raw["out"],
    )


def _initial_profile(spec: str, bc: pde.BoundaryCondition) -> Callable[[float], float]:
    """Initial profile factory for the documented ``initial`` grammar."""
    kind, _, rest = spec.partition(":")
    if kind == "uniform":
        try:
            v = float(rest)
        except ValueError as exc:
            raise UsageError(f"key 'initial': bad uniform value {rest!r}") from exc
        if not (0 <= v <= 1):
            raise UsageError("key 'initial': uniform value must lie in [0,1]")
        return lambda u: v
    if kind == "linear":
        try:
            lo, hi = (float(s) for s in rest.split(","))
        except ValueError as exc:
            raise UsageError(f"key 'initial': bad linear spec {rest!r}") from exc
        return lambda u: lo + (hi - lo) * u
    if kind == "step":
        try:
            vals, u0 = rest.split("@")
            lo, hi = (float(s) for s in vals.split(","))
            u0 = float(u0)
        except ValueError as exc:
            raise UsageError(f"key 'initial': bad step spec {rest!r}") from exc
        return lambda u: lo if u < u0 else hi
    if kind == "stationary":
        return lambda u: pde.stationary_profile(bc, u)
    raise UsageError(f"key 'initial': unknown profile kind {kind!r}")


# ---------------------------------------------------------------------------
# replica running


def _run_replica(args):
    (params, initial, bc_tuple, spec_kwargs, seed, replica) = args
    bc = pde.BoundaryCondition(*bc_tuple)
    g = _initial_profile(initial, bc)
    spec = engine.ObserverSpec(**spec_kwargs)
    child = np.random.SeedSequence(entropy=seed, spawn_key=(replica,))
    return engine.simulate(params, g, spec, child)


def run_replicas(
    params: ModelParams,
    initial: str,
    bc: pde.BoundaryCondition,
    spec: engine.ObserverSpec,
    seed: int,
    replicas: int,
    workers: Optional[int] = None,
) -> list:
    """Independent replicas with per-replica derived streams.

    Results are identical whatever the worker count; replica r always uses
    the spawn key (r,) of the base seed.
    """
    spec_kwargs = dict(
        sample_times=spec.sample_times,
        profile=spec.profile,
        box_width=spec.box_width,
        boundary=spec.boundary,
        dynkin=spec.dynkin,
        avg_windows=spec.avg_windows,
    )
    bc_tuple = (bc.kind, bc.alpha, bc.beta, bc.kappa)
    jobs = [
        (params, initial, bc_tuple, spec_kwargs, seed, r) for r in range(replicas)
    ]
    if workers is None:
        workers = os.cpu_count() or 1
    workers = min(workers, replicas) or 1
    if workers == 1 or spec.dynkin is not None:
        # test functions may not pickle; fall back to in-process execution
        return [_run_replica(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_replica, jobs))


# ---------------------------------------------------------------------------
# comparison harness


@dataclass
class ComparisonReport:
    """Distances between replica-averaged empirical profiles and the field."""

    config_text: str
    entries: list          # one dict per (n, time)
    stationary: list       # one dict per n
    ladder: list           # trend rows across n (reported, never asserted)
    runtime_seconds: float = 0.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": "pmmsim-comparison-v1",
                "config": self.config_text,
                "entries": self.entries,
                "stationary": self.stationary,
                "ladder": self.ladder,
                "volatile": {"runtime_seconds": self.runtime_seconds},
            },
            sort_keys=True,
            indent=2,
        )


def _coarse_profile(mean_sites: np.ndarray, n: int, width: int):
    blocks = engine._box_averages(mean_sites, width)
    centers = engine.box_centers(n, width)
    return centers, blocks


def compare(config: RunConfig) -> ComparisonReport:
    """Run the full simulation-vs-equation comparison for every configured n."""
    if config.replicas < 1:
        raise UsageError("key 'replicas': compare needs at least one replica")
    if config.seed is None:
        raise UsageError("key 'seed': required for stochastic modes")
    t_start = _time.perf_counter()
    bc = config.boundary()
    times = config.times()
    burn = config.burn_in
    entries = []
    stationary_rows = []
    per_n_final = {}
    for n in config.n_values:
        params = config.params(n)
        width = config.effective_coarse_width(n)
        windows = ((burn, config.T),) if burn is not None else ()
        spec = engine.ObserverSpec(
            sample_times=times,
            profile=True,
            box_width=width,
            avg_windows=windows,
        )
        records = run_replicas(
            params, config.initial, bc, spec, config.seed, config.replicas, config.workers
        )
        g = _initial_profile(config.initial, bc)
        field = pde.solve(g, bc, config.T, config.J, sample_times=(0.0,) + tuple(times))
        centers = engine.box_centers(n, width)
        for k, t in enumerate(times):
            mean_sites = np.mean([r.profiles[k] for r in records], axis=0)
            _, blocks = _coarse_profile(mean_sites, n, width)
            solved = np.interp(centers, field.nodes, field.at_time(t))
            diff = np.abs(blocks - solved)
            entries.append(
                {
                    "n": n,
                    "t": t,
                    "width": width,
                    "l1": float(diff.mean()),
                    "linf": float(diff.max()),
                    "mc_se": float(
                        np.std([r.profiles[k].mean() for r in records]) /
                        max(math.sqrt(len(records)), 1.0)
                    ),
                }
            )
        # distance of the (time-averaged, if burn_in given) profile to the
        # closed-form stationary solution
        if burn is not None:
            mean_sites = np.mean(
                [r.avg_profiles[(burn, config.T)] for r in records], axis=0
            )
        else:
            mean_sites = np.mean([r.profiles[-1] for r in records], axis=0)
        _, blocks = _coarse_profile(mean_sites, n, width)
        closed = stationary_values(bc, centers)
        sdiff = np.abs(blocks - closed)
        row = {
            "n": n,
            "width": width,
            "l1": float(sdiff.mean()),
            "linf": float(sdiff.max()),
            "window": [burn, config.T] if burn is not None else None,
        }
        stationary_rows.append(row)
        per_n_final[n] = row
        # boundary flux densities, for reservoir-scaling studies
        t0 = burn if burn is not None else 0.0
        fl, fr = _mean_flux(records, t0, config.T)
        row["flux_left"] = fl
        row["flux_right"] = fr
    ladder = []
    ns = sorted(per_n_final)
    for n_small, n_big in zip(ns, ns[1:]):
        if n_big != 2 * n_small:
            continue
        a, b = per_n_final[n_small], per_n_final[n_big]
        ladder.append(
            {
                "n": [n_small, n_big],
                "l1_ratio": b["l1"] / a["l1"] if a["l1"] > 0 else None,
                "flux_ratio_left": _safe_ratio(b["flux_left"], a["flux_left"]),
                "flux_ratio_right": _safe_ratio(b["flux_right"], a["flux_right"]),
                "expected_flux_ratio": 2.0 ** (1.0 - config.theta),
            }
        )
    return ComparisonReport(
        config_text=config.emit(),
        entries=entries,
        stationary=stationary_rows,
        ladder=ladder,
        runtime_seconds=_time.perf_counter() - t_start,
    )


def _safe_ratio(num, den):
    return num / den if den not in (0, None) and num is not None else None


def _mean_flux(records, t0, t1):
    pairs = [r.net_flux_density(t0, t1) for r in records]
    return (
        float(np.mean([p[0] for p in pairs])),
        float(np.mean([p[1] for p in pairs])),
    )


def stationary_values(bc: pde.BoundaryCondition, u: np.ndarray) -> np.ndarray:
    return np.asarray(pde.stationary_profile(bc, np.asarray(u, dtype=float)))


# ---------------------------------------------------------------------------
# diagnose mode: structural self-checks at desk scale


def diagnose(config: RunConfig) -> dict:
    params = ModelParams(
        n=10, theta=config.theta, m=config.m, a=config.a,
        alpha=config.alpha, beta=config.beta, big_m=config.big_m,
    )
    results = {}

    # bulk current is a discrete gradient, exhaustively
    ok = True
    for cfg in all_configurations(8, params.alpha, params.beta):
        p8 = replace_n(params, 8)
        for x in range(1, 7):
            lhs = analysis.instantaneous_current(cfg, x, p8)
            rhs = analysis.tau_h(cfg, x, p8) - analysis.tau_h(cfg, x + 1, p8)
            if abs(lhs - rhs) > 1e-12:
                ok = False
    results["current_is_gradient"] = ok

    # reversibility at equal reservoir densities
    rho = 0.5
    peq = ModelParams(n=8, theta=config.theta, m=config.m, a=config.a,
                      alpha=rho, beta=rho, big_m=config.big_m)
    ok = True
    for cfg in all_configurations(8, rho, rho):
        for x in range(1, 7):
            fwd = (pmm_exchange_rate(cfg, x, peq)
                   + peq.ssep_weight * ssep_exchange_rate(cfg, x))
            other = apply_exchange(cfg, x)
            bwd = (pmm_exchange_rate(other, x, peq)
                   + peq.ssep_weight * ssep_exchange_rate(other, x))
            if abs(fwd - bwd) > 1e-12:
                ok = False
        for z in (1, 7):
            fwd = boundary_flip_rate(cfg, z, peq)
            bwd = boundary_flip_rate(apply_flip(cfg, z), z, peq)
            if abs(fwd - bwd) > 1e-12:  # Bernoulli(1/2) weights are equal
                ok = False
    results["detailed_balance_half"] = ok

    # absorbing-state detector against the generator
    ok = True
    for cfg in all_configurations(8, 0.0, 0.0):
        blocked = analysis.detect_blocked(cfg, "pure-pmm", big_m=params.big_m)
        moves = any(True for _ in transitions(cfg, replace_n(params, 8), pure_pmm=True))
        if blocked == moves:
            ok = False
    results["blocked_detector"] = ok

    # a transport plan on a random feasible instance
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(config.seed or 0)))
    n = 24
    sites = (rng.random(n - 1) < 0.4).astype(np.int8)
    sites[11] = 1
    sites[8] = 1
    sites[9] = 1
    sites[15] = 0
    cfg = Configuration.from_sites(sites, params.alpha, params.beta)
    plan = analysis.mobile_cluster_path(
        cfg, 12, 16, analysis.BoxSpec(x=11, ell=8, side="left"), replace_n(params, n)
    )
    final = plan.replay(cfg, replace_n(params, n))
    results["transport_plan"] = bool(
        final.occ[12] == 0 and final.occ[16] == 1 and plan.budget_ok()
    )
    results["ok"] = all(results.values())
    return results


def replace_n(params: ModelParams, n: int) -> ModelParams:
    return ModelParams(n=n, theta=params.theta, m=params.m, a=params.a,
                       alpha=params.alpha, beta=params.beta, big_m=params.big_m)


# ---------------------------------------------------------------------------
# entry points


def _write(outdir: Optional[str], name: str, text: str) -> Optional[Path]:
    if outdir is None:
        sys.stdout.write(text)
        return None
    path = Path(outdir)
    path.mkdir(parents=True, exist_ok=True)
    target = path / name
    target.write_text(text)
    return target


def _field_csv(field: pde.SpaceTimeField) -> str:
    lines = ["t,u,rho"]
    for k, t in enumerate(field.times):
        for u, v in zip(field.nodes, field.values[k]):
            lines.append(f"{float(t)!r},{float(u)!r},{float(v)!r}")
    return "\n".join(lines) + "\n"


def _stationary_csv(bc: pde.BoundaryCondition, J: int) -> str:
    u = np.linspace(0.0, 1.0, J + 1)
    vals = stationary_values(bc, u)
    lines = ["u,rho"]
    for ui, vi in zip(u, vals):
        lines.append(f"{float(ui)!r},{float(vi)!r}")
    return "\n".join(lines) + "\n"


def run(config: RunConfig) -> int:
    """Dispatch one parsed configuration; returns a process exit status."""
    try:
        if config.mode == "stationary":
            _write(config.out, "stationary.csv", _stationary_csv(config.boundary(), config.J))
        elif config.mode == "solve":
            bc = config.boundary()
            g = _initial_profile(config.initial, bc)
            field = pde.solve(g, bc, config.T, config.J,
                              sample_times=(0.0,) + tuple(config.times()))
            _write(config.out, "field.csv", _field_csv(field))
        elif config.mode == "simulate":
            if config.seed is None:
                raise UsageError("key 'seed': required for stochastic modes")
            if config.replicas < 1:
                raise UsageError("key 'replicas': must be >= 1 for simulate")
            bc = config.boundary()
            params = config.params()
            burn = config.burn_in
            windows = ((burn, config.T),) if burn is not None else ()
            spec = engine.ObserverSpec(
                sample_times=config.times(),
                box_width=config.effective_coarse_width(params.n),
                avg_windows=windows,
            )
            records = run_replicas(params, config.initial, bc, spec,
                                   config.seed, config.replicas, config.workers)
            for r, rec in enumerate(records):
                _write(config.out, f"replica{r:04d}.csv", rec.to_csv())
                _write(config.out, f"replica{r:04d}.json", rec.to_json() + "\n")
        elif config.mode == "compare":
            report = compare(config)
            _write(config.out, "comparison.json", report.to_json() + "\n")
        elif config.mode == "diagnose":
            results = diagnose(config)
            _write(config.out, "diagnose.json", json.dumps(results, sort_keys=True) + "\n")
            if not results["ok"]:
                return EXIT_RUNTIME
        return EXIT_OK
    except UsageError:
        raise
    except (pde.NumericalInstability, RuntimeError) as exc:
        _emit_error("runtime", str(exc), config.out)
        return EXIT_RUNTIME


def _emit_error(kind: str, message: str, outdir: Optional[str]):
    doc = json.dumps({"error": {"kind": kind, "message": message}}, sort_keys=True)
    print(doc, file=sys.stderr)
    if outdir is not None:
        try:
            Path(outdir).mkdir(parents=True, exist_ok=True)
            (Path(outdir) / "error.json").write_text(doc + "\n")
        except OSError:
            pass


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="pmm",
        description="Constrained lattice gas with slow reservoirs: simulation, "
        "macroscopic solver, and comparison harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in MODES:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="key=value file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--replicas", type=int, default=None)
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="inline config override, repeatable")
    args = parser.parse_args(argv)
    try:
        text = ""
        if args.config is not None:
            text = Path(args.config).read_text()
        text += f"\nmode={args.command}\n"
        for item in args.set:
            text += item + "\n"
        if args.seed is not None:
            text += f"seed={args.seed}\n"
        if args.replicas is not None:
            text += f"replicas={args.replicas}\n"
        if args.out is not None:
            text += f"out={args.out}\n"
        config = parse_config(text)
    except (UsageError, OSError) as exc:
        _emit_error("usage", str(exc), None)
        return EXIT_USAGE
    try:
        return run(config)
    except UsageError as exc:
        _emit_error("usage", str(exc), config.out)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
