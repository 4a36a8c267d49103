"""Explicit solver for the degenerate diffusion equation d_t rho = Lap(rho^2).

The equation is solved on [0,1] with either Dirichlet boundary values
(rho(0)=alpha, rho(1)=beta) or Robin flux conditions

    d_u (rho(0))^2 = kappa (rho(0) - alpha),
    d_u (rho(1))^2 = kappa (beta - rho(1)),

where kappa = 0 reduces to no-flux (Neumann) conditions.  The scheme is
forward Euler on the conservative form with centred differences of
rho^2; Robin rows use a second-order ghost value so that the closed-form
stationary profiles (square roots of affine functions) are discrete
fixed points.  Also provided: the stationary profiles themselves and
the weak-form residual functionals used to check solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

CFL_SAFETY = 0.9
VALUE_TOL = 1e-10


class NumericalInstability(RuntimeError):
    """Solver state left the physically admissible range [0, 1]."""


@dataclass(frozen=True)
class BoundaryCondition:
    """Boundary data: kind is "dirichlet" or "robin" (kappa=0 means no-flux)."""

    kind: str
    alpha: float
    beta: float
    kappa: float = 0.0

    def __post_init__(self):
        if self.kind not in ("dirichlet", "robin"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "robin" and self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        needs_densities = self.kind == "dirichlet" or self.kappa > 0
        if needs_densities and not (0 < self.alpha < 1 and 0 < self.beta < 1):
            raise ValueError("alpha and beta must lie in (0,1)")

    @classmethod
    def dirichlet(cls, alpha: float, beta: float) -> "BoundaryCondition":
        return cls("dirichlet", alpha, beta)

    @classmethod
    def robin(cls, kappa: float, alpha: float, beta: float) -> "BoundaryCondition":
        return cls("robin", alpha, beta, kappa)

    @classmethod
    def neumann(cls, alpha: float = 0.5, beta: float = 0.5) -> "BoundaryCondition":
        return cls("robin", alpha, beta, 0.0)


@dataclass(frozen=True)
class DensityGrid:
    """Density samples rho_i ~ rho(time, i*du) on the J+1 nodes of [0,1]."""

    values: np.ndarray
    du: float
    time: float = 0.0

    @classmethod
    def from_profile(cls, g: Callable[[float], float], J: int, time: float = 0.0) -> "DensityGrid":
        u = np.linspace(0.0, 1.0, J + 1)
        vals = np.array([float(g(ui)) for ui in u])
        if (vals < -VALUE_TOL).any() or (vals > 1 + VALUE_TOL).any():
            raise ValueError("initial profile must take values in [0,1]")
        return cls(values=vals, du=1.0 / J, time=time)

    @property
    def J(self) -> int:
        return len(self.values) - 1

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.J + 1)

    def mass(self) -> float:
        """Trapezoidal integral of the density over [0,1]."""
        return float(np.trapezoid(self.values, dx=self.du))


def _check_range(values: np.ndarray):
    if (values < -VALUE_TOL).any() or (values > 1.0 + VALUE_TOL).any():
        bad = values[(values < -VALUE_TOL) | (values > 1.0 + VALUE_TOL)]
        raise NumericalInstability(f"density left [0,1]: extreme value {bad[0]}")


def max_stable_dt(du: float) -> float:
    """Largest admitted time step: safety * du^2 / 4 (diffusivity <= 2)."""
    return CFL_SAFETY * du * du / 4.0


def pde_step(grid: DensityGrid, dt: float, bc: BoundaryCondition) -> DensityGrid:
    """One forward-Euler step of d_t rho = Lap(rho^2).

    Interior nodes use the centred second difference of rho^2; boundary
    rows are Dirichlet clamps or Robin ghost-value updates.  Raises on a
    time step above the stability limit and on values leaving [0,1].
    """
    if dt > max_stable_dt(grid.du) * (1 + 1e-12):
        raise ValueError(f"dt={dt} violates the stability limit {max_stable_dt(grid.du)}")
    _check_range(grid.values)
    rho = grid.values
    q = rho * rho
    lam = dt / (grid.du * grid.du)
    new = rho.copy()
    new[1:-1] += lam * (q[2:] - 2.0 * q[1:-1] + q[:-2])
    if bc.kind == "dirichlet":
        new[0] = bc.alpha
        new[-1] = bc.beta
    else:
        # ghost values from the centred discretization of the flux condition
        q_ghost_l = q[1] - 2.0 * grid.du * bc.kappa * (rho[0] - bc.alpha)
        q_ghost_r = q[-2] + 2.0 * grid.du * bc.kappa * (bc.beta - rho[-1])
        new[0] += lam * (q[1] - 2.0 * q[0] + q_ghost_l)
        new[-1] += lam * (q_ghost_r - 2.0 * q[-1] + q[-2])
    _check_range(new)
    return DensityGrid(values=new, du=grid.du, time=grid.time + dt)


@dataclass(frozen=True)
class SpaceTimeField:
    """Solution samples: values[k, i] = rho(times[k], i*du)."""

    times: np.ndarray
    values: np.ndarray
    du: float
    bc: BoundaryCondition

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.values.shape[1])

    def at_time(self, t: float) -> np.ndarray:
        k = self.time_index(t)
        return self.values[k]

    def time_index(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} not among the stored samples")
        return k


def solve(
    g: Callable[[float], float],
    bc: BoundaryCondition,
    T: float,
    J: int,
    sample_times: Optional[Sequence[float]] = None,
) -> SpaceTimeField:
    """March the explicit scheme to time T, recording the field at sample_times.

    The time step is the stability limit shrunk so that every sample time
    is hit exactly.  Without explicit sample_times, 65 uniformly spaced
    frames (including t=0 and t=T) are stored.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if sample_times is None:
        sample_times = np.linspace(0.0, T, 65)
    sample_times = np.asarray(sorted(set(float(t) for t in sample_times)))
    if sample_times[0] < 0 or sample_times[-1] > T + 1e-12:
        raise ValueError("sample times must lie in [0, T]")
    grid = DensityGrid.from_profile(g, J)
    if bc.kind == "dirichlet":
        vals = grid.values.copy()
        vals[0], vals[-1] = bc.alpha, bc.beta
        grid = replace(grid, values=vals)
    dt0 = max_stable_dt(grid.du)
    frames = []
    recorded = []
    if sample_times[0] == 0.0:
        frames.append(grid.values.copy())
        recorded.append(0.0)
        targets = sample_times[1:]
    else:
        targets = sample_times
    t_prev = 0.0
    for t_target in targets:
        span = t_target - t_prev
        nsub = max(1, int(math.ceil(span / dt0 - 1e-12)))
        dt = span / nsub
        for _ in range(nsub):
            grid = pde_step(grid, dt, bc)
        grid = replace(grid, time=t_target)  # kill accumulated roundoff in t
        frames.append(grid.values.copy())
        recorded.append(t_target)
        t_prev = t_target
    return SpaceTimeField(
        times=np.asarray(recorded), values=np.asarray(frames), du=grid.du, bc=bc
    )


def stationary_profile(bc: BoundaryCondition, u):
    """Closed-form stationary solution evaluated at u (scalar or array).

    Dirichlet: sqrt((beta^2 - alpha^2) u + alpha^2).  Robin with kappa>0:
    sqrt(a u + b) with b = ((kappa*alpha + (alpha+beta)^2) /
    (2(alpha+beta) + kappa))^2 and a = kappa (sqrt(b) - alpha).  Robin
    with kappa=0: the constant (alpha+beta)/2.
    """
    u_arr = np.asarray(u, dtype=float)
    if (u_arr < -1e-12).any() or (u_arr > 1 + 1e-12).any():
        raise ValueError("u must lie in [0,1]")
    if bc.kind == "dirichlet":
        vals = np.sqrt((bc.beta**2 - bc.alpha**2) * u_arr + bc.alpha**2)
    elif bc.kappa == 0.0:
        vals = np.full_like(u_arr, (bc.alpha + bc.beta) / 2.0)
    else:
        a, b = robin_stationary_coefficients(bc)
        vals = np.sqrt(a * u_arr + b)
    return float(vals) if np.isscalar(u) else vals


def robin_stationary_coefficients(bc: BoundaryCondition) -> tuple[float, float]:
    """Coefficients (a, b) of the affine square rho^2 = a u + b at stationarity."""
    if bc.kind != "robin":
        raise ValueError("only meaningful for robin boundary conditions")
    s = bc.alpha + bc.beta
    b = ((bc.kappa * bc.alpha + s * s) / (2.0 * s + bc.kappa)) ** 2
    a = bc.kappa * (math.sqrt(b) - bc.alpha)
    return a, b


@dataclass(frozen=True)
class TestFunction:
    """Smooth test function G(t,u) with the derivatives the residuals need.

    ``klass`` is "vanishing" for functions with G(t,0)=G(t,1)=0 (the class
    admitted by the Dirichlet residual) or "free".
    """

    g: Callable[[float, float], float]
    dt: Callable[[float, float], float]
    du: Callable[[float, float], float]
    lap: Callable[[float, float], float]
    klass: str = "free"
    name: str = ""

    def __post_init__(self):
        if self.klass not in ("vanishing", "free"):
            raise ValueError(f"unknown test-function class {self.klass!r}")

    @classmethod
    def from_space(
        cls,
        phi: Callable[[float], float],
        dphi: Callable[[float], float],
        d2phi: Callable[[float], float],
        klass: str = "free",
        name: str = "",
    ) -> "TestFunction":
        """Time-independent test function from a spatial profile."""
        return cls(
            g=lambda t, u: phi(u),
            dt=lambda t, u: 0.0,
            du=lambda t, u: dphi(u),
            lap=lambda t, u: d2phi(u),
            klass=klass,
            name=name,
        )

    def check_vanishing(self, times: Sequence[float]):
        for t in times:
            if abs(self.g(t, 0.0)) > 1e-12 or abs(self.g(t, 1.0)) > 1e-12:
                raise ValueError("test function does not vanish at the boundary")


def _trapz(vals: np.ndarray, dx: float) -> float:
    return float(np.trapezoid(vals, dx=dx))


def weak_form_residual(
    field: SpaceTimeField,
    g: Callable[[float], float],
    G: TestFunction,
    bc: BoundaryCondition,
    t: float,
) -> float:
    """Weak-formulation residual of the stored field at time t.

    For Dirichlet conditions (test functions vanishing at the boundary):

        <rho_t, G_t> - <g, G_0> - int_0^t <rho_s, d_s G + rho_s Lap G> ds
        + int_0^t { beta^2 d_u G_s(1) - alpha^2 d_u G_s(0) } ds

    For Robin conditions (free test functions) the boundary term uses the
    solution's own squared boundary values and gains the kappa exchange
    term.  Integrals are composite trapezoidal sums on the stored sample
    lattice, so the magnitude decreases under refinement for true weak
    solutions.
    """
    kt = field.time_index(t)
    times = field.times[: kt + 1]
    if bc.kind == "dirichlet":
        if G.klass != "vanishing":
            raise ValueError("the Dirichlet residual needs a vanishing-class test function")
        G.check_vanishing(times)
    u = field.nodes
    du = field.du
    g0 = np.array([float(g(ui)) for ui in u])
    G_t = np.array([G.g(t, ui) for ui in u])
    G_0 = np.array([G.g(0.0, ui) for ui in u])
    result = _trapz(field.values[kt] * G_t, du) - _trapz(g0 * G_0, du)

    bulk = np.empty(len(times))
    bdry = np.empty(len(times))
    for k, s in enumerate(times):
        rho = field.values[k]
        dsG = np.array([G.dt(s, ui) for ui in u])
        lapG = np.array([G.lap(s, ui) for ui in u])
        bulk[k] = _trapz(rho * (dsG + rho * lapG), du)
        duG0 = G.du(s, 0.0)
        duG1 = G.du(s, 1.0)
        if bc.kind == "dirichlet":
            bdry[k] = bc.beta**2 * duG1 - bc.alpha**2 * duG0
        else:
            bdry[k] = rho[-1] ** 2 * duG1 - rho[0] ** 2 * duG0
            bdry[k] -= bc.kappa * (
                G.g(s, 0.0) * (bc.alpha - rho[0]) + G.g(s, 1.0) * (bc.beta - rho[-1])
            )
    if len(times) > 1:
        result -= float(np.trapezoid(bulk, x=times))
        result += float(np.trapezoid(bdry, x=times))
    return result
