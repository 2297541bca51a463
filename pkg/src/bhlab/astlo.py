"""Moving localization observables and the multiscale machinery around them.

The cutoff family is built from the bump g(x) = exp(-1/((x - w/2)(w - x)))
on (w/2, w): with u = g normalized in L^2, f' = u^2 integrates to exactly 1,
f is smooth, 0 below w/2 and 1 above w, and sqrt(f') = u is smooth with
compact support.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .fock import FockBasis, SparseOperator, diagonal_operator
from .lattice import origin_ball

__all__ = [
    "CutoffFunction",
    "MultiscaleSchedule",
    "AstloObservable",
    "make_cutoff",
    "holder_constant",
    "make_schedule",
    "astlo_operator",
    "remainder_functional",
    "bad_time_monitor",
    "cutoff_table",
    "schedule_to_dict",
]


def _bump(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = (x > lo) & (x < hi)
    xi = x[inside]
    out[inside] = np.exp(-1.0 / ((xi - lo) * (hi - xi)))
    return out


@dataclass(frozen=True)
class CutoffFunction:
    """Smooth monotone cutoff: 0 below omega/2, 1 above omega.

    Plateau values are clamped exactly; only the transition region is
    interpolated from the sampled grid.
    """

    omega: float
    grid: np.ndarray
    f_values: np.ndarray
    fprime_values: np.ndarray
    u_values: np.ndarray
    _norm: float = field(repr=False, default=1.0)
    _spline: CubicSpline = field(repr=False, default=None)

    @property
    def support(self) -> tuple[float, float]:
        return (self.omega / 2.0, self.omega)

    def u(self, x) -> np.ndarray:
        """sqrt(f'), evaluated in closed form."""
        lo, hi = self.support
        return _bump(x, lo, hi) / self._norm

    def fprime(self, x) -> np.ndarray:
        return self.u(x) ** 2

    def f(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        lo, hi = self.support
        out = np.empty_like(x)
        out[x <= lo] = 0.0
        out[x >= hi] = 1.0
        mid = (x > lo) & (x < hi)
        if mid.any():
            out[mid] = np.clip(self._spline(x[mid]), 0.0, 1.0)
        return out[0] if scalar else out


def make_cutoff(omega: float, resolution: int = 4001) -> CutoffFunction:
    """Sampled cutoff with `resolution` grid points covering [0, omega]."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    if resolution < 1000:
        raise ValueError("resolution must be at least 1000")
    lo, hi = omega / 2.0, omega
    norm_sq, _ = quad(lambda x: _bump(np.array(x), lo, hi) ** 2, lo, hi, limit=200)
    norm = float(np.sqrt(norm_sq))
    grid = np.linspace(0.0, omega, resolution)
    u_vals = _bump(grid, lo, hi) / norm
    fp_vals = u_vals**2
    # cumulative trapezoid of f' on the transition part of the grid
    f_vals = np.concatenate(
        [[0.0], np.cumsum(0.5 * (fp_vals[1:] + fp_vals[:-1]) * np.diff(grid))]
    )
    # rescale so the sampled integral ends exactly at 1 (quadrature residue)
    tail = f_vals[-1]
    if tail > 0:
        f_vals = f_vals / tail
    inside = (grid >= lo) & (grid <= hi)
    spline = CubicSpline(grid[inside], f_vals[inside])
    return CutoffFunction(omega, grid, f_vals, fp_vals, u_vals, norm, spline)


def _holder_seminorm(xs: np.ndarray, ys: np.ndarray, eps: float) -> float:
    """sup over grid pairs of |g(x) - g(y)| / |x - y|^eps."""
    dx = np.abs(xs[:, None] - xs[None, :])
    dg = np.abs(ys[:, None] - ys[None, :])
    mask = dx > 0
    return float(np.max(dg[mask] / dx[mask] ** eps))


def holder_constant(cutoff: CutoffFunction, epsilon: float) -> float:
    """C_f = ||u||_inf |u|_{0,eps} + |f'|_{0,eps}, grid-pair seminorms."""
    if not (0.0 < epsilon <= 1.0):
        raise ValueError("epsilon must lie in (0, 1]")
    g = cutoff.grid
    u = cutoff.u_values
    fp = cutoff.fprime_values
    return float(np.max(u)) * _holder_seminorm(g, u, epsilon) + _holder_seminorm(
        g, fp, epsilon
    )


@dataclass(frozen=True)
class ScheduleLevel:
    l: int
    R: float
    r: float
    s: float
    t: float  # min((R_l - r_l)/(3v), T1)


@dataclass(frozen=True)
class MultiscaleSchedule:
    """Geometric ladder of radii (R_l, r_l) = (a^{b+l+1}, a^{b+l}).

    v_prime = (v + kappa)/2, omega = v - v_prime, s_l = 2(R_l - r_l)/(3v).
    """

    R: float
    r: float
    v: float
    kappa: float
    v_prime: float
    omega: float
    a: float
    b: float
    levels: tuple[ScheduleLevel, ...]
    small_ratio: bool  # True when 1 < R/r < 4

    @property
    def t1_floor(self) -> float:
        """Analytic lower bound (R - r)/(3v) for the first bad time."""
        return (self.R - self.r) / (3.0 * self.v)


def make_schedule(
    R: float,
    r: float,
    v: float,
    kappa: float,
    l_max: int,
    T1: float = np.inf,
) -> MultiscaleSchedule:
    if not (R > r >= 1.0):
        raise ValueError("need R > r >= 1")
    if v <= kappa:
        raise ValueError("need v > kappa (otherwise omega <= 0)")
    v_prime = (v + kappa) / 2.0
    omega = v - v_prime
    a = R / r
    b = float(np.log(r) / np.log(a)) if r > 1 else 0.0
    levels = []
    for l in range(l_max + 1):
        Rl = a ** (b + l + 1)
        rl = a ** (b + l)
        sl = 2.0 * (Rl - rl) / (3.0 * v)
        tl = min((Rl - rl) / (3.0 * v), T1)
        levels.append(ScheduleLevel(l, Rl, rl, sl, tl))
    return MultiscaleSchedule(
        R, r, v, kappa, v_prime, omega, a, b, tuple(levels), small_ratio=(1 < a < 4)
    )


@dataclass(frozen=True)
class AstloObservable:
    """Diagonal moving observable sum_x f_sign(arg(x, t)) n_x."""

    level: ScheduleLevel
    cutoff: CutoffFunction
    sign: str  # "minus" | "plus"
    time: float
    operator: SparseOperator


def _astlo_site_weights(
    lattice_norms: np.ndarray,
    level: ScheduleLevel,
    cutoff: CutoffFunction,
    sign: str,
    v_prime: float,
    t: float,
) -> np.ndarray:
    R, r, s = level.R, level.r, level.s
    if sign == "minus":
        args = (R - v_prime * t - lattice_norms) / s
    elif sign == "plus":
        args = ((R + 2.0 * r) / 3.0 + v_prime * t - lattice_norms) / s
    else:
        raise ValueError("sign must be 'minus' or 'plus'")
    return cutoff.f(args)


def astlo_operator(
    basis: FockBasis,
    schedule: MultiscaleSchedule,
    level: int,
    cutoff: CutoffFunction,
    sign: str,
    t: float,
) -> AstloObservable:
    """Build the moving localization observable at a schedule level and time."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    lvl = schedule.levels[level]
    w = _astlo_site_weights(
        basis.lattice.norms(), lvl, cutoff, sign, schedule.v_prime, t
    )
    diag = basis.states.astype(float) @ w
    return AstloObservable(lvl, cutoff, sign, t, diagonal_operator(basis, diag))


def remainder_functional(
    basis: FockBasis,
    J,
    psi,
    R_l: float,
    p: int,
    alpha: float,
    epsilon: float | None = None,
) -> float:
    """Remainder term at one scale for the moment-p propagation estimate.

    <N^p_{B_Rl}> + sum_{x in B_Rl} sum_y |J_xy| |x-y|^{1+eps}
    <N^{p-1}_{B_Rl} n_y>, with eps = (alpha - d - 1)/2 unless overridden.
    """
    d = basis.lattice.dimension
    if epsilon is None:
        if alpha <= d + 1:
            raise ValueError("epsilon undefined: need alpha > d + 1")
        epsilon = (alpha - d - 1.0) / 2.0
    if p < 1:
        raise ValueError("p must be a positive integer")
    ball_idx = origin_ball(basis.lattice, R_l).indices()
    prob = np.abs(np.asarray(psi.amplitudes)) ** 2
    occ = basis.states.astype(float)
    NB = occ[:, ball_idx].sum(axis=1) if len(ball_idx) else np.zeros(basis.dim)
    first = float(prob @ NB**p)
    if J is None:
        return first
    dist = basis.lattice.distance_matrix()
    with np.errstate(divide="ignore"):
        powd = np.where(dist > 0, dist ** (1.0 + epsilon), 0.0)
    w_y = (np.abs(J.entries)[ball_idx, :] * powd[ball_idx, :]).sum(axis=0)
    second = float(prob @ (NB ** (p - 1) * (occ @ w_y)))
    return first + second


def cutoff_table(cutoff: CutoffFunction) -> np.ndarray:
    """Columns (x, f, f', u) over the sample grid, ready for CSV export."""
    return np.column_stack(
        [cutoff.grid, cutoff.f_values, cutoff.fprime_values, cutoff.u_values]
    )


def schedule_to_dict(schedule: MultiscaleSchedule) -> dict:
    """JSON-ready view of a schedule."""
    return {
        "R": schedule.R,
        "r": schedule.r,
        "v": schedule.v,
        "kappa": schedule.kappa,
        "v_prime": schedule.v_prime,
        "omega": schedule.omega,
        "a": schedule.a,
        "b": schedule.b,
        "small_ratio": schedule.small_ratio,
        "t1_floor": schedule.t1_floor,
        "levels": [
            {"l": lv.l, "R": lv.R, "r": lv.r, "s": lv.s, "t": lv.t}
            for lv in schedule.levels
        ],
    }


def bad_time_monitor(
    times,
    astlo_values: dict,
    schedule: MultiscaleSchedule,
    lambda1: float,
    dimension: int,
) -> dict:
    """First grid time at which any scale's observable dips below the floor.

    `astlo_values` maps (level, sign) -> real expectation array over
    `times`.  The monitored value is min over keys of value / (lambda1
    r_l^dimension); the first time it is <= 1/e is the bad-time estimate
    (+inf if never).  The analytic floor (R - r)/(3 v) is reported
    alongside.
    """
    times = np.asarray(times, dtype=float)
    ratios = np.full(len(times), np.inf)
    for (level, _sign), vals in astlo_values.items():
        rl = schedule.levels[level].r
        ratios = np.minimum(
            ratios, np.asarray(vals).real / (lambda1 * rl**dimension)
        )
    bad = np.nonzero(ratios <= 1.0 / np.e)[0]
    t1 = float(times[bad[0]]) if len(bad) else np.inf
    return {
        "t1": t1,
        "floor": schedule.t1_floor,
        "min_ratio": float(ratios.min()),
        "ratios": ratios,
    }
