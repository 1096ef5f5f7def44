"""Ambiguity sets as linear constraint systems over prior weights.

Every bundled set form (moment rows, support intervals, quantile pins,
half-spaces, singletons, Wasserstein neighborhoods of these) is linear in the
weight vector, so membership, transport distance, and worst-case expectations
all reduce to LPs. Sets are closed by construction: "closure of the set" in
robustness definitions is the set itself.

Richness checks performed here are witnesses or refutations at grid
resolution, not proofs about the continuum sets.
"""

import math
from dataclasses import dataclass

import numpy as np

from .measures import DiscretePrior, Grid, GridMismatchError, ValueFunction, wasserstein1
from .optim import EQUAL, GREATER, LESS, LinearProgram, LpRow, LpStatus, solve_lp

MEMBERSHIP_TOL = 1e-8


class InfeasibleSetError(ValueError):
    """The constraint system admits no prior on the grid."""


@dataclass(frozen=True)
class MomentRow:
    """Restriction lo <= <g, pi> <= hi on one moment of the prior."""

    g: ValueFunction
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty moment interval [{self.lo}, {self.hi}]")
        if math.isinf(self.lo) and math.isinf(self.hi):
            raise ValueError("moment row with no finite bound")


@dataclass(frozen=True)
class LinearSet:
    rows: tuple
    continuous_moments: bool = False

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        if not self.rows:
            raise ValueError("LinearSet needs at least one moment row")


@dataclass(frozen=True)
class SupportInterval:
    """Priors concentrating on [a, b] intersected with the grid."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a <= self.b):
            raise ValueError(f"need a <= b, got [{self.a}, {self.b}]")


@dataclass(frozen=True)
class QuantileSet:
    """Priors pinning x_j as an alpha_j-quantile, x and alpha strictly increasing."""

    pairs: tuple

    def __post_init__(self):
        pairs = tuple((float(x), float(a)) for x, a in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        if not pairs:
            raise ValueError("QuantileSet needs at least one (x, alpha) pair")
        xs = [x for x, _ in pairs]
        als = [a for _, a in pairs]
        if any(x2 <= x1 for x1, x2 in zip(xs, xs[1:])):
            raise ValueError("quantile positions must be strictly increasing")
        if any(a2 <= a1 for a1, a2 in zip(als, als[1:])):
            raise ValueError("quantile levels must be strictly increasing")
        if als[0] < 0.0 or als[-1] > 1.0:
            raise ValueError("quantile levels must lie in [0, 1]")


@dataclass(frozen=True)
class HalfSpace:
    """Priors with <v, pi> >= level."""

    v: ValueFunction
    level: float


@dataclass(frozen=True)
class Singleton:
    prior: DiscretePrior


@dataclass(frozen=True)
class WassersteinBall:
    """Transport-distance neighborhood of a non-ball base set."""

    base: object
    radius: float

    def __post_init__(self):
        if isinstance(self.base, WassersteinBall):
            raise ValueError("ball base must not itself be a ball")
        if not (self.radius > 0.0):
            raise ValueError("ball radius must be positive")


def _check_quantiles_against_grid(qset: QuantileSet, grid: Grid):
    lo, hi = grid.points[0], grid.points[-1]
    for x, _ in qset.pairs:
        if not (lo < x < hi):
            raise ValueError(f"quantile position {x} not interior to the grid [{lo}, {hi}]")


def base_rows(amb, grid: Grid) -> list:
    """Linear rows over the weight vector characterizing the (non-ball) set."""
    pts = grid.points
    n = grid.n
    rows = []
    if isinstance(amb, LinearSet):
        for mr in amb.rows:
            if not mr.g.grid.matches(grid):
                raise GridMismatchError("moment row lives on a different grid")
            if mr.lo == mr.hi:
                rows.append(LpRow(mr.g.values, EQUAL, mr.lo))
            else:
                if math.isfinite(mr.lo):
                    rows.append(LpRow(mr.g.values, GREATER, mr.lo))
                if math.isfinite(mr.hi):
                    rows.append(LpRow(mr.g.values, LESS, mr.hi))
    elif isinstance(amb, SupportInterval):
        outside = (pts < amb.a - 1e-12) | (pts > amb.b + 1e-12)
        if np.all(outside):
            raise InfeasibleSetError(f"no grid points inside support [{amb.a}, {amb.b}]")
        rows.append(LpRow(outside.astype(float), EQUAL, 0.0))
    elif isinstance(amb, QuantileSet):
        _check_quantiles_against_grid(amb, grid)
        for x, alpha in amb.pairs:
            below = (pts <= x + 1e-12).astype(float)
            above = (pts >= x - 1e-12).astype(float)
            rows.append(LpRow(below, GREATER, alpha))
            rows.append(LpRow(above, GREATER, 1.0 - alpha))
    elif isinstance(amb, HalfSpace):
        if not amb.v.grid.matches(grid):
            raise GridMismatchError("half-space payoff lives on a different grid")
        rows.append(LpRow(amb.v.values, GREATER, amb.level))
    elif isinstance(amb, Singleton):
        if not amb.prior.grid.matches(grid):
            raise GridMismatchError("singleton prior lives on a different grid")
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            rows.append(LpRow(e, EQUAL, amb.prior.weights[i]))
    else:
        raise TypeError(f"unsupported ambiguity set {type(amb).__name__}")
    return rows


def row_lipschitz(amb, grid: Grid) -> list:
    """Per-row coefficient slopes, aligned with base_rows output.

    Nonzero only for moment rows declared analytically continuous: these are
    the constraints nature can repair at cost proportional to the repair
    distance, which is what separates discretization noise from genuine
    fragility in the robustness threshold. Pins, supports, quantiles, and
    undeclared rows report 0.
    """
    if not isinstance(amb, LinearSet) or not amb.continuous_moments:
        return [0.0] * len(base_rows(amb, grid))
    dt = np.diff(grid.points)
    out = []
    for mr in amb.rows:
        lip = float(np.max(np.abs(np.diff(mr.g.values)) / dt))
        n_emitted = 1 if mr.lo == mr.hi else int(math.isfinite(mr.lo)) + int(math.isfinite(mr.hi))
        out.extend([lip] * n_emitted)
    return out


@dataclass
class ConstraintSystem:
    """Rows over the stacked vector [p (n_weights), aux (n_aux)]."""

    n_weights: int
    n_aux: int
    rows: list


def to_constraints(amb, grid: Grid) -> ConstraintSystem:
    """Exact membership system: a prior satisfies the rows iff it lies in the set.

    A Wasserstein ball adds n*n coupling weights gamma >= 0 with row sums equal
    to the prior, column sums in the base set, and transport cost at most the
    radius.
    """
    n = grid.n
    if not isinstance(amb, WassersteinBall):
        return ConstraintSystem(n, 0, base_rows(amb, grid))
    pts = grid.points
    nn = n * n
    rows = []
    for i in range(n):  # sum_j gamma_ij - p_i = 0
        c = np.zeros(n + nn)
        c[i] = -1.0
        c[n + i * n : n + (i + 1) * n] = 1.0
        rows.append(LpRow(c, EQUAL, 0.0))
    for br in base_rows(amb.base, grid):  # base row applied to column sums
        c = np.zeros(n + nn)
        c[n:] = np.tile(br.coeffs, n)
        rows.append(LpRow(c, br.relation, br.rhs))
    cost = np.zeros(n + nn)
    cost[n:] = np.abs(pts[:, None] - pts[None, :]).ravel()
    rows.append(LpRow(cost, LESS, amb.radius))
    return ConstraintSystem(n, nn, rows)


def _grid_interval_distances(grid: Grid, a: float, b: float) -> np.ndarray:
    """Distance from each grid point to the grid-restricted interval [a, b]."""
    pts = grid.points
    inside = np.flatnonzero((pts >= a - 1e-12) & (pts <= b + 1e-12))
    if inside.size == 0:
        raise InfeasibleSetError(f"no grid points inside support [{a}, {b}]")
    lo, hi = pts[inside[0]], pts[inside[-1]]
    return np.maximum(lo - pts, 0.0) + np.maximum(pts - hi, 0.0)


def contains(amb, pi: DiscretePrior, tol: float = MEMBERSHIP_TOL) -> bool:
    """Constraint residuals at pi within tol (balls via a transport feasibility LP)."""
    if isinstance(amb, WassersteinBall):
        return distance_to(amb.base, pi) <= amb.radius + tol
    for row in base_rows(amb, pi.grid):
        ax = float(row.coeffs @ pi.weights)
        if row.relation == LESS and ax > row.rhs + tol:
            return False
        if row.relation == GREATER and ax < row.rhs - tol:
            return False
        if row.relation == EQUAL and abs(ax - row.rhs) > tol:
            return False
    return True


def distance_to(amb, pi: DiscretePrior) -> float:
    """Wasserstein distance from pi to the set, inf_{pi' in set} W(pi, pi').

    Closed form for support intervals and singletons; otherwise a coupling LP
    transporting pi onto a measure constrained to the set.
    """
    if isinstance(amb, WassersteinBall):
        raise ValueError("distance_to is defined for non-ball sets")
    grid = pi.grid
    if isinstance(amb, SupportInterval):
        return float(_grid_interval_distances(grid, amb.a, amb.b) @ pi.weights)
    if isinstance(amb, Singleton):
        return wasserstein1(pi, amb.prior)
    pts = grid.points
    src = pi.support_indices(atol=0.0)  # zero-mass sources transport nothing
    ns, n = src.size, grid.n
    cost = np.abs(pts[src, None] - pts[None, :]).ravel()
    rows = []
    for k, i in enumerate(src):  # row marginals pinned to pi
        c = np.zeros(ns * n)
        c[k * n : (k + 1) * n] = 1.0
        rows.append(LpRow(c, EQUAL, float(pi.weights[i])))
    for br in base_rows(amb, grid):
        rows.append(LpRow(np.tile(br.coeffs, ns), br.relation, br.rhs))
    sol = solve_lp(LinearProgram(cost, rows))
    if sol.status is not LpStatus.OPTIMAL:
        raise InfeasibleSetError(f"base set infeasible on the grid ({sol.status.value})")
    return max(sol.value, 0.0)


def rich_project_ball(ball: WassersteinBall, pi: DiscretePrior, zeta: DiscretePrior) -> DiscretePrior:
    """Mix pi toward a base-set anchor zeta just enough to enter the ball.

    Uses the mixing weight alpha = min(max(D - r, 0) / r, 1) with
    D = wasserstein1(zeta, pi); the output is verified to lie in the ball.
    """
    if not contains(ball.base, zeta, tol=1e-7):
        raise ValueError("zeta must belong to the ball's base set")
    r = ball.radius
    d = wasserstein1(zeta, pi)
    alpha = min(max(d - r, 0.0) / r, 1.0)
    out = DiscretePrior.mixture([(1.0 - alpha, pi), (alpha, zeta)])
    if not contains(ball, out, tol=1e-7):
        raise AssertionError("ball projection left the ball; numerical breakdown")
    return out


@dataclass
class MomentProjection:
    prior: DiscretePrior
    alpha: float
    margin: float
    residual: float


def _moment_matrix(amb: LinearSet, grid: Grid):
    targets = []
    gs = []
    for mr in amb.rows:
        if mr.lo != mr.hi:
            raise ValueError("rich projection needs equality moment rows")
        gs.append(mr.g.values)
        targets.append(mr.lo)
    return np.array(gs), np.array(targets)


def _max_step(G, y, d, grid: Grid) -> float:
    """Largest t with y + t*d an achievable moment vector (LP over the simplex)."""
    m, n = G.shape
    rows = [LpRow(np.append(G[k], -d[k]), EQUAL, y[k]) for k in range(m)]
    rows.append(LpRow(np.append(np.ones(n), 0.0), EQUAL, 1.0))
    c = np.zeros(n + 1)
    c[-1] = -1.0  # maximize t
    sol = solve_lp(LinearProgram(c, rows))
    if sol.status is not LpStatus.OPTIMAL:
        return 0.0
    return max(-sol.value, 0.0)


def _tv_closest(G, z, pi: DiscretePrior):
    """TV-minimizing grid prior with moments exactly z, or None if unachievable."""
    n = pi.grid.n
    m = G.shape[0]
    # variables (rho, s): minimize sum s with s >= rho - pi (masses equal, so TV = sum pos part)
    rows = [LpRow(np.append(G[k], np.zeros(n)), EQUAL, float(z[k])) for k in range(m)]
    rows.append(LpRow(np.append(np.ones(n), np.zeros(n)), EQUAL, 1.0))
    eye = np.eye(n)
    for i in range(n):
        rows.append(LpRow(np.append(eye[i], -eye[i]), LESS, float(pi.weights[i])))
    c = np.append(np.zeros(n), np.ones(n))
    sol = solve_lp(LinearProgram(c, rows))
    if sol.status is not LpStatus.OPTIMAL:
        return None
    return DiscretePrior(pi.grid, np.maximum(sol.x[:n], 0.0) / max(np.sum(np.maximum(sol.x[:n], 0.0)), 1e-300))


def rich_project_moment(amb: LinearSet, pi: DiscretePrior) -> MomentProjection:
    """Small-probability modification of pi meeting the equality moments exactly.

    Follows the constructive replacement argument for continuous moment sets:
    push the target into the achievable polytope by the interiority margin,
    mix pi with a finitely supported LP solution at the pushed point, with
    mixing weight at most residual / (residual + margin). Boundary targets are
    an explicit failure with margin 0.
    """
    if not amb.continuous_moments:
        raise ValueError("rich projection requires analytically continuous moment rows")
    grid = pi.grid
    G, y = _moment_matrix(amb, grid)
    x = G @ pi.weights
    residual = float(np.linalg.norm(y - x))

    # interiority margin along probe directions in the moment space
    m = G.shape[0]
    probes = []
    if residual > 1e-14:
        d0 = (y - x) / residual
        probes.extend([d0, -d0])
    probes.extend([e for k in range(m) for e in (np.eye(m)[k], -np.eye(m)[k])])
    margin = min(_max_step(G, y, d, grid) for d in probes)
    if margin <= 1e-9:
        raise ValueError(f"target moments on the boundary of the achievable polytope (margin {margin:.2e})")
    if residual <= 1e-12:
        return MomentProjection(pi, 0.0, margin, residual)

    alpha_bound = residual / (residual + margin)
    rho = _tv_closest(G, y, pi)
    if rho is None:
        raise InfeasibleSetError("equality moments unachievable on the grid")
    ratios = rho.weights[pi.weights > 1e-15] / pi.weights[pi.weights > 1e-15]
    alpha = max(0.0, 1.0 - float(ratios.min())) if ratios.size else 1.0
    if alpha <= alpha_bound + 1e-12:
        return MomentProjection(rho, alpha, margin, residual)

    # fall back to the literal mixture construction at the pushed moment point
    delta = margin
    d0 = (y - x) / residual
    for _ in range(40):
        zeta = _tv_closest(G, y + delta * d0, pi)
        if zeta is not None:
            break
        delta *= 0.5
    else:
        raise InfeasibleSetError("no achievable pushed moment point found")
    alpha = residual / (residual + delta)
    mixed = DiscretePrior.mixture([(1.0 - alpha, pi), (alpha, zeta)])
    return MomentProjection(mixed, alpha, margin, residual)
