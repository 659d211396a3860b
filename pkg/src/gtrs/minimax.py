"""First-order solver for min over x of max(h_left(x), h_right(x)).

Two line-search rules drive the same steepest-descent direction:

* ``alg1`` takes the fixed step 1/L, except that when the inactive function
  would overtake the active one before 1/L it steps exactly onto the
  crossing, solving a scalar quadratic along the ray.  This rule has a
  sufficient-descent guarantee of (L/2) ||x_k - x_{k+1}||^2 per step and a
  sublinear (L/N) ||x_0 - x*||^2 value bound.
* ``alg2`` backtracks with a slope condition on the directional derivative
  of the max function (a modified Armijo rule).

Values and gradients are propagated with exact quadratic expansions along
the step direction, so each iteration costs two Hessian products
regardless of the line-search rule; state is refreshed from scratch
periodically to cap floating-point drift.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (NumericalError, StalledLineSearchError, ValidationError)
from .cqr import ReformKind, Reformulation, estimate_lipschitz
from .linalg import cg_solve
from .model import QuadraticForm

# Iterations between full recomputations of values/gradients from x.
_REFRESH_EVERY = 64


class Algorithm(enum.Enum):
    ALG1 = "alg1"
    ALG2 = "alg2"


class Termination(enum.Enum):
    DECREASE_STALL = "decrease_stall"      # consecutive values differ < eps2
    SUBGRADIENT = "subgradient"            # on the value band, min-norm subgradient < eps3
    GRADIENT = "gradient"                  # off the band, active gradient < eps3
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class SolverConfig:
    """Tolerances and line-search parameters.

    ``eps1`` is the relative band within which the two values are treated
    as equal, ``eps2`` stops on stalled objective decrease, ``eps3`` on a
    small (sub)gradient.  ``sigma``, ``xi`` and ``s`` parameterize the
    backtracking rule.  ``rho``/``delta`` define the relaxed criticality
    notion used by the backtracking variant; by default they inherit the
    band and gradient tolerances.
    """

    eps1: float = 1e-8
    eps2: float = 1e-11
    eps3: float = 1e-8
    sigma: float = 1e-4
    xi: float = 1.0
    s: float = 0.5
    rho: float | None = None
    delta: float | None = None
    max_iter: int = 200_000
    max_backtracks: int = 100
    warm_start: bool = False
    trace: bool = False

    def __post_init__(self):
        if not 0.0 < self.sigma <= 0.5:
            raise ValidationError("sigma must lie in (0, 0.5]")
        if not 0.0 < self.s < 1.0:
            raise ValidationError("s must lie in (0, 1)")
        if not 0.0 < self.xi <= 1.0:
            raise ValidationError("xi must lie in (0, 1]")
        for name in ("eps1", "eps2", "eps3"):
            if getattr(self, name) <= 0.0:
                raise ValidationError(f"{name} must be positive")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")

    @property
    def criticality_norm(self) -> float:
        return self.eps3 if self.delta is None else self.delta

    def band_rho(self, value_scale: float) -> float:
        """Width of the backtracking variant's direction band.

        Defaults to the same relative band the termination tests use; an
        explicit ``rho`` overrides it with an absolute width.
        """
        if self.rho is not None:
            return self.rho
        return self.eps1 * value_scale

    def fast(self) -> "SolverConfig":
        """The relaxed preset (about 5x fewer iterations, lower accuracy)."""
        cfg = SolverConfig(**{**self.__dict__})
        cfg.eps1, cfg.eps2, cfg.eps3 = 1e-5, 1e-8, 1e-5
        return cfg


@dataclass
class MinimaxState:
    """Snapshot of one iteration of the minimax solver."""

    x: np.ndarray
    h1_val: float
    h2_val: float
    g1: np.ndarray
    g2: np.ndarray
    alpha: float
    d: np.ndarray
    beta: float
    iter: int
    last_decrease: float


@dataclass
class TraceRecord:
    """Scalar trace of one step; enough to replay the line search exactly.

    ``s1``/``s2`` are directional derivatives along d, ``c1``/``c2`` the
    curvatures d'A d, so h_i(x + b d) = h_i + b s_i + b^2 c_i / 2.
    """

    iter: int
    h1: float
    h2: float
    s1: float
    s2: float
    c1: float
    c2: float
    dnorm2: float
    beta: float
    backtracks: int
    branch: str
    decrease: float


@dataclass
class MinimaxResult:
    x: np.ndarray
    value: float
    iterations: int
    termination: Termination
    h_trace: np.ndarray
    alpha: float
    state: MinimaxState
    records: list[TraceRecord] | None = field(default=None, repr=False)
    pre_critical_iters: int = 0


def steepest_direction(g1: np.ndarray, g2: np.ndarray, values_equal: bool,
                       *, active: int = 1, delta: float = 1e-8
                       ) -> tuple[np.ndarray, float, bool]:
    """Steepest descent direction of the max of two functions.

    Off the equality band the direction is minus the active gradient.  On
    the band it is minus the minimum-norm convex combination
    alpha*g1 + (1-alpha)*g2, with the closed-form optimal alpha.  Returns
    ``(d, alpha, certificate)`` where the certificate flags a point that is
    already optimal: vanishing direction, exactly opposed gradients, or a
    vanishing active gradient.
    """
    if not values_equal:
        g = g1 if active == 1 else g2
        alpha = 1.0 if active == 1 else 0.0
        return -g, alpha, float(np.linalg.norm(g)) <= delta

    g11 = float(g1 @ g1)
    g22 = float(g2 @ g2)
    g12 = float(g1 @ g2)
    denom = g11 + g22 - 2.0 * g12
    if g11 >= g12 >= g22:
        alpha = 0.0
    elif g22 >= g12 >= g11:
        alpha = 1.0
    elif denom > 1e-16 * max(g11, g22, 1.0):
        alpha = (g22 - g12) / denom
    else:
        # Numerically parallel gradients: fall back to the best of a
        # three-point grid, which is exact for parallel inputs.
        alpha = min((0.0, 0.5, 1.0),
                    key=lambda t: float(np.linalg.norm(t * g1 + (1.0 - t) * g2)))
    d = -(alpha * g1 + (1.0 - alpha) * g2)
    dnorm = float(np.linalg.norm(d))
    certificate = dnorm <= delta
    if g11 > 0.0 and g22 > 0.0 and g12 < 0.0:
        cos = g12 / math.sqrt(g11 * g22)
        certificate = certificate or (1.0 + cos) <= 1e-14
    return d, alpha, certificate


def _positive_roots(a: float, b: float, c: float) -> list[float]:
    """Positive real roots of a x^2 + b x + c = 0, ascending."""
    if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(c)):
        return []
    roots: list[float] = []
    if abs(a) <= 1e-300:
        if b != 0.0:
            roots = [-c / b]
    else:
        disc = b * b - 4.0 * a * c
        if not math.isfinite(disc) or disc < 0.0:
            return []
        sq = math.sqrt(disc)
        q = -0.5 * (b + math.copysign(sq, b if b != 0.0 else 1.0))
        roots = [r for r in (q / a, c / q if q != 0.0 else math.nan)
                 if math.isfinite(r)]
    return sorted(r for r in roots if r > 0.0)


def crossing_step(h_active: float, h_other: float, s_active: float,
                  s_other: float, c_active: float, c_other: float,
                  lipschitz: float) -> tuple[float, str]:
    """Step length for the fixed-step rule at a point off the value band.

    Along d the active/other values evolve as quadratics; their difference
    vanishes at the roots of

        1/2 (c_a - c_o) b^2 + (s_a - s_o) b + (h_a - h_o) = 0.

    With no positive root before 1/L the full step 1/L is safe (the active
    function stays active); otherwise the step lands exactly on the first
    crossing.
    """
    roots = _positive_roots(0.5 * (c_active - c_other),
                            s_active - s_other,
                            h_active - h_other)
    full = 1.0 / lipschitz
    if not roots or roots[0] >= full:
        return full, "grad"
    return roots[0], "cross"


def armijo_step(h1: float, h2: float, s1: float, s2: float, c1: float,
                c2: float, dnorm2: float, config: SolverConfig
                ) -> tuple[float, int]:
    """Backtracking step: smallest k >= 0 with beta = xi * s^k satisfying

        H(x + beta d) <= H(x) - sigma * beta * ||d||^2.

    Returns the accepted step and the number of rejected trials.  Raises
    after ``max_backtracks`` rejections.
    """
    if dnorm2 <= 0.0:
        raise ValidationError("armijo_step requires a nonzero direction")
    h0 = max(h1, h2)
    beta = config.xi
    for k in range(config.max_backtracks + 1):
        trial = max(h1 + beta * s1 + 0.5 * beta * beta * c1,
                    h2 + beta * s2 + 0.5 * beta * beta * c2)
        if trial <= h0 - config.sigma * beta * dnorm2:
            return beta, k
        beta *= config.s
    raise StalledLineSearchError(
        "armijo rule rejected %d trial steps (last beta %.3e)"
        % (config.max_backtracks + 1, beta / config.s),
        trials=config.max_backtracks + 1, step=beta / config.s)


def _on_band(h1: float, h2: float, eps1: float) -> bool:
    return abs(h1 - h2) <= max(eps1 * (abs(h1) + abs(h2)), 1e-14)


def minimize(reform: Reformulation, x0: np.ndarray | None = None,
             config: SolverConfig | None = None,
             algorithm: Algorithm = Algorithm.ALG1) -> MinimaxResult:
    """Minimize max(h_left, h_right) from ``x0`` (default: the origin).

    Stops at the first of: consecutive values closer than ``eps2``; value
    band entered with min-norm subgradient below ``eps3``; active gradient
    below ``eps3`` off the band; or the iteration cap, in which case the
    best iterate found is returned with termination ITERATION_LIMIT.
    """
    if reform.kind is not ReformKind.TWO_CONVEX:
        raise ValidationError(
            "minimize requires the two-function reformulation, got %s"
            % reform.kind.value)
    config = config or SolverConfig()
    if reform.lipschitz is None:
        estimate_lipschitz(reform)
    lip = reform.lipschitz
    if not (lip and lip > 0.0 and math.isfinite(lip)):
        raise ValidationError("invalid smoothness bound %r" % lip)

    h_l, h_r = reform.h_left, reform.h_right
    n = h_l.n
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    if x.shape != (n,) or not np.all(np.isfinite(x)):
        raise ValidationError("starting point must be a finite vector of length %d" % n)

    h1, g1 = h_l.value_and_gradient(x)
    h2, g2 = h_r.value_and_gradient(x)
    h_hist = [max(h1, h2)]
    records: list[TraceRecord] | None = [] if config.trace else None
    pre_critical = 0
    delta = config.criticality_norm

    alpha = 1.0 if h1 >= h2 else 0.0
    d = np.zeros(n)
    beta = 0.0
    decrease = math.inf
    termination = Termination.ITERATION_LIMIT
    steps = 0

    for k in range(config.max_iter):
        band_term = _on_band(h1, h2, config.eps1)
        active = 1 if h1 > h2 else 2

        # Termination tests always use the tight band.
        if band_term:
            d_term, _, certificate = steepest_direction(
                g1, g2, True, delta=delta)
            if float(np.linalg.norm(d_term)) <= config.eps3 or certificate:
                termination = Termination.SUBGRADIENT
                break
        else:
            g_active = g1 if active == 1 else g2
            if float(np.linalg.norm(g_active)) <= config.eps3:
                termination = Termination.GRADIENT
                break

        # Direction selection: the fixed-step rule works off the tight band
        # (its crossing step lands exactly on the curve); the backtracking
        # rule uses its own, wider band.
        if algorithm is Algorithm.ALG1:
            band_dir = band_term
        else:
            rho = config.band_rho(abs(h1) + abs(h2))
            band_dir = abs(h1 - h2) <= max(rho, 1e-14)
        d, alpha, certificate = steepest_direction(
            g1, g2, band_dir, active=active, delta=delta)
        dnorm2 = float(d @ d)
        dnorm = math.sqrt(dnorm2)
        if dnorm <= 1e-300:
            termination = (Termination.SUBGRADIENT if band_term
                           else Termination.GRADIENT)
            break
        if dnorm > delta:
            pre_critical += 1

        w1 = h_l.q.matvec(d)
        w2 = h_r.q.matvec(d)
        s1, s2 = float(g1 @ d), float(g2 @ d)
        c1, c2 = float(d @ w1), float(d @ w2)

        if algorithm is Algorithm.ALG1:
            backtracks = 0
            if band_dir:
                beta, branch = 1.0 / lip, "band"
            elif active == 1:
                beta, branch = crossing_step(h1, h2, s1, s2, c1, c2, lip)
            else:
                beta, branch = crossing_step(h2, h1, s2, s1, c2, c1, lip)
        else:
            beta, backtracks = armijo_step(h1, h2, s1, s2, c1, c2, dnorm2, config)
            branch = "band" if band_dir else "grad"

        x += beta * d
        new_h1 = h1 + beta * s1 + 0.5 * beta * beta * c1
        new_h2 = h2 + beta * s2 + 0.5 * beta * beta * c2
        g1 += beta * w1
        g2 += beta * w2
        decrease = max(h1, h2) - max(new_h1, new_h2)
        if records is not None:
            records.append(TraceRecord(k, h1, h2, s1, s2, c1, c2, dnorm2,
                                       beta, backtracks, branch, decrease))
        h1, h2 = new_h1, new_h2
        steps = k + 1
        h_hist.append(max(h1, h2))

        if steps % _REFRESH_EVERY == 0:
            h1, g1 = h_l.value_and_gradient(x)
            h2, g2 = h_r.value_and_gradient(x)
        if decrease < config.eps2:
            termination = Termination.DECREASE_STALL
            break

    state = MinimaxState(x=x, h1_val=h1, h2_val=h2, g1=g1, g2=g2, alpha=alpha,
                         d=d, beta=beta, iter=steps, last_decrease=decrease)
    return MinimaxResult(x=x, value=max(h1, h2), iterations=steps,
                         termination=termination,
                         h_trace=np.asarray(h_hist), alpha=alpha, state=state,
                         records=records, pre_critical_iters=pre_critical)


# ---------------------------------------------------------------------------
# One-sided variant: a single convex form over a convex quadratic constraint.
# ---------------------------------------------------------------------------

def project_onto_sublevel(con: QuadraticForm, z: np.ndarray,
                          tol: float = 1e-12) -> np.ndarray:
    """Euclidean projection of z onto {x : con(x) <= 0} for convex ``con``.

    Uses the Lagrangian parameterization x(mu) = (I + mu Q)^{-1} (z - mu b),
    whose constraint value is strictly decreasing in mu, so the multiplier
    is found by bracketed bisection with a Newton polish.
    """
    if con.value(z) <= 0.0:
        return z
    q, b = con.q, con.b
    scale = 1.0 + abs(con.c)
    if q.norm_inf() == 0.0:
        bn2 = float(b @ b)
        if bn2 == 0.0:
            raise NumericalError("projection target set is empty")
        return z - (con.value(z) / bn2) * b

    def solve_x(mu: float) -> np.ndarray:
        op = lambda v: v + mu * q.matvec(v)
        return cg_solve(op, z - mu * b, tol=1e-13)

    lo, f_lo = 0.0, con.value(z)
    hi = 1.0
    for _ in range(200):
        x_hi = solve_x(hi)
        f_hi = con.value(x_hi)
        if f_hi <= 0.0:
            break
        hi *= 4.0
    else:
        raise NumericalError("projection multiplier bracket failed: value %.3e "
                             "at mu=%.3e" % (f_hi, hi))

    mu, x = hi, x_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        x_mid = solve_x(mid)
        f_mid = con.value(x_mid)
        if abs(f_mid) <= tol * scale:
            return x_mid
        if f_mid > 0.0:
            lo = mid
        else:
            hi, mu, x = mid, mid, x_mid
        if hi - lo <= 1e-14 * (1.0 + hi):
            break

    # Newton polish on the monotone scalar equation con(x(mu)) = 0.
    for _ in range(8):
        grad = con.gradient(x)
        op = lambda v: v + mu * q.matvec(v)
        dx = cg_solve(op, grad, tol=1e-13)
        deriv = -float(grad @ dx)
        if deriv >= 0.0:
            break
        step = -con.value(x) / deriv
        mu_new = mu + step
        if mu_new <= 0.0:
            break
        mu = mu_new
        x = solve_x(mu)
        if abs(con.value(x)) <= tol * scale:
            return x
    if abs(con.value(x)) <= 100 * tol * scale:
        return x
    raise NumericalError("projection root-finding stalled: residual %.3e "
                         "(bracket [%.3e, %.3e])" % (con.value(x), lo, hi))


@dataclass
class ConstrainedResult:
    x: np.ndarray
    value: float
    iterations: int
    projected_gradient_norm: float
    multiplier: float


def solve_constrained(reform: Reformulation, x0: np.ndarray | None = None,
                      config: SolverConfig | None = None) -> ConstrainedResult:
    """Accelerated projected gradient for the one-sided reformulation.

    Minimizes ``h_single`` over the convex set {constraint_form <= 0}.
    Terminates when the scaled prox-gradient residual drops below ``eps3``.
    """
    if reform.kind is not ReformKind.CONVEX_CONSTRAINT:
        raise ValidationError("solve_constrained requires the one-sided variant")
    config = config or SolverConfig()
    if reform.lipschitz is None:
        estimate_lipschitz(reform)
    lip = reform.lipschitz
    h3, con = reform.h_single, reform.constraint_form

    x = np.zeros(h3.n) if x0 is None else np.asarray(x0, dtype=np.float64)
    x = project_onto_sublevel(con, x)
    y = x.copy()
    t = 1.0
    fx = h3.value(x)
    iterations = 0
    resid = math.inf
    for k in range(config.max_iter):
        gy = h3.gradient(y)
        x_new = project_onto_sublevel(con, y - gy / lip)
        f_new = h3.value(x_new)
        if f_new > fx:  # monotone restart
            x_new = project_onto_sublevel(con, x - h3.gradient(x) / lip)
            f_new = h3.value(x_new)
            t = 1.0
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, fx, t = x_new, f_new, t_new
        iterations = k + 1
        step_back = project_onto_sublevel(con, x - h3.gradient(x) / lip)
        resid = lip * float(np.linalg.norm(x - step_back))
        if resid <= config.eps3:
            break

    grad = h3.gradient(x)
    cg = con.gradient(x)
    cg2 = float(cg @ cg)
    active = abs(con.value(x)) <= 1e-8 * (1.0 + abs(con.c))
    multiplier = max(0.0, -float(grad @ cg) / cg2) if (active and cg2 > 0) else 0.0
    return ConstrainedResult(x=x, value=fx, iterations=iterations,
                             projected_gradient_norm=resid, multiplier=multiplier)
