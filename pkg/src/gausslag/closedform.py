"""Closed-form reference solution for the constant-coefficient market.

For the market X_t = B_t + t*Z on [0, 1] with Z ~ N(mu, sigma2) independent
of the Brownian motion B, every object the pipeline computes has an analytic
form, making this module an independent oracle for tests:

    resolvent      f  = sigma2 / (1 + sigma2)               (constant)
    drift          a  = mu / (1 + sigma2)                   (constant)
    normalizer     c  = (sigma2 - mu^2) / (2 (1 + sigma2))
                        - log(1 + sigma2) / 2
    gap kernel     g(t,s) = -1{t < tau_inv(s)} *
                        sigma2 / (1 + sigma2 (1 + s - tau_inv(s)))
    optimal value  -(1 + sigma2)^(-1/2) *
                        exp( (sigma2 - mu^2) / (2 (1 + sigma2)) + penalty )
    covariance     Cov(X_t, X_s) = min(t,s) (1 + sigma2 max(t,s))

where the delay penalty (log scale, nonnegative) is

    penalty = sigma2^2 / (2 (1 + sigma2)) *
              int_0^1 (tau_inv(t) - t) / (1 + sigma2 (1 + t - tau_inv(t))) dt.

The penalty integrand is piecewise smooth with kinks where tau_inv caps at
the horizon or crosses a breakpoint of the delay, so the quadrature splits
panels at those points.  ``delay=None`` selects the zero-delay analytic
limit tau_inv(t) = t, which a strict DelayMap cannot represent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .timegrid import DelayMap, TimeGrid, node_tie_tol

HORIZON = 1.0
PENALTY_PANELS = 20000


def constant_market_solution(mu: float, sigma2: float) -> tuple[float, float, float]:
    """(resolvent constant, adjusted-drift constant, log normalizer c)."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    f = sigma2 / (1.0 + sigma2)
    a = mu / (1.0 + sigma2)
    c = (sigma2 - mu * mu) / (2.0 * (1.0 + sigma2)) - 0.5 * np.log1p(sigma2)
    return f, a, c


def _tau_inv(delay: DelayMap | None, t):
    if delay is None:
        return np.asarray(t, dtype=float)
    if abs(delay.horizon - HORIZON) > 1e-12:
        raise ValueError("the closed-form reference is pinned to horizon 1")
    return np.asarray(delay.tau_inv(t))


def gap_kernel_value(sigma2: float, delay: DelayMap | None, t, s):
    """Closed-form gap kernel; zero once t has caught up with tau_inv(s)."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(s > t) or np.any(s < 0) or np.any(t > HORIZON):
        raise ValueError("require 0 <= s <= t <= 1")
    r = _tau_inv(delay, s)
    out = np.where(t < r, -sigma2 / (1.0 + sigma2 * (1.0 + s - r)), 0.0)
    return float(out) if out.ndim == 0 else out


def _kink_points(delay: DelayMap | None) -> np.ndarray:
    """Abscissae in [0, 1] where tau_inv kinks or jumps."""
    if delay is None:
        return np.array([0.0, HORIZON])
    pts = [0.0, HORIZON]
    if delay.kind == "constant_lag":
        pts.append(max(HORIZON - delay.delta, 0.0))
    else:
        # tau_inv is driven by the s-values tau attains; cap where tau(T) sits
        pts.extend(np.asarray(delay.ys).tolist())
        pts.append(float(delay.tau(delay.horizon)))
    pts = np.asarray(pts, dtype=float)
    return np.unique(np.clip(pts, 0.0, HORIZON))


def delay_penalty(sigma2: float, delay: DelayMap | None,
                  panels: int = PENALTY_PANELS) -> float:
    """Log-scale utility penalty attributable to the information delay.

    Composite Simpson quadrature with panels aligned to the integrand's
    kinks; zero exactly in the zero-delay limit and independent of mu.
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    if delay is None:
        return 0.0

    def integrand(t):
        r = _tau_inv(delay, t)
        return (r - t) / (1.0 + sigma2 * (1.0 + t - r))

    knots = _kink_points(delay)
    total = 0.0
    for left, right in zip(knots[:-1], knots[1:]):
        length = right - left
        if length <= 0:
            continue
        m = max(2, int(np.ceil(panels * length / HORIZON / 2)) * 2)
        x = np.linspace(left, right, m + 1)
        y = integrand(x)
        w = length / m / 3.0
        total += w * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())
    return sigma2 * sigma2 / (2.0 * (1.0 + sigma2)) * total


def closed_form_value(mu: float, sigma2: float, delay: DelayMap | None,
                      panels: int = PENALTY_PANELS) -> float:
    """Optimal expected exponential utility of the constant market."""
    penalty = delay_penalty(sigma2, delay, panels)
    return -np.exp((sigma2 - mu * mu) / (2.0 * (1.0 + sigma2)) + penalty) \
        / np.sqrt(1.0 + sigma2)


def gauss_markov_covariance(sigma2: float, t, s):
    """Cov(X_t, X_s) = min(t,s) (1 + sigma2 max(t,s)); the market is
    Gauss-Markov even though the delayed control problem is not Markovian."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t < 0) or np.any(t > HORIZON) or np.any(s < 0) or np.any(s > HORIZON):
        raise ValueError("require t, s in [0, 1]")
    out = np.minimum(t, s) * (1.0 + sigma2 * np.maximum(t, s))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ReferenceCase:
    """Bundle of constant-market parameters pinned to the unit horizon."""

    mu: float
    sigma2: float
    delay: DelayMap | None
    grid: TimeGrid

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if abs(self.grid.horizon - HORIZON) > 1e-12:
            raise ValueError("the closed-form reference is pinned to horizon 1")

    def constants(self) -> tuple[float, float, float]:
        return constant_market_solution(self.mu, self.sigma2)

    def gap_kernel(self, t, s):
        return gap_kernel_value(self.sigma2, self.delay, t, s)

    def penalty(self) -> float:
        return delay_penalty(self.sigma2, self.delay)

    def value(self) -> float:
        return closed_form_value(self.mu, self.sigma2, self.delay)

    def covariance(self, t, s):
        return gauss_markov_covariance(self.sigma2, t, s)

    def gap_kernel_grid(self) -> np.ndarray:
        """Lower-triangular grid sample of the closed-form gap kernel.

        Uses the same node tie tolerance as the solvers, so boundary cells
        with tau_inv(s) mathematically equal to a node land on the strategy
        side on both routes.
        """
        n = self.grid.n_steps
        t = self.grid.nodes[:n]
        r = _tau_inv(self.delay, t)
        tt = t[:, None]
        ss = t[None, :]
        rr = r[None, :]
        on_gap = tt < rr - node_tie_tol(self.grid)
        vals = np.where(on_gap & (ss <= tt),
                        -self.sigma2 / (1.0 + self.sigma2 * (1.0 + ss - rr)), 0.0)
        return vals
