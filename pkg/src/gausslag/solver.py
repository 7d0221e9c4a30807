"""Optimal strategy and value under delayed information.

Given the prepared market kernel f and a delay map, this module solves for
the unique kernel pair (kappa, g) characterized by

    f(t,s) - kappa(t,s) + g(t,s) = int_s^T (f(t,u) - kappa(t,u)) g(u,s) du

for 0 <= s <= t <= T, with complementary supports

    kappa(t,s) = 0  where t <  tau_inv(s)   (strategy kernel),
    g(t,s)     = 0  where t >= tau_inv(s)   (gap kernel).

kappa drives the optimal trading rate  gamma(t) = a(t) + int_0^t kappa dX,
which by its support only reads increments already visible at the delayed
time tau(t).  g lives exactly on the information gap {s <= t < tau_inv(s)}
(history the trader has not yet seen) and prices that gap in the optimal
expected exponential utility

    value = -exp( c - int int f * g_adj - (1/2) int int g^2 ),

where g_adj(s,u) = g(s,u) - int_0^u g(s,v) g(u,v) dv.

The solve proceeds window by window.  On the gap, kappa vanishes and the
equation reduces per column s to the second-kind Fredholm system
(Id - F_s) g(., s) = -f(., s) over [s, tau_inv(s)).  Off the gap, g's
column support truncates the integral to [s, tau_inv(s)), giving for each
fixed t a Volterra relation in s that back-substitution resolves in
descending s.  The discretized system is consistent, so the assembled pair
satisfies the discrete equation to solver roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import Kernel, eigenvalues_sym, solve_shifted
from .market import PreparedMarket
from .timegrid import DelayMap, TimeGrid


@dataclass(frozen=True)
class OptimalSolution:
    """Solved kernel pair, value, and solve diagnostics.

    ``diagnostics`` collects the discrete equation residual, a quadrature
    (continuum) residual estimate, the support-orthogonality defect, the gap
    kernel's spectral bound and support counts.
    """

    strategy_kernel: Kernel      # kappa, Volterra
    gap_kernel: Kernel           # g, symmetric
    gap_kernel_adj: Kernel       # g_adj, lower-triangular
    value: float
    log_norm_const: float
    inv_index: np.ndarray = field(repr=False)
    diagnostics: dict = field(repr=False)

    def __post_init__(self):
        self.inv_index.setflags(write=False)
        if not self.value < 0:
            raise ValueError(f"optimal value must be negative, got {self.value}")


def _as_inverse_index(delay: DelayMap | np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Accept a DelayMap or a precomputed node index map.

    Raw index maps exist for analytic-limit tests (e.g. the no-delay limit
    inv[j] = j, which a valid strict DelayMap cannot produce).
    """
    if isinstance(delay, DelayMap):
        return delay.inverse_index(grid)
    inv = np.asarray(delay, dtype=np.intp)
    n = grid.n_steps
    if inv.shape != (n + 1,):
        raise ValueError(f"inverse index map must have {n + 1} entries")
    if np.any(np.diff(inv) < 0) or np.any(inv < np.arange(n + 1)) or np.any(inv > n):
        raise ValueError("inverse index map must be nondecreasing with j <= inv[j] <= n")
    return inv


def solve_gap_kernel(pm: PreparedMarket, delay: DelayMap | np.ndarray) -> Kernel:
    """Solve the windowed Fredholm systems for the gap kernel g.

    Column by column: g(., t_j) solves (Id - F_j) x = -f(., t_j) on the node
    window [j, inv[j]); outside the window the column is zero.  The lower
    triangle is mirrored into the upper one, which the defining equation
    never consumes but which exhibits g as a symmetric kernel.  Empty
    windows (inv[j] = j) yield zero columns without error.
    """
    grid = pm.grid
    n = grid.n_steps
    inv = _as_inverse_index(delay, grid)
    vals = np.zeros((n, n))
    rhs = np.empty(n)
    for j in range(n):
        hi = min(int(inv[j]), n)
        if hi <= j:
            continue
        rhs[:] = 0.0
        rhs[j:hi] = -pm.resolvent.values[j:hi, j]
        vals[j:hi, j] = solve_shifted(pm.resolvent, rhs, j, hi,
                                      operator_eig_bound=pm.operator_eig_bound)
    lower = np.tril(vals)
    full = lower + lower.T - np.diag(np.diag(lower))
    return Kernel(grid, full, symmetric=True)


def solve_strategy_kernel(pm: PreparedMarket, delay: DelayMap | np.ndarray,
                          gap: Kernel) -> Kernel:
    """Back-substitute the Volterra relation for the strategy kernel kappa.

    For rows i >= inv[j] the defining equation reads

        kappa(i,j) = f(i,j) - step * sum_{u in [j, inv[j])} (f - kappa)(i,u) g(u,j)

    which is implicit only through the u = j term (g(j,j) != 0 on nonempty
    windows); isolating it gives kappa(i,j) = f(i,j) - R / (1 - step*g(j,j))
    with R the off-diagonal part of the sum.  Descending in j makes every
    off-diagonal term available: entries with u beyond the row's visible
    range are zero by support and were never written.  All rows solve a
    shared column schedule, so the scan is vectorized over rows.
    """
    grid = pm.grid
    n = grid.n_steps
    h = grid.step
    inv = _as_inverse_index(delay, grid)
    fvals = pm.resolvent.values
    kappa = np.zeros((n, n))
    resid = fvals.copy()  # running f - kappa
    for j in range(n - 1, -1, -1):
        lo = int(inv[j])  # first row with t_i >= tau_inv(t_j)
        if lo > n - 1:
            continue
        hi = lo  # inner integral runs over [j, inv[j])
        gcol = gap.values[j:hi, j]
        rows = slice(lo, n)
        if gcol.size:
            r_off = h * (resid[rows, j + 1:hi] @ gcol[1:]) if gcol.size > 1 else 0.0
            denom = 1.0 - h * gcol[0]
            if abs(denom) < 1e-12:
                raise ArithmeticError("degenerate diagonal in the Volterra back-substitution")
            kappa[rows, j] = fvals[rows, j] - r_off / denom
        else:
            kappa[rows, j] = fvals[rows, j]
        resid[rows, j] = fvals[rows, j] - kappa[rows, j]
    return Kernel(grid, kappa, volterra=True)


def corrected_gap_kernel(gap: Kernel) -> Kernel:
    """g_adj(s,u) = g(s,u) - int_0^u g(s,v) g(u,v) dv on the lower triangle."""
    g = gap.values
    h = gap.grid.step
    # sum_{v<u} g(s,v) g(u,v) = (G @ triu(G, 1))(s, u) via symmetry of g
    corr = g @ np.triu(g, 1)
    return Kernel(gap.grid, np.tril(g - h * corr), volterra=True)


def optimal_value(pm: PreparedMarket, gap: Kernel, gap_adj: Kernel) -> float:
    """Optimal expected exponential utility (risk aversion 1).

    -exp( c - int_0^T int_0^s f g_adj du ds - (1/2) int_0^T int_0^s g^2 du ds )
    with both double integrals as strictly-lower-triangular rectangle sums.
    """
    h = pm.grid.step
    mask = np.tril(np.ones_like(gap.values), -1)
    cross = h * h * float(np.sum(pm.resolvent.values * gap_adj.values * mask))
    square = 0.5 * h * h * float(np.sum(gap.values * gap.values * mask))
    return -float(np.exp(pm.log_norm_const - cross - square))


def _residual_diagnostics(pm: PreparedMarket, kappa: Kernel, gap: Kernel,
                          inv: np.ndarray) -> dict:
    """Residuals of the defining equation over the lower triangle.

    ``residual_discrete`` plugs (kappa, g) back into the discretized
    equation; it sits at solver roundoff by construction.  ``residual_quad``
    estimates the continuum residual left by the rectangle rule via the
    endpoint-correction term h/2 * (phi_end - phi_start) of each window
    integral; it shrinks linearly under grid refinement.
    """
    n = pm.grid.n_steps
    h = pm.grid.step
    fvals = pm.resolvent.values
    resid = fvals - kappa.values
    gfull = gap.values
    disc = 0.0
    quad = 0.0
    for j in range(n):
        hi = min(int(inv[j]), n)
        lhs = resid[j:, j] + gfull[j:, j]
        if hi > j:
            integrand = resid[j:, j:hi] * gfull[j:hi, j]
            rhs = h * integrand.sum(axis=1)
            quad = max(quad, 0.5 * h * float(np.abs(integrand[:, -1] - integrand[:, 0]).max()))
        else:
            rhs = 0.0
        disc = max(disc, float(np.abs(lhs - rhs).max()))
    return {"residual_discrete": disc, "residual_quad": quad}


def solve(pm: PreparedMarket, delay: DelayMap | np.ndarray) -> OptimalSolution:
    """Full solve: gap kernel, strategy kernel, correction, value, checks."""
    grid = pm.grid
    n = grid.n_steps
    inv = _as_inverse_index(delay, grid)
    gap = solve_gap_kernel(pm, inv)
    kappa = solve_strategy_kernel(pm, inv, gap)
    gap_adj = corrected_gap_kernel(gap)

    diagnostics = _residual_diagnostics(pm, kappa, gap, inv)
    rows = np.arange(n)[:, None]
    on_gap = rows < inv[None, :n]          # t_i < tau_inv(t_j)
    lower = rows >= np.arange(n)[None, :]
    overlap = int(np.sum((kappa.values != 0) & (gap.values != 0) & lower))
    ortho = grid.step * np.abs(
        np.sum(kappa.values * gap_adj.values, axis=1)).max()
    diagnostics.update({
        "support_overlap": overlap,
        "orthogonality_max": float(ortho),
        "gap_spectral_max": float(eigenvalues_sym(gap)[0]) if n else 0.0,
        "strategy_nonzeros": int(np.count_nonzero(kappa.values)),
        "gap_nonzeros": int(np.count_nonzero(np.tril(gap.values))),
    })
    if overlap:
        raise AssertionError("strategy and gap kernels overlap in support")
    if np.any((kappa.values != 0) & on_gap) or np.any((gap.values != 0) & ~on_gap & lower):
        raise AssertionError("kernel support leaked across the delay boundary")

    value = optimal_value(pm, gap, gap_adj)
    return OptimalSolution(
        strategy_kernel=kappa,
        gap_kernel=gap,
        gap_kernel_adj=gap_adj,
        value=value,
        log_norm_const=pm.log_norm_const,
        inv_index=np.array(inv),
        diagnostics=diagnostics,
    )


def evaluate_strategy(sol: OptimalSolution, adjusted_drift: np.ndarray,
                      path: np.ndarray) -> np.ndarray:
    """Optimal trading rate along a path: gamma(i) = a(i) + sum_{j<i} kappa(i,j) dX_j.

    The left-point sum plus kappa's support make gamma(i) a function of the
    increments dX_j with t_j <= tau(t_i) only, i.e. of history the trader
    has already seen at node i.
    """
    n = sol.strategy_kernel.grid.n_steps
    a = np.asarray(adjusted_drift, dtype=float)
    p = np.asarray(path, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"drift must have {n} values, got {a.shape}")
    if p.shape != (n + 1,):
        raise ValueError(f"path must have {n + 1} values, got {p.shape}")
    dx = np.diff(p)
    return a + np.tril(sol.strategy_kernel.values, -1) @ dx


def scale_strategy(gamma: np.ndarray, alpha: float) -> np.ndarray:
    """Optimal rate for risk aversion alpha is the alpha = 1 rate over alpha."""
    if not alpha > 0:
        raise ValueError(f"risk aversion must be positive, got {alpha}")
    return np.asarray(gamma, dtype=float) / alpha
