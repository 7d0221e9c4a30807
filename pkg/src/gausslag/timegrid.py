"""Uniform time grids and deterministic information-delay maps.

The trader acting at time t only sees the price history up to tau(t), where
tau is nondecreasing, right-continuous and strictly delayed: there is an
eps > 0 with tau(t) <= max(t - eps, 0) for all t.  The left-continuous
inverse

    tau_inv(s) = T  ^  inf{u in [0, T] : tau(u) >= s}

marks the first time the history point s becomes visible, and the key index
identity  t >= tau_inv(s)  <=>  tau(t) >= s  is preserved exactly at grid
nodes by ``DelayMap.inverse_index``.  Every solver in the package consumes
the delay through that node-level index map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_REL_TOL = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    """Uniform discretization of [0, T] into ``n_steps`` cells.

    Kernels are sampled at the left endpoints t_0 .. t_{n-1}; grid functions
    over nodes carry n_steps + 1 values.
    """

    horizon: float
    n_steps: int
    step: float = field(init=False, compare=False, repr=False)
    nodes: np.ndarray = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        step = self.horizon / self.n_steps
        nodes = np.linspace(0.0, self.horizon, self.n_steps + 1)
        if abs(step * self.n_steps - self.horizon) > _REL_TOL * self.horizon:
            raise ValueError("step * n_steps does not reproduce the horizon")
        nodes.setflags(write=False)
        object.__setattr__(self, "step", step)
        object.__setattr__(self, "nodes", nodes)

    def require_same(self, other: "TimeGrid") -> None:
        if self != other:
            raise ValueError(f"grid mismatch: {self} vs {other}")


def node_tie_tol(grid: TimeGrid) -> float:
    """Comparison slack for delay boundaries at grid nodes.

    Far below one step but far above accumulated float rounding, so node
    comparisons are deterministic when tau(t_i) and t_j coincide
    mathematically but not bitwise.
    """
    return 1e-9 * grid.step


def _check_domain(t, horizon: float, what: str) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    slack = _REL_TOL * max(horizon, 1.0)
    if np.any(t < -slack) or np.any(t > horizon + slack):
        raise ValueError(f"{what} outside [0, {horizon}]")
    return np.clip(t, 0.0, horizon)


@dataclass(frozen=True)
class DelayMap:
    """Deterministic delay function tau with its left-continuous inverse.

    Construct through :meth:`constant_lag`, :meth:`piecewise_linear` or
    :meth:`tabulated`.  Specs are validated on construction (monotonicity and
    the strict-delay margin); violations are rejected, never repaired.
    Instances are immutable and safe to share.
    """

    kind: str
    horizon: float
    epsilon: float
    delta: float | None = None
    xs: np.ndarray | None = field(default=None, repr=False)
    ys: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("strict delay requires epsilon > 0")
        for arr in (self.xs, self.ys):
            if arr is not None:
                arr.setflags(write=False)

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant_lag(cls, delta: float, horizon: float) -> "DelayMap":
        """tau(t) = max(t - delta, 0) for a fixed lag delta > 0."""
        if not delta > 0:
            raise ValueError("constant lag requires delta > 0")
        return cls(kind="constant_lag", horizon=float(horizon),
                   epsilon=float(delta), delta=float(delta))

    @classmethod
    def piecewise_linear(cls, breakpoints, epsilon: float) -> "DelayMap":
        """tau interpolated linearly through (time, value) breakpoints.

        The first breakpoint must be (0, 0) and the last abscissa fixes the
        horizon.  The margin tau(t) <= max(t - epsilon, 0) is checked at all
        breakpoints and at t = epsilon, which is where a piecewise-linear
        violation would peak.
        """
        pts = np.asarray(breakpoints, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("breakpoints must be a list of (time, value) pairs")
        xs, ys = pts[:, 0].copy(), pts[:, 1].copy()
        if xs[0] != 0.0:
            raise ValueError("first breakpoint must be at time 0")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("breakpoint times must be strictly increasing")
        horizon = float(xs[-1])
        d = cls(kind="piecewise_linear", horizon=horizon, epsilon=float(epsilon),
                xs=xs, ys=ys)
        probe = np.unique(np.concatenate([xs, [min(epsilon, horizon)]]))
        d._validate_values(probe, np.interp(probe, xs, ys))
        return d

    @classmethod
    def tabulated(cls, values, grid: TimeGrid, epsilon: float) -> "DelayMap":
        """tau given at grid nodes; between nodes it is the right-continuous
        step function holding the value of the node at or before t."""
        vals = np.asarray(values, dtype=float).copy()
        if vals.shape != (grid.n_steps + 1,):
            raise ValueError(
                f"tabulated delay needs {grid.n_steps + 1} node values, got {vals.shape}")
        d = cls(kind="tabulated", horizon=grid.horizon, epsilon=float(epsilon),
                xs=grid.nodes.copy(), ys=vals)
        d._validate_values(grid.nodes, vals)
        return d

    def _validate_values(self, ts: np.ndarray, vals: np.ndarray) -> None:
        if vals[0] != 0.0:
            raise ValueError("tau(0) must be 0")
        if np.any(np.diff(vals) < 0):
            raise ValueError("tau must be nondecreasing")
        slack = _REL_TOL * max(self.horizon, 1.0)
        bound = np.maximum(ts - self.epsilon, 0.0)
        if np.any(vals > bound + slack):
            worst = int(np.argmax(vals - bound))
            raise ValueError(
                f"strict-delay margin violated at t={ts[worst]}: "
                f"tau={vals[worst]} > max(t - {self.epsilon}, 0)")

    # -- evaluation --------------------------------------------------------

    def tau(self, t):
        """Observable-history endpoint tau(t); accepts scalars or arrays."""
        tt = _check_domain(t, self.horizon, "t")
        if self.kind == "constant_lag":
            out = np.maximum(tt - self.delta, 0.0)
        elif self.kind == "piecewise_linear":
            out = np.interp(tt, self.xs, self.ys)
        else:  # tabulated: right-continuous step through node values
            idx = np.searchsorted(self.xs, tt, side="right") - 1
            out = self.ys[np.clip(idx, 0, len(self.ys) - 1)]
        return out if np.ndim(t) else float(out)

    def tau_inv(self, s):
        """Left-continuous inverse: T ^ inf{u : tau(u) >= s}.

        Returns 0 at s = 0 (tau(0) = 0 already clears the bar), and caps at
        the horizon when tau never reaches s.
        """
        ss = _check_domain(s, self.horizon, "s")
        scalar = not np.ndim(s)
        ss = np.atleast_1d(ss)
        if self.kind == "constant_lag":
            out = np.where(ss <= 0.0, 0.0, np.minimum(ss + self.delta, self.horizon))
        elif self.kind == "piecewise_linear":
            out = self._pw_inverse(ss)
        else:
            k = np.searchsorted(self.ys, ss, side="left")
            out = np.where(k < len(self.xs), self.xs[np.minimum(k, len(self.xs) - 1)],
                           self.horizon)
            out = np.where(ss <= 0.0, 0.0, out)
        return float(out[0]) if scalar else out

    def _pw_inverse(self, ss: np.ndarray) -> np.ndarray:
        xs, ys = self.xs, self.ys
        k = np.searchsorted(ys, ss, side="left")  # first breakpoint with ys >= s
        out = np.full_like(ss, self.horizon)
        never = k == len(ys)
        inside = ~never & (k > 0)
        at_zero = ss <= 0.0
        ki = k[inside]
        y0, y1 = ys[ki - 1], ys[ki]
        x0, x1 = xs[ki - 1], xs[ki]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(y1 > y0, (ss[inside] - y0) / np.where(y1 > y0, y1 - y0, 1.0), 1.0)
        out[inside] = np.minimum(x0 + frac * (x1 - x0), self.horizon)
        out[~never & (k == 0)] = xs[0]
        out[at_zero] = 0.0
        return out

    # -- grid-level index map ---------------------------------------------

    def inverse_index(self, grid: TimeGrid) -> np.ndarray:
        """Node image of tau_inv: inv[j] = smallest k with tau(t_k) >= t_j.

        Capped at n_steps when no node qualifies.  Built by one monotone
        two-pointer scan, so (i >= inv[j]) <=> (tau(t_i) >= t_j) holds as an
        exact boolean identity for every kernel row i <= n_steps - 1 (and at
        i = n_steps whenever the defining set is nonempty).  The node
        comparison uses the shared tie tolerance of :func:`node_tie_tol`:
        float rounding must not flip cells whose boundary values coincide
        mathematically, and such ties belong to the visible (strategy) side.
        """
        if abs(grid.horizon - self.horizon) > _REL_TOL * max(self.horizon, 1.0):
            raise ValueError("delay horizon does not match the grid horizon")
        n = grid.n_steps
        tol = node_tie_tol(grid)
        tau_nodes = np.asarray(self.tau(grid.nodes))
        inv = np.empty(n + 1, dtype=np.intp)
        k = 0
        for j in range(n + 1):
            while k <= n and tau_nodes[k] < grid.nodes[j] - tol:
                k += 1
            inv[j] = min(k, n)
        inv.setflags(write=False)
        return inv
