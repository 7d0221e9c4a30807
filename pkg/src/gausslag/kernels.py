"""Grid-sampled L2([0,T]^2) kernels with integral-operator semantics.

A kernel K is stored as an n x n array of values at left-endpoint node pairs
(t_i, t_j); the induced operator acts on grid functions by the rectangle
rule, so the operator matrix is step * values and kernel composition is

    (K1 o K2)(i, j) = step * sum_k K1(i, k) K2(k, j).

The left-endpoint convention is deliberate: it matches the non-anticipating
(Ito) sums used for the stochastic integrals elsewhere in the package, so a
single quadrature convention covers both deterministic and stochastic sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import SpectrumViolation
from .timegrid import TimeGrid

SYMMETRY_RTOL = 1e-10
SPECTRUM_MARGIN = 1e-6  # reject solves once an eigenvalue reaches 1 - margin


@dataclass(frozen=True)
class Kernel:
    """Immutable kernel sample on a grid.

    ``symmetric`` asserts |K(i,j) - K(j,i)| <= 1e-10 * max|K|;
    ``volterra`` asserts K(i,j) = 0 exactly for j > i.
    Both are verified on construction and the value array is frozen.
    """

    grid: TimeGrid
    values: np.ndarray = field(repr=False)
    symmetric: bool = False
    volterra: bool = False

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        n = self.grid.n_steps
        if vals.shape != (n, n):
            raise ValueError(f"kernel values must be ({n}, {n}), got {vals.shape}")
        if self.symmetric:
            scale = np.abs(vals).max()
            if scale > 0 and np.abs(vals - vals.T).max() > SYMMETRY_RTOL * scale:
                raise ValueError("symmetric flag set but values are asymmetric")
        if self.volterra and np.any(np.triu(vals, 1) != 0.0):
            raise ValueError("volterra flag set but values above the diagonal")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: TimeGrid, **flags) -> "Kernel":
        return cls(grid, np.zeros((grid.n_steps, grid.n_steps)), **flags)

    @classmethod
    def constant(cls, grid: TimeGrid, value: float, **flags) -> "Kernel":
        return cls(grid, np.full((grid.n_steps, grid.n_steps), float(value)), **flags)

    @classmethod
    def from_csv(cls, path, grid: TimeGrid, **flags) -> "Kernel":
        vals = np.atleast_2d(np.loadtxt(path, delimiter=","))
        return cls(grid, vals, **flags)

    def to_csv(self, path) -> None:
        # n rows of n comma-separated decimals, row index = first argument
        np.savetxt(path, self.values, delimiter=",", fmt="%.17g")


def compose(k1: Kernel, k2: Kernel) -> Kernel:
    """Operator product (K1 o K2)(t, s) = int_0^T K1(t, u) K2(u, s) du."""
    k1.grid.require_same(k2.grid)
    return Kernel(k1.grid, k1.grid.step * (k1.values @ k2.values))


def _require_symmetric(values: np.ndarray) -> None:
    scale = np.abs(values).max()
    if scale > 0 and np.abs(values - values.T).max() > SYMMETRY_RTOL * scale:
        raise ValueError("operation requires a symmetric kernel")


def eigenvalues_sym(k: Kernel) -> np.ndarray:
    """Eigenvalues of the induced self-adjoint operator, sorted descending.

    These are the eigenvalues of the symmetric matrix step * values; the
    discretization turns the operator's point spectrum into the leading
    entries and pads with near-zero noise eigenvalues.
    """
    _require_symmetric(k.values)
    return np.linalg.eigvalsh(k.grid.step * k.values)[::-1].copy()


def l2_norm(k: Kernel) -> float:
    """L2([0,T]^2) norm under the rectangle rule: step * sqrt(sum K^2)."""
    return float(k.grid.step * np.sqrt(np.sum(k.values * k.values)))


def solve_shifted(k: Kernel, rhs: np.ndarray, lo: int, hi: int,
                  operator_eig_bound: float | None = None) -> np.ndarray:
    """Solve x - step * sum_{u in [lo,hi)} K(., u) x(u) = rhs on [lo, hi).

    This is the second-kind equation (Id - K_w) x = rhs restricted to the
    window of node indices [lo, hi); K must be symmetric there with window
    spectrum < 1 - 1e-6.  ``operator_eig_bound``, when supplied, is a known
    upper bound for the full operator's largest eigenvalue: by Cauchy
    interlacing it bounds every window eigenvalue, letting callers skip the
    per-window eigendecomposition.  Returns the hi - lo solution values.
    """
    n = k.grid.n_steps
    if not (0 <= lo <= hi <= n):
        raise ValueError(f"window [{lo}, {hi}) out of range for n={n}")
    if hi == lo:
        return np.zeros(0)
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (n,):
        raise ValueError(f"rhs must have {n} values, got {rhs.shape}")
    block = k.values[lo:hi, lo:hi]
    if not k.symmetric:
        _require_symmetric(block)
    op = k.grid.step * block
    bound = operator_eig_bound
    if bound is None or bound >= 1.0 - SPECTRUM_MARGIN:
        bound = float(np.linalg.eigvalsh(op)[-1])
        if bound >= 1.0 - SPECTRUM_MARGIN:
            raise SpectrumViolation(
                f"window [{lo}, {hi}) spectrum reaches {bound:.8g} >= 1 - 1e-6",
                spectral_bound=bound)
    a = np.eye(hi - lo) - op
    try:
        cho = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded above
        raise SpectrumViolation(f"window [{lo}, {hi}) system not positive definite") from exc
    return scipy.linalg.cho_solve(cho, rhs[lo:hi], check_finite=False)
