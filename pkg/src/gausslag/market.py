"""Gaussian market specification and its density-ratio data.

A market law equivalent to Wiener measure is pinned down by a drift density
atilde in L2[0,T] and a symmetric covariance-perturbation kernel ftilde with
operator spectrum below 1:

    E[X_t]            = int_0^t atilde(s) ds
    Cov(X_t, X_s)     = min(t, s) - int_0^t int_0^s ftilde(u, v) du dv

The log density ratio against Wiener measure is the quadratic functional

    log dP/dW = c + int_0^T a(s) dX_s + int_0^T int_0^s f(s, u) dX_u dX_s

whose ingredients are produced here: f solves the resolvent equation
f + ftilde = f o ftilde, a(t) = atilde(t) - int f(t, s) atilde(s) ds, and
c = (sum_i (l_i + log(1 - l_i)) - int a atilde) / 2 over the nonzero
eigenvalues l_i of f's operator.  Both stochastic integrals use the Ito
(left-point) convention; in particular the double sum carries no extra step
factor, since each dX increment already supplies the measure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConditioningError, SpectrumViolation
from .kernels import SPECTRUM_MARGIN, Kernel, compose, eigenvalues_sym, l2_norm
from .timegrid import TimeGrid

#: relative eigenvalue cutoff separating operator spectrum from grid noise
EIG_CUTOFF = 1e-10
#: acceptance bound for the resolvent-equation residual
RESOLVENT_RTOL = 1e-8


@dataclass(frozen=True)
class MarketSpec:
    """Drift density and covariance-perturbation kernel on a shared grid.

    ``drift_density`` holds n_steps left-endpoint samples of atilde;
    ``cov_perturbation`` is the symmetric kernel ftilde, validated here to
    have operator spectrum below 1 - 1e-6.
    """

    grid: TimeGrid
    drift_density: np.ndarray = field(repr=False)
    cov_perturbation: Kernel = field(repr=False)

    def __post_init__(self):
        drift = np.array(self.drift_density, dtype=float)
        if drift.shape != (self.grid.n_steps,):
            raise ValueError(
                f"drift density must have {self.grid.n_steps} values, got {drift.shape}")
        drift.setflags(write=False)
        object.__setattr__(self, "drift_density", drift)
        self.grid.require_same(self.cov_perturbation.grid)
        if not self.cov_perturbation.symmetric:
            raise ValueError("covariance perturbation must carry the symmetric flag")
        top = eigenvalues_sym(self.cov_perturbation)[0]
        if top >= 1.0 - SPECTRUM_MARGIN:
            raise SpectrumViolation(
                f"covariance perturbation spectrum reaches {top:.8g} >= 1 - 1e-6",
                spectral_bound=float(top))


def example_market(mu: float, sigma2: float, grid: TimeGrid) -> MarketSpec:
    """Constant-coefficient market: Brownian motion plus the random trend t*Z
    with Z ~ N(mu, sigma2).  Corresponds to atilde = mu, ftilde = -sigma2."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    return MarketSpec(
        grid=grid,
        drift_density=np.full(grid.n_steps, float(mu)),
        cov_perturbation=Kernel.constant(grid, -float(sigma2), symmetric=True),
    )


@dataclass(frozen=True)
class PreparedMarket:
    """Density-ratio data derived from a :class:`MarketSpec`.

    ``resolvent`` is the kernel f, ``adjusted_drift`` the function a,
    ``log_norm_const`` the constant c, and ``resolvent_eigs`` the operator
    eigenvalues of f that survived the noise cutoff.  ``operator_eig_bound``
    keeps the largest eigenvalue before cutoff so window solves can certify
    their spectra by interlacing without re-decomposing.
    """

    spec: MarketSpec
    resolvent: Kernel
    adjusted_drift: np.ndarray = field(repr=False)
    log_norm_const: float
    resolvent_eigs: np.ndarray = field(repr=False)
    operator_eig_bound: float
    eig_cutoff: float

    def __post_init__(self):
        for arr in (self.adjusted_drift, self.resolvent_eigs):
            arr.setflags(write=False)

    @property
    def grid(self) -> TimeGrid:
        return self.spec.grid


def solve_resolvent(cov_perturbation: Kernel) -> Kernel:
    """Solve f + ftilde = f o ftilde for the unique symmetric f.

    In operator-matrix form (F = step * values) the equation reads
    F + Ft = F Ft, i.e. F = -Ft (I - Ft)^(-1); one dense factorization, no
    spectral truncation.  The output spectrum is automatically below 1
    (eigenvalues map m -> -m / (1 - m)), so f is again admissible.
    """
    grid = cov_perturbation.grid
    top = eigenvalues_sym(cov_perturbation)[0]
    if top >= 1.0 - SPECTRUM_MARGIN:
        raise SpectrumViolation(
            f"resolvent input spectrum reaches {top:.8g} >= 1 - 1e-6",
            spectral_bound=float(top))
    ft = grid.step * cov_perturbation.values
    f_op = np.linalg.solve(np.eye(grid.n_steps) - ft, -ft)
    vals = f_op / grid.step
    vals = 0.5 * (vals + vals.T)  # symmetric up to roundoff; make it exact
    return Kernel(grid, vals, symmetric=True)


def transform_drift(drift_density: np.ndarray, resolvent: Kernel) -> np.ndarray:
    """a(t) = atilde(t) - int_0^T f(t, s) atilde(s) ds on the grid."""
    drift = np.asarray(drift_density, dtype=float)
    if drift.shape != (resolvent.grid.n_steps,):
        raise ValueError("drift density does not match the kernel grid")
    return drift - resolvent.grid.step * (resolvent.values @ drift)


def significant_eigenvalues(resolvent: Kernel, cutoff: float = EIG_CUTOFF) -> np.ndarray:
    """Operator eigenvalues of f above the noise floor.

    The continuous operator has finitely many (or summable) nonzero
    eigenvalues; discretization pads the spectrum with O(machine-eps) noise
    that must not leak into the log-determinant sum.  Entries with
    |l| <= cutoff * max(1, |l|_max) are dropped.
    """
    eigs = eigenvalues_sym(resolvent)
    scale = max(1.0, float(np.abs(eigs).max())) if eigs.size else 1.0
    return eigs[np.abs(eigs) > cutoff * scale]


def log_normalizer(adjusted_drift: np.ndarray, drift_density: np.ndarray,
                   resolvent: Kernel, cutoff: float = EIG_CUTOFF) -> float:
    """c = ( sum_i (l_i + log(1 - l_i)) - int_0^T a atilde ) / 2."""
    eigs = significant_eigenvalues(resolvent, cutoff)
    if eigs.size and eigs.max() >= 1.0:
        raise SpectrumViolation(
            f"resolvent eigenvalue {eigs.max():.8g} >= 1, log(1 - l) undefined",
            spectral_bound=float(eigs.max()))
    cross = resolvent.grid.step * float(np.dot(adjusted_drift, drift_density))
    return 0.5 * (float(np.sum(eigs + np.log1p(-eigs))) - cross)


def prepare(spec: MarketSpec, cutoff: float = EIG_CUTOFF) -> PreparedMarket:
    """Run the full market transform and validate the resolvent residual."""
    f = solve_resolvent(spec.cov_perturbation)
    residual = l2_norm(Kernel(spec.grid, f.values + spec.cov_perturbation.values
                              - compose(f, spec.cov_perturbation).values))
    if residual > RESOLVENT_RTOL * (1.0 + l2_norm(spec.cov_perturbation)):
        raise ConditioningError(
            f"resolvent residual {residual:.3e} exceeds tolerance")
    a = transform_drift(spec.drift_density, f)
    all_eigs = eigenvalues_sym(f)
    kept = significant_eigenvalues(f, cutoff)
    c = log_normalizer(a, spec.drift_density, f, cutoff)
    return PreparedMarket(
        spec=spec,
        resolvent=f,
        adjusted_drift=a,
        log_norm_const=c,
        resolvent_eigs=kept,
        operator_eig_bound=float(all_eigs[0]),
        eig_cutoff=cutoff,
    )


def mean_vector(spec: MarketSpec) -> np.ndarray:
    """Node means m(i) = step * sum_{k < i} atilde(k); m(0) = 0."""
    m = np.zeros(spec.grid.n_steps + 1)
    m[1:] = spec.grid.step * np.cumsum(spec.drift_density)
    return m


def covariance_matrix(spec: MarketSpec) -> np.ndarray:
    """Covariance of (X_{t_1}, ..., X_{t_n}) under the market law.

    Sigma(i, j) = min(t_i, t_j) - step^2 * sum_{u<i, v<j} ftilde(u, v).
    Node t_0 is excluded: X_0 = 0 is deterministic, so including it would
    make the matrix singular by construction.  Raises ConditioningError
    (with the smallest eigenvalue) if the result is not positive definite.
    """
    nodes = spec.grid.nodes[1:]
    mins = np.minimum.outer(nodes, nodes)
    block = spec.cov_perturbation.values.cumsum(axis=0).cumsum(axis=1)
    cov = mins - spec.grid.step ** 2 * block
    cov = 0.5 * (cov + cov.T)
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        smallest = float(np.linalg.eigvalsh(cov)[0])
        raise ConditioningError(
            f"covariance matrix not positive definite (smallest eigenvalue "
            f"{smallest:.3e})", smallest_eigenvalue=smallest) from exc
    return cov


def log_density_ratio(pm: PreparedMarket, path: np.ndarray) -> float | np.ndarray:
    """log dP/dW evaluated on a discrete path (or a stack of paths).

    For increments dX_i = path(i+1) - path(i), returns

        c + sum_i a(i) dX_i + sum_i ( sum_{k<i} f(i, k) dX_k ) dX_i

    with both sums in the Ito convention: the inner stochastic sum excludes
    the diagonal and carries no step factor.  ``path`` may be a single
    (n_steps + 1,) vector or an (m, n_steps + 1) stack; the return matches.
    """
    n = pm.grid.n_steps
    arr = np.asarray(path, dtype=float)
    scalar = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != n + 1:
        raise ValueError(f"path must have {n + 1} values, got {arr.shape[1]}")
    if np.any(arr[:, 0] != 0.0):
        raise ValueError("paths must start at 0")
    dx = np.diff(arr, axis=1)
    lower = np.tril(pm.resolvent.values, -1)
    quad = np.einsum("pi,pi->p", dx @ lower.T, dx)
    out = pm.log_norm_const + dx @ pm.adjusted_drift + quad
    return float(out[0]) if scalar else out
