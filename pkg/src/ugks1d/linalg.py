"""Deterministic linear solvers for the implicit pieces of the scheme.

Three kinds of systems appear: symmetric positive definite collision
systems (conjugate gradient), tridiagonal collision systems (Thomas
elimination), and the periodic macro system of the implicit-diffusion
variant (cyclic Thomas via a rank-one correction).  All routines are pure
functions with fixed-order reductions, so identical inputs give
bitwise-identical outputs.

Factorizations are exposed separately from the one-shot solvers because
the time stepper solves the same matrix against fresh right-hand sides at
every step; factoring once and reusing the substitution phase is what
keeps long runs cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import ConfigurationError, SolverError


@dataclass(frozen=True)
class TridiagonalSystem:
    """Tridiagonal matrix, optionally with periodic corner entries.

    ``sub`` and ``sup`` have length n-1; ``corner_upper`` is the (0, n-1)
    entry and ``corner_lower`` the (n-1, 0) entry.  Solvability is not
    assumed up front; it is what the elimination itself checks.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    corner_upper: float = 0.0
    corner_lower: float = 0.0

    def __post_init__(self):
        n = len(self.diag)
        if len(self.sub) != n - 1 or len(self.sup) != n - 1:
            raise ConfigurationError(
                "tridiagonal bands must have lengths n-1, n, n-1; got "
                f"{len(self.sub)}, {n}, {len(self.sup)}"
            )

    @property
    def size(self) -> int:
        return len(self.diag)

    @property
    def cyclic(self) -> bool:
        return self.corner_upper != 0.0 or self.corner_lower != 0.0

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Matrix-vector product; ``x`` may be (n,) or (n, m)."""
        x = np.asarray(x, dtype=float)
        shape = (-1,) + (1,) * (x.ndim - 1)
        y = self.diag.reshape(shape) * x
        y[1:] += self.sub.reshape((-1,) + (1,) * (x.ndim - 1)) * x[:-1]
        y[:-1] += self.sup.reshape((-1,) + (1,) * (x.ndim - 1)) * x[1:]
        y[0] += self.corner_upper * x[-1]
        y[-1] += self.corner_lower * x[0]
        return y

    def dense(self) -> np.ndarray:
        n = self.size
        a = np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)
        a[0, n - 1] += self.corner_upper
        a[n - 1, 0] += self.corner_lower
        return a


class CGSolution(NamedTuple):
    x: np.ndarray
    iterations: int
    residual: float


def conjugate_gradient(
    apply: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    tol: float = 1e-12,
    max_iter: int | None = None,
) -> CGSolution:
    """Conjugate gradient for a symmetric positive (semi)definite map.

    Parameters
    ----------
    apply : callable
        The linear map x -> A x.
    b : array
        Right-hand side, assumed in the range of A.
    tol : float
        Relative residual target, ||A x - b|| <= tol ||b||.
    max_iter : int, optional
        Iteration cap; defaults to 10 n.

    Returns
    -------
    CGSolution
        Solution vector, iteration count, and final relative residual.

    Raises
    ------
    SolverError
        On non-convergence (the best iterate rides along on ``best``),
        on a NaN/inf appearing mid-iteration, or when the map reveals
        itself as not positive definite on a search direction.
    """
    b = np.asarray(b, dtype=float)
    n = b.size
    if max_iter is None:
        max_iter = 10 * n
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return CGSolution(np.zeros_like(b), 0, 0.0)

    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    for k in range(max_iter):
        ap = apply(p)
        p_ap = float(p @ ap)
        if not np.isfinite(p_ap):
            raise SolverError(
                f"conjugate gradient hit a non-finite value at iteration {k + 1}",
                best=x,
            )
        if p_ap <= 0.0:
            raise SolverError(
                "conjugate gradient found a non-positive curvature direction; "
                "the operator is not positive definite on the solve subspace",
                best=x,
            )
        alpha = rs / p_ap
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = float(r @ r)
        if not np.isfinite(rs_new):
            raise SolverError(
                f"conjugate gradient residual became non-finite at iteration {k + 1}",
                best=x,
            )
        if np.sqrt(rs_new) <= tol * b_norm:
            return CGSolution(x, k + 1, float(np.sqrt(rs_new) / b_norm))
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise SolverError(
        f"conjugate gradient did not reach tol={tol:g} within {max_iter} "
        f"iterations (relative residual {np.sqrt(rs) / b_norm:.3e})",
        best=x,
    )


@dataclass(frozen=True)
class TridiagonalFactor:
    """LU factorization of a non-cyclic tridiagonal matrix, no pivoting.

    ``multipliers`` are the forward-elimination coefficients l_i, and
    ``inv_pivots`` the reciprocals of the eliminated diagonal.  The
    substitution phase accepts stacked right-hand sides of shape (n,) or
    (n, m) and runs vectorized across the m columns.
    """

    multipliers: np.ndarray
    inv_pivots: np.ndarray
    sup: np.ndarray

    @property
    def size(self) -> int:
        return len(self.inv_pivots)

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        single = b.ndim == 1
        y = b.reshape(self.size, -1).copy()
        n = self.size
        for i in range(1, n):
            y[i] -= self.multipliers[i - 1] * y[i - 1]
        y[n - 1] *= self.inv_pivots[n - 1]
        for i in range(n - 2, -1, -1):
            y[i] = (y[i] - self.sup[i] * y[i + 1]) * self.inv_pivots[i]
        return y[:, 0] if single else y


def factor_tridiagonal(system: TridiagonalSystem) -> TridiagonalFactor:
    """Eliminate once; raises SolverError naming the row of a zero pivot."""
    if system.cyclic:
        raise ConfigurationError(
            "factor_tridiagonal handles non-cyclic systems; use factor_cyclic"
        )
    n = system.size
    scale = max(
        float(np.abs(system.diag).max()),
        float(np.abs(system.sub).max()) if n > 1 else 0.0,
        float(np.abs(system.sup).max()) if n > 1 else 0.0,
        1e-300,
    )
    pivots = np.empty(n)
    multipliers = np.empty(max(n - 1, 0))
    pivots[0] = system.diag[0]
    if abs(pivots[0]) <= 1e-14 * scale:
        raise SolverError("zero pivot in row 0 during tridiagonal elimination")
    for i in range(1, n):
        multipliers[i - 1] = system.sub[i - 1] / pivots[i - 1]
        pivots[i] = system.diag[i] - multipliers[i - 1] * system.sup[i - 1]
        if abs(pivots[i]) <= 1e-14 * scale:
            raise SolverError(f"zero pivot in row {i} during tridiagonal elimination")
    return TridiagonalFactor(multipliers, 1.0 / pivots, system.sup.copy())


def thomas_solve(system: TridiagonalSystem, b: np.ndarray) -> np.ndarray:
    """One-shot Thomas elimination; ``b`` may be (n,) or (n, m)."""
    return factor_tridiagonal(system).solve(b)


@dataclass(frozen=True)
class CyclicTridiagonalFactor:
    """Sherman-Morrison split of a cyclic tridiagonal matrix.

    The corner entries are folded into a rank-one update A = T + u v^T;
    ``z`` stores T^{-1} u so each solve costs one substitution plus a
    scalar correction.
    """

    base: TridiagonalFactor
    z: np.ndarray
    v_last: float
    denom: float

    def solve(self, b: np.ndarray) -> np.ndarray:
        y = self.base.solve(b)
        weight = (y[0] + self.v_last * y[-1]) / self.denom
        if y.ndim == 1:
            return y - weight * self.z
        return y - np.outer(self.z, weight)


def factor_cyclic(system: TridiagonalSystem) -> CyclicTridiagonalFactor:
    n = system.size
    if n < 3 and system.cyclic:
        raise ConfigurationError(
            "cyclic corners need n >= 3 so they stay off the tridiagonal band"
        )
    alpha = system.corner_lower
    beta = system.corner_upper
    # gamma = -d_0 keeps the modified first pivot away from zero
    gamma = -system.diag[0] if system.diag[0] != 0.0 else 1.0
    diag = system.diag.copy()
    diag[0] -= gamma
    diag[-1] -= alpha * beta / gamma
    base = factor_tridiagonal(
        TridiagonalSystem(system.sub.copy(), diag, system.sup.copy())
    )
    u = np.zeros(n)
    u[0] = gamma
    u[-1] = alpha
    z = base.solve(u)
    v_last = beta / gamma
    denom = 1.0 + z[0] + v_last * z[-1]
    if abs(denom) <= 1e-14:
        raise SolverError(
            "singular reduced system in cyclic tridiagonal factorization"
        )
    return CyclicTridiagonalFactor(base, z, v_last, denom)


def cyclic_thomas_solve(system: TridiagonalSystem, b: np.ndarray) -> np.ndarray:
    """Solve a periodic tridiagonal system; zero corners degrade gracefully."""
    return factor_cyclic(system).solve(b)


def projected_solve_mean_zero(
    apply_d: Callable[[np.ndarray], np.ndarray],
    phi: np.ndarray,
    tol: float = 1e-12,
    max_iter: int | None = None,
) -> np.ndarray:
    """Solve D psi = phi on the mean-zero subspace.

    D is symmetric negative semidefinite with kernel spanned by the
    constant vector, so -D is positive definite once the mean is projected
    out.  Conjugate gradient runs on -D with the mean subtracted after
    every application and from the final iterate.
    """
    phi = np.asarray(phi, dtype=float)

    def apply_projected(x: np.ndarray) -> np.ndarray:
        y = -apply_d(x)
        return y - y.mean()

    rhs = -(phi - phi.mean())
    solution = conjugate_gradient(apply_projected, rhs, tol=tol, max_iter=max_iter)
    psi = solution.x
    return psi - psi.mean()
