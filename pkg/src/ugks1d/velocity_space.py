"""Velocity grids and discrete collision operators.

The velocity interval (-1, 1) is sampled by 2N cell-centered points
v_j = -1 + dv/2 + (j-1) dv, dv = 1/N.  The grid is symmetric and never
contains v = 0, so upwind sign decisions cannot tie.

A collision operator is a symmetric 2N x 2N matrix D with nonnegative
off-diagonal entries, zero row sums, and kernel exactly span(1): it
conserves the velocity average rho = (1/2N) sum_j F_j and dissipates
everything else.  The pair (U, lambda_star) with

    D U = V,   <U, 1> = 0,   lambda_star = <V, V> / <U, V> < 0,

is what the flux construction consumes; inner products are plain
unweighted sums over the velocity index.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SolverError
from .linalg import projected_solve_mean_zero


class OperatorKind(enum.Enum):
    BGK = "bgk"
    FOKKER_PLANCK = "fp"
    SCATTERING_PERIODIC = "sc"


class SolverHint(enum.Enum):
    """Which implicit collision solve the stepper should dispatch to."""

    DIAGONAL_TRICK = "diagonal-trick"
    TRIDIAGONAL = "tridiagonal"
    GENERIC_SPD = "generic-spd"


def _read_only(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class VelocityGrid:
    half_count: int
    delta_v: float
    velocities: np.ndarray

    @property
    def size(self) -> int:
        return 2 * self.half_count


def build_grid(half_count: int) -> VelocityGrid:
    """Symmetric grid of 2N velocities; rejects N < 1."""
    if half_count < 1:
        raise ConfigurationError(f"half_count must be >= 1, got {half_count}")
    n = 2 * half_count
    # (2j - 2N - 1)/(2N): one rounding per entry, exact antisymmetry
    velocities = (2.0 * np.arange(1, n + 1) - n - 1) / n
    return VelocityGrid(half_count, 1.0 / half_count, _read_only(velocities))


@dataclass(frozen=True)
class CollisionOperator:
    kind: OperatorKind
    grid: VelocityGrid
    matrix: np.ndarray
    lambda_star: float
    u_vector: np.ndarray
    solver_hint: SolverHint

    @property
    def size(self) -> int:
        return self.grid.size


def build_bgk(grid: VelocityGrid) -> CollisionOperator:
    """Relaxation toward the velocity average at unit rate: D = P0 - I."""
    n = grid.size
    matrix = np.full((n, n), 1.0 / n) - np.eye(n)
    return CollisionOperator(
        kind=OperatorKind.BGK,
        grid=grid,
        matrix=_read_only(matrix),
        lambda_star=-1.0,
        u_vector=_read_only(-grid.velocities),
        solver_hint=SolverHint.DIAGONAL_TRICK,
    )


def build_fokker_planck(grid: VelocityGrid) -> CollisionOperator:
    """Conservative velocity-diffusion operator with degenerate edges.

    Row j applies the flux difference
    (1 - v_{j+1/2}^2)(F_{j+1} - F_j) - (1 - v_{j-1/2}^2)(F_j - F_{j-1}),
    all divided by dv^2, with cell edges at v = m/N.  The outermost edges
    sit exactly at -1 and +1 where the diffusivity 1 - v^2 vanishes, so no
    flux leaves the velocity interval; that choice is what makes D 1 = 0
    and D V = -2 V hold exactly.

    The edge weights (1 - (m/N)^2)/dv^2 = N^2 - m^2 are integers, so the
    assembled matrix is exact in floating point.
    """
    half = grid.half_count
    n = grid.size
    m = np.arange(n + 1) - half
    weights = (half * half - m * m).astype(float)
    matrix = np.zeros((n, n))
    idx = np.arange(n - 1)
    matrix[idx + 1, idx] = weights[1:n]
    matrix[idx, idx + 1] = weights[1:n]
    matrix[np.arange(n), np.arange(n)] = -(weights[:n] + weights[1:])
    return CollisionOperator(
        kind=OperatorKind.FOKKER_PLANCK,
        grid=grid,
        matrix=_read_only(matrix),
        lambda_star=-2.0,
        u_vector=_read_only(-0.5 * grid.velocities),
        solver_hint=SolverHint.TRIDIAGONAL,
    )


def build_scattering(grid: VelocityGrid, scale: float = 0.1) -> CollisionOperator:
    """Scaled periodic Laplacian in velocity.

    The velocity indices form a cycle (1, ..., 2N, 1): the corner entries
    couple the fastest forward and backward velocities. lambda_star has no
    closed form here and is computed by the projected solve.
    """
    n = grid.size
    if n < 3:
        raise ConfigurationError(
            f"scattering cycle needs at least 3 velocities, got 2N = {n}"
        )
    if scale <= 0:
        raise ConfigurationError(f"scale must be positive, got {scale}")
    c = scale / grid.delta_v**2
    matrix = np.zeros((n, n))
    idx = np.arange(n)
    matrix[idx, idx] = -2.0 * c
    matrix[idx[:-1], idx[:-1] + 1] = c
    matrix[idx[:-1] + 1, idx[:-1]] = c
    matrix[0, n - 1] = c
    matrix[n - 1, 0] = c
    u_vector, lambda_star = compute_u_and_lambda(matrix, grid.velocities)
    return CollisionOperator(
        kind=OperatorKind.SCATTERING_PERIODIC,
        grid=grid,
        matrix=_read_only(matrix),
        lambda_star=lambda_star,
        u_vector=_read_only(u_vector),
        solver_hint=SolverHint.GENERIC_SPD,
    )


def compute_u_and_lambda(
    matrix: np.ndarray,
    velocities: np.ndarray,
    tol: float = 1e-12,
    max_iter: int | None = None,
) -> tuple[np.ndarray, float]:
    """Solve D U = V on the mean-zero subspace and form the pseudo-eigenvalue.

    Parameters
    ----------
    matrix : array
        Symmetric negative semidefinite collision matrix.
    velocities : array
        The grid velocities V; their sum must vanish.
    tol, max_iter :
        Passed to the projected conjugate gradient (cap 10 * 2N when
        unset).

    Returns
    -------
    (U, lambda_star)
        U with D U = V, <U, 1> = 0, and lambda_star = <V,V>/<U,V> < 0.

    Raises
    ------
    ConfigurationError
        When the projected solve cannot converge, which is how an
        operator with kernel dimension > 1 (V not in the range of D)
        shows up here.
    """
    v = np.asarray(velocities, dtype=float)
    try:
        u = projected_solve_mean_zero(lambda x: matrix @ x, v, tol=tol, max_iter=max_iter)
    except SolverError as exc:
        raise ConfigurationError(f"operator-invalid: solve for U failed: {exc}") from exc
    lambda_star = float((v @ v) / (u @ v))
    if not lambda_star < 0:
        raise ConfigurationError(
            f"operator-invalid: pseudo-eigenvalue {lambda_star} is not negative"
        )
    return u, lambda_star


@dataclass(frozen=True)
class ValidationReport:
    """Structural check results; ``details`` holds the measured magnitudes."""

    symmetric: bool
    zero_row_sums: bool
    nonnegative_off_diagonal: bool
    negative_semidefinite: bool
    kernel_is_constants: bool
    irreducible: bool
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (
            self.symmetric
            and self.zero_row_sums
            and self.nonnegative_off_diagonal
            and self.negative_semidefinite
            and self.kernel_is_constants
            and self.irreducible
        )

    def lines(self) -> list[str]:
        out = []
        for name in (
            "symmetric",
            "zero_row_sums",
            "nonnegative_off_diagonal",
            "negative_semidefinite",
            "kernel_is_constants",
            "irreducible",
        ):
            flag = "ok" if getattr(self, name) else "FAIL"
            extra = ""
            if name in self.details:
                extra = f" ({self.details[name]:.3e})"
            out.append(f"{name.replace('_', ' ')}: {flag}{extra}")
        return out


def _connected(matrix: np.ndarray) -> bool:
    # breadth-first traversal over edges where D_ij > 0 off the diagonal
    n = matrix.shape[0]
    if n == 1:
        return True
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        neighbors = np.nonzero(matrix[i] > 0.0)[0]
        for j in neighbors:
            if j != i and not seen[j]:
                seen[j] = True
                queue.append(j)
    return bool(seen.all())


def validate_operator(
    matrix: np.ndarray,
    *,
    symmetry_tol: float = 1e-14,
    row_sum_tol: float = 1e-13,
    semidefinite_tol: float = 1e-12,
) -> ValidationReport:
    """Check the structural assumptions a collision matrix must satisfy.

    Symmetry, zero row sums, and off-diagonal sign are read straight off
    the entries.  Semidefiniteness and the kernel dimension use a dense
    symmetric eigensolve, acceptable at validation scale.  Irreducibility
    is graph connectivity on the positive off-diagonal entries; together
    with the sign and row-sum checks it is equivalent to the scaled
    matrix I + delta D being an irreducible bistochastic matrix for small
    delta, so no numerical delta sweep is needed.

    Failures are report entries, never exceptions.
    """
    d = np.asarray(matrix, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ConfigurationError(f"expected a square matrix, got shape {d.shape}")
    n = d.shape[0]
    ones = np.ones(n)

    asymmetry = float(np.abs(d - d.T).max())
    row_sums = float(np.abs(d @ ones).max())
    col_sums = float(np.abs(ones @ d).max())
    off = d[~np.eye(n, dtype=bool)]
    min_off = float(off.min()) if off.size else 0.0

    eigenvalues = np.linalg.eigvalsh(d)
    max_eig = float(eigenvalues.max())
    scale = max(1.0, float(np.abs(eigenvalues).max()))
    kernel_tol = 1e-8 * scale
    kernel_dim = int(np.count_nonzero(np.abs(eigenvalues) <= kernel_tol))

    return ValidationReport(
        symmetric=asymmetry <= symmetry_tol,
        zero_row_sums=max(row_sums, col_sums) <= row_sum_tol,
        nonnegative_off_diagonal=min_off >= 0.0,
        negative_semidefinite=max_eig <= semidefinite_tol,
        kernel_is_constants=kernel_dim == 1 and row_sums <= row_sum_tol,
        irreducible=_connected(d),
        details={
            "symmetric": asymmetry,
            "zero_row_sums": max(row_sums, col_sums),
            "nonnegative_off_diagonal": min_off,
            "negative_semidefinite": max_eig,
            "kernel_is_constants": float(kernel_dim),
        },
    )


def mean_projection(f_values: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto the constants: m 1 with m the mean."""
    f_values = np.asarray(f_values, dtype=float)
    return np.full_like(f_values, f_values.mean())


def pseudo_inverse_apply(op: CollisionOperator, phi: np.ndarray) -> np.ndarray:
    """Apply D^+: solve D psi = phi with <psi, 1> = 0.

    ``phi`` must be mean-zero to within 1e-10 of its norm; D^+ is only
    defined on the range of D.
    """
    phi = np.asarray(phi, dtype=float)
    norm = float(np.linalg.norm(phi))
    if norm == 0.0:
        return np.zeros_like(phi)
    if abs(float(phi.sum())) > 1e-10 * norm:
        raise ConfigurationError(
            "pseudo_inverse_apply needs a mean-zero input; "
            f"got <phi,1> = {float(phi.sum()):.3e} with |phi| = {norm:.3e}"
        )
    return projected_solve_mean_zero(lambda x: op.matrix @ x, phi)


def entropy_dissipation(op: CollisionOperator, f_values: np.ndarray) -> float:
    """<D F, ln F> for strictly positive F; nonpositive, zero only on constants."""
    f_values = np.asarray(f_values, dtype=float)
    if not (f_values > 0).all():
        raise ConfigurationError("entropy_dissipation needs strictly positive entries")
    return float((op.matrix @ f_values) @ np.log(f_values))
