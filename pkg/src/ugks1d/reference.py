"""Independent reference solutions and dense spectral machinery.

Everything here exists to validate the production scheme and is allowed
dense O((2N)^3) linear algebra; nothing in this module runs inside timed
solver paths.  The references are

* the exact free-transport solution (characteristics of eta df/dt + v df/dx = 0),
* the exact periodic heat-kernel density for the diffusive limit,
* the explicit finite-difference limit scheme the solver must reduce to,
* the dense interface-value oracle M(t)^{-1} S(t) built from eigenprojectors,
* the Chapman-Enskog residual measuring distance to near-equilibrium form.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import ConfigurationError
from .scheme import SchemeParams, underflow_exp
from .velocity_space import CollisionOperator, VelocityGrid

_SIMPSON_PANELS = 2000


@dataclass(frozen=True)
class InitialData:
    """Far-from-equilibrium initial state f0(x,v) = exp(-(x-1/2)^2 - 10(1-v)^2).

    The velocity profile concentrates mass near v = 1, so the state is far
    from the velocity-constant equilibrium.  The exact velocity average is
    rho0(x) = amplitude * exp(-(x-1/2)^2) with
    amplitude = (1/2) integral_{-1}^{1} exp(-10(1-v)^2) dv (about 0.14).
    """

    amplitude: float

    def f0(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return np.exp(-((x - 0.5) ** 2) - 10.0 * (1.0 - v) ** 2)

    def rho0(self, x):
        x = np.asarray(x, dtype=float)
        return self.amplitude * np.exp(-((x - 0.5) ** 2))


@functools.lru_cache(maxsize=1)
def make_initial_data() -> InitialData:
    v = np.linspace(-1.0, 1.0, _SIMPSON_PANELS + 1)
    amplitude = 0.5 * float(simpson(np.exp(-10.0 * (1.0 - v) ** 2), x=v))
    return InitialData(amplitude)


def exact_transport(t: float, x, v, eta: float = 1.0, data: InitialData | None = None):
    """Back-trace along characteristics: f0((x - v t/eta) mod 1, v)."""
    if data is None:
        data = make_initial_data()
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    return data.f0(np.mod(x - v * t / eta, 1.0), v)


def transport_density(t: float, x, grid: VelocityGrid, eta: float = 1.0) -> np.ndarray:
    """Velocity average of the exact transport solution on the given grid."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    values = exact_transport(t, x[:, None], grid.velocities[None, :], eta)
    return values.mean(axis=1)


def exact_diffusion_density(t: float, x, kappa_abs: float, data: InitialData | None = None):
    """Density of the limiting heat equation on the unit torus.

    rho(t,x) = integral_0^1 K_per(x - y; kappa t) rho0(y) dy with the
    periodized Gaussian kernel truncated at J images; J and the Simpson
    panel count keep the absolute quadrature error below 1e-10 for
    kappa*t <= 0.2.
    """
    if not t > 0:
        raise ConfigurationError(f"diffusion reference needs t > 0, got {t}")
    if not kappa_abs > 0:
        raise ConfigurationError(f"kappa must be positive, got {kappa_abs}")
    if data is None:
        data = make_initial_data()
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    kt = kappa_abs * t
    n_images = max(10, int(math.ceil(6.0 * math.sqrt(2.0 * kt))))
    y = np.linspace(0.0, 1.0, _SIMPSON_PANELS + 1)
    shifts = x[:, None] - y[None, :]
    kernel = np.zeros_like(shifts)
    norm = 1.0 / math.sqrt(4.0 * math.pi * kt)
    for j in range(-n_images, n_images + 1):
        kernel += np.exp(-((shifts + j) ** 2) / (4.0 * kt))
    kernel *= norm
    values = simpson(kernel * data.rho0(y)[None, :], x=y, axis=1)
    return float(values[0]) if scalar else values


def limit_diffusion_step(rho: np.ndarray, dt: float, dx: float, kappa_d: float) -> np.ndarray:
    """One explicit step of the limiting heat equation on the periodic mesh."""
    rho = np.asarray(rho, dtype=float)
    lap = np.roll(rho, -1) - 2.0 * rho + np.roll(rho, 1)
    return rho + (dt * kappa_d / dx**2) * lap


@dataclass(frozen=True)
class SpectralDecomposition:
    """Grouped symmetric eigendecomposition D = sum_k lambda_k P_k.

    The kernel group comes first with its eigenvalue pinned to exactly 0.
    """

    eigenvalues: np.ndarray
    projectors: np.ndarray

    @property
    def count(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        return np.einsum("k,kij->ij", self.eigenvalues, self.projectors)

    def identity_defect(self) -> float:
        total = self.projectors.sum(axis=0)
        return float(np.abs(total - np.eye(total.shape[0])).max())

    def apply_pseudo_inverse(self, phi: np.ndarray) -> np.ndarray:
        """D^+ phi = sum_{k>=1} lambda_k^{-1} P_k phi (zero on the kernel)."""
        phi = np.asarray(phi, dtype=float)
        out = np.zeros_like(phi)
        for lam, proj in zip(self.eigenvalues[1:], self.projectors[1:]):
            out += (proj @ phi) / lam
        return out


def dense_spectral(op: CollisionOperator) -> SpectralDecomposition:
    """Eigendecomposition of D grouped into eigenspace projectors."""
    size = op.size
    if size > 512:
        raise ConfigurationError(f"dense spectral path limited to 2N <= 512, got {size}")
    eigenvalues, vectors = np.linalg.eigh(op.matrix)
    tol = 1e-8 * max(1.0, float(np.abs(eigenvalues).max()))
    groups: list[list[int]] = []
    for idx, lam in enumerate(eigenvalues):
        if groups and lam - eigenvalues[groups[-1][0]] <= tol:
            groups[-1].append(idx)
        else:
            groups.append([idx])
    grouped_values = []
    projectors = []
    zero_pos = None
    for g_idx, group in enumerate(groups):
        lam = float(np.mean(eigenvalues[group]))
        basis = vectors[:, group]
        projectors.append(basis @ basis.T)
        if abs(lam) <= tol:
            lam = 0.0
            zero_pos = g_idx
        grouped_values.append(lam)
    if zero_pos is None:
        raise ConfigurationError("operator has no kernel eigenvalue; constants must be invariant")
    order = [zero_pos] + [k for k in range(len(groups)) if k != zero_pos]
    return SpectralDecomposition(
        eigenvalues=np.array([grouped_values[k] for k in order]),
        projectors=np.stack([projectors[k] for k in order]),
    )


def _relaxation_exponent(t_rel: float, params: SchemeParams, lambda_star: float) -> float:
    if t_rel < 0 or t_rel > params.dt * (1.0 + 1e-12):
        raise ConfigurationError(f"t_rel must lie in [0, dt], got {t_rel}")
    return lambda_star * params.sigma * t_rel / (params.eta * params.epsilon)


def c_weight(w: float) -> float:
    """1 + (w - 1) e^w, the lambda_star-scaled Duhamel gradient weight.

    Equals sum_{m>=2} (m-1) w^m / m!, which the series branch uses below
    |w| = 1/2 where the direct form loses all significant digits.
    """
    if w < -700.0:
        return 1.0
    if abs(w) <= 0.5:
        term = 0.5 * w * w
        total = term
        m = 2
        while abs(term) > 1e-18 * abs(total):
            term *= w * m / ((m - 1) * (m + 1))
            m += 1
            total += term
            if m > 60:
                break
        return total
    e = math.exp(w)
    return 1.0 + (w - 1.0) * e


def assemble_M(t_rel: float, params: SchemeParams, op: CollisionOperator) -> np.ndarray:
    """M(t) = e^w I + (1 - e^w) D/lambda_star with w = lambda_star sigma t_rel/(eta eps)."""
    e = underflow_exp(_relaxation_exponent(t_rel, params, op.lambda_star))
    return e * np.eye(op.size) + (1.0 - e) * (op.matrix / op.lambda_star)


def m_inverse(
    t_rel: float,
    params: SchemeParams,
    op: CollisionOperator,
    spectral: SpectralDecomposition | None = None,
) -> np.ndarray:
    """M(t)^{-1} = sum_k A_k^{-1} P_k with A_k = e^w + (lambda_k/lambda_star)(1 - e^w)."""
    if spectral is None:
        spectral = dense_spectral(op)
    e = underflow_exp(_relaxation_exponent(t_rel, params, op.lambda_star))
    if e == 0.0:
        raise ConfigurationError("relaxation factor underflowed; M^{-1} kernel weight overflows")
    weights = e + (spectral.eigenvalues / op.lambda_star) * (1.0 - e)
    return np.einsum("k,kij->ij", 1.0 / weights, spectral.projectors)


def assemble_S(
    t_rel: float,
    f_left: np.ndarray,
    f_right: np.ndarray,
    params: SchemeParams,
    op: CollisionOperator,
    grid: VelocityGrid,
    dx: float,
) -> np.ndarray:
    """Duhamel source with the density-gradient space reconstruction.

    S_j = e^w upwind_j + v_j [ (C(t)/lambda_star) (D - lambda_star I)
          (-(eps/sigma) grad rho 1) ]_j, evaluated with the dense operator
    so the D 1 = 0 cancellation is exercised, not assumed.
    """
    f_left = np.asarray(f_left, dtype=float)
    f_right = np.asarray(f_right, dtype=float)
    w = _relaxation_exponent(t_rel, params, op.lambda_star)
    e = underflow_exp(w)
    v = grid.velocities
    upwind = np.where(v > 0, f_left, f_right)
    grad = (f_right.mean() - f_left.mean()) / dx
    cal_c_over_lambda = c_weight(w) / op.lambda_star**2
    source = (op.matrix - op.lambda_star * np.eye(op.size)) @ np.full(
        op.size, -params.epsilon * grad / params.sigma
    )
    return e * upwind + cal_c_over_lambda * v * source


@dataclass(frozen=True)
class InterfaceComparison:
    closed_form: np.ndarray
    resolvent: np.ndarray

    @property
    def max_abs_diff(self) -> float:
        return float(np.abs(self.closed_form - self.resolvent).max())


def interface_value_oracle(
    t_rel: float,
    f_left: np.ndarray,
    f_right: np.ndarray,
    params: SchemeParams,
    op: CollisionOperator,
    grid: VelocityGrid,
    dx: float,
    spectral: SpectralDecomposition | None = None,
) -> InterfaceComparison:
    """Closed-form interface value next to the dense M(t)^{-1} S(t) it approximates.

    closed = e^w upwind + (1 - e^w)(rho_left^+ + rho_right^-) 1
             + c_weight(w) (eps/sigma) grad rho U
    """
    f_left = np.asarray(f_left, dtype=float)
    f_right = np.asarray(f_right, dtype=float)
    w = _relaxation_exponent(t_rel, params, op.lambda_star)
    e = underflow_exp(w)
    v = grid.velocities
    half = grid.half_count
    upwind = np.where(v > 0, f_left, f_right)
    rho_plus_left = f_left[half:].sum() / grid.size
    rho_minus_right = f_right[:half].sum() / grid.size
    grad = (f_right.mean() - f_left.mean()) / dx
    closed = (
        e * upwind
        + (1.0 - e) * (rho_plus_left + rho_minus_right)
        + c_weight(w) * (params.epsilon / params.sigma) * grad * op.u_vector
    )
    resolvent = m_inverse(t_rel, params, op, spectral) @ assemble_S(
        t_rel, f_left, f_right, params, op, grid, dx
    )
    return InterfaceComparison(closed_form=closed, resolvent=resolvent)


def chapman_enskog_residual(
    f: np.ndarray, rho: np.ndarray, op: CollisionOperator, params: SchemeParams
) -> float:
    """Distance to the near-equilibrium form rho 1 + (eps/sigma) drho/dx U.

    The density gradient uses periodic central differences; the result is
    the max over cells of the sup-norm in velocity.
    """
    f = np.asarray(f, dtype=float)
    rho = np.asarray(rho, dtype=float)
    dxrho = (np.roll(rho, -1) - np.roll(rho, 1)) / (2.0 * params.dx)
    target = rho[:, None] + (params.epsilon / params.sigma) * dxrho[:, None] * op.u_vector[None, :]
    return float(np.abs(f - target).max())


def upwind_transport_step(
    f: np.ndarray, dt: float, dx: float, eta: float, grid: VelocityGrid
) -> np.ndarray:
    """First-order donor-cell upwind step for eta df/dt + v df/dx = 0."""
    f = np.asarray(f, dtype=float)
    courant = grid.velocities * (dt / (eta * dx))
    worst = float(np.abs(courant).max())
    if worst > 1.0 + 1e-12:
        raise ConfigurationError(f"upwind CFL violated: max |v| dt/(eta dx) = {worst:.6g} > 1")
    backward = f - np.roll(f, 1, axis=0)
    forward = np.roll(f, -1, axis=0) - f
    diff = np.where(courant[None, :] > 0, backward, forward)
    return f - courant[None, :] * diff
