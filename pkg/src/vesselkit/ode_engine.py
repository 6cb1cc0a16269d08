"""Fixed-grid integration of matrix-valued linear ODEs in the slow variable.

The integrator is the classical 4th-order one-step scheme on a uniform grid.
Coefficient values between nodes come from linear interpolation of the node
samples, which is the simplest model compatible with merely absolutely
continuous coefficients.  Consequence for the observed orders: endpoint error
is O(h^4) on constant-coefficient problems, while genuinely time-varying
coefficient families are limited to O(h^2) by the midpoint interpolation.
All checks are evaluated at grid nodes; there is no dense output, no
adaptivity and no stiffness handling.  Identical inputs produce bit-identical
sample families.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import DEFAULTS
from .errors import GridMismatch, NonFinite, ShapeMismatch, SingularSigma1
from .matrix_kernel import as_matrix, frob

__all__ = [
    "TimeGrid",
    "GridOperatorFamily",
    "FundamentalMatrix",
    "integrate_linear_ode",
    "fundamental_matrix",
    "phi_symmetry_residual",
    "phi_bilinear_residual",
    "family_derivative",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid node(i) = t_start + i*h, h = (t_end - t_start)/n_steps."""

    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ShapeMismatch(f"n_steps must be >= 1, got {self.n_steps}")
        if not (self.t_end > self.t_start):
            raise ShapeMismatch("t_end must exceed t_start")

    @property
    def h(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    def node(self, i: int) -> float:
        return self.t_start + i * self.h

    def nodes(self) -> np.ndarray:
        return self.t_start + self.h * np.arange(self.n_nodes)

    def compatible(self, other: "TimeGrid") -> bool:
        return (
            self.n_steps == other.n_steps
            and abs(self.t_start - other.t_start) < 1e-12
            and abs(self.t_end - other.t_end) < 1e-12
        )


class GridOperatorFamily:
    """One matrix sample per grid node, all of the same shape."""

    __slots__ = ("grid", "data")

    def __init__(self, grid: TimeGrid, data):
        arr = np.asarray(data, dtype=complex)
        if arr.ndim != 3:
            raise ShapeMismatch(f"family data must be 3-D, got ndim={arr.ndim}")
        if arr.shape[0] != grid.n_nodes:
            raise ShapeMismatch(
                f"family needs {grid.n_nodes} samples, got {arr.shape[0]}"
            )
        if not np.all(np.isfinite(arr.real) & np.isfinite(arr.imag)):
            raise NonFinite("family contains NaN or Inf")
        arr = arr.copy()
        arr.setflags(write=False)
        self.grid = grid
        self.data = arr

    @classmethod
    def constant(cls, matrix, grid: TimeGrid) -> "GridOperatorFamily":
        m = as_matrix(matrix)
        return cls(grid, np.broadcast_to(m, (grid.n_nodes,) + m.shape))

    @classmethod
    def from_callable(cls, fn: Callable[[float], np.ndarray], grid: TimeGrid) -> "GridOperatorFamily":
        return cls(grid, np.stack([as_matrix(fn(t)) for t in grid.nodes()]))

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[1:]

    def __getitem__(self, i: int) -> np.ndarray:
        return self.data[i]

    def __len__(self) -> int:
        return self.data.shape[0]

    def allclose(self, other: "GridOperatorFamily", tol: float = 1e-12) -> bool:
        return (
            self.grid.compatible(other.grid)
            and self.shape == other.shape
            and float(np.max(np.abs(self.data - other.data))) <= tol
        )

    def max_norm(self) -> float:
        return max(frob(self.data[i]) for i in range(len(self)))


def family_derivative(fam: GridOperatorFamily) -> GridOperatorFamily:
    """d/dt of a sampled family: central differences, one-sided 2nd order ends."""
    h = fam.grid.h
    d = np.empty_like(fam.data)
    d[1:-1] = (fam.data[2:] - fam.data[:-2]) / (2.0 * h)
    if len(fam) >= 3:
        d[0] = (-3.0 * fam.data[0] + 4.0 * fam.data[1] - fam.data[2]) / (2.0 * h)
        d[-1] = (3.0 * fam.data[-1] - 4.0 * fam.data[-2] + fam.data[-3]) / (2.0 * h)
    else:
        d[0] = d[-1] = (fam.data[-1] - fam.data[0]) / (fam.grid.t_end - fam.grid.t_start)
    return GridOperatorFamily(fam.grid, d)


def _interp(data: np.ndarray, pos: float) -> np.ndarray:
    """Linear interpolation of node samples at fractional node position."""
    left = int(np.floor(pos))
    left = min(max(left, 0), data.shape[0] - 2)
    w = pos - left
    if w == 0.0:
        return data[left]
    if w == 1.0:
        return data[left + 1]
    return (1.0 - w) * data[left] + w * data[left + 1]


def _interp4(data: np.ndarray, pos: float) -> np.ndarray:
    """Cubic (4-point Lagrange) interpolation at fractional node position.

    Node-accurate to O(h^4); used where a one-step method must not lose its
    order to coefficient sampling (coupling-matrix quadrature).
    """
    if pos == float(int(pos)):
        return data[int(pos)]
    n = data.shape[0]
    if n < 4:
        return _interp(data, pos)
    start = min(max(int(np.floor(pos)) - 1, 0), n - 4)
    x = pos - start
    out = np.zeros_like(data[0])
    for j in range(4):
        w = 1.0
        for k in range(4):
            if k != j:
                w *= (x - k) / (j - k)
        out = out + w * data[start + j]
    return out


def _rk4_path(rhs, m0: np.ndarray, grid: TimeGrid, start: int, stop: int) -> list[np.ndarray]:
    """March m' = rhs(pos, m) from node `start` to node `stop` (either order).

    Returns the samples at the visited nodes, starting with m0 at `start`.
    `pos` is the fractional node index at which coefficients are wanted.
    """
    step = 1 if stop >= start else -1
    h = grid.h * step
    out = [m0]
    m = m0
    # Overflow is reported as NonFinite, not as a numpy warning.
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(start, stop, step):
            k1 = rhs(float(i), m)
            k2 = rhs(i + 0.5 * step, m + 0.5 * h * k1)
            k3 = rhs(i + 0.5 * step, m + 0.5 * h * k2)
            k4 = rhs(float(i + step), m + h * k3)
            m = m + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(m.real) & np.isfinite(m.imag)):
                raise NonFinite(f"integration blew up between nodes {i} and {i + step}")
            out.append(m)
    return out


def integrate_linear_ode(
    coeff,
    m0,
    grid: TimeGrid,
    direction: str = "forward",
) -> GridOperatorFamily:
    """Integrate M' = coeff(t) @ M over the grid.

    `coeff` is either a GridOperatorFamily or a callable of the node index
    returning a p-by-p matrix; `m0` is the value at t_start (forward) or at
    t_end (backward).  Backward evolution integrates the reversed ODE rather
    than inverting forward samples.
    """
    m = as_matrix(m0, "initial value")
    if isinstance(coeff, GridOperatorFamily):
        if not coeff.grid.compatible(grid):
            raise GridMismatch("coefficient family grid differs from target grid")
        cdata = coeff.data
    else:
        cdata = np.stack([as_matrix(coeff(i), f"coeff({i})") for i in range(grid.n_nodes)])
    p = cdata.shape[1]
    if cdata.shape[1] != cdata.shape[2]:
        raise ShapeMismatch("coefficient matrices must be square")
    if m.shape[0] != p:
        raise ShapeMismatch(f"initial value has {m.shape[0]} rows, coefficients are {p}x{p}")

    def rhs(pos: float, mat: np.ndarray) -> np.ndarray:
        return _interp(cdata, pos) @ mat

    if direction == "forward":
        samples = _rk4_path(rhs, m, grid, 0, grid.n_steps)
    elif direction == "backward":
        samples = _rk4_path(rhs, m, grid, grid.n_steps, 0)[::-1]
    else:
        raise ShapeMismatch(f"direction must be 'forward' or 'backward', got {direction!r}")
    return GridOperatorFamily(grid, np.stack(samples))


@dataclass(frozen=True)
class FundamentalMatrix:
    """Grid-sampled normalized solution of an input or output ODE.

    ``family.data[base_index]`` is the identity; `side` records whether the
    coefficient gamma or gamma_star was used.
    """

    lam: complex
    base_index: int
    side: str
    family: GridOperatorFamily = field(repr=False)

    @property
    def grid(self) -> TimeGrid:
        return self.family.grid

    @property
    def base_point(self) -> float:
        return self.grid.node(self.base_index)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.family[i]


def _check_sigma1(sigma1: GridOperatorFamily, eps: float) -> None:
    for i in range(len(sigma1)):
        smin = np.linalg.svd(sigma1[i], compute_uv=False)[-1]
        if smin <= eps:
            raise SingularSigma1(
                f"sigma1 not invertible at node {i}: min singular value {smin:.3e}"
            )


def fundamental_matrix(
    lam: complex,
    sigma1: GridOperatorFamily,
    sigma2: GridOperatorFamily,
    gamma: GridOperatorFamily,
    grid: TimeGrid,
    side: str = "input",
    base_index: int = 0,
) -> FundamentalMatrix:
    """Fundamental matrix of  lam*sigma2*u - sigma1*u' + gamma*u = 0.

    Integrates u' = sigma1^(-1) (lam*sigma2 + gamma) u with the identity at
    `base_index`; pass gamma_star (side="output") for the output equation.
    """
    for fam, name in ((sigma1, "sigma1"), (sigma2, "sigma2"), (gamma, "gamma")):
        if not fam.grid.compatible(grid):
            raise GridMismatch(f"{name} lives on a different grid")
    m = sigma1.shape[0]
    if sigma1.shape != (m, m) or sigma2.shape != (m, m) or gamma.shape != (m, m):
        raise ShapeMismatch("coefficient families must share a square shape")
    eps = DEFAULTS.eps_spec_rel * max(sigma1.max_norm(), 1.0)
    _check_sigma1(sigma1, eps)
    if not (0 <= base_index <= grid.n_steps):
        raise GridMismatch(f"base_index {base_index} outside the grid")

    coeff = np.stack(
        [
            np.linalg.solve(sigma1[i], lam * sigma2[i] + gamma[i])
            for i in range(grid.n_nodes)
        ]
    )

    def rhs(pos: float, mat: np.ndarray) -> np.ndarray:
        return _interp(coeff, pos) @ mat

    eye = np.eye(m, dtype=complex)
    data = np.empty((grid.n_nodes, m, m), dtype=complex)
    fwd = _rk4_path(rhs, eye, grid, base_index, grid.n_steps)
    data[base_index:] = np.stack(fwd)
    if base_index > 0:
        bwd = _rk4_path(rhs, eye, grid, base_index, 0)
        data[: base_index + 1] = np.stack(bwd[::-1])
    return FundamentalMatrix(
        lam=complex(lam), base_index=base_index, side=side, family=GridOperatorFamily(grid, data)
    )


def _check_pair(a: FundamentalMatrix, b: FundamentalMatrix) -> None:
    if not a.grid.compatible(b.grid):
        raise GridMismatch("fundamental matrices live on different grids")
    if a.base_index != b.base_index:
        raise GridMismatch("fundamental matrices have different base points")
    if a.side != b.side:
        raise GridMismatch("fundamental matrices belong to different sides")


def phi_symmetry_residual(
    phi: FundamentalMatrix,
    phi_conj: FundamentalMatrix,
    sigma1: GridOperatorFamily,
) -> float:
    """Defect of the reflection identity pairing lambda with -conj(lambda).

    Max over nodes of || sigma1(t) Phi(lam,t) - Phi(-conj(lam),t)^(-H) sigma1(base) ||_F.
    """
    _check_pair(phi, phi_conj)
    if abs(phi_conj.lam + np.conj(phi.lam)) > 1e-12 * max(1.0, abs(phi.lam)):
        raise GridMismatch("phi_conj must be sampled at -conj(lambda)")
    if not sigma1.grid.compatible(phi.grid):
        raise GridMismatch("sigma1 lives on a different grid")
    s_base = sigma1[phi.base_index]
    worst = 0.0
    for i in range(len(sigma1)):
        lhs = sigma1[i] @ phi[i]
        rhs = np.linalg.inv(phi_conj[i]).conj().T @ s_base
        worst = max(worst, frob(lhs - rhs))
    return worst


def phi_bilinear_residual(
    phi_mu: FundamentalMatrix,
    phi_lam: FundamentalMatrix,
    sigma1: GridOperatorFamily,
    sigma2: GridOperatorFamily,
) -> float:
    """Defect of d/dt [Phi(mu)^H sigma1 Phi(lam)] = (lam + conj(mu)) Phi(mu)^H sigma2 Phi(lam).

    The derivative is a central difference over interior nodes, so the
    residual carries an O(h^2) floor even on exact data.
    """
    _check_pair(phi_mu, phi_lam)
    for fam in (sigma1, sigma2):
        if not fam.grid.compatible(phi_mu.grid):
            raise GridMismatch("sigma family lives on a different grid")
    h = phi_mu.grid.h
    lam = phi_lam.lam
    mu = phi_mu.lam
    g = np.stack(
        [phi_mu[i].conj().T @ sigma1[i] @ phi_lam[i] for i in range(len(sigma1))]
    )
    worst = 0.0
    for i in range(1, len(sigma1) - 1):
        lhs = (g[i + 1] - g[i - 1]) / (2.0 * h)
        rhs = (lam + np.conj(mu)) * (phi_mu[i].conj().T @ sigma2[i] @ phi_lam[i])
        worst = max(worst, frob(lhs - rhs))
    return worst
