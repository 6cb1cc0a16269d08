"""Zero/pole interpolation: coupling matrices, unique realization, Hermitian case.

A null-pole triple bundles a right pole pair (C(t), A_pi) and a left null
pair (A_xi, Bn(t)), both with constant state matrices, plus the coupling
family X(t) solving

    X A_pi - A_xi X = Bn sigma1 C        (per node).

When C and Bn obey their matrix-parameter ODEs

    sigma1 C' = sigma2 C A_pi + gamma_star C,
    Bn' sigma1 = -A_xi Bn sigma2 - Bn gamma_star,

the coupling family also obeys X' = Bn sigma2 C, and conversely integrating
that ODE from consistent initial data conserves the algebraic equation up to
the integrator order.  The realized transfer function

    S(lam, t) = I + C (lam I - A_pi)^(-1) X^(-1) Bn sigma1

is the unique intertwining solution with identity at infinity, with the input
coefficient recovered from the linkage formula.

Convention note (pinned by the round-trip test): a conservative vessel maps
to a triple as A_pi = A1(node_ref), C = -B^H, A_xi = -A1(node_ref)^H,
Bn = B; its coupling family is then the per-node Sylvester solution (the
identity, up to the vessel's colligation residual).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import DEFAULTS
from .errors import (
    CouplingSingular,
    GridMismatch,
    InconsistentInitialData,
    NotMinimal,
    NotPositiveDefinite,
    ShapeMismatch,
)
from .matrix_kernel import (
    as_matrix,
    frob,
    hermitian_part,
    hermitian_sqrt,
    solve_sylvester,
)
from .ode_engine import GridOperatorFamily, TimeGrid, _interp4, _rk4_path, family_derivative
from .vessel_core import DifferentialVessel, krylov_rank

__all__ = [
    "NullPoleTriple",
    "HermitianRealization",
    "RealizedTransfer",
    "evolve_pole_pair",
    "evolve_null_pair",
    "evolve_coupling",
    "sylvester_residuals",
    "zero_pole_realize",
    "extract_null_pole",
    "hermitian_realize",
]


@dataclass(frozen=True)
class NullPoleTriple:
    """Null-pole data (C, A_pi; A_xi, Bn) with coupling family X."""

    C: GridOperatorFamily
    A_pi: np.ndarray
    A_xi: np.ndarray
    Bn: GridOperatorFamily
    X: GridOperatorFamily

    def __post_init__(self):
        a_pi = as_matrix(self.A_pi, "A_pi")
        a_xi = as_matrix(self.A_xi, "A_xi")
        object.__setattr__(self, "A_pi", a_pi)
        object.__setattr__(self, "A_xi", a_xi)
        n = a_pi.shape[0]
        k = a_xi.shape[0]
        if a_pi.shape != (n, n) or a_xi.shape != (k, k):
            raise ShapeMismatch("A_pi and A_xi must be square")
        m = self.C.shape[0]
        if self.C.shape != (m, n):
            raise ShapeMismatch(f"C must be m x {n}")
        if self.Bn.shape != (k, m):
            raise ShapeMismatch(f"Bn must be {k} x {m}")
        if self.X.shape != (k, n):
            raise ShapeMismatch(f"X must be {k} x {n}")
        for fam in (self.Bn, self.X):
            if not fam.grid.compatible(self.C.grid):
                raise GridMismatch("triple families live on different grids")

    @property
    def grid(self) -> TimeGrid:
        return self.C.grid


@dataclass(frozen=True)
class RealizedTransfer:
    """Output of zero_pole_realize."""

    transfer: Callable[[complex, int], np.ndarray]
    gamma: GridOperatorFamily
    vessel: DifferentialVessel
    singular_nodes: tuple[int, ...]


@dataclass(frozen=True)
class HermitianRealization:
    """Balanced realization with PD coupling family and its square root."""

    C: GridOperatorFamily
    A1: np.ndarray
    X: GridOperatorFamily = field(repr=False)
    Y: GridOperatorFamily = field(repr=False)
    C_tilde: GridOperatorFamily = field(repr=False)
    A1_tilde: GridOperatorFamily = field(repr=False)
    transfer: Callable[[complex, int], np.ndarray] = field(repr=False)
    colligation_residual: float = 0.0
    min_eig_X: float = 0.0
    max_step_jump: float = 0.0


def _rhs_family(fams: dict[str, GridOperatorFamily]):
    # Cubic node interpolation: the evolutions below must hold their 4th
    # order, and midpoint coefficients sampled linearly would cap them at 2.
    data = {k: f.data for k, f in fams.items()}

    def at(name: str, pos: float) -> np.ndarray:
        return _interp4(data[name], pos)

    return at


def evolve_pole_pair(
    c0,
    a_pi,
    gamma_star: GridOperatorFamily,
    sigma1: GridOperatorFamily,
    sigma2: GridOperatorFamily,
    grid: TimeGrid,
) -> GridOperatorFamily:
    """Integrate sigma1 C' = sigma2 C A_pi + gamma_star C from C(t_start)."""
    c0 = as_matrix(c0, "C0")
    a_pi = as_matrix(a_pi, "A_pi")
    at = _rhs_family({"s1": sigma1, "s2": sigma2, "gs": gamma_star})

    def rhs(pos, c):
        return np.linalg.solve(at("s1", pos), at("s2", pos) @ c @ a_pi + at("gs", pos) @ c)

    samples = _rk4_path(rhs, c0, grid, 0, grid.n_steps)
    return GridOperatorFamily(grid, np.stack(samples))


def evolve_null_pair(
    bn0,
    a_xi,
    gamma_star: GridOperatorFamily,
    sigma1: GridOperatorFamily,
    sigma2: GridOperatorFamily,
    grid: TimeGrid,
) -> GridOperatorFamily:
    """Integrate Bn' sigma1 = -A_xi Bn sigma2 - Bn gamma_star from Bn(t_start)."""
    bn0 = as_matrix(bn0, "Bn0")
    a_xi = as_matrix(a_xi, "A_xi")
    at = _rhs_family({"s1": sigma1, "s2": sigma2, "gs": gamma_star})

    def rhs(pos, bn):
        s1 = at("s1", pos)
        return np.linalg.solve(s1.T, (-a_xi @ bn @ at("s2", pos) - bn @ at("gs", pos)).T).T

    samples = _rk4_path(rhs, bn0, grid, 0, grid.n_steps)
    return GridOperatorFamily(grid, np.stack(samples))


def _pair_ode_residual(
    c: GridOperatorFamily,
    bn: GridOperatorFamily,
    a_pi: np.ndarray,
    a_xi: np.ndarray,
    gamma_star: GridOperatorFamily,
    sigma1: GridOperatorFamily,
    sigma2: GridOperatorFamily,
) -> float:
    dc = family_derivative(c)
    dbn = family_derivative(bn)
    worst = 0.0
    for i in range(len(c)):
        rc = sigma1[i] @ dc[i] - sigma2[i] @ c[i] @ a_pi - gamma_star[i] @ c[i]
        rb = dbn[i] @ sigma1[i] + a_xi @ bn[i] @ sigma2[i] + bn[i] @ gamma_star[i]
        worst = max(worst, frob(rc), frob(rb))
    return worst


def sylvester_residuals(triple: NullPoleTriple, sigma1: GridOperatorFamily) -> np.ndarray:
    """Per-node Frobenius residual of X A_pi - A_xi X = Bn sigma1 C."""
    out = np.empty(len(triple.X))
    for i in range(len(triple.X)):
        out[i] = frob(
            triple.X[i] @ triple.A_pi - triple.A_xi @ triple.X[i]
            - triple.Bn[i] @ sigma1[i] @ triple.C[i]
        )
    return out


def evolve_coupling(
    c: GridOperatorFamily,
    a_pi,
    a_xi,
    bn: GridOperatorFamily,
    x0,
    sigma1: GridOperatorFamily,
    sigma2: GridOperatorFamily,
    gamma_star: GridOperatorFamily,
    grid: TimeGrid,
    tol: float | None = None,
) -> GridOperatorFamily:
    """Integrate X' = Bn sigma2 C from a Sylvester-consistent X(t_start).

    Checks that X0 satisfies the algebraic equation at t_start and that the
    pole/null pairs satisfy their matrix-parameter ODEs (both within `tol`
    plus an O(h^2) finite-difference allowance); the Sylvester residual is
    then conserved along the evolution up to the integrator order.
    """
    if tol is None:
        tol = DEFAULTS.tol
    a_pi = as_matrix(a_pi, "A_pi")
    a_xi = as_matrix(a_xi, "A_xi")
    x0 = as_matrix(x0, "X0")
    res0 = frob(x0 @ a_pi - a_xi @ x0 - bn[0] @ sigma1[0] @ c[0])
    scale = max(frob(a_pi) + frob(a_xi), 1.0) * max(frob(x0), 1.0)
    if res0 > tol * max(scale, 1.0):
        raise InconsistentInitialData(
            f"X0 violates the Sylvester equation: residual {res0:.3e}"
        )
    ode_res = _pair_ode_residual(c, bn, a_pi, a_xi, gamma_star, sigma1, sigma2)
    norms = max(c.max_norm(), bn.max_norm(), sigma2.max_norm(), gamma_star.max_norm(), 1.0)
    allowance = (grid.h ** 2) * norms ** 3
    if ode_res > tol * norms + allowance:
        raise InconsistentInitialData(
            f"pole/null pair ODE residual {ode_res:.3e} exceeds tolerance"
        )

    at = _rhs_family({"c": c, "bn": bn, "s2": sigma2})

    def rhs(pos, _x):
        return at("bn", pos) @ at("s2", pos) @ at("c", pos)

    samples = _rk4_path(rhs, x0, grid, 0, grid.n_steps)
    return GridOperatorFamily(grid, np.stack(samples))


def zero_pole_realize(
    triple: NullPoleTriple,
    gamma_star: GridOperatorFamily,
    sigma1: GridOperatorFamily,
    sigma2: GridOperatorFamily,
    eps_det: float | None = None,
) -> RealizedTransfer:
    """Unique intertwining transfer function realized from a null-pole triple.

    transfer(lam, node) = I + C (lam I - A_pi)^(-1) X^(-1) Bn sigma1, with the
    input coefficient from the linkage formula

        gamma = sigma2 C Xinv Bn sigma1 - sigma1 C Xinv Bn sigma2 + gamma_star.

    Nodes where det X falls under `eps_det` are reported in `singular_nodes`
    and only fail on evaluation there (loss of invertibility along the line
    is genuine behavior of coupling families, not an error of the data).
    The returned vessel carries A1 = A_pi, A2 = 0 and B = X^(-1) Bn; its own
    transfer matches the callback exactly when the triple is reflection
    symmetric (C = -B^H), which is the conservative case.
    """
    n, k = triple.A_pi.shape[0], triple.A_xi.shape[0]
    if n != k:
        raise ShapeMismatch("realization needs square coupling (n == k)")
    if eps_det is None:
        eps_det = DEFAULTS.eps_det
    grid = triple.grid
    nn = grid.n_nodes
    m = triple.C.shape[0]
    singular = []
    xinv = [None] * nn
    for i in range(nn):
        if abs(np.linalg.det(triple.X[i])) <= eps_det:
            singular.append(i)
        else:
            xinv[i] = np.linalg.inv(triple.X[i])

    def xinv_at(i: int) -> np.ndarray:
        if xinv[i] is None:
            raise CouplingSingular(
                f"coupling matrix singular at node {i}", nodes=list(singular)
            )
        return xinv[i]

    gam = np.empty((nn, m, m), dtype=complex)
    b_tilde = np.empty((nn, n, m), dtype=complex)
    for i in range(nn):
        if xinv[i] is None:
            b_tilde[i] = 0.0
            gam[i] = gamma_star[i]
            continue
        bt = xinv[i] @ triple.Bn[i]
        b_tilde[i] = bt
        cb = triple.C[i] @ bt
        gam[i] = sigma2[i] @ cb @ sigma1[i] - sigma1[i] @ cb @ sigma2[i] + gamma_star[i]

    def transfer(lam: complex, node: int) -> np.ndarray:
        from .matrix_kernel import resolvent

        r = resolvent(triple.A_pi, lam)
        return np.eye(m, dtype=complex) + triple.C[node] @ r @ xinv_at(node) @ triple.Bn[node] @ sigma1[node]

    gamma_fam = GridOperatorFamily(grid, gam)
    vessel = DifferentialVessel(
        A1=GridOperatorFamily.constant(triple.A_pi, grid),
        A2=GridOperatorFamily.constant(np.zeros((n, n)), grid),
        B=GridOperatorFamily(grid, b_tilde),
        sigma1=sigma1,
        sigma2=sigma2,
        gamma=gamma_fam,
        gamma_star=gamma_star,
    )
    return RealizedTransfer(
        transfer=transfer,
        gamma=gamma_fam,
        vessel=vessel,
        singular_nodes=tuple(singular),
    )


def extract_null_pole(v: DifferentialVessel, node_ref: int = 0) -> NullPoleTriple:
    """Null-pole triple of a vessel's transfer function.

    Right pole pair (C, A_pi) = (-B^H, A1(node_ref)).  The inverse transfer is
    I + B^H (lam I - A1 - B sigma1 B^H)^(-1) B sigma1, so the left null pair
    is (A_xi, Bn) = (A1 + B sigma1 B^H at node_ref, B); under the first
    colligation A_xi equals -A1(node_ref)^H.  The coupling family is solved
    per node from the Sylvester equation (the identity, at node_ref exactly).
    """
    n = v.state_dim
    rank = krylov_rank(v.A1[node_ref], v.B[node_ref])
    if rank < n:
        raise NotMinimal(f"Krylov rank {rank} < {n} at node {node_ref}", rank=rank)
    a_pi = v.A1[node_ref]
    b_ref = v.B[node_ref]
    a_xi = a_pi + b_ref @ v.sigma1[node_ref] @ b_ref.conj().T
    nn = v.grid.n_nodes
    m = v.signal_dim
    c_data = np.empty((nn, m, n), dtype=complex)
    x_data = np.empty((nn, n, n), dtype=complex)
    for i in range(nn):
        c_data[i] = -v.B[i].conj().T
        q = v.B[i] @ v.sigma1[i] @ c_data[i]
        x_data[i] = solve_sylvester(a_pi, a_xi, q)
    return NullPoleTriple(
        C=GridOperatorFamily(v.grid, c_data),
        A_pi=a_pi,
        A_xi=a_xi,
        Bn=v.B,
        X=GridOperatorFamily(v.grid, x_data),
    )


def hermitian_realize(
    c: GridOperatorFamily,
    a1,
    sigma1: GridOperatorFamily,
) -> HermitianRealization:
    """Balanced conservative realization of S = I + C (lam I + A1)^(-1) X^(-1) C^H sigma1.

    Per node the Lyapunov equation X A1 + A1^H X = -C^H sigma1 C is solved
    (unique for spectra of A1 and -A1^H disjoint), X must come out positive
    definite, and with Y = sqrt(X) the kinematic transforms

        C~ = C Y^(-1),        A1~ = Y A1 Y^(-1)

    satisfy A1~ + A1~^H + C~^H sigma1 C~ = 0 exactly and leave the transfer
    untouched.  The transfer then obeys S(lam) sigma1^(-1) S(-conj(lam))^H =
    sigma1^(-1).  X is solved independently per node; the maximal step jump
    of X is reported as a smoothness cross-check.
    """
    a1 = as_matrix(a1, "A1")
    n = a1.shape[0]
    m = c.shape[0]
    if c.shape != (m, n):
        raise ShapeMismatch(f"C must be m x {n}")
    rank = krylov_rank(a1.conj().T, c[0].conj().T)
    if rank < n:
        raise NotMinimal(f"(A1, C) not observable: Krylov rank {rank} < {n}", rank=rank)
    grid = c.grid
    nn = grid.n_nodes
    x_data = np.empty((nn, n, n), dtype=complex)
    y_data = np.empty_like(x_data)
    ct_data = np.empty((nn, m, n), dtype=complex)
    at_data = np.empty_like(x_data)
    min_eig = np.inf
    coll_res = 0.0
    for i in range(nn):
        q = -(c[i].conj().T @ sigma1[i] @ c[i])
        x = solve_sylvester(a1, -a1.conj().T, q)
        x = hermitian_part(x)
        w = np.linalg.eigvalsh(x)
        min_eig = min(min_eig, float(w[0]))
        if w[0] <= 0:
            raise NotPositiveDefinite(
                f"coupling matrix not PD at node {i}: min eigenvalue {w[0]:.3e}"
            )
        y = hermitian_sqrt(x, require_pd=True)
        yinv = np.linalg.inv(y)
        x_data[i] = x
        y_data[i] = y
        ct_data[i] = c[i] @ yinv
        at_data[i] = y @ a1 @ yinv
        coll_res = max(
            coll_res,
            frob(at_data[i] + at_data[i].conj().T + ct_data[i].conj().T @ sigma1[i] @ ct_data[i]),
        )
    jumps = [frob(x_data[i + 1] - x_data[i]) for i in range(nn - 1)]

    def transfer(lam: complex, node: int) -> np.ndarray:
        from .matrix_kernel import resolvent

        r = resolvent(-a1, lam)  # (lam I + A1)^(-1)
        xinv = np.linalg.inv(x_data[node])
        return np.eye(m, dtype=complex) + c[node] @ r @ xinv @ c[node].conj().T @ sigma1[node]

    return HermitianRealization(
        C=c,
        A1=a1,
        X=GridOperatorFamily(grid, x_data),
        Y=GridOperatorFamily(grid, y_data),
        C_tilde=GridOperatorFamily(grid, ct_data),
        A1_tilde=GridOperatorFamily(grid, at_data),
        transfer=transfer,
        colligation_residual=float(coll_res),
        min_eig_X=float(min_eig),
        max_step_jump=float(max(jumps) if jumps else 0.0),
    )
