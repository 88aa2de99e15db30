"""Block operators of the first-order coupled system.

The reduced state is ordered (u, v, x, y): interior value and velocity, the
boundary displacement x, and the boundary datum y = R u.  Ghost dofs never
appear in the state: they are eliminated exactly through the constraint
R u_ext = y by solving the (always square, full-rank) ghost block of R, so the
constraint is a coordinate identity along every trajectory.

Assembled objects:

    Abb0  : 3x3 block matrix on (u, v, x), the generator restricted to the
            kernel of the boundary row (its x-row collapses to B2 exactly)
    Acal  : the full coupled generator on (u, v, x, y)
    A1cal : the decoupled part (interior dynamics, zero y-row)
    A2cal : the boundary feedback, nonzero only in the y-row (rank <= n_b)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._linalg import checked_solve
from .errors import AssumptionError, ConfigurationError, DimensionError
from .model import ModelOperators


@dataclass
class BlockSystem:
    """Assembled block matrices with the ghost-elimination maps.

    ghosts = E0 @ u + E1 @ y realizes R(u, ghosts) = y exactly.
    """

    ops: ModelOperators
    A0: np.ndarray                 # (n, n)
    E0: np.ndarray                 # (g, n)
    E1: np.ndarray                 # (g, n_b)
    S_A: np.ndarray                # (n, n_b): ghost contribution of y to v-dot
    Abb0: np.ndarray               # (2n+n_b)^2
    Acal: np.ndarray               # (2n+2n_b)^2
    A1cal: np.ndarray
    A2cal: np.ndarray
    Bfrak: np.ndarray              # (n_b, 2n+n_b): [B1+B4 B2, 0, B3]
    Btilde: np.ndarray             # (n_b, n_b): B4
    dims: tuple[int, int, int]
    eig_A0: np.ndarray = field(repr=False, default=None)
    _caches: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.dims[0]

    @property
    def n_b(self) -> int:
        return self.dims[2]

    @property
    def state_dim(self) -> int:
        return 2 * self.n + 2 * self.n_b

    def split(self, state: np.ndarray):
        """Split a reduced state (or matrix of states) into (u, v, x, y)."""
        n, nb = self.n, self.n_b
        if state.shape[0] != self.state_dim:
            raise DimensionError(
                f"state must have length {self.state_dim}, got {state.shape[0]}")
        return (state[:n], state[n:2 * n],
                state[2 * n:2 * n + nb], state[2 * n + nb:])

    def extend(self, u: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Extended field (nodes + ghosts) with ghosts chosen so R u_ext = y."""
        return np.concatenate([u, self.E0 @ u + self.E1 @ y])


def _ghost_maps(ops: ModelOperators):
    n = ops.n
    Rn, Rg = ops.R[:, :n], ops.R[:, n:]
    cond = np.linalg.cond(Rg)
    if not np.isfinite(cond) or cond > 1e12:
        raise AssumptionError(
            "A3", f"ghost block of R is numerically singular (cond={cond:.3e}); "
                  "cannot eliminate ghosts against the boundary row")
    E1 = checked_solve(Rg, np.eye(Rg.shape[0]), what="ghost block of R")
    E0 = -E1 @ Rn
    return E0, E1


def restriction_A0(ops: ModelOperators) -> np.ndarray:
    """A restricted to ker R: ghosts eliminated with boundary datum y = 0."""
    E0, _ = _ghost_maps(ops)
    n = ops.n
    return ops.A_max[:, :n] + ops.A_max[:, n:] @ E0


def assemble_block_generator(ops: ModelOperators) -> BlockSystem:
    """Build the coupled generator, its restriction and its splitting."""
    n, g, nb = ops.dims
    E0, E1 = _ghost_maps(ops)
    An, Ag = ops.A_max[:, :n], ops.A_max[:, n:]
    Ln, Lg = ops.L[:, :n], ops.L[:, n:]
    A0 = An + Ag @ E0
    S_A = Ag @ E1
    L0 = Ln + Lg @ E0            # collapses to B2 exactly (R = L - B2)
    S_L = Lg @ E1                # collapses to the identity

    dt = np.result_type(A0, ops.B3, ops.B4)
    Abb0 = np.zeros((2 * n + nb, 2 * n + nb), dtype=dt)
    Abb0[:n, n:2 * n] = np.eye(n)
    Abb0[n:2 * n, :n] = A0
    Abb0[2 * n:, :n] = L0            # collapses to B2 on the kernel of R

    Acal = np.zeros((2 * n + 2 * nb, 2 * n + 2 * nb), dtype=dt)
    Acal[:n, n:2 * n] = np.eye(n)
    Acal[n:2 * n, :n] = A0
    Acal[n:2 * n, 2 * n + nb:] = S_A
    Acal[2 * n:2 * n + nb, :n] = L0
    Acal[2 * n:2 * n + nb, 2 * n + nb:] = S_L
    Acal[2 * n + nb:, :n] = ops.B1 + ops.B4 @ ops.B2
    Acal[2 * n + nb:, 2 * n:2 * n + nb] = ops.B3
    Acal[2 * n + nb:, 2 * n + nb:] = ops.B4

    A2cal = np.zeros_like(Acal)
    A2cal[2 * n + nb:, :] = Acal[2 * n + nb:, :]
    A1cal = Acal - A2cal

    Bfrak = np.zeros((nb, 2 * n + nb), dtype=dt)
    Bfrak[:, :n] = ops.B1 + ops.B4 @ ops.B2
    Bfrak[:, 2 * n:] = ops.B3

    return BlockSystem(
        ops=ops, A0=A0, E0=E0, E1=E1, S_A=S_A,
        Abb0=Abb0, Acal=Acal, A1cal=A1cal, A2cal=A2cal,
        Bfrak=Bfrak, Btilde=ops.B4.copy(),
        dims=(n, g, nb),
        eig_A0=np.linalg.eigvals(A0),
    )


def reduced_generator(sys: BlockSystem) -> np.ndarray:
    """First-order dynamical-boundary generator on (u, v, y) for B3 = 0.

    With no spring coupling the x coordinate is superfluous (it feeds nothing)
    and the coupled matrix collapses to a 3-block form whose invertibility is
    what the zero-mode diagnostics probe.
    """
    n, _, nb = sys.dims
    if np.max(np.abs(sys.ops.B3)) > 1e-12:
        raise ConfigurationError(
            "the reduced generator requires B3 = 0 (spring coupling absent)")
    red = np.zeros((2 * n + nb, 2 * n + nb), dtype=sys.Acal.dtype)
    red[:n, n:2 * n] = np.eye(n)
    red[n:2 * n, :n] = sys.A0
    red[n:2 * n, 2 * n:] = sys.S_A
    red[2 * n:, :n] = sys.ops.B1 + sys.ops.B4 @ sys.ops.B2
    red[2 * n:, 2 * n:] = sys.ops.B4
    return red


def initial_state(f: np.ndarray, g: np.ndarray, h: np.ndarray, j: np.ndarray,
                  sys: BlockSystem, tol: float = 1e-10,
                  f_ghosts: np.ndarray | None = None) -> np.ndarray:
    """Reduced initial state (f, g, h, y0) with y0 = j - B2 f.

    When the ghost extension of f is known (analytic data sampled at ghost
    coordinates, or a randomly drawn extension), the compatibility j = L f_ext
    is checked against ``tol`` and violations are rejected with the measured
    residual.
    """
    n, _, nb = sys.dims
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    j = np.asarray(j, dtype=float)
    if f.shape != (n,) or g.shape != (n,):
        raise DimensionError(f"f, g must have length {n}")
    if h.shape != (nb,) or j.shape != (nb,):
        raise DimensionError(f"h, j must have length {nb}")
    if f_ghosts is not None:
        f_ext = np.concatenate([f, np.asarray(f_ghosts, dtype=float)])
        resid = float(np.max(np.abs(sys.ops.L @ f_ext - j)))
        if resid > tol:
            raise ConfigurationError(
                f"incompatible initial data: ||L f - j|| = {resid:.3e} > {tol:.1e} "
                "(initial boundary velocity must equal the initial flux)")
    y0 = j - sys.ops.B2 @ f
    return np.concatenate([f, g, h, y0])
