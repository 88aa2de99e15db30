"""Dense linear-algebra primitives shared by the operator modules.

Everything here is desk scale: square systems of a few hundred unknowns,
solved by LU with partial pivoting, with an SVD-based condition refusal
threshold instead of iterative refinement.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError

# Refuse bordered/dense solves beyond this condition estimate.
COND_REFUSAL = 1e12


def opnorm(a: np.ndarray) -> float:
    """Spectral (2-) norm."""
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def checked_solve(mat: np.ndarray, rhs: np.ndarray, what: str = "linear system") -> np.ndarray:
    """Solve ``mat @ x = rhs`` by LU; refuse if the matrix is near singular."""
    try:
        x = np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"{what}: exactly singular matrix") from exc
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"{what}: non-finite solution")
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > COND_REFUSAL:
        raise NumericalError(f"{what}: condition estimate {cond:.3e} exceeds {COND_REFUSAL:.0e}")
    return x


def bordered_dirichlet_solve(a_max: np.ndarray, bnd: np.ndarray, mu: complex) -> np.ndarray:
    """Columns of the lifting operator for the boundary row operator ``bnd``.

    Solves the square bordered system

        (mu * P_n - A_max) u_ext = 0      (node rows)
        bnd u_ext            = e_i        (boundary rows)

    where ``P_n`` projects extended dofs (nodes followed by ghosts) onto node
    dofs.  Returns the (n + g, n_b) matrix whose i-th column is the unique
    extended field with interior eigen-equation mu and boundary data e_i.
    """
    n, next_ = a_max.shape
    n_b = bnd.shape[0]
    if bnd.shape[1] != next_:
        raise NumericalError("bordered solve: boundary operator has wrong extended width")
    mat = np.zeros((next_, next_), dtype=np.result_type(a_max.dtype, type(mu)))
    mat[:n, :] = -a_max
    mat[:n, :n] += mu * np.eye(n)
    mat[n:, :] = bnd
    rhs = np.zeros((next_, n_b), dtype=mat.dtype)
    rhs[n:, :] = np.eye(n_b)
    return checked_solve(mat, rhs, what="bordered Dirichlet system")


def rel_residual(lhs: np.ndarray, rhs: np.ndarray, reference: np.ndarray | None = None) -> float:
    """Frobenius residual of ``lhs == rhs`` relative to max(1, ||reference||_F)."""
    ref = lhs if reference is None else reference
    denom = max(1.0, float(np.linalg.norm(ref)))
    return float(np.linalg.norm(lhs - rhs)) / denom
