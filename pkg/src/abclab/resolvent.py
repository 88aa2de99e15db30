"""Dirichlet operators, the boundary pencil and block resolvent identities.

For an admissible spectral parameter mu (kept away from the spectrum of the
restricted operator), the Dirichlet operator D_mu maps boundary data to the
unique extended field solving the bordered system

    (mu - A_max) u_ext = 0,    R u_ext = data.

Everything else is assembled from it: the lifted block Dirichlet operator on
(u, v, x) states, the boundary pencil

    P(lam) = B1 D_{lam^2} + (B3/lam + B4) L D_{lam^2},

whose singularity at lam characterizes the spectrum of the coupled generator
off the restricted spectrum, the explicit block resolvents, and the
triangular factorization of (lam - Acal) that proves it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import bordered_dirichlet_solve, checked_solve, opnorm, rel_residual
from .blockops import BlockSystem
from .errors import SpectralParameterError
from .reporting import VerificationReport


def default_exclusion_radius(sys: BlockSystem) -> float:
    """1e-6 times the spectral scale of the restricted operator.

    This is a distance in the squared-parameter plane (where the restricted
    spectrum lives); the zero test below uses its square-root companion since
    eigenvalues of the first-order system scale like sqrt of the restricted
    ones.
    """
    scale = float(np.max(np.abs(sys.eig_A0))) if sys.eig_A0.size else 1.0
    return 1e-6 * max(1.0, scale)


def default_zero_radius(sys: BlockSystem) -> float:
    scale = float(np.max(np.abs(sys.eig_A0))) if sys.eig_A0.size else 1.0
    return 1e-6 * max(1.0, np.sqrt(scale))


def _check_mu_admissible(sys: BlockSystem, mu: complex, radius: float | None) -> None:
    r = default_exclusion_radius(sys) if radius is None else radius
    dist = float(np.min(np.abs(mu - sys.eig_A0)))
    if dist < r:
        raise SpectralParameterError(
            "near-sigma-a0",
            f"mu={mu:.6g} is within {dist:.3e} of the restricted spectrum "
            f"(exclusion radius {r:.3e})")


def _check_lambda_admissible(sys: BlockSystem, lam: complex, radius: float | None) -> None:
    r0 = default_zero_radius(sys) if radius is None else radius
    if abs(lam) < r0:
        raise SpectralParameterError(
            "near-zero", f"lambda={lam:.6g} is within {abs(lam):.3e} of zero "
                         f"(exclusion radius {r0:.3e})")
    _check_mu_admissible(sys, lam * lam, radius)


@dataclass
class PencilEvaluator:
    """Admissibility-guarded access to the boundary pencil of one system."""

    sys: BlockSystem
    exclusion_radius: float | None = None

    @property
    def radius(self) -> float:
        if self.exclusion_radius is None:
            return default_exclusion_radius(self.sys)
        return self.exclusion_radius

    def check(self, lam: complex) -> None:
        _check_lambda_admissible(self.sys, lam, self.exclusion_radius)

    def is_admissible(self, lam: complex) -> bool:
        try:
            self.check(lam)
        except SpectralParameterError:
            return False
        return True


# ---------------------------------------------------------------------------
# Dirichlet operators
# ---------------------------------------------------------------------------
def dirichlet_operator(sys: BlockSystem, mu: complex, boundary: str = "R",
                       exclusion_radius: float | None = None) -> np.ndarray:
    """Extended-dof lifting of boundary data: columns solve the bordered system.

    ``boundary`` selects the boundary row operator ("R" or "L"); the (A, L)
    variant feeds the high-frequency contraction diagnostics.
    """
    if boundary == "R":
        _check_mu_admissible(sys, mu, exclusion_radius)
        bnd = sys.ops.R
    elif boundary == "L":
        bnd = sys.ops.L
    else:
        raise ValueError(f"boundary must be 'R' or 'L', got {boundary!r}")
    return bordered_dirichlet_solve(sys.ops.A_max, bnd, complex(mu))


def identity_LD(sys: BlockSystem, mu: complex,
                exclusion_radius: float | None = None) -> float:
    """Residual of L D_mu = I + B2 D_mu (B2 acting on the node part)."""
    D = dirichlet_operator(sys, mu, exclusion_radius=exclusion_radius)
    n = sys.n
    lhs = sys.ops.L @ D
    rhs = np.eye(sys.n_b) + sys.ops.B2 @ D[:n]
    return opnorm(lhs - rhs)


def block_dirichlet(sys: BlockSystem, lam: complex,
                    exclusion_radius: float | None = None) -> np.ndarray:
    """Block Dirichlet operator on (u, v, x) states.

    Rows are (D_{lam^2}, lam D_{lam^2}, (1/lam) L D_{lam^2}); the middle row
    is lam times the first, the last one is the scaled flux of the lift.
    """
    _check_lambda_admissible(sys, lam, exclusion_radius)
    D = dirichlet_operator(sys, lam * lam, exclusion_radius=exclusion_radius)
    n, nb = sys.n, sys.n_b
    out = np.zeros((2 * n + nb, nb), dtype=complex)
    out[:n] = D[:n]
    out[n:2 * n] = lam * D[:n]
    out[2 * n:] = (sys.ops.L @ D) / lam
    return out


# ---------------------------------------------------------------------------
# Pencil
# ---------------------------------------------------------------------------
def pencil(evaluator: PencilEvaluator, lam: complex) -> np.ndarray:
    """Boundary pencil via the representation B1 D + (B3/lam + B4) L D."""
    evaluator.check(lam)
    sys = evaluator.sys
    D = dirichlet_operator(sys, lam * lam, exclusion_radius=evaluator.exclusion_radius)
    LD = sys.ops.L @ D
    return sys.ops.B1 @ D[:sys.n] + (sys.ops.B3 / lam + sys.ops.B4) @ LD


def pencil_via_blocks(evaluator: PencilEvaluator, lam: complex) -> np.ndarray:
    """Dual construction: Btilde + Bfrak applied to the block Dirichlet lift."""
    evaluator.check(lam)
    sys = evaluator.sys
    Dblk = block_dirichlet(sys, lam, exclusion_radius=evaluator.exclusion_radius)
    return sys.Btilde + sys.Bfrak @ Dblk


# ---------------------------------------------------------------------------
# Block resolvents
# ---------------------------------------------------------------------------
def resolvent_A0_block(sys: BlockSystem, lam: complex,
                       exclusion_radius: float | None = None) -> np.ndarray:
    """Explicit resolvent of the restricted 3x3 block generator.

    Rows: (lam R2, R2, 0 / A0 R2, lam R2, 0 / B2 R2, B2 R2 / lam, I / lam)
    with R2 = (lam^2 - A0)^{-1}.
    """
    _check_lambda_admissible(sys, lam, exclusion_radius)
    n, nb = sys.n, sys.n_b
    A0 = sys.A0
    R2 = checked_solve(lam * lam * np.eye(n, dtype=complex) - A0,
                       np.eye(n, dtype=complex), what="(lam^2 - A0) resolvent")
    B2R2 = sys.ops.B2 @ R2
    out = np.zeros((2 * n + nb, 2 * n + nb), dtype=complex)
    out[:n, :n] = lam * R2
    out[:n, n:2 * n] = R2
    out[n:2 * n, :n] = A0 @ R2
    out[n:2 * n, n:2 * n] = lam * R2
    out[2 * n:, :n] = B2R2
    out[2 * n:, n:2 * n] = B2R2 / lam
    out[2 * n:, 2 * n:] = np.eye(nb) / lam
    return out


def _factorization_pieces(sys: BlockSystem, lam: complex, radius: float | None):
    n, nb = sys.n, sys.n_b
    m1 = 2 * n + nb
    Dblk = block_dirichlet(sys, lam, exclusion_radius=radius)
    RA0 = resolvent_A0_block(sys, lam, exclusion_radius=radius)
    ev = PencilEvaluator(sys, radius)
    Blam = pencil(ev, lam)

    Lfac = np.eye(m1 + nb, dtype=complex)
    Lfac[m1:, :m1] = -sys.Bfrak @ RA0
    Mfac = np.eye(m1 + nb, dtype=complex)
    Mfac[:m1, m1:] = -Dblk

    def middle(omega):
        mid = np.zeros((m1 + nb, m1 + nb), dtype=complex)
        mid[:m1, :m1] = omega * np.eye(m1) - sys.Abb0
        mid[m1:, m1:] = omega * np.eye(nb) - Blam
        return mid

    return Dblk, RA0, Blam, Lfac, Mfac, middle


def factorization_check(sys: BlockSystem, lam: complex, mu: complex,
                        exclusion_radius: float | None = None) -> VerificationReport:
    """Residuals of the triangular factorization of the coupled generator.

    Checks, all Frobenius-relative:
      (i)   lam - Acal = Lfac diag(lam - Abb0, lam - P(lam)) Mfac
      (ii)  mu  - Acal = Lfac diag(mu - Abb0, mu - P(lam)) Mfac
                         + (mu - lam)(I - Lfac Mfac)
      (iii) Lfac Mfac equals its displayed closed form.
    """
    n, nb = sys.n, sys.n_b
    m1 = 2 * n + nb
    Dblk, RA0, _, Lfac, Mfac, middle = _factorization_pieces(sys, lam, exclusion_radius)
    eye_full = np.eye(m1 + nb, dtype=complex)

    lhs = lam * eye_full - sys.Acal
    rhs = Lfac @ middle(lam) @ Mfac
    res_i = rel_residual(rhs, lhs, reference=lhs)

    lhs_mu = mu * eye_full - sys.Acal
    LM = Lfac @ Mfac
    rhs_mu = Lfac @ middle(mu) @ Mfac + (mu - lam) * (eye_full - LM)
    res_ii = rel_residual(rhs_mu, lhs_mu, reference=lhs_mu)

    display = np.eye(m1 + nb, dtype=complex)
    display[:m1, m1:] = -Dblk
    display[m1:, :m1] = -sys.Bfrak @ RA0
    display[m1:, m1:] = np.eye(nb) + sys.Bfrak @ RA0 @ Dblk
    res_iii = rel_residual(LM, display, reference=display)

    report = VerificationReport(metadata={"lambda": str(lam), "mu": str(mu)})
    report.add("factorization", res_i, 1e-8)
    report.add("factorization-shifted", res_ii, 1e-8)
    report.add("lm-product", res_iii, 1e-8)
    return report


def gamma_membership(evaluator: PencilEvaluator, lam: complex) -> tuple[bool, str]:
    """Membership of lam in the joint resolvent set Gamma.

    Returns (member, reason); reason is "" for members, otherwise names the
    failed test.  The pencil-singularity test uses a relative smallest-
    singular-value threshold of 1e-8.
    """
    try:
        Blam = pencil(evaluator, lam)
    except SpectralParameterError as exc:
        return False, exc.reason
    sv = np.linalg.svd(lam * np.eye(evaluator.sys.n_b) - Blam, compute_uv=False)
    if sv[-1] <= 1e-8 * max(1.0, sv[0]):
        return False, "pencil-singular"
    return True, ""


def resolvent_Acal(sys: BlockSystem, lam: complex,
                   exclusion_radius: float | None = None) -> np.ndarray:
    """Resolvent of the coupled generator assembled from the factorization.

    Blocks: [[RA0 + D G Bfrak RA0, D G], [G Bfrak RA0, G]] with
    G = (lam - P(lam))^{-1}; refuses lambda outside Gamma, distinguishing
    which membership test failed.
    """
    ev = PencilEvaluator(sys, exclusion_radius)
    ev.check(lam)
    nb = sys.n_b
    Blam = pencil(ev, lam)
    pcl = lam * np.eye(nb) - Blam
    sv = np.linalg.svd(pcl, compute_uv=False)
    if sv[-1] <= 1e-8 * max(1.0, sv[0]):
        raise SpectralParameterError(
            "pencil-singular",
            f"lambda={lam:.6g} is in the pencil spectrum "
            f"(smallest singular value {sv[-1]:.3e})")
    G = checked_solve(pcl, np.eye(nb, dtype=complex), what="(lam - pencil) resolvent")
    Dblk = block_dirichlet(sys, lam, exclusion_radius=ev.exclusion_radius)
    RA0 = resolvent_A0_block(sys, lam, exclusion_radius=ev.exclusion_radius)
    m1 = 2 * sys.n + nb
    out = np.zeros((m1 + nb, m1 + nb), dtype=complex)
    GB = G @ (sys.Bfrak @ RA0)
    out[:m1, :m1] = RA0 + Dblk @ GB
    out[:m1, m1:] = Dblk @ G
    out[m1:, :m1] = GB
    out[m1:, m1:] = G
    return out
