"""Physical coefficients and the maximal operator with its boundary operators.

Each model produces a ``ModelOperators`` bundle:

    A_max : interior stencil on extended dofs (nodes followed by ghosts)
    L     : outward flux operator on Gamma1 (central difference via the ghost)
    B2    : trace-type coupling on node dofs;  R = L - B2  (ghost columns of R
            are the flux block, so R has full ghost rank)
    B1    : displacement feedback on node dofs (zero for the acoustic wave)
    B3,B4 : spring / resistivity multiplication operators on Gamma1 dofs

Flux conditions are enforced by ghost points so every interior stencil stays
uniform; rigid (Gamma0) edges are closed by ghost reflection directly inside
A_max.  Coefficients are sampled pointwise at nodes: essential boundedness is
all that is required of them.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ._linalg import bordered_dirichlet_solve, checked_solve, opnorm
from .errors import AssumptionError, ConfigurationError, DimensionError, ModelError
from .expressions import ExpressionError, eval_coeff_expr, parse_expr
from .mesh import Mesh
from .reporting import VerificationReport

_LADDER_EXPONENTS = range(2, 17)  # lambda = 2^k probe ladder


# ---------------------------------------------------------------------------
# Coefficient data
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class CoefficientSet:
    """Sampled physical coefficients.

    ``c`` is the (constant) wave speed; ``rho``, ``m``, ``d``, ``k`` live on
    Gamma1 nodes; ``a`` is an optional interior diffusion field (divergence
    form); ``r``, ``s``, ``p``, ``q`` are the plate-model boundary fields.
    ``d`` and ``k`` may be complex; ``rho`` and ``m`` must be real and
    inf m > 0.
    """

    c: float
    rho: np.ndarray
    m: np.ndarray
    d: np.ndarray
    k: np.ndarray
    a: np.ndarray | None = None
    r: np.ndarray | None = None
    s: np.ndarray | None = None
    p: np.ndarray | None = None
    q: np.ndarray | None = None

    def __post_init__(self):
        if not (np.isreal(self.c) and self.c > 0 and np.isfinite(self.c)):
            raise ModelError(f"wave speed c must be a positive real, got {self.c!r}")
        for name in ("rho", "m", "d", "k"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                raise ModelError(f"coefficient {name} must be essentially bounded (finite)")
        for name in ("rho", "m"):
            if np.iscomplexobj(getattr(self, name)) and np.any(np.imag(getattr(self, name)) != 0):
                raise ModelError(f"coefficient {name} must be real valued")
        if np.min(np.real(self.m)) <= 0:
            raise ModelError(
                "boundary mass must satisfy inf m > 0; "
                f"got min m = {np.min(np.real(self.m)):.6g}")
        if self.a is not None and np.min(self.a) <= 0:
            raise ModelError("diffusion field a must be strictly positive")


def sample_coefficients(config, mesh: Mesh) -> CoefficientSet:
    """Evaluate the scenario's coefficient expressions on the mesh.

    ``config`` needs ``.model`` and ``.coefficients`` (a mapping of expression
    strings; ``c`` may be a plain number).  Boundary fields see the arclength
    coordinate z (and x, y); interior fields see x (and y).
    """
    exprs = dict(config.coefficients)
    model = config.model

    c_raw = exprs.get("c", 1.0)
    c = float(c_raw) if not isinstance(c_raw, str) else eval_coeff_expr(c_raw, {"x": 0.0})

    zs = mesh.gamma1_arclength()
    bpts = [{"z": float(z), "x": float(xy[0]), "y": float(xy[-1])}
            for z, xy in zip(zs, mesh.node_coords[mesh.gamma1])]
    ipts = [{"x": float(xy[0]), "y": float(xy[-1])} for xy in mesh.node_coords]

    def bnd_field(name, default="0"):
        text = str(exprs.get(name, default))
        try:
            return np.array([eval_coeff_expr(text, p) for p in bpts], dtype=float)
        except ExpressionError as exc:
            raise ModelError(f"coefficient {name!r}: {exc}") from exc

    def int_field(name):
        text = str(exprs[name])
        vals = np.empty(mesh.n_nodes)
        node = parse_expr(text)
        for i, p in enumerate(ipts):
            try:
                vals[i] = eval_coeff_expr(node, p)
            except ExpressionError as exc:
                raise ModelError(
                    f"coefficient {name!r} failed at node {i} {tuple(p.values())}: {exc}"
                ) from exc
        return vals

    kwargs = dict(
        c=c,
        rho=bnd_field("rho", "1"),
        m=bnd_field("m", "1"),
        d=bnd_field("d", "0"),
        k=bnd_field("k", "0"),
    )
    if model == "divergence" or "a" in exprs:
        kwargs["a"] = int_field("a")
    if model == "biharmonic":
        for name in ("r", "s", "p", "q"):
            kwargs[name] = bnd_field(name, "0")
    return CoefficientSet(**kwargs)


# ---------------------------------------------------------------------------
# Operator bundle
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ModelOperators:
    """Dense operator realization of one concrete model."""

    A_max: np.ndarray          # (n, n+g)
    R: np.ndarray              # (n_b, n+g)
    L: np.ndarray              # (n_b, n+g)
    B1: np.ndarray             # (n_b, n)
    B2: np.ndarray             # (n_b, n)
    B3: np.ndarray             # (n_b, n_b)
    B4: np.ndarray             # (n_b, n_b)
    dims: tuple[int, int, int]  # (n_nodes, n_ghost, n_b)
    neutral: bool
    M: np.ndarray | None
    model_tag: str
    state_node_idx: np.ndarray  # mesh node index of each state dof
    state_weights: np.ndarray   # quadrature weights of the state dofs
    bnd_weights: np.ndarray
    coeffs: CoefficientSet

    @property
    def n(self) -> int:
        return self.dims[0]

    @property
    def n_b(self) -> int:
        return self.dims[2]


def _grid_index_maps(mesh: Mesh):
    """Neighbour stepping helpers on the tensor grid."""
    if mesh.kind == "interval":
        nx = mesh.grid_shape[0]

        def unrank(j):
            return (j,)

        def rank(idx):
            (ix,) = idx
            if 0 <= ix < nx:
                return ix
            return None
    else:
        nxp, nyp = mesh.grid_shape

        def unrank(j):
            return (j % nxp, j // nxp)

        def rank(idx):
            ix, iy = idx
            if 0 <= ix < nxp and 0 <= iy < nyp:
                return iy * nxp + ix
            return None
    return unrank, rank


def assemble_wave_operator(mesh: Mesh, coeffs: CoefficientSet) -> ModelOperators:
    """Second-order wave model: A = c^2 Laplace (or div(a grad) when a is set).

    L is the outward normal derivative on Gamma1 (times a(z) in divergence
    form), B2 = -(rho/m) trace, B1 = 0, B3 = -(k/m), B4 = -(d/m).  Gamma0
    nodes get homogeneous Neumann baked in by ghost reflection.
    """
    if mesh.kind not in ("interval", "strip"):
        raise ConfigurationError(f"wave model does not support mesh kind {mesh.kind!r}")
    divergence = coeffs.a is not None
    n = mesh.n_nodes
    nb = mesh.n_b
    c2 = coeffs.c ** 2

    unrank, rank = _grid_index_maps(mesh)
    ghost_slot = {int(node): slot for slot, node in enumerate(mesh.gamma1)}

    def edge_coef(j, nbr, axis):
        # midpoint coefficient between node j and its neighbour along axis
        if not divergence:
            return c2 / mesh.h[axis] ** 2
        return 0.5 * (coeffs.a[j] + coeffs.a[nbr]) / mesh.h[axis] ** 2

    A = np.zeros((n, n + nb))
    for j in range(n):
        idx = unrank(j)
        for axis in range(mesh.dim):
            for direction in (-1, +1):
                step = list(idx)
                step[axis] += direction
                nbr = rank(tuple(step))
                if nbr is not None:
                    coef = edge_coef(j, nbr, axis)
                    A[j, nbr] += coef
                    A[j, j] -= coef
                    continue
                # stepping outside the domain: mirror midpoint coefficient
                mirror = list(idx)
                mirror[axis] -= direction
                mir = rank(tuple(mirror))
                coef = edge_coef(j, mir, axis)
                slot = ghost_slot.get(j)
                if (slot is not None and mesh.ghost_axis[slot] == axis
                        and mesh.ghost_sign[slot] == direction):
                    A[j, n + slot] += coef
                    A[j, j] -= coef
                else:
                    # rigid edge: ghost reflects the inward neighbour
                    A[j, mir] += coef
                    A[j, j] -= coef

    L = np.zeros((nb, n + nb))
    B2 = np.zeros((nb, n))
    for slot, b in enumerate(mesh.gamma1):
        axis = mesh.ghost_axis[slot]
        fac = coeffs.a[b] if divergence else 1.0
        L[slot, n + slot] = fac / (2.0 * mesh.h[axis])
        L[slot, mesh.ghost_inward[slot]] = -fac / (2.0 * mesh.h[axis])
        B2[slot, b] = -coeffs.rho[slot] / coeffs.m[slot]

    R = L.copy()
    R[:, :n] -= B2
    return ModelOperators(
        A_max=A, R=R, L=L,
        B1=np.zeros((nb, n)),
        B2=B2,
        B3=np.diag(-coeffs.k / coeffs.m),
        B4=np.diag(-coeffs.d / coeffs.m),
        dims=(n, nb, nb),
        neutral=False, M=None,
        model_tag="divergence" if divergence else "wave",
        state_node_idx=np.arange(n),
        state_weights=mesh.vol_weights.copy(),
        bnd_weights=mesh.bnd_weights.copy(),
        coeffs=coeffs,
    )


def assemble_biharmonic_operator(mesh: Mesh, coeffs: CoefficientSet) -> ModelOperators:
    """Fourth-order plate model on an interval with pinned endpoints.

    A = -d^4/dx^4 on the interior nodes (endpoint values are removed from the
    state), L = second difference at the endpoints through one ghost per side,
    B2 = s * outward one-sided first difference, B1 = r * the same stencil,
    B3 = p, B4 = q.
    """
    if mesh.kind != "interval":
        raise ConfigurationError("biharmonic model supports interval meshes only")
    if mesh.n_b != 2:
        raise ConfigurationError("biharmonic model needs both endpoints in Gamma1")
    N = mesh.grid_shape[0] - 1
    h = mesh.h[0]
    n = N - 1                       # interior state dofs, endpoints pinned to 0
    r = coeffs.r if coeffs.r is not None else np.zeros(2)
    s = coeffs.s if coeffs.s is not None else np.zeros(2)
    p = coeffs.p if coeffs.p is not None else np.zeros(2)
    q = coeffs.q if coeffs.q is not None else np.zeros(2)

    def ext_col(grid_node):
        if grid_node in (0, N):
            return None             # pinned, value 0
        if grid_node == -1:
            return n                # left ghost
        if grid_node == N + 1:
            return n + 1            # right ghost
        return grid_node - 1

    A = np.zeros((n, n + 2))
    stencil = np.array([1.0, -4.0, 6.0, -4.0, 1.0]) / h ** 4
    for i in range(n):
        gn = i + 1
        for off, w in zip(range(-2, 3), stencil):
            col = ext_col(gn + off)
            if col is not None:
                A[i, col] += -w     # A = -Delta^2

    L = np.zeros((2, n + 2))
    L[0, n] = 1.0 / h ** 2          # (ghost + u_1)/h^2, endpoint pinned
    L[0, 0] = 1.0 / h ** 2
    L[1, n + 1] = 1.0 / h ** 2
    L[1, n - 1] = 1.0 / h ** 2

    B2 = np.zeros((2, n))
    B1 = np.zeros((2, n))
    B2[0, 0] = -s[0] / h            # du/dnu(0) ~ -(u_1 - 0)/h
    B2[1, n - 1] = -s[1] / h
    B1[0, 0] = -r[0] / h
    B1[1, n - 1] = -r[1] / h

    R = L.copy()
    R[:, :n] -= B2
    return ModelOperators(
        A_max=A, R=R, L=L, B1=B1, B2=B2,
        B3=np.diag(p.astype(float)),
        B4=np.diag(q.astype(float)),
        dims=(n, 2, 2),
        neutral=False, M=None, model_tag="biharmonic",
        state_node_idx=np.arange(1, N),
        state_weights=mesh.vol_weights[1:N].copy(),
        bnd_weights=mesh.bnd_weights.copy(),
        coeffs=coeffs,
    )


def default_boundary_laplacian(mesh: Mesh) -> np.ndarray:
    """Default neutral operator M on Gamma1.

    Strip: three-point Laplacian along the top edge with homogeneous Neumann
    ends (so M annihilates constants).  Interval: the two boundary points are
    isolated, M = 0.
    """
    nb = mesh.n_b
    if mesh.kind == "interval":
        return np.zeros((nb, nb))
    hx = mesh.h[0]
    M = np.zeros((nb, nb))
    for i in range(nb):
        M[i, i] = -2.0 / hx ** 2
        if i > 0:
            M[i, i - 1] += 1.0 / hx ** 2
        else:
            M[i, i + 1] += 1.0 / hx ** 2   # Neumann reflection
        if i < nb - 1:
            M[i, i + 1] += 1.0 / hx ** 2
        else:
            M[i, i - 1] += 1.0 / hx ** 2
    return M


def apply_neutral_transform(ops: ModelOperators, M: np.ndarray) -> ModelOperators:
    """Replace B_i by (I-M)^-1 B_i and R by L - (I-M)^-1 B2.

    Requires (I - M) invertible to working precision.
    """
    nb = ops.n_b
    M = np.asarray(M, dtype=float)
    if M.shape != (nb, nb):
        raise DimensionError(f"M must be {nb}x{nb}, got {M.shape}")
    IM = np.eye(nb) - M
    cond = np.linalg.cond(IM)
    if not np.isfinite(cond) or cond > 1e12:
        raise AssumptionError(
            "A8", f"(I - M) is singular to working precision (cond={cond:.3e}); "
                  "the neutral transform needs 1 in the resolvent set of M")
    S = checked_solve(IM, np.eye(nb), what="neutral transform (I-M)")
    B1 = S @ ops.B1
    B2 = S @ ops.B2
    R = ops.L.copy()
    R[:, :ops.n] -= B2
    return replace(
        ops,
        B1=B1, B2=B2, B3=S @ ops.B3, B4=S @ ops.B4, R=R,
        neutral=True, M=M,
        model_tag=ops.model_tag + "+neutral",
    )


# ---------------------------------------------------------------------------
# Discrete gradient / form assembly (used by energy and the form check)
# ---------------------------------------------------------------------------
def gradient_operators(mesh: Mesh) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-axis forward-difference operators with cell quadrature weights.

    Returns [(D_axis, w_cells), ...] such that the discrete Dirichlet form is
    sum_axis (D u)^H diag(w) (D v); the transverse directions carry trapezoid
    weights, which makes the form exactly dual to the reflected/ghost
    Laplacian (summation by parts with only Gamma1 flux terms).
    """
    if mesh.kind == "interval":
        nx = mesh.grid_shape[0]
        h = mesh.h[0]
        D = np.zeros((nx - 1, nx))
        for c in range(nx - 1):
            D[c, c] = -1.0 / h
            D[c, c + 1] = 1.0 / h
        return [(D, np.full(nx - 1, h))]

    nxp, nyp = mesh.grid_shape
    hx, hy = mesh.h
    wx = np.full(nxp, hx); wx[0] = wx[-1] = hx / 2
    wy = np.full(nyp, hy); wy[0] = wy[-1] = hy / 2

    def nid(ix, iy):
        return iy * nxp + ix

    Dx = np.zeros(((nxp - 1) * nyp, mesh.n_nodes))
    w_x = np.empty((nxp - 1) * nyp)
    for iy in range(nyp):
        for ix in range(nxp - 1):
            rix = iy * (nxp - 1) + ix
            Dx[rix, nid(ix, iy)] = -1.0 / hx
            Dx[rix, nid(ix + 1, iy)] = 1.0 / hx
            w_x[rix] = hx * wy[iy]
    Dy = np.zeros((nxp * (nyp - 1), mesh.n_nodes))
    w_y = np.empty(nxp * (nyp - 1))
    for iy in range(nyp - 1):
        for ix in range(nxp):
            rix = iy * nxp + ix
            Dy[rix, nid(ix, iy)] = -1.0 / hy
            Dy[rix, nid(ix, iy + 1)] = 1.0 / hy
            w_y[rix] = hy * wx[ix]
    return [(Dx, w_x), (Dy, w_y)]


def stiffness_matrix(mesh: Mesh) -> np.ndarray:
    """Dense Dirichlet-form matrix K with K[u,v] = <grad u, grad v>."""
    K = np.zeros((mesh.n_nodes, mesh.n_nodes))
    for D, w in gradient_operators(mesh):
        K += D.T @ (w[:, None] * D)
    return K


def neutral_form_matrix(ops: ModelOperators, mesh: Mesh) -> np.ndarray:
    """Discrete sesquilinear form of the shifted restricted operator.

    F = c^2 K + c^2 (rho/m) Tr^T [W_b (I-M)^-1] Tr - W_vol, which must be
    conjugate-symmetric when M is self-adjoint in the boundary quadrature.
    Constant rho and m are required (the transform commutes with scalars only).
    """
    rho = np.real(ops.coeffs.rho)
    m = np.real(ops.coeffs.m)
    if np.ptp(rho) > 1e-14 * max(1.0, np.max(np.abs(rho))) or \
       np.ptp(m) > 1e-14 * max(1.0, np.max(np.abs(m))):
        raise ModelError("form assembly requires constant rho and m")
    nb = ops.n_b
    n = ops.n
    M = ops.M if ops.M is not None else np.zeros((nb, nb))
    Wb = np.diag(ops.bnd_weights)
    S = checked_solve(np.eye(nb) - M, np.eye(nb), what="(I-M) inverse")
    Tr = np.zeros((nb, n))
    # boundary trace in state-dof indexing
    state_pos = {int(node): i for i, node in enumerate(ops.state_node_idx)}
    for slot, b in enumerate(mesh.gamma1):
        Tr[slot, state_pos[int(b)]] = 1.0
    c2 = ops.coeffs.c ** 2
    K = stiffness_matrix(mesh)
    if ops.state_node_idx.size != mesh.n_nodes:
        K = K[np.ix_(ops.state_node_idx, ops.state_node_idx)]
    return c2 * K + c2 * (rho[0] / m[0]) * Tr.T @ (Wb @ S) @ Tr - np.diag(ops.state_weights)


# ---------------------------------------------------------------------------
# Assumption checks
# ---------------------------------------------------------------------------
def check_assumptions(ops: ModelOperators, mesh: Mesh) -> VerificationReport:
    """Verify the discrete counterparts of the structural assumptions.

    Checks: full ghost rank of R (surjectivity of the boundary row), finite
    norms of B1..B4, symmetry of the weighted restricted operator plus a
    semiboundedness shift (cosine-generation proxy), and for neutral models
    the high-frequency contraction ladder for the (A, L) lifting.
    """
    from .blockops import restriction_A0  # local import, avoids module cycle

    report = VerificationReport(metadata={
        "model": ops.model_tag, "dims": list(ops.dims), "neutral": ops.neutral})
    n, g, nb = ops.dims

    Rg = ops.R[:, n:]
    rank = int(np.linalg.matrix_rank(Rg))
    report.add("ghost-block-rank", value=float(rank), tol=float(nb),
               passed=rank == nb, note="discrete boundary surjectivity")
    if rank < nb:
        raise AssumptionError(
            "A3", f"ghost block of R has rank {rank} < {nb}; boundary row not surjective")

    for name in ("B1", "B2", "B3", "B4"):
        nrm = opnorm(getattr(ops, name))
        report.add(f"{name.lower()}-norm", value=nrm, tol=np.finfo(float).max,
                   passed=bool(np.isfinite(nrm)), note="boundedness")

    A0 = restriction_A0(ops)
    W = ops.state_weights
    WA = W[:, None] * A0
    sym = float(np.linalg.norm(WA - WA.T) / max(1.0, np.linalg.norm(WA)))
    report.add("restricted-symmetry", value=sym, tol=1e-12,
               note="weighted transpose residual of A0")
    sq = np.sqrt(W)
    sym_part = sq[:, None] * A0 / sq[None, :]
    sym_part = 0.5 * (sym_part + sym_part.T)
    omega = float(np.max(np.linalg.eigvalsh(sym_part)))
    report.add("semibound-shift", value=omega, tol=0.0,
               passed=bool(np.isfinite(omega)),
               note="informational: <A0 u,u> <= omega <u,u>; judged on finiteness")

    if ops.neutral:
        lam0 = None
        contraction_at_lam0 = np.inf
        prev = None
        worst_ratio = 0.0
        for kexp in _LADDER_EXPONENTS:
            lam = float(2 ** kexp)
            D = bordered_dirichlet_solve(ops.A_max, ops.L, lam)
            dnorm = opnorm(D[:n, :])
            contraction = opnorm(ops.B2 @ D[:n, :])
            if prev is not None:
                worst_ratio = max(worst_ratio, dnorm / prev)
            prev = dnorm
            if lam0 is None and contraction < 1.0:
                lam0 = lam
                contraction_at_lam0 = contraction
        report.add("ladder-lambda0", value=lam0 if lam0 is not None else np.inf,
                   tol=float(2 ** 16), passed=lam0 is not None,
                   note="smallest dyadic lambda with ||B2' D_lambda^{A,L}|| < 1")
        report.add("ladder-contraction", value=contraction_at_lam0, tol=1.0,
                   passed=contraction_at_lam0 < 1.0)
        report.add("ladder-monotone", value=worst_ratio, tol=1.0 + 1e-10,
                   note="max ratio ||D_{2 lambda}|| / ||D_lambda|| along the ladder")
    return report
