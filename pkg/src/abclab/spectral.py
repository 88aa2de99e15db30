"""Spectra of the coupled generator: direct, pencil-based and characterized.

The dense eigensolve of the assembled generator is always the oracle of
record.  The boundary pencil provides the independent route: off the
restricted spectrum, lam is an eigenvalue of the coupled generator exactly
when det(lam - P(lam)) = 0, so Newton iteration on that characteristic
function and argument-principle winding counts must reproduce the direct
eigenvalues.  Essential-spectrum statements survive only as refinement
trends in finite dimensions and are reported as such, never as point values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._linalg import checked_solve, rel_residual
from .blockops import BlockSystem, reduced_generator
from .errors import AssumptionError, ConfigurationError, NumericalError, SpectralParameterError
from .resolvent import PencilEvaluator, default_zero_radius, dirichlet_operator, pencil

_trapezoid = getattr(np, "trapezoid", None) or np.trapz  # numpy < 2.0 fallback


@dataclass
class SpectrumReport:
    """Eigenvalues with classification, certification residuals and exclusions."""

    eigenvalues: np.ndarray
    classification: list[str]
    residuals: np.ndarray
    gamma_excluded: list[complex] = field(default_factory=list)
    method: str = ""
    extras: dict = field(default_factory=dict)

    def admissible_mask(self, evaluator: PencilEvaluator) -> np.ndarray:
        return np.array([evaluator.is_admissible(l) for l in self.eigenvalues])


def _classify(sys: BlockSystem, lam: complex, radius: float,
              eig_b4: np.ndarray) -> str:
    if abs(lam) <= default_zero_radius(sys):
        return "zero-mode"
    if np.min(np.abs(lam * lam - sys.eig_A0)) <= radius:
        return "a0-branch"
    if eig_b4.size and np.min(np.abs(lam - eig_b4)) <= 1e-6 * (1.0 + abs(lam)):
        return "b4-branch"
    return "pencil-root"


def direct_spectrum(sys: BlockSystem, reduced: bool = False) -> SpectrumReport:
    """Brute-force dense eigendecomposition with per-pair residuals.

    ``reduced=True`` eigensolves the first-order-boundary form (B3 = 0 only),
    which is the matrix the special-case characterizations describe.
    """
    mat = reduced_generator(sys) if reduced else sys.Acal
    try:
        vals, vecs = np.linalg.eig(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"dense eigensolve failed: {exc}") from exc
    mv = mat @ vecs
    resid = (np.linalg.norm(mv - vecs * vals[None, :], axis=0)
             / np.linalg.norm(vecs, axis=0))
    order = np.lexsort((vals.imag, vals.real))
    vals, resid = vals[order], resid[order]
    ev = PencilEvaluator(sys)
    eig_b4 = np.linalg.eigvals(sys.ops.B4)
    cls = [_classify(sys, l, ev.radius, eig_b4) for l in vals]
    return SpectrumReport(
        eigenvalues=vals, classification=cls, residuals=resid,
        method="direct-reduced" if reduced else "direct",
    )


# ---------------------------------------------------------------------------
# Characteristic function and Newton roots
# ---------------------------------------------------------------------------
def characteristic_value(evaluator: PencilEvaluator, lam: complex) -> complex:
    """det(lam I - P(lam)); zero exactly at admissible coupled eigenvalues."""
    Blam = pencil(evaluator, lam)
    return complex(np.linalg.det(lam * np.eye(evaluator.sys.n_b) - Blam))


def _char_derivative(evaluator: PencilEvaluator, lam: complex) -> complex:
    step = 1e-7 * (1.0 + abs(lam))
    return (characteristic_value(evaluator, lam + step)
            - characteristic_value(evaluator, lam - step)) / (2.0 * step)


def pencil_roots(evaluator: PencilEvaluator, seeds, tol: float | None = None,
                 cert_tol: float = 1e-6, max_iter: int = 50,
                 newton_tol: float = 1e-10) -> SpectrumReport:
    """Newton iteration on the characteristic function from the given seeds.

    Converged roots are deduplicated at distance ``tol`` (default
    1e-8*(1+|lam|)) and certified by the characteristic-value threshold
    cert_tol * max(1, |lam|)^n_b.  Inadmissible seeds are listed in
    gamma_excluded; per-seed non-convergence is recorded, not fatal.
    """
    sys = evaluator.sys
    nb = sys.n_b
    roots: list[complex] = []
    chis: list[float] = []
    excluded: list[complex] = []
    failures: list[str] = []

    for seed in seeds:
        seed = complex(seed)
        if not evaluator.is_admissible(seed):
            excluded.append(seed)
            continue
        lam = seed
        converged = False
        for _ in range(max_iter):
            try:
                chi = characteristic_value(evaluator, lam)
                dchi = _char_derivative(evaluator, lam)
            except SpectralParameterError:
                failures.append(f"seed {seed:.6g}: iterate left the admissible set")
                break
            if dchi == 0:
                failures.append(f"seed {seed:.6g}: stationary characteristic value")
                break
            step = chi / dchi
            lam_new = lam - step
            if not evaluator.is_admissible(lam_new):
                failures.append(f"seed {seed:.6g}: step into the exclusion zone")
                break
            lam = lam_new
            if abs(step) <= newton_tol * (1.0 + abs(lam)):
                converged = True
                break
        if not converged:
            if not any(msg.startswith(f"seed {seed:.6g}") for msg in failures):
                failures.append(f"seed {seed:.6g}: no convergence in {max_iter} iterations")
            continue
        chi_final = abs(characteristic_value(evaluator, lam))
        if chi_final > cert_tol * max(1.0, abs(lam)) ** nb:
            failures.append(
                f"seed {seed:.6g}: root {lam:.6g} failed certification "
                f"(|chi| = {chi_final:.3e})")
            continue
        dedup = tol if tol is not None else 1e-8 * (1.0 + abs(lam))
        if any(abs(lam - r) <= dedup for r in roots):
            continue
        roots.append(lam)
        chis.append(chi_final)

    vals = np.array(roots, dtype=complex)
    order = np.lexsort((vals.imag, vals.real)) if vals.size else []
    vals = vals[order] if vals.size else vals
    chis_arr = np.array(chis)[order] if vals.size else np.array([])
    return SpectrumReport(
        eigenvalues=vals,
        classification=["pencil-root"] * vals.size,
        residuals=chis_arr,
        gamma_excluded=excluded,
        method="pencil-newton",
        extras={"failures": failures},
    )


def count_roots_in_box(evaluator: PencilEvaluator, box, n_quad: int) -> int:
    """Winding number of the characteristic function around a rectangle.

    ``box`` is (re_min, re_max, im_min, im_max); the boundary is sampled with
    ``n_quad`` trapezoid panels per edge.  The rounded winding estimate must
    sit within 0.2 of an integer, otherwise the count is inconclusive and a
    finer n_quad is required.  The contour must stay admissible.
    """
    re0, re1, im0, im1 = box
    if not (re1 > re0 and im1 > im0):
        raise ConfigurationError(f"degenerate box {box}")
    corners = [re0 + 1j * im0, re1 + 1j * im0, re1 + 1j * im1, re0 + 1j * im1]
    total = 0.0 + 0.0j
    for a, b in zip(corners, corners[1:] + corners[:1]):
        ts = np.linspace(0.0, 1.0, n_quad + 1)
        pts = a + (b - a) * ts
        try:
            vals = np.array([
                _char_derivative(evaluator, z) / characteristic_value(evaluator, z)
                for z in pts
            ])
        except SpectralParameterError as exc:
            raise SpectralParameterError(
                exc.reason, f"box boundary intersects the exclusion zone: {exc}")
        total += _trapezoid(vals, dx=1.0 / n_quad) * (b - a)
    winding = total / (2.0j * np.pi)
    estimate = float(np.real(winding))
    rounded = int(round(estimate))
    if abs(estimate - rounded) > 0.2:
        raise NumericalError(
            f"inconclusive winding count {estimate:.4f} (gap "
            f"{abs(estimate - rounded):.3f} > 0.2); refine n_quad")
    return rounded


# ---------------------------------------------------------------------------
# Special-case characterization (no spring coupling, matched feedback)
# ---------------------------------------------------------------------------
def special_case_spectrum(sys: BlockSystem, tol: float = 1e-6) -> SpectrumReport:
    """Point spectrum for B3 = 0, B1 = -B4 B2: square roots of the restricted
    spectrum joined with the spectrum of B4.

    Requires the spectral-separation condition: no eigenvalue beta of B4 may
    have beta^2 within ``tol``-scaled distance of the restricted spectrum.
    Additionally validates the block-triangular resolvent display against a
    dense inverse at three sample points (residuals in ``extras``).
    """
    ops = sys.ops
    b3 = float(np.max(np.abs(ops.B3))) if ops.B3.size else 0.0
    if b3 > 1e-12:
        raise AssumptionError(
            "B3=0", f"special-case spectrum requires the spring coupling to vanish "
                    f"(max |B3| = {b3:.3e})")
    b1res = float(np.max(np.abs(ops.B1 + ops.B4 @ ops.B2)))
    if b1res > 1e-12:
        raise AssumptionError(
            "B1=-B4B2", "special-case spectrum requires the matched feedback "
                        f"B1 = -B4 B2 (entrywise residual {b1res:.3e})")

    eig_b4 = np.linalg.eigvals(ops.B4)
    scale = max(1.0, float(np.max(np.abs(sys.eig_A0))))
    for beta in eig_b4:
        dist = float(np.min(np.abs(beta * beta - sys.eig_A0)))
        if dist <= tol * scale:
            raise AssumptionError(
                "spectral-separation",
                f"eigenvalue beta={beta:.6g} of B4 has beta^2 within {dist:.3e} of "
                "the restricted spectrum; branch collision, characterization void")

    vals, cls = [], []
    for mu in sys.eig_A0:
        root = np.sqrt(complex(mu))
        vals.extend([root, -root])
        cls.extend(["a0-branch", "a0-branch"])
    vals.extend(eig_b4.tolist())
    cls.extend(["b4-branch"] * eig_b4.size)
    vals = np.array(vals, dtype=complex)
    order = np.lexsort((vals.imag, vals.real))
    vals = vals[order]
    cls = [cls[i] for i in order]

    # validate the block-triangular resolvent display at three sample points
    red = reduced_generator(sys)
    n, nb = sys.n, sys.n_b
    residuals = {}
    for lam in (0.7 + 0.9j, 1.3 + 0.4j, 2.1 + 1.7j):
        R2 = checked_solve(lam * lam * np.eye(n, dtype=complex) - sys.A0,
                           np.eye(n, dtype=complex), what="(lam^2 - A0)")
        RB4 = checked_solve(lam * np.eye(nb, dtype=complex) - ops.B4,
                            np.eye(nb, dtype=complex), what="(lam - B4)")
        Dn = dirichlet_operator(sys, lam * lam)[:n]
        display = np.zeros((2 * n + nb, 2 * n + nb), dtype=complex)
        display[:n, :n] = lam * R2
        display[:n, n:2 * n] = R2
        display[:n, 2 * n:] = Dn @ RB4
        display[n:2 * n, :n] = sys.A0 @ R2
        display[n:2 * n, n:2 * n] = lam * R2
        display[n:2 * n, 2 * n:] = lam * Dn @ RB4
        display[2 * n:, 2 * n:] = RB4
        dense = checked_solve(lam * np.eye(2 * n + nb, dtype=complex) - red,
                              np.eye(2 * n + nb, dtype=complex), what="(lam - reduced)")
        residuals[f"{lam}"] = rel_residual(display, dense, reference=dense)

    return SpectrumReport(
        eigenvalues=vals, classification=cls,
        residuals=np.zeros(vals.size),
        method="special-case",
        extras={"resolvent_display_residuals": residuals},
    )


def essential_range(values: np.ndarray, weights: np.ndarray) -> list[tuple[float, float]]:
    """Distinct values carrying positive aggregated weight.

    Exact for piecewise-constant data; values closer than 1e-12 (scaled) are
    merged.  Returns (value, measure) pairs sorted by value.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.shape != weights.shape:
        raise ConfigurationError("field and weights must have the same length")
    scale = max(1.0, float(np.max(np.abs(values))) if values.size else 1.0)
    out: list[list[float]] = []
    for v, w in sorted(zip(values, weights)):
        if out and abs(v - out[-1][0]) <= 1e-12 * scale:
            out[-1][1] += w
        else:
            out.append([v, w])
    return [(v, w) for v, w in out if w > 0]


# ---------------------------------------------------------------------------
# Refinement proxies
# ---------------------------------------------------------------------------
def essential_spectrum_proxy(config, refinements, epsilon: float) -> dict:
    """Eigenvalue accumulation near the essential range of -d/m on the strip.

    Per refinement of the Gamma1 resolution, counts reduced-generator
    eigenvalues within ``epsilon`` of the essential range and reports whether
    the counts are nondecreasing.  A genuine essential spectrum does not exist
    in finite dimensions; only the trend is meaningful, and the report says so.
    Interval models get the finite-boundary answer instead of counts.
    """
    from .scenario import build_system, override_strip_nx

    if config.geometry["kind"] == "interval":
        return {
            "geometry": "interval",
            "counts": None,
            "note": ("finite-dimensional boundary space: empty essential spectrum "
                     "expected; the coupled generator has discrete spectrum only "
                     "(see the compact-resolvent diagnostic)"),
        }
    if config.model not in ("wave", "divergence"):
        raise ConfigurationError(
            f"essential-spectrum proxy unsupported for model {config.model!r}")

    rows = []
    ess_vals = None
    for nx in refinements:
        mesh, sys = build_system(override_strip_nx(config, int(nx)))
        if np.max(np.abs(sys.ops.B3)) > 1e-12:
            raise ConfigurationError("essential-spectrum proxy requires B3 = 0 (k = 0)")
        rng = essential_range(np.real(np.diag(sys.ops.B4)), sys.ops.bnd_weights)
        ess_vals = [v for v, _ in rng]
        vals = np.linalg.eigvals(reduced_generator(sys))
        count = int(np.sum([
            np.min([abs(l - v) for v in ess_vals]) <= epsilon for l in vals]))
        rows.append({"nx": int(nx), "n_b": sys.n_b, "count": count})
    counts = [r["count"] for r in rows]
    return {
        "geometry": "strip",
        "epsilon": epsilon,
        "essential_values": ess_vals,
        "refinements": rows,
        "nondecreasing": all(b >= a for a, b in zip(counts, counts[1:])),
        "note": ("finite truncation: accumulation trend only, not a point "
                 "spectrum statement"),
    }


def compact_resolvent_diagnostic(configs) -> dict:
    """Eigenvalue stability under 1D refinement plus unbounded growth.

    For each fixed k the k-th smallest-|lam| eigenvalue must stabilize while
    the spectral radius grows like the stencil stiffness: the discrete
    signature of a compact resolvent / purely discrete spectrum.
    """
    from .scenario import build_system

    spectra = []
    sizes = []
    zero_counts = []
    for cfg in configs:
        if cfg.geometry["kind"] != "interval":
            raise ConfigurationError("compact-resolvent diagnostic expects 1D models")
        mesh, sys = build_system(cfg)
        vals = np.linalg.eigvals(sys.Acal)
        # rigid drift modes sit numerically at zero and carry no convergence
        # information; track them separately
        zero_tol = 1e-6 * max(1.0, float(np.max(np.abs(vals))))
        zero_counts.append(int(np.sum(np.abs(vals) <= zero_tol)))
        vals = vals[np.abs(vals) > zero_tol]
        order = np.lexsort((vals.imag, vals.real, np.abs(vals)))
        spectra.append(vals[order])
        sizes.append(cfg.geometry["n_cells"])

    k_max = min(10, min(s.size for s in spectra))
    table = []
    for k in range(k_max):
        entry = {"k": k, "abs_lambda": [float(abs(s[k])) for s in spectra]}
        entry["relative_change"] = [
            abs(spectra[i + 1][k] - spectra[i][k]) / max(1e-300, abs(spectra[i][k]))
            for i in range(len(spectra) - 1)
        ]
        table.append(entry)
    max_eig = [float(np.max(np.abs(s))) for s in spectra]
    growth = [max_eig[i + 1] / max_eig[i] for i in range(len(max_eig) - 1)]
    # |lam|^2 is the top interior frequency and tracks the stencil stiffness
    growth_sq = [g * g for g in growth]
    return {
        "resolutions": sizes,
        "per_k": table,
        "zero_modes": zero_counts,
        "max_eig": max_eig,
        "max_eig_growth_ratio": growth,
        "max_eig_squared_growth_ratio": growth_sq,
        "note": ("stabilizing low modes with unbounded spectral radius indicate "
                 "purely discrete spectrum under refinement"),
    }
