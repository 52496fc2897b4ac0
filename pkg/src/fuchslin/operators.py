"""Homological operators and spectral diagnostics for the two-pole systems.

The linear part under study is ``M(x) = A/(x-1) + B/(x+1)`` with constant
matrices ``A`` and ``B``; multiplying by ``Q(x) = x**2 - 1`` turns every
operation into exact polynomial algebra via the identity

    ``Q(x) M(x) = x (A + B) + (A - B)``.

On each space of homogeneous vector polynomials the basic building block is
the homological operator ``p -> (d_w p) L w - L p`` of a constant matrix
``L``; the per-order equations reduce to dense solves of integer-shifted
copies of it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import (
    HomPoly,
    XPoly,
    enumerate_multi_indices,
    index_positions,
    space_dimension,
)

RESONANCE_TOL = 1e-9
COND_LIMIT = 1e10


class ResonanceSingular(Exception):
    """A shifted homological solve hit a (near-)resonant, singular matrix.

    Attributes identify the failing solve: ``degree`` is the homogeneous
    degree in ``w``, ``shift`` the non-negative integer shift, ``component``
    the 1-based eigenvalue index closest to resonance (None if unknown).
    """

    def __init__(self, degree: int, shift: int, component=None, detail: str = ""):
        self.degree = degree
        self.shift = shift
        self.component = component
        self.partial = None  # drivers attach lower-order results here
        msg = f"singular shifted solve at degree {degree}, shift {shift}"
        if component is not None:
            msg += f", component {component}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


def _as_matrix(mat, name: str = "matrix") -> np.ndarray:
    m = np.asarray(mat, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m.view(float))):
        raise ValueError(f"{name} has non-finite entries")
    return m


def apply_homological(lam: np.ndarray, p: HomPoly) -> HomPoly:
    """``(d_w p) lam w - lam p`` on a homogeneous vector polynomial."""
    return jacobian_linear(lam, p) - p.matvec(lam)


def jacobian_linear(lam: np.ndarray, p: HomPoly) -> HomPoly:
    """Just the transport half ``(d_w p) lam w``."""
    lam = _as_matrix(lam)
    d = p.dim
    out: dict[tuple, np.ndarray] = {}
    for m, v in p.coeffs.items():
        for s in range(d):
            if m[s] == 0:
                continue
            for t in range(d):
                c = m[s] * lam[s, t]
                if c == 0:
                    continue
                mono = list(m)
                mono[s] -= 1
                mono[t] += 1
                mono = tuple(mono)
                add = c * v
                out[mono] = out[mono] + add if mono in out else add
    return HomPoly(d, p.degree, out)


def homological_matrix(lam, degree: int) -> np.ndarray:
    """Dense matrix of the homological operator in the graded-lex basis.

    Basis vectors are ``w^m e_j`` flattened as ``pos(m) * d + j``.  For a
    diagonal ``lam`` the result is exactly diagonal with entries
    ``m . diag(lam) - lam_j``.
    """
    lam = _as_matrix(lam)
    d = lam.shape[0]
    idx = enumerate_multi_indices(d, degree)
    pos = index_positions(d, degree)
    size = len(idx) * d
    out = np.zeros((size, size), dtype=complex)
    for m in idx:
        col_base = pos[m] * d
        for s in range(d):
            if m[s] == 0:
                continue
            for t in range(d):
                if lam[s, t] == 0:
                    continue
                mono = list(m)
                mono[s] -= 1
                mono[t] += 1
                row_base = pos[tuple(mono)] * d
                for j in range(d):
                    out[row_base + j, col_base + j] += m[s] * lam[s, t]
        for j in range(d):
            for r in range(d):
                if lam[r, j] != 0:
                    out[col_base + r, col_base + j] -= lam[r, j]
    return out


def _nearest_resonant_component(lam_eigs: np.ndarray, degree: int, shift: int):
    """1-based eigen-index whose shifted operator eigenvalue is nearest zero."""
    d = lam_eigs.shape[0]
    best = None
    best_j = None
    for m in enumerate_multi_indices(d, degree):
        mdot = complex(np.dot(m, lam_eigs))
        for j in range(d):
            val = abs(shift + mdot - lam_eigs[j])
            if best is None or val < best:
                best, best_j = val, j + 1
    return best_j


class ShiftedSolver:
    """Cached dense LU solves of ``(shift + J) p = q`` on one degree.

    ``J`` is the homological operator of ``lam``; invertibility for every
    non-negative integer shift is exactly the nonresonance assumption, so a
    singular or severely ill-conditioned shift is reported as
    ``ResonanceSingular`` rather than solved.
    """

    def __init__(self, lam, degree: int, cond_limit: float = COND_LIMIT):
        self.lam = _as_matrix(lam)
        self.degree = degree
        self.cond_limit = cond_limit
        self.matrix = homological_matrix(self.lam, degree)
        self._eigs = None

    def solve(self, shift: int, q: HomPoly) -> HomPoly:
        if shift < 0:
            raise ValueError("shift must be a non-negative integer")
        shifted = self.matrix + shift * np.eye(self.matrix.shape[0])
        try:
            cond = np.linalg.cond(shifted)
            if not np.isfinite(cond) or cond > self.cond_limit:
                raise np.linalg.LinAlgError(f"condition number {cond:.3g}")
            sol = np.linalg.solve(shifted, q.to_vector())
        except np.linalg.LinAlgError as err:
            if self._eigs is None:
                self._eigs = np.linalg.eigvals(self.lam)
            comp = _nearest_resonant_component(self._eigs, self.degree, shift)
            raise ResonanceSingular(self.degree, shift, comp, str(err)) from None
        return HomPoly.from_vector(q.dim, self.degree, sol)


def solve_shifted(shift: int, lam, q: HomPoly, cond_limit: float = COND_LIMIT) -> HomPoly:
    """One-shot shifted homological solve (see ``ShiftedSolver``)."""
    return ShiftedSolver(lam, q.degree, cond_limit).solve(shift, q)


def apply_fuchsian_operator(p: XPoly, a, b) -> XPoly:
    """``Q(x) [ d_x P + (d_w P) M(x) w - M(x) P ]`` as an exact polynomial.

    With ``S = A + B`` and ``R = A - B`` the result of applying the operator
    to ``P = sum_j x**j p_j`` is

        ``sum_j x**(j+1) (j + J_S) p_j + sum_j x**j J_R p_j - sum_j j x**(j-1) p_j``

    which raises the x-degree by exactly one whenever the leading shifted
    solve is injective.
    """
    a = _as_matrix(a, "A")
    b = _as_matrix(b, "B")
    s_mat = a + b
    r_mat = a - b
    out = XPoly.zero(p.dim, p.degree)
    for j in range(p.x_degree + 1):
        pj = p.coeff(j)
        if pj.is_zero:
            continue
        top = apply_homological(s_mat, pj) + pj.scale(j)
        out = out + XPoly.constant(top).shift_x(j + 1)
        mid = apply_homological(r_mat, pj)
        if not mid.is_zero:
            out = out + XPoly.constant(mid).shift_x(j)
        if j >= 1:
            out = out - XPoly.constant(pj.scale(j)).shift_x(j - 1)
    return out


@dataclass(frozen=True)
class ResonanceHit:
    """An exact resonance ``shift + m . lambda - lambda_j = 0`` found by the scan."""

    index: tuple[int, ...]
    component: int  # 1-based eigenvalue index
    shift: int


@dataclass(frozen=True)
class DiagnosticsReport:
    """Finite spectral scan of the two residue matrices and their sum.

    The small-divisor margins are minima over the scanned ranges only; no
    claim is made about the full infinite conditions.  ``margin_curve_*``
    lists ``(|n| + l, margin)`` pairs so the decay of the scanned margins
    with the combined size can be inspected.
    """

    eigenvalues_a: tuple[complex, ...]
    eigenvalues_b: tuple[complex, ...]
    eigenvalues_sum: tuple[complex, ...]
    integer_eigenvalues_a: tuple[int, ...]  # 1-based indices
    integer_eigenvalues_b: tuple[int, ...]
    resonance_hits: tuple[ResonanceHit, ...]
    resonance_margin: float
    small_divisor_margin_a: float
    small_divisor_margin_b: float
    margin_curve_a: tuple[tuple[int, float], ...]
    margin_curve_b: tuple[tuple[int, float], ...]
    scan_order: int
    shift_bound: int
    tolerance: float
    notes: tuple[str, ...] = field(default=())

    @property
    def has_resonance(self) -> bool:
        return bool(self.resonance_hits)


def _sorted_eigs(mat: np.ndarray) -> np.ndarray:
    eigs = np.linalg.eigvals(mat)
    order = np.lexsort((eigs.imag, eigs.real))
    return eigs[order]


def _integer_flags(eigs: np.ndarray, tol: float) -> tuple[int, ...]:
    out = []
    for j, z in enumerate(eigs):
        if abs(z.imag) < tol and abs(z.real - round(z.real)) < tol:
            out.append(j + 1)
    return tuple(out)


def _small_divisor_scan(eigs: np.ndarray, scan_order: int, shift_bound: int):
    """Min of ``|n . mu + l - mu_s|`` over the finite scan, plus its size curve."""
    d = eigs.shape[0]
    best = np.inf
    curve: dict[int, float] = {}
    for total in range(2, scan_order + 1):
        for n in enumerate_multi_indices(d, total):
            ndot = complex(np.dot(n, eigs))
            for l in range(shift_bound + 1):
                for s in range(d):
                    val = abs(ndot + l - eigs[s])
                    size = total + l
                    if val < curve.get(size, np.inf):
                        curve[size] = val
                    if val < best:
                        best = val
    return best, tuple(sorted(curve.items()))


def diagnose(a, b, scan_order: int, shift_bound: int = 10, tolerance: float = RESONANCE_TOL) -> DiagnosticsReport:
    """Scan eigenvalue assumptions up to degree ``scan_order``.

    Flags integer eigenvalues of ``A`` and ``B``, lists exact resonances
    ``lambda_j - n . lambda`` equal (within ``tolerance``) to a non-negative
    integer for ``2 <= |n| <= scan_order``, and reports finite small-divisor
    margins for the spectra of ``A`` and ``B``.
    """
    if scan_order < 2:
        raise ValueError("scan_order must be >= 2")
    a = _as_matrix(a, "A")
    b = _as_matrix(b, "B")
    notes: list[str] = []
    try:
        eig_a = _sorted_eigs(a)
        eig_b = _sorted_eigs(b)
        eig_s = _sorted_eigs(a + b)
    except np.linalg.LinAlgError as err:  # pragma: no cover - eigvals rarely fails
        notes.append(f"eigenvalue computation failed: {err}")
        empty: tuple = ()
        return DiagnosticsReport(empty, empty, empty, empty, empty, empty, np.inf,
                                 np.inf, np.inf, empty, empty, scan_order, shift_bound,
                                 tolerance, tuple(notes))

    d = a.shape[0]
    hits: list[ResonanceHit] = []
    margin = np.inf
    for total in range(2, scan_order + 1):
        for n in enumerate_multi_indices(d, total):
            ndot = complex(np.dot(n, eig_s))
            for j in range(d):
                z = eig_s[j] - ndot
                kmax = int(np.ceil(abs(z))) + 1
                for k in range(kmax + 1):
                    dist = abs(k - z)
                    if dist < margin:
                        margin = dist
                    if dist < tolerance:
                        hits.append(ResonanceHit(n, j + 1, k))
    dio_a, curve_a = _small_divisor_scan(eig_a, scan_order, shift_bound)
    dio_b, curve_b = _small_divisor_scan(eig_b, scan_order, shift_bound)
    return DiagnosticsReport(
        eigenvalues_a=tuple(eig_a),
        eigenvalues_b=tuple(eig_b),
        eigenvalues_sum=tuple(eig_s),
        integer_eigenvalues_a=_integer_flags(eig_a, tolerance),
        integer_eigenvalues_b=_integer_flags(eig_b, tolerance),
        resonance_hits=tuple(hits),
        resonance_margin=float(margin),
        small_divisor_margin_a=float(dio_a),
        small_divisor_margin_b=float(dio_b),
        margin_curve_a=curve_a,
        margin_curve_b=curve_b,
        scan_order=scan_order,
        shift_bound=shift_bound,
        tolerance=tolerance,
        notes=tuple(notes),
    )
