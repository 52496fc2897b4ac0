"""Order-by-order computation of corrections, linearizations and normal forms.

Per homogeneous degree ``n`` the engine solves the polynomial equation

    ``Q (d_x P + (d_w P) M w - M P) = F - phi``

for a polynomial ``P`` (degree in ``x`` one less than ``F``) and the unique
x-free ``phi``, by matching powers of ``x`` from the top down; each power
costs one dense shifted homological solve.  Two drivers assemble the
right-hand sides recursively:

* correction: ``F_n`` is the degree-``n`` part of ``f(x, w+h) - phi(w+h)``
  built from all lower orders, and ``phi_n`` absorbs the obstruction;
* normal form: ``F_n`` is the degree-``n`` part of
  ``f(x, w+h) - (d_w h) psi`` with ``psi`` entering uncomposed.

Every accepted order is certified by re-substituting into the cleared
equation and recording the coefficient-wise residual.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .algebra import HomPoly, VectorSeries, XPoly, jacobian_contract, series_substitute
from .operators import (
    DiagnosticsReport,
    ResonanceSingular,
    ShiftedSolver,
    _as_matrix,
    apply_fuchsian_operator,
    apply_homological,
    diagnose,
)


@dataclass(frozen=True)
class FuchsianSystem:
    """A polynomially perturbed two-pole system, truncated at ``order``.

    ``d u/dx = (A/(x-1) + B/(x+1)) u + f(x, u)/(x**2 - 1)`` with ``f`` a
    ``VectorSeries`` (terms of degree 2..order, polynomial in ``x``).
    """

    dim: int
    matrix_a: np.ndarray
    matrix_b: np.ndarray
    nonlinearity: VectorSeries
    order: int

    def __post_init__(self):
        object.__setattr__(self, "matrix_a", _as_matrix(self.matrix_a, "A"))
        object.__setattr__(self, "matrix_b", _as_matrix(self.matrix_b, "B"))
        if self.matrix_a.shape != (self.dim, self.dim) or self.matrix_b.shape != (self.dim, self.dim):
            raise ValueError("matrix shape does not match system dimension")
        if self.nonlinearity.dim != self.dim:
            raise ValueError("nonlinearity dimension mismatch")
        if self.order < 2:
            raise ValueError("truncation order must be >= 2")
        if self.nonlinearity.max_degree() > self.order:
            raise ValueError("nonlinearity carries terms above the truncation order")

    def corrected(self, correction: VectorSeries) -> "FuchsianSystem":
        """The system with ``f`` replaced by ``f - correction``."""
        return replace(self, nonlinearity=(self.nonlinearity - correction).truncated(self.order))

    def linear_matrix(self, x: complex) -> np.ndarray:
        return self.matrix_a / (x - 1.0) + self.matrix_b / (x + 1.0)

    def rhs(self, x: complex, u: np.ndarray) -> np.ndarray:
        """Right-hand side of the truncated differential system."""
        q = x * x - 1.0
        return self.linear_matrix(x) @ u + self.nonlinearity.eval(x, u) / q


class OrderResidual(NamedTuple):
    order: int
    absolute: float
    relative: float
    h_x_degree: int


@dataclass(frozen=True)
class CorrectionOutput:
    """Unique correction ``phi`` and linearization coefficients ``h``."""

    phi: VectorSeries
    h: VectorSeries
    residuals: tuple[OrderResidual, ...]
    diagnostics: DiagnosticsReport


@dataclass(frozen=True)
class NormalFormOutput:
    """Unique normal-form nonlinearity ``psi`` and equivalence map ``h``."""

    psi: VectorSeries
    h: VectorSeries
    residuals: tuple[OrderResidual, ...]
    diagnostics: DiagnosticsReport


def solve_with_correction(f_rhs: XPoly, a, b, solver: ShiftedSolver | None = None):
    """Solve the cleared order equation for ``(P, phi)`` given the right side.

    Returns the unique pair with ``apply_fuchsian_operator(P) + phi == F``;
    ``P`` has x-degree ``deg_x F - 1`` (``P = 0`` and ``phi = F`` when ``F``
    is free of ``x``).  Raises ``ResonanceSingular`` if a shifted solve is
    singular.
    """
    a = _as_matrix(a, "A")
    b = _as_matrix(b, "B")
    d, n = f_rhs.dim, f_rhs.degree
    if f_rhs.is_zero:
        return XPoly.zero(d, n), HomPoly.zero(d, n)
    big_k = f_rhs.x_degree
    if big_k == 0:
        return XPoly.zero(d, n), f_rhs.coeff(0)
    if solver is None:
        solver = ShiftedSolver(a + b, n)
    r_mat = a - b
    k = big_k - 1
    p = [HomPoly.zero(d, n)] * (k + 1)
    p[k] = solver.solve(k, f_rhs.coeff(k + 1))
    for l in range(k, 0, -1):
        rhs = f_rhs.coeff(l) - apply_homological(r_mat, p[l])
        if l + 1 <= k:
            rhs = rhs + p[l + 1].scale(l + 1)
        p[l - 1] = solver.solve(l - 1, rhs)
    phi = f_rhs.coeff(0) - apply_homological(r_mat, p[0])
    if k >= 1:
        phi = phi + p[1]
    return XPoly(d, n, p), phi


def _residual_entry(system: FuchsianSystem, h_part: XPoly, rhs: XPoly) -> OrderResidual:
    lhs = apply_fuchsian_operator(h_part, system.matrix_a, system.matrix_b)
    err = (lhs - rhs).max_abs()
    scale = max(1.0, rhs.max_abs())
    return OrderResidual(h_part.degree, err, err / scale, h_part.x_degree)


def compute_correction(system: FuchsianSystem, scan_shift_bound: int = 10) -> CorrectionOutput:
    """Compute the unique correction making the system formally linearizable.

    Walks degrees ``2..order``; on a resonance the exception carries the
    completed lower orders in its ``partial`` attribute.
    """
    d, big_n = system.dim, system.order
    diagnostics = diagnose(system.matrix_a, system.matrix_b, big_n, scan_shift_bound)
    h = VectorSeries.zero(d, big_n)
    phi = VectorSeries.zero(d, big_n)
    residuals: list[OrderResidual] = []
    f = system.nonlinearity
    for n in range(2, big_n + 1):
        rhs = series_substitute(f, h, n) - series_substitute(phi, h, n)
        try:
            h_part, phi_part = solve_with_correction(rhs, system.matrix_a, system.matrix_b)
        except ResonanceSingular as err:
            err.partial = CorrectionOutput(phi, h, tuple(residuals), diagnostics)
            raise
        h = h.with_part(h_part) if not h_part.is_zero else h
        phi = phi.with_part(XPoly.constant(phi_part)) if not phi_part.is_zero else phi
        residuals.append(_residual_entry(system, h_part, rhs - XPoly.constant(phi_part)))
    return CorrectionOutput(phi, h, tuple(residuals), diagnostics)


def _normal_form_rhs(f: VectorSeries, h: VectorSeries, psi: VectorSeries, n: int) -> XPoly:
    rhs = series_substitute(f, h, n)
    for j in range(2, n):  # (d_w h_j) psi_m with j + m - 1 = n
        m = n + 1 - j
        if m < 2:
            continue
        h_part = h.homogeneous_part(j)
        psi_part_x = psi.homogeneous_part(m)
        if h_part.is_zero or psi_part_x.is_zero:
            continue
        rhs = rhs - jacobian_contract(h_part, psi_part_x.coeff(0))
    return rhs


def compute_normal_form(system: FuchsianSystem, scan_shift_bound: int = 10) -> NormalFormOutput:
    """Compute the unique x-free nonlinearity equivalent to the system."""
    d, big_n = system.dim, system.order
    diagnostics = diagnose(system.matrix_a, system.matrix_b, big_n, scan_shift_bound)
    h = VectorSeries.zero(d, big_n)
    psi = VectorSeries.zero(d, big_n)
    residuals: list[OrderResidual] = []
    f = system.nonlinearity
    for n in range(2, big_n + 1):
        rhs = _normal_form_rhs(f, h, psi, n)
        try:
            h_part, psi_part = solve_with_correction(rhs, system.matrix_a, system.matrix_b)
        except ResonanceSingular as err:
            err.partial = NormalFormOutput(psi, h, tuple(residuals), diagnostics)
            raise
        h = h.with_part(h_part) if not h_part.is_zero else h
        psi = psi.with_part(XPoly.constant(psi_part)) if not psi_part.is_zero else psi
        residuals.append(_residual_entry(system, h_part, rhs - XPoly.constant(psi_part)))
    return NormalFormOutput(psi, h, tuple(residuals), diagnostics)


def residual_check(system: FuchsianSystem, h: VectorSeries, series: VectorSeries,
                   mode: str = "correction") -> tuple[OrderResidual, ...]:
    """Re-substitute a computed solution into the cleared equation, per order.

    ``series`` is the correction (``mode="correction"``, composed with
    ``w + h``) or the normal form (``mode="normalform"``, entering uncomposed
    plus the ``(d_w h) psi`` contraction).  Returns the coefficient-wise
    residual norms for every order ``2..N``; zero means exact conjugacy at
    that truncation.
    """
    if mode not in ("correction", "normalform"):
        raise ValueError(f"unknown mode {mode!r}")
    out = []
    f = system.nonlinearity
    for n in range(2, system.order + 1):
        if mode == "correction":
            rhs = series_substitute(f, h, n) - series_substitute(series, h, n)
        else:
            rhs = _normal_form_rhs(f, h, series, n) - series.homogeneous_part(n)
        out.append(_residual_entry(system, h.homogeneous_part(n), rhs))
    return tuple(out)
