"""Structured zero-obstruction test generators of x-degree 0, 1 and 2.

For any homogeneous seed ``q(w)`` these produce a polynomial ``P_k`` of
x-degree ``k`` together with the right-hand side ``F = apply_fuchsian_operator(P_k)``
for which the order equation is solvable with vanishing correction; feeding
``F`` back to the solver must return ``(P_k, 0)``.  They exercise every
polynomial identity the cleared-denominator algebra relies on:

    ``Q M = x S + R``            with ``S = A + B,  R = A - B``
    ``Q^2 M^2 = (Q M)^2``
    ``Q^2 M' = -(x+1)^2 A - (x-1)^2 B``
    ``(Q^2)' M = 4 x (Q M)``

The degree-2 expansion was re-derived from the transport form of the
generator (differentiating ``Q(t)^2 Y(t)^{-1} q(Y(t) Y(x)^{-1} w)`` twice
along the flow); the cross-derivative term carries a minus sign:
``2[(Q^2)' - Q^2 M] dq M w``.
"""

from __future__ import annotations

import numpy as np

from .algebra import HomPoly, XPoly
from .operators import _as_matrix, apply_fuchsian_operator, apply_homological, jacobian_linear


def _hessian_form(q: HomPoly, u_mat: np.ndarray, v_mat: np.ndarray) -> HomPoly:
    """``(d^2 q)(U w, V w)`` for constant matrices ``U, V`` (degree preserved)."""
    d = q.dim
    out: dict[tuple, np.ndarray] = {}
    for alpha, qv in q.coeffs.items():
        for s in range(d):
            if alpha[s] == 0:
                continue
            for t in range(d):
                factor = alpha[s] * (alpha[t] - (1 if s == t else 0))
                if factor == 0:
                    continue
                base = list(alpha)
                base[s] -= 1
                base[t] -= 1
                for a_idx in range(d):
                    if u_mat[s, a_idx] == 0:
                        continue
                    for b_idx in range(d):
                        c = factor * u_mat[s, a_idx] * v_mat[t, b_idx]
                        if c == 0:
                            continue
                        mono = list(base)
                        mono[a_idx] += 1
                        mono[b_idx] += 1
                        mono = tuple(mono)
                        add = c * qv
                        out[mono] = out[mono] + add if mono in out else add
    return HomPoly(d, q.degree, out)


def rodrigues_solution(k: int, q: HomPoly, a, b) -> XPoly:
    """The x-degree-``k`` generator polynomial seeded by ``q``, ``k in {0,1,2}``."""
    a = _as_matrix(a, "A")
    b = _as_matrix(b, "B")
    d = q.dim
    s_mat = a + b
    r_mat = a - b
    eye = np.eye(d)
    if k == 0:
        return XPoly.constant(q)
    if k == 1:
        # x (2 q + J_S q) + J_R q
        top = q.scale(2) + apply_homological(s_mat, q)
        return XPoly(d, q.degree, [apply_homological(r_mat, q), top])
    if k == 2:
        # first bracket: (Q^2)'' + (QM)^2 + (x+1)^2 A + (x-1)^2 B - 8x QM, by x-power
        g0 = -4 * eye + r_mat @ r_mat + s_mat
        g1 = s_mat @ r_mat + r_mat @ s_mat - 6 * r_mat
        g2 = 12 * eye + s_mat @ s_mat - 7 * s_mat
        term1 = XPoly(d, q.degree, [q.matvec(g0), q.matvec(g1), q.matvec(g2)])
        # 2[(Q^2)' - Q^2 M] dq M w  =  8x jQM(q) - 2 (xS + R) jQM(q)
        j_qm = XPoly(d, q.degree, [jacobian_linear(r_mat, q), jacobian_linear(s_mat, q)])
        term2 = j_qm.shift_x(1).scale(8) - j_qm.matpoly_mul([2 * r_mat, 2 * s_mat])
        # Q^2 dq (M' + M^2) w  with  Q^2(M' + M^2) = (QM)^2 - (x+1)^2 A - (x-1)^2 B
        z0 = r_mat @ r_mat - s_mat
        z1 = s_mat @ r_mat + r_mat @ s_mat - 2 * r_mat
        z2 = s_mat @ s_mat - s_mat
        term3 = XPoly(d, q.degree,
                      [jacobian_linear(z0, q), jacobian_linear(z1, q), jacobian_linear(z2, q)])
        # Q^2 d^2q (Mw, Mw) = d^2q (QMw, QMw) with QM = xS + R
        term4 = XPoly(d, q.degree, [
            _hessian_form(q, r_mat, r_mat),
            _hessian_form(q, r_mat, s_mat) + _hessian_form(q, s_mat, r_mat),
            _hessian_form(q, s_mat, s_mat),
        ])
        return term1 + term2 + term3 + term4
    raise ValueError("generator implemented for x-degree k in {0, 1, 2} only")


def rodrigues_rhs(k: int, q: HomPoly, a, b) -> XPoly:
    """Right-hand side whose order equation has solution ``rodrigues_solution``

    and vanishing correction; x-degree is ``k + 1``.
    """
    return apply_fuchsian_operator(rodrigues_solution(k, q, a, b), a, b)
