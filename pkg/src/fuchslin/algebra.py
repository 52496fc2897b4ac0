"""Truncated multivariate polynomial algebra with complex vector coefficients.

Everything downstream manipulates three shapes of data:

* ``HomPoly`` -- a vector-valued polynomial in ``w = (w_1, ..., w_d)``,
  homogeneous of a fixed total degree, stored sparsely by multi-index;
* ``XPoly`` -- a polynomial in the scalar variable ``x`` whose coefficients
  are ``HomPoly`` of one shared degree;
* ``VectorSeries`` -- a truncated series ``sum_m c_m(x) w^m`` over
  multi-indices ``2 <= |m| <= N``, with ``c_m(x)`` a ``d``-vector valued
  polynomial in ``x``.

Coefficients are complex binary64 throughout.  Monomials are ordered
graded-lexicographically (by total degree, then lexicographically with the
first variable strongest), which fixes every matrix representation and
report ordering.  Exact zeros are dropped from sparse maps; no tolerance is
ever applied inside the algebra itself.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

MultiIndex = tuple[int, ...]

_ZERO_TOL = 0.0  # algebra drops exact zeros only


def space_dimension(dim: int, degree: int) -> int:
    """Number of degree-``degree`` monomials in ``dim`` variables."""
    return math.comb(degree + dim - 1, dim - 1)


@lru_cache(maxsize=None)
def enumerate_multi_indices(dim: int, degree: int) -> tuple[MultiIndex, ...]:
    """All multi-indices of total degree ``degree`` in graded-lex order.

    Within the fixed degree the order is lexicographic with the first entry
    strongest, e.g. ``(2,0) > (1,1) > (0,2)``.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if degree < 0:
        raise ValueError("degree must be >= 0")
    if dim == 1:
        return ((degree,),)
    out = []
    for first in range(degree, -1, -1):
        for rest in enumerate_multi_indices(dim - 1, degree - first):
            out.append((first,) + rest)
    return tuple(out)


@lru_cache(maxsize=None)
def index_positions(dim: int, degree: int) -> dict[MultiIndex, int]:
    """Map multi-index -> position in the graded-lex enumeration."""
    return {m: i for i, m in enumerate(enumerate_multi_indices(dim, degree))}


def _as_cvec(value, dim: int) -> np.ndarray:
    v = np.asarray(value, dtype=complex)
    if v.shape != (dim,):
        raise ValueError(f"expected a vector of length {dim}, got shape {v.shape}")
    return v


class HomPoly:
    """Vector-valued polynomial in ``w``, homogeneous of fixed total degree.

    Sparse map multi-index -> complex ``d``-vector; absent keys are zero.
    Instances are never mutated after construction.
    """

    __slots__ = ("dim", "degree", "coeffs")

    def __init__(self, dim: int, degree: int, coeffs=None):
        self.dim = dim
        self.degree = degree
        clean: dict[MultiIndex, np.ndarray] = {}
        for m, v in (coeffs or {}).items():
            m = tuple(int(e) for e in m)
            if len(m) != dim or any(e < 0 for e in m):
                raise ValueError(f"bad multi-index {m} for dimension {dim}")
            if sum(m) != degree:
                raise ValueError(f"multi-index {m} has degree {sum(m)}, expected {degree}")
            v = _as_cvec(v, dim)
            if np.any(v != 0):
                clean[m] = v
        self.coeffs = clean

    @classmethod
    def zero(cls, dim: int, degree: int) -> "HomPoly":
        return cls(dim, degree)

    @classmethod
    def monomial(cls, dim: int, m, vector) -> "HomPoly":
        m = tuple(int(e) for e in m)
        return cls(dim, sum(m), {m: vector})

    def coeff(self, m) -> np.ndarray:
        return self.coeffs.get(tuple(m), np.zeros(self.dim, dtype=complex))

    def terms(self):
        """Iterate ``(multi_index, vector)`` in graded-lex order."""
        pos = index_positions(self.dim, self.degree)
        for m in sorted(self.coeffs, key=pos.__getitem__):
            yield m, self.coeffs[m]

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(v))) for v in self.coeffs.values()), default=0.0)

    def __add__(self, other: "HomPoly") -> "HomPoly":
        self._check_like(other)
        out = dict(self.coeffs)
        for m, v in other.coeffs.items():
            out[m] = out[m] + v if m in out else v
        return HomPoly(self.dim, self.degree, out)

    def __sub__(self, other: "HomPoly") -> "HomPoly":
        return self + (-other)

    def __neg__(self) -> "HomPoly":
        return HomPoly(self.dim, self.degree, {m: -v for m, v in self.coeffs.items()})

    def scale(self, factor: complex) -> "HomPoly":
        return HomPoly(self.dim, self.degree, {m: factor * v for m, v in self.coeffs.items()})

    def matvec(self, matrix: np.ndarray) -> "HomPoly":
        """Apply a constant ``d x d`` matrix to every coefficient vector."""
        return HomPoly(self.dim, self.degree, {m: matrix @ v for m, v in self.coeffs.items()})

    def to_vector(self) -> np.ndarray:
        """Flatten into the graded-lex basis ``w^m e_j`` (index ``pos(m)*d + j``)."""
        pos = index_positions(self.dim, self.degree)
        out = np.zeros(len(pos) * self.dim, dtype=complex)
        for m, v in self.coeffs.items():
            i = pos[m] * self.dim
            out[i : i + self.dim] = v
        return out

    @classmethod
    def from_vector(cls, dim: int, degree: int, vec: np.ndarray) -> "HomPoly":
        idx = enumerate_multi_indices(dim, degree)
        coeffs = {m: vec[i * dim : (i + 1) * dim] for i, m in enumerate(idx)}
        return cls(dim, degree, coeffs)

    def eval(self, w) -> np.ndarray:
        """Value at the point ``w`` (complex ``d``-vector)."""
        w = np.asarray(w, dtype=complex)
        out = np.zeros(self.dim, dtype=complex)
        for m, v in self.coeffs.items():
            out += v * np.prod(w ** np.asarray(m))
        return out

    def _check_like(self, other: "HomPoly"):
        if self.dim != other.dim or self.degree != other.degree:
            raise ValueError("dimension/degree mismatch")

    def __repr__(self):
        return f"HomPoly(d={self.dim}, n={self.degree}, terms={len(self.coeffs)})"


class XPoly:
    """Polynomial in ``x`` whose coefficients are ``HomPoly`` of one degree.

    ``parts[j]`` is the coefficient of ``x**j``.  The leading coefficient is
    nonzero (identically zero polynomials have no parts and x-degree ``-1``).
    """

    __slots__ = ("dim", "degree", "parts")

    def __init__(self, dim: int, degree: int, parts=()):
        self.dim = dim
        self.degree = degree
        parts = list(parts)
        for p in parts:
            if p.dim != dim or p.degree != degree:
                raise ValueError("coefficient dimension/degree mismatch")
        while parts and parts[-1].is_zero:
            parts.pop()
        self.parts = tuple(parts)

    @classmethod
    def zero(cls, dim: int, degree: int) -> "XPoly":
        return cls(dim, degree)

    @classmethod
    def constant(cls, p: HomPoly) -> "XPoly":
        return cls(p.dim, p.degree, (p,))

    @property
    def x_degree(self) -> int:
        return len(self.parts) - 1

    @property
    def is_zero(self) -> bool:
        return not self.parts

    def coeff(self, j: int) -> HomPoly:
        if 0 <= j < len(self.parts):
            return self.parts[j]
        return HomPoly.zero(self.dim, self.degree)

    def __add__(self, other: "XPoly") -> "XPoly":
        n = max(len(self.parts), len(other.parts))
        return XPoly(self.dim, self.degree, [self.coeff(j) + other.coeff(j) for j in range(n)])

    def __sub__(self, other: "XPoly") -> "XPoly":
        return self + (-other)

    def __neg__(self) -> "XPoly":
        return XPoly(self.dim, self.degree, [-p for p in self.parts])

    def scale(self, factor: complex) -> "XPoly":
        return XPoly(self.dim, self.degree, [p.scale(factor) for p in self.parts])

    def shift_x(self, k: int) -> "XPoly":
        """Multiply by ``x**k``."""
        if self.is_zero:
            return self
        pad = [HomPoly.zero(self.dim, self.degree)] * k
        return XPoly(self.dim, self.degree, pad + list(self.parts))

    def dx(self) -> "XPoly":
        """Derivative with respect to ``x``."""
        return XPoly(self.dim, self.degree, [self.parts[j].scale(j) for j in range(1, len(self.parts))])

    def matvec(self, matrix: np.ndarray) -> "XPoly":
        return XPoly(self.dim, self.degree, [p.matvec(matrix) for p in self.parts])

    def matpoly_mul(self, mats) -> "XPoly":
        """Multiply by a matrix polynomial ``sum_i x**i mats[i]`` (convolution)."""
        if self.is_zero:
            return self
        out = [HomPoly.zero(self.dim, self.degree) for _ in range(len(self.parts) + len(mats) - 1)]
        for i, mat in enumerate(mats):
            if np.all(mat == 0):
                continue
            for j, p in enumerate(self.parts):
                out[i + j] = out[i + j] + p.matvec(mat)
        return XPoly(self.dim, self.degree, out)

    def eval_x(self, x: complex) -> HomPoly:
        """Collapse to a single ``HomPoly`` at a numeric ``x`` (Horner)."""
        acc = HomPoly.zero(self.dim, self.degree)
        for p in reversed(self.parts):
            acc = acc.scale(x) + p
        return acc

    def eval(self, x: complex, w) -> np.ndarray:
        """Value at numeric ``(x, w)``."""
        out = np.zeros(self.dim, dtype=complex)
        xp = 1.0 + 0j
        for p in self.parts:
            out += xp * p.eval(w)
            xp *= x
        return out

    def max_abs(self) -> float:
        return max((p.max_abs() for p in self.parts), default=0.0)

    def __repr__(self):
        return f"XPoly(d={self.dim}, n={self.degree}, x_degree={self.x_degree})"


def _trim_rows(arr: np.ndarray) -> np.ndarray:
    """Drop trailing all-zero rows of a (k+1, d) coefficient array."""
    k = arr.shape[0]
    while k > 0 and not np.any(arr[k - 1]):
        k -= 1
    return arr[:k]


class VectorSeries:
    """Truncated series ``sum_m c_m(x) w^m`` with ``2 <= |m| <= order``.

    ``terms[m]`` is an array of shape ``(x_degree + 1, d)``: row ``j`` holds
    the ``d``-vector coefficient of ``x**j``.  x-independent series (the
    corrections and normal forms) simply carry single-row terms.
    """

    __slots__ = ("dim", "order", "terms", "_compiled")

    def __init__(self, dim: int, order: int, terms=None):
        if order < 2:
            raise ValueError("truncation order must be >= 2")
        self.dim = dim
        self.order = order
        clean: dict[MultiIndex, np.ndarray] = {}
        for m, poly in (terms or {}).items():
            m = tuple(int(e) for e in m)
            deg = sum(m)
            if len(m) != dim or any(e < 0 for e in m):
                raise ValueError(f"bad multi-index {m}")
            if deg < 2:
                raise ValueError(f"series term {m} has degree {deg} < 2")
            if deg > order:
                raise ValueError(f"series term {m} exceeds truncation order {order}")
            arr = np.atleast_2d(np.asarray(poly, dtype=complex))
            if arr.shape[1] != dim:
                raise ValueError(f"coefficient rows of term {m} must have length {dim}")
            arr = _trim_rows(arr)
            if arr.shape[0]:
                clean[m] = arr
        self.terms = clean
        self._compiled = None

    @classmethod
    def zero(cls, dim: int, order: int) -> "VectorSeries":
        return cls(dim, order)

    def term(self, m) -> np.ndarray:
        """x-coefficient rows of ``w^m`` (shape (k+1, d); (1, d) zero row if absent)."""
        return self.terms.get(tuple(m), np.zeros((1, self.dim), dtype=complex))

    def sorted_indices(self) -> list[MultiIndex]:
        return sorted(self.terms, key=lambda m: (sum(m), index_positions(self.dim, sum(m))[m]))

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def max_degree(self) -> int:
        return max((sum(m) for m in self.terms), default=0)

    def homogeneous_part(self, degree: int) -> XPoly:
        """The degree-``degree`` part as an ``XPoly`` with ``HomPoly`` coefficients."""
        rows: list[dict[MultiIndex, np.ndarray]] = []
        for m, arr in self.terms.items():
            if sum(m) != degree:
                continue
            while len(rows) < arr.shape[0]:
                rows.append({})
            for j in range(arr.shape[0]):
                rows[j][m] = arr[j]
        return XPoly(self.dim, degree, [HomPoly(self.dim, degree, r) for r in rows])

    def with_part(self, part: XPoly) -> "VectorSeries":
        """New series with the homogeneous part of ``part.degree`` replaced."""
        terms = {m: arr for m, arr in self.terms.items() if sum(m) != part.degree}
        by_index: dict[MultiIndex, np.ndarray] = {}
        for j in range(part.x_degree + 1):
            for m, v in part.coeff(j).coeffs.items():
                arr = by_index.setdefault(m, np.zeros((part.x_degree + 1, self.dim), dtype=complex))
                arr[j] = v
        terms.update(by_index)
        return VectorSeries(self.dim, self.order, terms)

    def truncated(self, order: int) -> "VectorSeries":
        """Drop all terms of degree exceeding ``order`` (kept order >= 2)."""
        keep = max(order, 2)
        return VectorSeries(self.dim, keep, {m: a for m, a in self.terms.items() if sum(m) <= keep})

    def __add__(self, other: "VectorSeries") -> "VectorSeries":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        order = max(self.order, other.order)
        out: dict[MultiIndex, np.ndarray] = {m: a.copy() for m, a in self.terms.items()}
        for m, a in other.terms.items():
            if m in out:
                k = max(out[m].shape[0], a.shape[0])
                acc = np.zeros((k, self.dim), dtype=complex)
                acc[: out[m].shape[0]] += out[m]
                acc[: a.shape[0]] += a
                out[m] = acc
            else:
                out[m] = a
        return VectorSeries(self.dim, order, out)

    def __sub__(self, other: "VectorSeries") -> "VectorSeries":
        return self + other.scale(-1.0)

    def scale(self, factor: complex) -> "VectorSeries":
        return VectorSeries(self.dim, self.order, {m: factor * a for m, a in self.terms.items()})

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(a))) for a in self.terms.values()), default=0.0)

    def _compile(self):
        if self._compiled is None:
            idx = self.sorted_indices()
            if not idx:
                self._compiled = (np.zeros((0, self.dim), dtype=int), np.zeros((0, 1, self.dim), dtype=complex))
            else:
                kmax = max(self.terms[m].shape[0] for m in idx)
                exps = np.array(idx, dtype=int)
                coef = np.zeros((len(idx), kmax, self.dim), dtype=complex)
                for t, m in enumerate(idx):
                    arr = self.terms[m]
                    coef[t, : arr.shape[0]] = arr
                self._compiled = (exps, coef)
        return self._compiled

    def eval(self, x: complex, u) -> np.ndarray:
        """Numeric value at ``(x, u)``; the identity part is *not* included."""
        exps, coef = self._compile()
        if not exps.size:
            return np.zeros(self.dim, dtype=complex)
        u = np.asarray(u, dtype=complex)
        mono = np.prod(u[None, :] ** exps, axis=1)
        xp = x ** np.arange(coef.shape[1])
        return mono @ np.einsum("tkj,k->tj", coef, xp)

    def __repr__(self):
        return f"VectorSeries(d={self.dim}, N={self.order}, terms={len(self.terms)})"


# ---------------------------------------------------------------------------
# scalar truncated-polynomial helpers used by the series compositions
# ---------------------------------------------------------------------------
# A "scalar series" is a dict multi-index -> 1-d complex array of x-poly
# coefficients (ascending powers of x), truncated in total w-degree.


def _xp_add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[0] < b.shape[0]:
        a, b = b, a
    out = a.copy()
    out[: b.shape[0]] += b
    return out


def _scalar_mul(a: dict, b: dict, max_degree: int) -> dict:
    out: dict[MultiIndex, np.ndarray] = {}
    for ma, ca in a.items():
        da = sum(ma)
        for mb, cb in b.items():
            if da + sum(mb) > max_degree:
                continue
            m = tuple(i + j for i, j in zip(ma, mb))
            prod = np.convolve(ca, cb)
            out[m] = _xp_add(out[m], prod) if m in out else prod
    return out


def _scalar_pow(base: dict, power: int, max_degree: int, dim: int) -> dict:
    result = {(0,) * dim: np.ones(1, dtype=complex)}
    for _ in range(power):
        result = _scalar_mul(result, base, max_degree)
    return result


def series_substitute(f: VectorSeries, h: VectorSeries, degree: int) -> XPoly:
    """Degree-``degree`` part (in ``w``) of ``f(x, w + h(x, w))``.

    Only ``f`` terms with ``2 <= |m| <= degree`` and ``h`` terms with
    ``|m| < degree`` can contribute; anything else is skipped.  With ``h = 0``
    this returns the degree-``degree`` part of ``f`` unchanged.
    """
    if f.dim != h.dim:
        raise ValueError("dimension mismatch between series")
    d = f.dim
    unit = np.ones(1, dtype=complex)
    # components of w + h as scalar series
    comp: list[dict] = []
    for i in range(d):
        e_i = tuple(1 if j == i else 0 for j in range(d))
        s = {e_i: unit}
        for m, arr in h.terms.items():
            if sum(m) >= degree:
                continue
            col = arr[:, i]
            if np.any(col != 0):
                s[m] = col.copy()
        comp.append(s)

    pow_cache: list[dict[int, dict]] = [dict() for _ in range(d)]

    def cpow(i: int, p: int) -> dict:
        if p not in pow_cache[i]:
            pow_cache[i][p] = _scalar_pow(comp[i], p, degree, d)
        return pow_cache[i][p]

    acc: dict[MultiIndex, np.ndarray] = {}  # multi-index -> (k+1, d) array
    for m, fpoly in f.terms.items():
        if sum(m) > degree:
            continue
        prod = {(0,) * d: unit}
        for i, p in enumerate(m):
            if p:
                prod = _scalar_mul(prod, cpow(i, p), degree)
        for mono, xc in prod.items():
            if sum(mono) != degree:
                continue
            # (k+1, d) block: per component, convolve f coefficient with xc
            block = np.array([np.convolve(fpoly[:, j], xc) for j in range(d)]).T
            if mono in acc:
                a = acc[mono]
                k = max(a.shape[0], block.shape[0])
                out = np.zeros((k, d), dtype=complex)
                out[: a.shape[0]] += a
                out[: block.shape[0]] += block
                acc[mono] = out
            else:
                acc[mono] = block
    kmax = max((a.shape[0] for a in acc.values()), default=0)
    rows = []
    for j in range(kmax):
        rows.append(HomPoly(d, degree, {m: a[j] for m, a in acc.items() if j < a.shape[0]}))
    return XPoly(d, degree, rows)


def jacobian_contract(h_part: XPoly, psi_part: HomPoly) -> XPoly:
    """The product ``(d_w h) psi`` for homogeneous ``h`` and ``psi``.

    ``h_part`` is degree ``j`` in ``w`` with x-polynomial coefficients,
    ``psi_part`` is x-free of degree ``m``; the result is homogeneous of
    degree ``j + m - 1`` with the same x-degree as ``h_part``.
    """
    if h_part.dim != psi_part.dim:
        raise ValueError("dimension mismatch")
    d = h_part.dim
    out_degree = h_part.degree + psi_part.degree - 1
    rows = []
    for xk in range(h_part.x_degree + 1):
        coeffs: dict[MultiIndex, np.ndarray] = {}
        for alpha, hv in h_part.coeff(xk).coeffs.items():
            for s in range(d):
                if alpha[s] == 0:
                    continue
                shrunk = list(alpha)
                shrunk[s] -= 1
                for beta, pv in psi_part.coeffs.items():
                    if pv[s] == 0:
                        continue
                    mono = tuple(a + b for a, b in zip(shrunk, beta))
                    add = (alpha[s] * pv[s]) * hv
                    coeffs[mono] = coeffs[mono] + add if mono in coeffs else add
        rows.append(HomPoly(d, out_degree, coeffs))
    return XPoly(d, out_degree, rows)
