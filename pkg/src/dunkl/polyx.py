"""Exact Dunkl calculus on polynomials with rational coefficients.

Coefficients are :class:`fractions.Fraction`, so the structural identities of
the calculus (commutativity of the deformed derivatives, the Laplacian closed
form, the product-rule identity for the carre du champ, and the explicit
second-order decompositions) can be certified by term-for-term equality
instead of floating-point tolerance.  This module is the ground-truth oracle
for the numeric ones.

Only axis-aligned reflection groups are handled here (pairwise orthogonal
roots sqrt(2)*e_i, rank one included).  For those, applying sigma_i flips the
sign of terms odd in x_i, hence f - f o sigma_i is odd in x_i and every
division the formulas call for is an exact exponent shift.  The per-axis
reduced forms used throughout:

    D_i f     = d_i f + kappa_i (f - f o sigma_i) / x_i
    L f       = Delta f + sum_i kappa_i [2 x_i d_i f - (f - f o sigma_i)] / x_i^2
    Gamma     = <grad f, grad g>
                + sum_i kappa_i/2 (f - f o sigma_i)(g - g o sigma_i) / x_i^2
    Gamma_2   = 1/2 [L Gamma(f) - 2 Gamma(L f, f)]

The sqrt(2) root normalization cancels in all of them, which is what keeps
the arithmetic inside the rationals.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "Polynomial",
    "RationalKappa",
    "Gamma2Parts",
    "DegreeCapError",
    "DivisibilityError",
    "dunkl_derivative",
    "dunkl_gradient",
    "dunkl_laplacian",
    "gamma",
    "gamma2",
    "hessian_hs_sq",
    "gamma2_rank1_parts",
    "gamma2_z2d_parts",
    "random_polynomial",
    "parse_polynomial",
    "format_polynomial",
]

# Degree budget for any constructed polynomial; catches runaway expression
# growth (e.g. accidentally iterated squaring) before it eats the session.
DEGREE_CAP = 64

Exponents = tuple
Scalar = Union[int, Fraction, str]


class DegreeCapError(RuntimeError):
    """A constructed polynomial exceeds DEGREE_CAP."""


class DivisibilityError(RuntimeError):
    """An exact division by a coordinate power failed.

    This cannot happen for the reflection differences the calculus produces;
    seeing it means an internal invariant is broken, so it aborts loudly.
    """


def _as_fraction(value: Scalar) -> Fraction:
    if isinstance(value, float):
        raise TypeError(
            "float coefficients are not accepted in the exact engine; "
            "pass Fraction, int, or a string like '1/2'"
        )
    return Fraction(value)


def _term_order(item):
    exps, _ = item
    return (-sum(exps), tuple(-e for e in exps))


class Polynomial:
    """Sparse multivariate polynomial over the rationals.

    Terms map exponent tuples (one nonnegative int per axis) to nonzero
    Fraction coefficients, kept in a canonical graded order, so ``==`` is
    structural identity.  Instances are immutable by convention; every
    operation returns a fresh value.
    """

    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms: Union[Mapping, Iterable] = ()):
        if dim < 1:
            raise ValueError(f"dimension must be >= 1, got {dim}")
        merged: dict = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for exps, coeff in items:
            exps = tuple(int(e) for e in exps)
            if len(exps) != dim:
                raise ValueError(f"exponent tuple {exps} does not match dim {dim}")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            c = merged.get(exps, _ZERO) + _as_fraction(coeff)
            if c:
                merged[exps] = c
            else:
                merged.pop(exps, None)
        if merged:
            top = max(sum(e) for e in merged)
            if top > DEGREE_CAP:
                raise DegreeCapError(
                    f"degree {top} exceeds the cap {DEGREE_CAP}; raise "
                    f"polyx.DEGREE_CAP if this growth is intended"
                )
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "terms", dict(sorted(merged.items(), key=_term_order)))

    # -- constructors --------------------------------------------------------

    @classmethod
    def zero(cls, dim: int) -> "Polynomial":
        return cls(dim)

    @classmethod
    def one(cls, dim: int) -> "Polynomial":
        return cls(dim, {(0,) * dim: 1})

    @classmethod
    def constant(cls, value: Scalar, dim: int) -> "Polynomial":
        return cls(dim, {(0,) * dim: _as_fraction(value)})

    @classmethod
    def variable(cls, i: int, dim: int) -> "Polynomial":
        """The coordinate polynomial x_{i+1} (axis index is 0-based)."""
        if not 0 <= i < dim:
            raise ValueError(f"axis {i} out of range for dim {dim}")
        exps = tuple(1 if j == i else 0 for j in range(dim))
        return cls(dim, {exps: 1})

    @classmethod
    def monomial(cls, coeff: Scalar, exps: Sequence[int]) -> "Polynomial":
        exps = tuple(exps)
        return cls(len(exps), {exps: coeff})

    # -- basics ---------------------------------------------------------------

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            return self.dim == other.dim and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self == Polynomial.constant(other, self.dim)
        return NotImplemented

    __hash__ = None

    def __repr__(self) -> str:
        return f"Polynomial({self.dim}, {format_polynomial(self)!r})"

    def __str__(self) -> str:
        return format_polynomial(self)

    def degree(self) -> int:
        """Total degree; the zero polynomial reports -1."""
        return max((sum(e) for e in self.terms), default=-1)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    # -- ring operations -------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Polynomial):
            if other.dim != self.dim:
                raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
            return other
        if isinstance(other, (int, Fraction, str)):
            return Polynomial.constant(other, self.dim)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out = dict(self.terms)
        for exps, c in other.terms.items():
            s = out.get(exps, _ZERO) + c
            if s:
                out[exps] = s
            else:
                out.pop(exps, None)
        return Polynomial(self.dim, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.dim, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            if other.dim != self.dim:
                raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
            out: dict = {}
            for e1, c1 in self.terms.items():
                for e2, c2 in other.terms.items():
                    key = tuple(a + b for a, b in zip(e1, e2))
                    s = out.get(key, _ZERO) + c1 * c2
                    if s:
                        out[key] = s
                    else:
                        out.pop(key, None)
            return Polynomial(self.dim, out)
        if isinstance(other, (int, Fraction, str)):
            c = _as_fraction(other)
            if not c:
                return Polynomial.zero(self.dim)
            return Polynomial(self.dim, {e: c * v for e, v in self.terms.items()})
        return NotImplemented

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only nonnegative integer powers")
        out = Polynomial.one(self.dim)
        for _ in range(n):
            out = out * self
        return out

    # -- calculus primitives ----------------------------------------------------

    def partial(self, i: int) -> "Polynomial":
        """Partial derivative along axis i."""
        out = {}
        for exps, c in self.terms.items():
            e = exps[i]
            if e:
                key = exps[:i] + (e - 1,) + exps[i + 1:]
                out[key] = out.get(key, _ZERO) + c * e
        return Polynomial(self.dim, out)

    def flip(self, i: int) -> "Polynomial":
        """f o sigma_i: negate coefficients of terms odd in x_i."""
        return Polynomial(
            self.dim,
            {e: (-c if e[i] % 2 else c) for e, c in self.terms.items()},
        )

    def compose_reflection(self, axes: Iterable[int]) -> "Polynomial":
        """f o sigma_S for a set of axes (the sigmas commute)."""
        parity = [0] * self.dim
        for i in axes:
            parity[i] ^= 1
        out = {}
        for e, c in self.terms.items():
            sign = -1 if sum(ei for ei, p in zip(e, parity) if p) % 2 else 1
            out[e] = sign * c
        return Polynomial(self.dim, out)

    def reflect_diff(self, i: int) -> "Polynomial":
        """f - f o sigma_i; contains only terms odd in x_i."""
        return Polynomial(
            self.dim,
            {e: 2 * c for e, c in self.terms.items() if e[i] % 2},
        )

    def div_x(self, i: int, power: int = 1) -> "Polynomial":
        """Exact division by x_i**power via exponent shift.

        Raises
        ------
        DivisibilityError
            If any term has x_i-exponent below ``power``.  The reflection
            differences this engine divides are odd (or doubly even) in x_i
            by construction, so a failure is an internal-invariant breach.
        """
        out = {}
        for exps, c in self.terms.items():
            if exps[i] < power:
                raise DivisibilityError(
                    f"term {exps} not divisible by x{i + 1}^{power}"
                )
            out[exps[:i] + (exps[i] - power,) + exps[i + 1:]] = c
        return Polynomial(self.dim, out)

    # -- evaluation ----------------------------------------------------------------

    def eval_exact(self, point: Sequence[Scalar]) -> Fraction:
        """Evaluate at a rational point, exactly."""
        pt = [_as_fraction(v) for v in point]
        if len(pt) != self.dim:
            raise ValueError(f"point of length {len(pt)} for dim {self.dim}")
        total = _ZERO
        for exps, c in self.terms.items():
            v = c
            for x, e in zip(pt, exps):
                if e:
                    v *= x**e
            total += v
        return total

    def eval_float(self, points) -> np.ndarray:
        """Evaluate at one point (d,) or a batch (n, d) in float arithmetic."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        if pts.shape[1] != self.dim:
            raise ValueError(f"points of width {pts.shape[1]} for dim {self.dim}")
        out = np.zeros(len(pts))
        for exps, c in self.terms.items():
            term = np.full(len(pts), float(c))
            for axis, e in enumerate(exps):
                if e:
                    term *= pts[:, axis] ** e
            out += term
        return out[0] if single else out


_ZERO = Fraction(0)


@dataclass(frozen=True)
class RationalKappa:
    """Per-axis rational multiplicities, all >= 0."""

    values: tuple

    def __post_init__(self):
        vals = tuple(_as_fraction(v) for v in self.values)
        for v in vals:
            if v < 0:
                raise ValueError(f"multiplicities must be >= 0, got {v}")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return len(self.values)

    @property
    def gamma(self) -> Fraction:
        return sum(self.values, _ZERO)

    def __getitem__(self, i: int) -> Fraction:
        return self.values[i]


def _kappa_values(kappa, dim: int) -> tuple:
    """Coerce RationalKappa / scalar / sequence to a validated tuple."""
    if isinstance(kappa, RationalKappa):
        vals = kappa.values
    elif isinstance(kappa, (int, Fraction, str)):
        vals = (_as_fraction(kappa),) * dim
    else:
        vals = tuple(_as_fraction(v) for v in kappa)
    if len(vals) != dim:
        raise ValueError(f"{len(vals)} multiplicities for dimension {dim}")
    for v in vals:
        if v < 0:
            raise ValueError(f"multiplicities must be >= 0, got {v}")
    return vals


# -- Dunkl calculus ---------------------------------------------------------------


def dunkl_derivative(f: Polynomial, i: int, kappa) -> Polynomial:
    """Deformed derivative D_i f = d_i f + kappa_i (f - f o sigma_i)/x_i."""
    kv = _kappa_values(kappa, f.dim)
    out = f.partial(i)
    if kv[i]:
        out = out + kv[i] * f.reflect_diff(i).div_x(i)
    return out


def dunkl_gradient(f: Polynomial, kappa) -> tuple:
    return tuple(dunkl_derivative(f, i, kappa) for i in range(f.dim))


def dunkl_laplacian(f: Polynomial, kappa) -> Polynomial:
    """Closed form L f = Delta f + sum_i kappa_i [2 x_i d_i f - (f - f o sigma_i)]/x_i^2.

    This is deliberately NOT computed as sum_i D_i(D_i f); the equality of the
    two routes is one of the certified identities, so both must exist
    independently.
    """
    kv = _kappa_values(kappa, f.dim)
    out = Polynomial.zero(f.dim)
    for i in range(f.dim):
        fi = f.partial(i)
        out = out + fi.partial(i)
        if kv[i]:
            num = 2 * (Polynomial.variable(i, f.dim) * fi) - f.reflect_diff(i)
            out = out + kv[i] * num.div_x(i, 2)
    return out


def gamma(f: Polynomial, g: Polynomial, kappa) -> Polynomial:
    """Carre du champ: <grad f, grad g> + sum_i kappa_i/2 (df_i)(dg_i)/x_i^2,
    where df_i = f - f o sigma_i.  Symmetric and bilinear."""
    if f.dim != g.dim:
        raise ValueError("dimension mismatch")
    kv = _kappa_values(kappa, f.dim)
    out = Polynomial.zero(f.dim)
    for i in range(f.dim):
        out = out + f.partial(i) * g.partial(i)
        if kv[i]:
            prod = f.reflect_diff(i) * g.reflect_diff(i)
            out = out + (kv[i] / 2) * prod.div_x(i, 2)
    return out


def gamma2(f: Polynomial, kappa) -> Polynomial:
    """Iterated form 1/2 [L Gamma(f) - 2 Gamma(L f, f)], straight from the
    definition; this is the oracle the explicit decompositions are tested
    against."""
    g1 = gamma(f, f, kappa)
    lf = dunkl_laplacian(f, kappa)
    return Fraction(1, 2) * dunkl_laplacian(g1, kappa) - gamma(lf, f, kappa)


def hessian_hs_sq(f: Polynomial) -> Polynomial:
    """Squared Hilbert-Schmidt norm of the Hessian, sum_{ij} (d_i d_j f)^2."""
    out = Polynomial.zero(f.dim)
    grads = [f.partial(i) for i in range(f.dim)]
    for i in range(f.dim):
        for j in range(f.dim):
            h = grads[i].partial(j)
            out = out + h * h
    return out


@dataclass(frozen=True)
class Gamma2Parts:
    """Explicit decomposition Gamma_2 = hess_sq + a_part + b2_part.

    Each part is an exact polynomial.  a_part collects the single-root
    difference terms, b2_part the root-pair square (empty in rank one);
    both are manifestly sums of squares with nonnegative weights, which is
    the pointwise curvature statement.
    """

    hess_sq: Polynomial
    a_part: Polynomial
    b2_part: Polynomial

    @property
    def total(self) -> Polynomial:
        return self.hess_sq + self.a_part + self.b2_part


def gamma2_rank1_parts(f: Polynomial, kappa) -> Gamma2Parts:
    """Rank-one closed form

        Gamma_2(f) = f''^2 + k/x^2 [f'(x) + f'(-x) - u]^2
                            + k/(2x^2) [2 f'(x) - u]^2,
        u = (f(x) - f(-x))/x.

    Transcribed independently of the z2d decomposition; tests pin both to the
    definition and to each other.
    """
    if f.dim != 1:
        raise ValueError("rank-one form needs dim 1")
    (k,) = _kappa_values(kappa, 1)
    fp = f.partial(0)
    fpp = fp.partial(0)
    hess = fpp * fpp
    if not k:
        return Gamma2Parts(hess, Polynomial.zero(1), Polynomial.zero(1))
    u = f.reflect_diff(0).div_x(0)
    br1 = fp + fp.flip(0) - u
    br2 = 2 * fp - u
    a = k * (br1 * br1).div_x(0, 2) + (k / 2) * (br2 * br2).div_x(0, 2)
    return Gamma2Parts(hess, a, Polynomial.zero(1))


def gamma2_z2d_parts(f: Polynomial, kappa) -> Gamma2Parts:
    """Axis-system closed form of the iterated operator, as parts.

    With u_i = (f - f o sigma_i)/x_i and g_j = d_j f:

        A  = sum_i k_i/x_i^2 [ sum_{j != i} (g_j - g_j o sigma_i)^2
                               + (u_i - g_i - g_i o sigma_i)^2 ]
             + sum_i k_i/(2 x_i^2) (2 g_i - u_i)^2
        B2 = sum_{i < j} k_i k_j / (2 x_i^2 x_j^2)
                 (f - f o sigma_i - f o sigma_j + f o sigma_i sigma_j)^2

    and Gamma_2(f) = ||Hess f||_HS^2 + A + B2.  Every division is exact: the
    brackets are odd or doubly even in the divided coordinate.
    """
    d = f.dim
    kv = _kappa_values(kappa, d)
    grads = [f.partial(i) for i in range(d)]
    hess = Polynomial.zero(d)
    for i in range(d):
        for j in range(d):
            h = grads[i].partial(j)
            hess = hess + h * h
    a = Polynomial.zero(d)
    for i in range(d):
        if not kv[i]:
            continue
        u = f.reflect_diff(i).div_x(i)
        brace = Polynomial.zero(d)
        for j in range(d):
            if j == i:
                continue
            cross = grads[j].reflect_diff(i)
            brace = brace + cross * cross
        mid = u - grads[i] - grads[i].flip(i)
        brace = brace + mid * mid
        last = 2 * grads[i] - u
        a = a + kv[i] * brace.div_x(i, 2) + (kv[i] / 2) * (last * last).div_x(i, 2)
    b2 = Polynomial.zero(d)
    for i in range(d):
        for j in range(i + 1, d):
            if not (kv[i] and kv[j]):
                continue
            br = f - f.flip(i) - f.flip(j) + f.compose_reflection((i, j))
            sq = (br * br).div_x(i, 2).div_x(j, 2)
            b2 = b2 + (kv[i] * kv[j] / 2) * sq
    return Gamma2Parts(hess, a, b2)


# -- corpus generation --------------------------------------------------------------


def random_polynomial(rng: np.random.Generator, dim: int, max_degree: int = 6,
                      n_terms: int = 8, coeff_bound: int = 9) -> Polynomial:
    """Random sparse polynomial with small rational coefficients.

    Exponents are drawn per axis and rejected if the total degree exceeds
    ``max_degree``; coefficients are p/q with 1 <= |p|, q <= coeff_bound.
    Terms may collide, which just merges them.
    """
    terms = []
    for _ in range(n_terms):
        while True:
            exps = tuple(int(rng.integers(0, max_degree + 1)) for _ in range(dim))
            if sum(exps) <= max_degree:
                break
        num = int(rng.integers(1, coeff_bound + 1)) * (1 if rng.random() < 0.5 else -1)
        den = int(rng.integers(1, coeff_bound + 1))
        terms.append((exps, Fraction(num, den)))
    poly = Polynomial(dim, terms)
    if not poly:
        # all terms cancelled; retry with fresh draws
        return random_polynomial(rng, dim, max_degree, n_terms, coeff_bound)
    return poly


# -- text round-trip ------------------------------------------------------------------
#
# Canonical form, e.g.  3/2 x1^2 x2 - 1 x2^3 + 5
#
#   poly   := [sign] term (sign term)*
#   term   := coeff factor* | factor+        (missing coeff reads as 1)
#   coeff  := INT [/ INT]
#   factor := x INDEX [^ EXP]                (INDEX is 1-based)

_COEFF_RE = re.compile(r"^(\d+)(?:/(\d+))?$")
_FACTOR_RE = re.compile(r"^x(\d+)(?:\^(\d+))?$")


def format_polynomial(f: Polynomial) -> str:
    """Canonical text form; inverse of :func:`parse_polynomial`."""
    if not f.terms:
        return "0"
    chunks = []
    for exps, coeff in f.terms.items():
        mono = " ".join(
            f"x{i + 1}^{e}" if e > 1 else f"x{i + 1}"
            for i, e in enumerate(exps) if e
        )
        body = f"{abs(coeff)} {mono}" if mono else str(abs(coeff))
        if not chunks:
            chunks.append(body if coeff > 0 else f"-{body}")
        else:
            chunks.append(f" + {body}" if coeff > 0 else f" - {body}")
    return "".join(chunks)


def parse_polynomial(text: str, dim: int = None) -> Polynomial:
    """Parse the canonical text form.

    Parameters
    ----------
    text : str
        Signed terms like ``3/2 x1^2 x2 - 1 x2^3``; rational coefficients
        only (this is the exact engine; floats are rejected by design).
    dim : int, optional
        Ambient dimension; inferred as the largest variable index when
        omitted (a bare constant infers dimension 1).
    """
    raw = text.replace("+", " + ").replace("-", " - ").split()
    if not raw:
        raise ValueError("empty polynomial text")
    groups: list = []
    i, n = 0, len(raw)
    while i < n:
        sign = 1
        if raw[i] in "+-":
            sign = -1 if raw[i] == "-" else 1
            i += 1
        if i >= n or raw[i] in "+-":
            raise ValueError("sign without a following term")
        toks = []
        while i < n and raw[i] not in "+-":
            toks.append(raw[i])
            i += 1
        groups.append((sign, toks))

    parsed = []
    max_index = 0
    for sgn, toks in groups:
        coeff = Fraction(sgn)
        factors = toks
        m = _COEFF_RE.match(toks[0])
        if m:
            num, den = m.group(1), m.group(2)
            coeff *= Fraction(int(num), int(den) if den else 1)
            factors = toks[1:]
        exps: dict = {}
        for tok in factors:
            fm = _FACTOR_RE.match(tok)
            if not fm:
                raise ValueError(f"unrecognized token {tok!r}")
            idx = int(fm.group(1))
            if idx < 1:
                raise ValueError(f"variable index must be >= 1 in {tok!r}")
            exps[idx - 1] = exps.get(idx - 1, 0) + int(fm.group(2) or 1)
            max_index = max(max_index, idx)
        parsed.append((coeff, exps))

    if dim is None:
        dim = max(max_index, 1)
    elif max_index > dim:
        raise ValueError(f"variable x{max_index} exceeds dim {dim}")
    terms = []
    for coeff, exps in parsed:
        full = tuple(exps.get(i, 0) for i in range(dim))
        terms.append((full, coeff))
    return Polynomial(dim, terms)
