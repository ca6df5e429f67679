"""Numeric Dunkl calculus on smooth scalar fields.

Everything here evaluates pointwise (vectorized over point batches) on
arbitrary smooth functions: the carre du champ, the deformed gradient square,
explicit second-order forms, and the pseudo-gradient for exponents
p in (1, 2] together with its integral representation.  The exact polynomial
engine (:mod:`dunkl.polyx`) supplies ground truth wherever a field happens to
be polynomial; for everything else derivatives come from analytic oracles or
high-order central differences.

Difference quotients (f(x) - f(r x)) / <alpha, x> have removable
singularities on the mirror hyperplanes; below ``HYPERPLANE_EPS`` they are
replaced by the directional-derivative limit <alpha, grad f(x)>.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np

from . import polyx
from .rootsys import RootSystem

__all__ = [
    "ScalarField",
    "GpParams",
    "Gamma2Breakdown",
    "NumericError",
    "SingularityError",
    "DomainError",
    "AuditError",
    "QuadratureError",
    "gaussian_field",
    "bump_field",
    "poly_field",
    "field_from_spec",
    "gamma_num",
    "dunkl_grad_sq",
    "dunkl_laplacian_num",
    "gamma2_explicit_rank1",
    "gamma2_explicit_z2d",
    "gamma2_definition",
    "gp_definition",
    "gp_integral",
    "check_lemma22",
    "read_points_csv",
    "write_results_csv",
]

HYPERPLANE_EPS = 1e-6
DEFAULT_FD_STEP = 1e-4
NESTED_FD_STEP = 1e-3  # for wrapped fields needing third derivatives
AUDIT_POINTS = 100
AUDIT_RTOL = 1e-6
AUDIT_SEED = 474747


class NumericError(RuntimeError):
    """A field produced a non-finite value; the message names the point."""


class SingularityError(ValueError):
    """Explicit form requested too close to a mirror hyperplane.

    The closed forms divide by <alpha, x>^2; within HYPERPLANE_EPS of a
    mirror, call the definition route, which handles the limit.
    """


class DomainError(ValueError):
    """Positivity requirement violated (pseudo-gradient needs f > 0)."""


class AuditError(RuntimeError):
    """Self-consistency audit failed (analytic oracle vs finite differences)."""


class QuadratureError(RuntimeError):
    """Node doubling moved a quadrature value beyond the agreement budget."""


# -- finite differences -------------------------------------------------------

_STENCIL_D1 = ((2, -1.0), (1, 8.0), (-1, -8.0), (-2, 1.0))  # /(12 h)


def _shifted(x: np.ndarray, axis: int, amount: np.ndarray) -> np.ndarray:
    out = x.copy()
    out[:, axis] += amount
    return out


def _fd_gradient(fn, x: np.ndarray, h: float, richardson: bool) -> np.ndarray:
    steps = h * (1.0 + np.abs(x))

    def one_pass(st):
        g = np.empty_like(x)
        for j in range(x.shape[1]):
            hj = st[:, j]
            acc = np.zeros(len(x))
            for k, w in _STENCIL_D1:
                acc += w * fn(_shifted(x, j, k * hj))
            g[:, j] = acc / (12.0 * hj)
        return g

    g1 = one_pass(steps)
    if not richardson:
        return g1
    g2 = one_pass(steps / 2.0)
    return (16.0 * g2 - g1) / 15.0


def _fd_hessian(fn, x: np.ndarray, h: float, richardson: bool,
                grad: Optional[Callable] = None) -> np.ndarray:
    """Hessian by 4th-order stencils; differentiates ``grad`` when supplied."""
    n, d = x.shape
    steps = h * (1.0 + np.abs(x))

    if grad is not None:

        def one_pass(st):
            H = np.empty((n, d, d))
            for j in range(d):
                hj = st[:, j]
                acc = np.zeros((n, d))
                for k, w in _STENCIL_D1:
                    acc += w * grad(_shifted(x, j, k * hj))
                H[:, :, j] = acc / (12.0 * hj)[:, None]
            return H

    else:

        def one_pass(st):
            H = np.empty((n, d, d))
            fx = fn(x)
            for i in range(d):
                hi = st[:, i]
                acc = (
                    -fn(_shifted(x, i, 2 * hi))
                    + 16.0 * fn(_shifted(x, i, hi))
                    - 30.0 * fx
                    + 16.0 * fn(_shifted(x, i, -hi))
                    - fn(_shifted(x, i, -2 * hi))
                )
                H[:, i, i] = acc / (12.0 * hi * hi)
                for j in range(i + 1, d):
                    hj = st[:, j]
                    acc = np.zeros(n)
                    for a, wa in _STENCIL_D1:
                        base = _shifted(x, i, a * hi)
                        for b, wb in _STENCIL_D1:
                            acc += wa * wb * fn(_shifted(base, j, b * hj))
                    H[:, i, j] = H[:, j, i] = acc / (144.0 * hi * hj)
            return H

    H1 = one_pass(steps)
    if not richardson:
        return 0.5 * (H1 + np.swapaxes(H1, 1, 2))
    H2 = one_pass(steps / 2.0)
    H = (16.0 * H2 - H1) / 15.0
    return 0.5 * (H + np.swapaxes(H, 1, 2))


# -- scalar fields --------------------------------------------------------------


@dataclass(frozen=True)
class ScalarField:
    """A smooth function with optional analytic derivative oracles.

    Parameters
    ----------
    fn : callable
        Batch evaluator, (n, d) -> (n,).  Must be deterministic.
    dim : int
        Ambient dimension.
    grad : callable, optional
        Batch gradient, (n, d) -> (n, d).
    hess : callable, optional
        Batch Hessian, (n, d) -> (n, d, d).
    h : float
        Base finite-difference step, scaled per point by 1 + |x_i|.
    richardson : bool
        Add one Richardson level on top of the 4th-order stencils.
    smoothness : str
        "C2" or "C4"; second-order forms require "C4".
    name : str
        Used in error messages and manifests.
    audit : bool
        When analytic oracles are present, compare them against central
        differences at construction (100 fixed probe points, relative
        1e-6); disagreement raises :class:`AuditError`.  Derived wrappers
        whose oracles are exact consequences of an audited parent may
        switch this off.
    """

    fn: Callable
    dim: int
    grad: Optional[Callable] = None
    hess: Optional[Callable] = None
    h: float = DEFAULT_FD_STEP
    richardson: bool = True
    smoothness: str = "C4"
    name: str = "field"
    audit: bool = True
    audit_record: dict = dc_field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.smoothness not in ("C2", "C4"):
            raise ValueError("smoothness must be 'C2' or 'C4'")
        if self.audit and (self.grad is not None or self.hess is not None):
            record = self._run_audit()
            object.__setattr__(self, "audit_record", record)

    def _run_audit(self) -> dict:
        rng = np.random.default_rng(AUDIT_SEED + self.dim)
        pts = rng.normal(scale=1.2, size=(AUDIT_POINTS, self.dim))
        record = {"points": AUDIT_POINTS, "rtol": AUDIT_RTOL}
        if self.grad is not None:
            a = np.asarray(self.grad(pts), dtype=float)
            b = _fd_gradient(self.fn, pts, self.h, True)
            worst = float(np.max(np.abs(a - b) / (1.0 + np.max(np.abs(a), axis=1))[:, None]))
            if not math.isfinite(worst) or worst > AUDIT_RTOL:
                raise AuditError(
                    f"field {self.name!r}: analytic gradient disagrees with "
                    f"central differences (worst relative {worst:.3e})"
                )
            record["grad_worst_rel"] = worst
        if self.hess is not None:
            a = np.asarray(self.hess(pts), dtype=float)
            b = _fd_hessian(self.fn, pts, self.h, True, grad=self.grad)
            scale = (1.0 + np.max(np.abs(a), axis=(1, 2)))[:, None, None]
            worst = float(np.max(np.abs(a - b) / scale))
            if not math.isfinite(worst) or worst > AUDIT_RTOL:
                raise AuditError(
                    f"field {self.name!r}: analytic Hessian disagrees with "
                    f"central differences (worst relative {worst:.3e})"
                )
            record["hess_worst_rel"] = worst
        return record

    # points are accepted as (d,) or (n, d); outputs match the input rank

    def _batch(self, x) -> tuple:
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        return (pts[None, :] if single else pts), single

    def value(self, x):
        pts, single = self._batch(x)
        v = np.asarray(self.fn(pts), dtype=float)
        return v[0] if single else v

    def gradient(self, x):
        pts, single = self._batch(x)
        if self.grad is not None:
            g = np.asarray(self.grad(pts), dtype=float)
        else:
            g = _fd_gradient(self.fn, pts, self.h, self.richardson)
        return g[0] if single else g

    def hessian(self, x):
        pts, single = self._batch(x)
        if self.hess is not None:
            H = np.asarray(self.hess(pts), dtype=float)
        else:
            H = _fd_hessian(self.fn, pts, self.h, self.richardson, grad=self.grad)
        return H[0] if single else H


def gaussian_field(dim: int, a: float = 1.0, center: Sequence[float] = None,
                   amplitude: float = 1.0) -> ScalarField:
    """amplitude * exp(-a |x - c|^2), with analytic gradient and Hessian."""
    if a <= 0:
        raise ValueError("a must be positive")
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    if c.shape != (dim,):
        raise ValueError(f"center must have length {dim}")

    def fn(x):
        u = x - c
        return amplitude * np.exp(-a * np.sum(u * u, axis=1))

    def grad(x):
        u = x - c
        return (-2.0 * a) * u * fn(x)[:, None]

    def hess(x):
        u = x - c
        f = fn(x)
        outer = 4.0 * a * a * np.einsum("ni,nj->nij", u, u)
        return (outer - 2.0 * a * np.eye(dim)) * f[:, None, None]

    label = f"gaussian(a={a:g}, c={np.array2string(c, precision=3)})"
    return ScalarField(fn=fn, dim=dim, grad=grad, hess=hess, name=label)


def bump_field(dim: int, radius: float = 1.0, center: Sequence[float] = None,
               amplitude: float = 1.0) -> ScalarField:
    """Compactly supported bump exp(-1/(1 - |u|^2)) on |u| < 1, u = (x-c)/R.

    Gradient is analytic; the Hessian is left to finite differences so both
    derivative paths stay exercised by the audit.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)

    def parts(x):
        u = (x - c) / radius
        s = np.sum(u * u, axis=1)
        inside = s < 1.0
        g = np.zeros_like(s)
        g[inside] = np.exp(-1.0 / (1.0 - s[inside]))
        return u, s, inside, g

    def fn(x):
        return amplitude * parts(x)[3]

    def grad(x):
        u, s, inside, g = parts(x)
        out = np.zeros_like(u)
        coef = np.zeros_like(s)
        coef[inside] = -2.0 / (radius * (1.0 - s[inside]) ** 2)
        out[inside] = (amplitude * g[inside] * coef[inside])[:, None] * u[inside]
        return out

    return ScalarField(fn=fn, dim=dim, grad=grad,
                       name=f"bump(R={radius:g})")


def poly_field(f: "polyx.Polynomial") -> ScalarField:
    """Wrap an exact polynomial; derivatives come from exact partials."""
    grads = [f.partial(i) for i in range(f.dim)]
    hesses = [[grads[i].partial(j) for j in range(f.dim)] for i in range(f.dim)]

    def fn(x):
        return f.eval_float(x)

    def grad(x):
        return np.stack([g.eval_float(x) for g in grads], axis=1)

    def hess(x):
        n = len(x)
        H = np.empty((n, f.dim, f.dim))
        for i in range(f.dim):
            for j in range(f.dim):
                H[:, i, j] = hesses[i][j].eval_float(x)
        return H

    # oracles are exact partial derivatives, no audit needed
    return ScalarField(fn=fn, dim=f.dim, grad=grad, hess=hess,
                       name=f"poly({polyx.format_polynomial(f)})", audit=False)


def field_from_spec(spec: str, dim: int) -> ScalarField:
    """Build a field from a compact text spec.

    Forms: ``gaussian:a=1`` (optional ``c`` for a common center coordinate),
    ``bump:r=2``, ``poly:3/2 x1^2 x2``, and bare ``one`` for the constant 1.
    """
    kind, _, rest = spec.partition(":")
    kind = kind.strip()
    if kind == "one":
        return ScalarField(fn=lambda x: np.ones(len(x)),
                           grad=lambda x: np.zeros_like(x),
                           dim=dim, name="one", audit=False)
    if kind == "poly":
        return poly_field(polyx.parse_polynomial(rest.strip(), dim=dim))
    params = {}
    if rest.strip():
        for chunk in rest.split(","):
            key, _, val = chunk.partition("=")
            if not _:
                raise ValueError(f"bad field parameter {chunk!r}")
            params[key.strip()] = float(val)
    if kind == "gaussian":
        center = np.full(dim, params.pop("c", 0.0))
        return gaussian_field(dim, a=params.pop("a", 1.0), center=center,
                              amplitude=params.pop("amp", 1.0))
    if kind == "bump":
        center = np.full(dim, params.pop("c", 0.0))
        return bump_field(dim, radius=params.pop("r", 1.0), center=center,
                          amplitude=params.pop("amp", 1.0))
    raise ValueError(f"unknown field family {kind!r}")


@dataclass(frozen=True)
class GpParams:
    """Exponent and quadrature setup for the pseudo-gradient."""

    p: float
    nodes: int = 64

    def __post_init__(self):
        if not 1.0 < self.p <= 2.0:
            raise ValueError(f"p must lie in (1, 2], got {self.p}")
        if self.nodes < 8:
            raise ValueError("at least 8 quadrature nodes required")


# -- pointwise operators -----------------------------------------------------------


def _ensure_finite(values: np.ndarray, pts: np.ndarray, what: str):
    bad = ~np.isfinite(np.atleast_1d(values))
    if bad.any():
        idx = int(np.argmax(bad.reshape(len(pts), -1).any(axis=1)))
        raise NumericError(f"{what} is non-finite at point {pts[idx].tolist()}")


def _deltas(f: ScalarField, pts: np.ndarray, rs: RootSystem,
            fx: np.ndarray = None) -> np.ndarray:
    """Difference quotients delta_alpha f, shape (n, m), with limit handling."""
    n = len(pts)
    out = np.empty((n, rs.num_roots))
    if fx is None:
        fx = f.value(pts)
    grad_cache = None
    for i in range(rs.num_roots):
        t = rs.alpha_dot(i, pts)
        frx = f.value(rs.reflect(i, pts))
        near = np.abs(t) < HYPERPLANE_EPS
        safe = np.where(near, 1.0, t)
        out[:, i] = (fx - frx) / safe
        if near.any():
            if grad_cache is None:
                grad_cache = f.gradient(pts)
            out[near, i] = grad_cache[near] @ rs.roots[i]
    return out


def gamma_num(f: ScalarField, g: ScalarField, x, rs: RootSystem):
    """Carre du champ Gamma(f, g)(x) = <grad f, grad g> + sum kappa (df)(dg).

    Accepts a point (d,) or a batch (n, d); near mirrors the difference
    quotients switch to their directional-derivative limits.
    """
    pts, single = f._batch(x)
    _ensure_finite(pts, pts, "input point")
    gf = f.gradient(pts)
    gg = gf if g is f else g.gradient(pts)
    out = np.einsum("nj,nj->n", gf, gg)
    df = _deltas(f, pts, rs)
    dg = df if g is f else _deltas(g, pts, rs)
    out = out + (df * dg) @ np.asarray(rs.kappa)
    _ensure_finite(out, pts, f"Gamma({f.name}, {g.name})")
    return out[0] if single else out


def dunkl_grad_sq(f: ScalarField, x, rs: RootSystem):
    """|grad_kappa f|^2(x) = sum_j |d_j f + sum_alpha kappa delta_alpha f alpha_j|^2."""
    pts, single = f._batch(x)
    vec = f.gradient(pts).copy()
    df = _deltas(f, pts, rs)
    vec += (df * np.asarray(rs.kappa)) @ rs.roots
    out = np.einsum("nj,nj->n", vec, vec)
    _ensure_finite(out, pts, f"|grad_k {f.name}|^2")
    return out[0] if single else out


def dunkl_laplacian_num(f: ScalarField, x, rs: RootSystem):
    """Deformed Laplacian: Hessian trace plus the reflection-difference part.

    L f = Delta f + 2 sum_alpha kappa_alpha [ <alpha, grad f>/<alpha,x>
                                              - (f - f o r_alpha)/<alpha,x>^2 ].
    Near a mirror the bracket tends to <alpha, Hess f(x) alpha>/2, which is
    what the limit branch evaluates.
    """
    pts, single = f._batch(x)
    H = f.hessian(pts)
    out = np.trace(H, axis1=1, axis2=2)
    fx = f.value(pts)
    gx = f.gradient(pts)
    for i in range(rs.num_roots):
        k = rs.kappa[i]
        if k == 0.0:
            continue
        a = rs.roots[i]
        t = rs.alpha_dot(i, pts)
        frx = f.value(rs.reflect(i, pts))
        near = np.abs(t) < HYPERPLANE_EPS
        safe = np.where(near, 1.0, t)
        bracket = (gx @ a) / safe - (fx - frx) / safe**2
        if near.any():
            bracket[near] = 0.5 * np.einsum("nij,i,j->n", H[near], a, a)
        out = out + 2.0 * k * bracket
    _ensure_finite(out, pts, f"L {f.name}")
    return out[0] if single else out


@dataclass(frozen=True)
class Gamma2Breakdown:
    """Pointwise values of the explicit second-order decomposition."""

    total: np.ndarray
    hess_sq: np.ndarray
    a_part: np.ndarray
    b2_part: np.ndarray


def gamma2_explicit_rank1(f: ScalarField, x, kappa: float):
    """Rank-one closed form of the iterated operator.

    Gamma_2(f)(x) = f''(x)^2 + k/x^2 [f'(x) + f'(-x) - u]^2
                             + k/(2x^2) [2 f'(x) - u]^2,   u = (f(x)-f(-x))/x.

    Raises :class:`SingularityError` for |x| < 1e-6; the definition route
    handles the limit there.
    """
    if f.dim != 1:
        raise ValueError("rank-one form needs a one-dimensional field")
    if f.smoothness != "C4":
        raise ValueError("second-order forms require a C4 field")
    pts, single = f._batch(x)
    if np.any(np.abs(pts[:, 0]) < HYPERPLANE_EPS):
        raise SingularityError(
            "point within 1e-6 of the mirror x = 0; use the definition route"
        )
    mpts = -pts
    fx, fmx = f.value(pts), f.value(mpts)
    gx, gmx = f.gradient(pts)[:, 0], f.gradient(mpts)[:, 0]
    hxx = f.hessian(pts)[:, 0, 0]
    xx = pts[:, 0]
    u = (fx - fmx) / xx
    total = hxx**2 + (kappa / xx**2) * (gx + gmx - u) ** 2 \
        + (kappa / (2.0 * xx**2)) * (2.0 * gx - u) ** 2
    _ensure_finite(total, pts, "Gamma_2 rank-one")
    return total[0] if single else total


def gamma2_explicit_z2d(f: ScalarField, x, rs: RootSystem) -> Gamma2Breakdown:
    """Axis-system closed form with its decomposition.

    Returns total = hess_sq + a_part + b2_part per point; a_part and b2_part
    are sums of squares with nonnegative weights, so they are nonnegative in
    exact arithmetic and, being evaluated in that form, also in floating
    point.  Points within 1e-6 of a mirror raise :class:`SingularityError`.
    """
    if not rs.is_axis_system:
        raise ValueError("explicit decomposition needs an axis-aligned system")
    if f.dim != rs.dim:
        raise ValueError("field and root system dimensions differ")
    pts, single = f._batch(x)
    if np.any(np.abs(pts) < HYPERPLANE_EPS):
        raise SingularityError(
            "point within 1e-6 of a mirror hyperplane; use the definition route"
        )
    n, d = pts.shape
    kap = rs.kappa

    H = f.hessian(pts)
    hess_sq = np.einsum("nij,nij->n", H, H)

    fx = f.value(pts)
    gx = f.gradient(pts)
    flips = []
    for i in range(d):
        xi = pts.copy()
        xi[:, i] = -xi[:, i]
        flips.append(xi)

    a_part = np.zeros(n)
    f_flip = [None] * d
    g_flip = [None] * d
    for i in range(d):
        if kap[i] == 0.0:
            continue
        f_flip[i] = f.value(flips[i])
        g_flip[i] = f.gradient(flips[i])
        xi2 = pts[:, i] ** 2
        u = (fx - f_flip[i]) / pts[:, i]
        brace = (u - gx[:, i] - g_flip[i][:, i]) ** 2
        for j in range(d):
            if j != i:
                brace = brace + (gx[:, j] - g_flip[i][:, j]) ** 2
        a_part += kap[i] / xi2 * brace
        a_part += kap[i] / (2.0 * xi2) * (2.0 * gx[:, i] - u) ** 2

    b2_part = np.zeros(n)
    for i in range(d):
        if kap[i] == 0.0:
            continue
        for j in range(i + 1, d):
            if kap[j] == 0.0:
                continue
            xij = flips[i].copy()
            xij[:, j] = -xij[:, j]
            br = fx - f_flip[i] - f_flip[j] + f.value(xij)
            b2_part += (kap[i] * kap[j] / 2.0) * br**2 \
                / (pts[:, i] ** 2 * pts[:, j] ** 2)

    total = hess_sq + a_part + b2_part
    _ensure_finite(total, pts, "Gamma_2 explicit")
    if single:
        return Gamma2Breakdown(total[0], hess_sq[0], a_part[0], b2_part[0])
    return Gamma2Breakdown(total, hess_sq, a_part, b2_part)


def gamma2_definition(f: ScalarField, x, rs: RootSystem):
    """Second-order operator straight from its definition,

        Gamma_2(f) = 1/2 L Gamma(f) - Gamma(L f, f),

    with the inner fields wrapped for nested finite differences (step 1e-3,
    one Richardson level).  This is the oracle the explicit forms are tested
    against on non-polynomial fields.
    """
    gam = ScalarField(fn=lambda y: gamma_num(f, f, y, rs), dim=f.dim,
                      h=NESTED_FD_STEP, name=f"Gamma({f.name})", audit=False)
    lap = ScalarField(fn=lambda y: dunkl_laplacian_num(f, y, rs), dim=f.dim,
                      h=NESTED_FD_STEP, name=f"L({f.name})", audit=False)
    return 0.5 * dunkl_laplacian_num(gam, x, rs) - gamma_num(lap, f, x, rs)


# -- pseudo-gradient ------------------------------------------------------------------


def _positive_orbit_values(f: ScalarField, pts: np.ndarray, rs: RootSystem):
    """f on the reflection orbit; DomainError on any nonpositive value."""
    fx = f.value(pts)
    refl = np.empty((len(pts), rs.num_roots))
    for i in range(rs.num_roots):
        refl[:, i] = f.value(rs.reflect(i, pts))
    stacked = np.column_stack([fx, refl])
    if np.any(stacked <= 0.0):
        flat = np.argwhere(stacked <= 0.0)
        row, col = flat[0]
        where = pts[row] if col == 0 else rs.reflect(int(col - 1), pts[row])
        raise DomainError(
            f"{f.name} is not strictly positive at {np.asarray(where).tolist()}; "
            f"the pseudo-gradient needs f > 0 on the probe orbit"
        )
    return fx, refl


def _power_field(f: ScalarField, q: float) -> ScalarField:
    """f^q with derivative oracles chained from f's (f must stay positive)."""
    grad = hess = None
    if f.grad is not None:

        def grad(x):
            v = f.value(x)
            return (q * v ** (q - 1.0))[:, None] * f.grad(x)

    if f.grad is not None and f.hess is not None:

        def hess(x):
            v = f.value(x)
            g = f.grad(x)
            outer = np.einsum("ni,nj->nij", g, g)
            return (q * (q - 1.0) * v ** (q - 2.0))[:, None, None] * outer \
                + (q * v ** (q - 1.0))[:, None, None] * f.hess(x)

    return ScalarField(fn=lambda x: f.value(x) ** q, dim=f.dim,
                       grad=grad, hess=hess, h=f.h,
                       name=f"{f.name}^{q:g}", audit=False)


def gp_definition(f: ScalarField, x, params: GpParams, rs: RootSystem):
    """Pseudo-gradient from its definition,

        G_p(f) = (1/p) [ f^(2-p) L(f^p) - p f L f ].

    Requires f > 0 on the orbit of every probe point.  The result is
    checked against the nonnegativity guarantee with mixed slack
    1e-8 (1 + |value|); a dip below that aborts, it is never clipped.
    """
    p = params.p
    pts, single = f._batch(x)
    fx, _ = _positive_orbit_values(f, pts, rs)
    lap_f = dunkl_laplacian_num(f, pts, rs)
    lap_fp = dunkl_laplacian_num(_power_field(f, p), pts, rs)
    out = (fx ** (2.0 - p) * lap_fp - p * fx * lap_f) / p
    _ensure_finite(out, pts, "G_p")
    floor = -1e-8 * (1.0 + np.abs(out))
    if np.any(out < floor):
        idx = int(np.argmax(out < floor))
        raise AuditError(
            f"G_p nonnegativity violated at {pts[idx].tolist()}: {out[idx]:.3e}"
        )
    return out[0] if single else out


def _gl_nodes(n: int):
    nodes, wts = np.polynomial.legendre.leggauss(n)
    return 0.5 * (nodes + 1.0), 0.5 * wts  # mapped to [0, 1]


def _gp_integral_once(f, pts, p, rs, nodes):
    fx, refl = _positive_orbit_values(f, pts, rs)
    g = f.gradient(pts)
    out = (p - 1.0) * np.einsum("nj,nj->n", g, g)
    s, w = _gl_nodes(nodes)
    for i in range(rs.num_roots):
        k = rs.kappa[i]
        if k == 0.0:
            continue
        t = rs.alpha_dot(i, pts)
        fr = refl[:, i]
        diff = fr - fx
        near = np.abs(t) < HYPERPLANE_EPS
        active = np.abs(diff) > 1e-14 * (1.0 + np.abs(fx))
        # integrand (1-s) (f(x) / ((1-s) f(x) + s f(rx)))^(2-p), positive and
        # smooth in s, so Gauss-Legendre converges fast
        mix = np.outer(1.0 - s, fx) + np.outer(s, fr)
        integ = ((fx[None, :] / mix) ** (2.0 - p) * (1.0 - s)[:, None])
        integral = w @ integ
        safe = np.where(near, 1.0, t)
        term = 2.0 * (p - 1.0) * k * diff**2 * integral / safe**2
        # on the mirror the quotient tends to the directional derivative
        # and the s-integral collapses to 1/2
        lim = (p - 1.0) * k * (g @ rs.roots[i]) ** 2
        out = out + np.where(near, lim, np.where(active, term, 0.0))
    return out


def gp_integral(f: ScalarField, x, params: GpParams, rs: RootSystem):
    """Pseudo-gradient through the integral representation,

        (p-1)|grad f|^2 + 2(p-1) sum_alpha kappa/<a,x>^2 [f(rx)-f(x)]^2
            * int_0^1 f(x)^(2-p) (1-s) / [(1-s)f(x) + s f(rx)]^(2-p) ds,

    the difference term gated by the indicator f(x) != f(rx) (implemented
    with a 1e-14 relative threshold; the integrand vanishes quadratically
    there anyway).  Within HYPERPLANE_EPS of a mirror the quotient switches
    to its directional-derivative limit, as in the other operator routes.
    Node doubling must agree to 1e-8 (1 + |value|), else
    :class:`QuadratureError`.
    """
    pts, single = f._batch(x)
    v1 = _gp_integral_once(f, pts, params.p, rs, params.nodes)
    v2 = _gp_integral_once(f, pts, params.p, rs, 2 * params.nodes)
    gap = np.abs(v1 - v2)
    if np.any(gap > 1e-8 * (1.0 + np.abs(v2))):
        idx = int(np.argmax(gap))
        raise QuadratureError(
            f"s-integral not converged at {pts[idx].tolist()}: "
            f"{params.nodes} vs {2 * params.nodes} nodes differ by {gap[idx]:.3e}"
        )
    _ensure_finite(v2, pts, "G_p integral form")
    return v2[0] if single else v2


def check_lemma22(f: ScalarField, x, p: float, rs: RootSystem,
                  nodes: int = 64) -> dict:
    """Pointwise comparison record between Gamma and the pseudo-gradient.

    Checks, with slack 1e-8 (1 + |Gamma|):

      (a)  Gamma(f)(x) >= G_p(f)(x) / (p-1) >= 0
      (b)  Gamma(f)(x) <= [sum_alpha G_p(f)(r_alpha x) + G_p(f)(x)] / (p-1)

    Returns a dict with both sides, the orbit values, and ``pass``; a
    violation is reported in full, never clipped.

    The nonnegativity in (a) and the orbit bound (b) hold for every smooth
    f > 0 (G_p >= (p-1)|grad f|^2 termwise, and each difference term of
    Gamma is covered by the x- or r_alpha x-side of G_p depending on the
    sign of f - f o r_alpha).  The first comparison in (a) is genuinely
    direction-sensitive for p < 2: per root, the difference term of
    G_p/(p-1) carries the factor 2 int_0^1 (1-s) (f(x)/mix(s))^(2-p) ds
    against Gamma's 1, which is <= 1 iff f(x) <= f(r_alpha x).  It is an
    equality at p = 2 and for reflection-invariant f, and it reverses on
    the strictly decreasing side of the orbit, so records with
    ``pass: False`` there are the mathematically correct output.
    """
    params = GpParams(p=p, nodes=nodes)
    pts, single = f._batch(x)
    gam = gamma_num(f, f, pts, rs)
    gp_x = gp_definition(f, pts, params, rs)
    orbit = np.empty((len(pts), rs.num_roots))
    for i in range(rs.num_roots):
        orbit[:, i] = gp_definition(f, rs.reflect(i, pts), params, rs)
    slack = 1e-8 * (1.0 + np.abs(gam))
    lhs_21 = gam
    rhs_21 = gp_x / (p - 1.0)
    lhs_22 = gam
    rhs_22 = (orbit.sum(axis=1) + gp_x) / (p - 1.0)
    ok = (lhs_21 >= rhs_21 - slack) & (rhs_21 >= -slack) \
        & (lhs_22 <= rhs_22 + slack)
    result = {
        "lhs_21": lhs_21[0] if single else lhs_21,
        "rhs_21": rhs_21[0] if single else rhs_21,
        "lhs_22": lhs_22[0] if single else lhs_22,
        "rhs_22": rhs_22[0] if single else rhs_22,
        "gp_orbit": orbit[0] if single else orbit,
        "pass": bool(ok.all()),
    }
    if not result["pass"]:
        idx = int(np.argmax(~ok))
        result["failure_point"] = pts[idx].tolist()
        result["failure_values"] = {
            "gamma": float(gam[idx]),
            "gp_x": float(gp_x[idx]),
            "gp_orbit": orbit[idx].tolist(),
        }
    return result


# -- CSV batch interface -----------------------------------------------------------


def read_points_csv(path, dim: int = None) -> np.ndarray:
    """Read points, one per row, d columns; raises with the offending row."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (row[0].strip().startswith("#")):
                continue
            # tolerate a single header row of non-numeric labels
            try:
                vals = [float(v) for v in row]
            except ValueError:
                if lineno == 1:
                    continue
                raise ValueError(f"row {lineno}: non-numeric entry in {row!r}") from None
            if dim is not None and len(vals) != dim:
                raise ValueError(
                    f"row {lineno}: expected {dim} columns, found {len(vals)}"
                )
            rows.append(vals)
    if not rows:
        raise ValueError("no data rows found")
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise ValueError(f"inconsistent column counts: {sorted(widths)}")
    return np.asarray(rows, dtype=float)


def write_results_csv(path, points: np.ndarray, columns: dict) -> None:
    """Write points plus named result columns."""
    points = np.atleast_2d(points)
    names = [f"x{i + 1}" for i in range(points.shape[1])] + list(columns)
    cols = [points[:, i] for i in range(points.shape[1])]
    cols += [np.asarray(v, dtype=float) for v in columns.values()]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in zip(*cols):
            writer.writerow([f"{v:.17g}" for v in row])
