"""Root systems, reflections, multiplicities and the weight function.

Everything downstream (exact polynomial calculus, quadrature grids, path
simulation) is parameterized by a :class:`RootSystem`: finitely many positive
roots alpha, normalized so that |alpha|^2 = 2, together with the reflection
r_alpha in the hyperplane orthogonal to each root and a nonnegative
multiplicity kappa_alpha per root.  Three kinds are supported:

* ``rank_one``  d = 1 with the single positive root sqrt(2),
* ``z2d``       pairwise orthogonal roots sqrt(2)*e_i, reflection group Z_2^d,
* ``general``   arbitrary user-supplied roots (numeric operations only).

For the axis-aligned kinds, reflections are exact coordinate sign flips, so
composing a reflection with itself is bitwise the identity and the sqrt(2)
normalization never leaks into downstream rational arithmetic.
"""

from __future__ import annotations

import ast
import math
import re
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "RootSystem",
    "ValidationError",
    "ConfigError",
    "make_z2d",
    "make_rank_one",
    "make_general",
    "reflect",
    "weight",
    "parse_config",
    "format_config",
]

ROOT_NORM_TOL = 1e-12
INVARIANCE_TOL = 1e-10

KINDS = ("rank_one", "z2d", "general")


class ValidationError(ValueError):
    """Root-system data violates a structural requirement."""


class ConfigError(ValueError):
    """Config text is malformed; carries a 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True, eq=False)
class RootSystem:
    """Positive roots with multiplicities, immutable after construction.

    Parameters
    ----------
    dim : int
        Ambient dimension d.
    kind : str
        One of ``rank_one``, ``z2d``, ``general``.
    kappa : tuple of float
        Multiplicity kappa_alpha per positive root, all >= 0.
    roots : ndarray of shape (m, d)
        Positive roots, each of squared norm 2.  For the axis kinds the
        i-th root is sqrt(2)*e_i and reflections bypass this array.
    """

    dim: int
    kind: str
    kappa: tuple
    roots: np.ndarray

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError(f"dimension must be >= 1, got {self.dim}")
        if self.kind not in KINDS:
            raise ValidationError(f"unknown kind {self.kind!r}")
        kappa = tuple(float(k) for k in self.kappa)
        for k in kappa:
            if not math.isfinite(k) or k < 0:
                raise ValidationError(f"multiplicities must be finite and >= 0, got {k}")
        roots = np.array(self.roots, dtype=float)
        if roots.ndim != 2 or roots.shape[1] != self.dim:
            raise ValidationError(f"roots must have shape (m, {self.dim})")
        if len(kappa) != len(roots):
            raise ValidationError(
                f"{len(kappa)} multiplicities for {len(roots)} roots"
            )
        norms = np.sum(roots * roots, axis=1)
        if np.any(np.abs(norms - 2.0) >= ROOT_NORM_TOL):
            raise ValidationError("every root must satisfy |alpha|^2 = 2")
        if self.kind == "rank_one" and (self.dim != 1 or len(roots) != 1):
            raise ValidationError("rank_one means d = 1 with a single root")
        if self.kind in ("rank_one", "z2d"):
            gram = roots @ roots.T
            if np.any(np.abs(gram - 2.0 * np.eye(len(roots))) > ROOT_NORM_TOL):
                raise ValidationError("axis-kind roots must be orthogonal")
        roots.setflags(write=False)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "roots", roots)
        if self.kind == "general":
            _check_closure(roots, kappa)

    # -- derived quantities -------------------------------------------------

    @property
    def num_roots(self) -> int:
        return len(self.kappa)

    @property
    def gamma(self) -> float:
        """Sum of all multiplicities; the weight is homogeneous of degree 2*gamma."""
        return float(sum(self.kappa))

    @property
    def is_axis_system(self) -> bool:
        """True for rank_one and z2d, where reflections are coordinate flips."""
        return self.kind in ("rank_one", "z2d")

    # -- geometry -----------------------------------------------------------

    def alpha_dot(self, i: int, x) -> np.ndarray:
        """<alpha_i, x> for a point (d,) or a batch (n, d)."""
        x = np.asarray(x, dtype=float)
        return x @ self.roots[i]

    def reflect(self, i: int, x) -> np.ndarray:
        """Image of x under the reflection r_i; accepts (d,) or (n, d).

        Axis kinds flip coordinate i exactly (so r_i(r_i(x)) is bitwise x);
        the general kind uses r(x) = x - <alpha,x> alpha, valid because
        |alpha|^2 = 2.
        """
        x = np.asarray(x, dtype=float)
        y = x.copy()
        if self.is_axis_system:
            y[..., i] = -y[..., i]
            return y
        a = self.roots[i]
        proj = y @ a
        return y - np.multiply.outer(proj, a)

    def reflections(self, x) -> Iterator[tuple]:
        """Yield (root index, r_i(x)) over all positive roots."""
        for i in range(self.num_roots):
            yield i, self.reflect(i, x)

    def weight(self, x) -> np.ndarray:
        """w(x) = prod_alpha |<alpha,x>|^(2 kappa_alpha); (d,) or (n, d) input."""
        x = np.asarray(x, dtype=float)
        dots = np.abs(x @ self.roots.T)
        kap = 2.0 * np.asarray(self.kappa)
        # |t|^0 == 1 even at t == 0, so zero multiplicities never produce 0^0 trouble
        return np.prod(dots**kap, axis=-1)

    def min_hyperplane_dist(self, x) -> np.ndarray:
        """min_alpha |<alpha,x>| / |alpha|, the distance to the mirror set."""
        x = np.asarray(x, dtype=float)
        dots = np.abs(x @ self.roots.T)
        return np.min(dots, axis=-1) / math.sqrt(2.0)

    def to_config(self) -> str:
        return format_config(self)


# -- constructors ------------------------------------------------------------


def make_z2d(d: int, kappa: Sequence[float]) -> RootSystem:
    """Axis-aligned system with positive roots sqrt(2)*e_i, i = 1..d.

    Parameters
    ----------
    d : int
        Dimension; d = 1 yields the rank-one system.
    kappa : sequence of d nonnegative reals
        Per-axis multiplicities.

    Raises
    ------
    ValidationError
        If d < 1, the multiplicity count is not d, or any entry is negative.
    """
    kappa = tuple(float(k) for k in kappa)
    if len(kappa) != d:
        raise ValidationError(f"expected {d} multiplicities, got {len(kappa)}")
    roots = math.sqrt(2.0) * np.eye(d)
    kind = "rank_one" if d == 1 else "z2d"
    return RootSystem(dim=d, kind=kind, kappa=kappa, roots=roots)


def make_rank_one(kappa: float) -> RootSystem:
    """The d = 1 system: single root sqrt(2), reflection x -> -x."""
    return make_z2d(1, [kappa])


def make_general(roots: Sequence[Sequence[float]], kappa: Sequence[float],
                 normalize: bool = True) -> RootSystem:
    """System from an explicit positive-root list (numeric operations only).

    Roots are rescaled to |alpha|^2 = 2 when ``normalize`` is set.  The list
    must be closed under its own reflections up to sign, with multiplicities
    constant on reflection orbits; both conditions are checked (tolerance
    1e-10) and violations raise :class:`ValidationError`.
    """
    arr = np.array(roots, dtype=float)
    if arr.ndim != 2:
        raise ValidationError("roots must be a list of vectors")
    norms = np.linalg.norm(arr, axis=1)
    if np.any(norms == 0):
        raise ValidationError("zero vector is not a root")
    if normalize:
        arr = arr * (math.sqrt(2.0) / norms)[:, None]
    return RootSystem(dim=arr.shape[1], kind="general",
                      kappa=tuple(float(k) for k in kappa), roots=arr)


def _check_closure(roots: np.ndarray, kappa: Sequence[float]) -> None:
    """Verify closure under own reflections (mod sign) and kappa invariance.

    One sweep decides closure: reflecting a closed set in each of its own
    roots reproduces the set up to sign, so the first image that matches
    nothing is already a violation.  (Growing the orbit instead would blow
    up exponentially on junk input before any round cap could fire.)
    """
    m = len(roots)
    for i in range(m):
        if np.any(np.linalg.norm(roots[:i] - roots[i], axis=1) < INVARIANCE_TOL) or \
           np.any(np.linalg.norm(roots[:i] + roots[i], axis=1) < INVARIANCE_TOL):
            raise ValidationError(f"root {i} duplicates an earlier root up to sign")

    def match(img):
        for k in range(m):
            if np.linalg.norm(img - roots[k]) < INVARIANCE_TOL or \
               np.linalg.norm(img + roots[k]) < INVARIANCE_TOL:
                return k
        return -1

    for a in roots:
        for j in range(m):
            img = roots[j] - np.dot(roots[j], a) * a
            k = match(img)
            if k < 0:
                raise ValidationError(
                    "root set not closed under its reflections: image "
                    f"{img.tolist()} of root {j} matches no listed root"
                )
            if abs(kappa[k] - kappa[j]) > INVARIANCE_TOL:
                raise ValidationError(
                    f"multiplicity not reflection-invariant: roots {j} and {k} "
                    f"lie in one orbit but carry {kappa[j]} != {kappa[k]}"
                )


# -- functional aliases ------------------------------------------------------


def reflect(rs: RootSystem, root_index: int, x):
    """r_alpha applied to x; see :meth:`RootSystem.reflect`."""
    return rs.reflect(root_index, x)


def weight(rs: RootSystem, x):
    """Weight function at x; see :meth:`RootSystem.weight`."""
    return rs.weight(x)


# -- text config -------------------------------------------------------------
#
# Grammar (one assignment per line, # starts a comment):
#
#   config  := line*
#   line    := key '=' value | comment | blank
#   key     := 'dim' | 'kind' | 'kappa' | 'roots'
#   value   := Python literal (int, quoted string, list of numbers,
#              list of lists of numbers)
#
# 'dim', 'kind' and 'kappa' are required; 'roots' only for kind "general".

_ASSIGN_RE = re.compile(r"^(\s*)([A-Za-z_][A-Za-z0-9_]*)(\s*)=(.*)$")
_CONFIG_KEYS = ("dim", "kind", "kappa", "roots")


def parse_config(text: str) -> RootSystem:
    """Parse the structured text form of a root system.

    Parameters
    ----------
    text : str
        Assignments like ``dim = 2``, ``kind = "z2d"``, ``kappa = [0.5, 1.5]``.

    Returns
    -------
    RootSystem

    Raises
    ------
    ConfigError
        On malformed input, with 1-based ``line`` and ``column`` attributes.
    """
    seen: dict = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _ASSIGN_RE.match(raw)
        if m is None:
            col = len(raw) - len(raw.lstrip()) + 1
            raise ConfigError("expected 'key = value'", ln, col)
        indent, key, _, rhs = m.group(1), m.group(2), m.group(3), m.group(4)
        key_col = len(indent) + 1
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}", ln, key_col)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}", ln, key_col)
        val_col = m.start(4) + (len(rhs) - len(rhs.lstrip())) + 1
        body = rhs.split("#", 1)[0].strip()
        if not body:
            raise ConfigError(f"missing value for {key!r}", ln, val_col)
        try:
            value = ast.literal_eval(body)
        except (ValueError, SyntaxError):
            raise ConfigError(f"unparsable value for {key!r}", ln, val_col) from None
        seen[key] = (value, ln, val_col)

    for key in ("dim", "kind", "kappa"):
        if key not in seen:
            raise ConfigError(f"missing required key {key!r}", 1, 1)

    dim, (ln, col) = seen["dim"][0], seen["dim"][1:]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ConfigError("dim must be a positive integer", ln, col)
    kind, (ln, col) = seen["kind"][0], seen["kind"][1:]
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}", ln, col)
    kappa, (ln, col) = seen["kappa"][0], seen["kappa"][1:]
    if not isinstance(kappa, (list, tuple)) or \
            not all(isinstance(k, (int, float)) and not isinstance(k, bool) for k in kappa):
        raise ConfigError("kappa must be a list of numbers", ln, col)

    if kind == "general":
        if "roots" not in seen:
            raise ConfigError("kind \"general\" requires roots", 1, 1)
        roots, (ln, col) = seen["roots"][0], seen["roots"][1:]
        if not isinstance(roots, (list, tuple)) or \
                not all(isinstance(r, (list, tuple)) for r in roots):
            raise ConfigError("roots must be a list of vectors", ln, col)
        return make_general(roots, kappa)
    if "roots" in seen:
        _, (ln, col) = seen["roots"][0], seen["roots"][1:]
        raise ConfigError(f"roots not allowed for kind {kind!r}", ln, col)
    if kind == "rank_one" and dim != 1:
        raise ConfigError("kind \"rank_one\" requires dim = 1", 1, 1)
    return make_z2d(dim, kappa)


def format_config(rs: RootSystem) -> str:
    """Inverse of :func:`parse_config` on constructed systems."""
    lines = [
        f"dim = {rs.dim}",
        f'kind = "{rs.kind}"',
        f"kappa = [{', '.join(repr(k) for k in rs.kappa)}]",
    ]
    if rs.kind == "general":
        rows = ", ".join(
            "[" + ", ".join(repr(float(v)) for v in row) + "]" for row in rs.roots
        )
        lines.append(f"roots = [{rows}]")
    return "\n".join(lines) + "\n"
