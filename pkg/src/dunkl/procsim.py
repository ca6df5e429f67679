"""Monte Carlo side of the toolkit: the jump diffusion generated by the
Dunkl Laplacian, its radial companion in the positive chamber, and the
martingale diagnostics that tie simulated paths back to the heat flow.

Between mirror flips the process follows the Euler step

    x  ->  x + b(x) h + sqrt(2 h) Z,      b(x) = sum_a 2 kappa_a alpha_a / <alpha_a, x>,

with per-coordinate variance 2h; flips to r_a x arrive by thinning with
state-dependent rate lambda_a(x) = 2 kappa_a / <alpha_a, x>^2.  The substep
h shrinks adaptively so lambda(x) h never exceeds the configured cap, which
bounds the thinning bias; a path that would need h < 1e-12 to respect the
cap is stalled against a mirror, gets flagged, and is excluded from every
estimate (the exclusion is counted, never silent).

The inner loop lives in a compiled extension with a pure-Python mirror;
both consume identical RNG streams, so results do not depend on which one
is active (set DUNKL_PURE_PYTHON=1 to force the fallback).  Paths are
independent: work is chunked, each path owns a splitmix64 stream indexed
by its global path number, and chunk merges are associative, so estimates
are bit-stable under any thread count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .rootsys import RootSystem
from .numcalc import HYPERPLANE_EPS, DomainError, ScalarField
from .heatflow import QuadratureGrid, SemigroupEvaluator

if os.environ.get("DUNKL_PURE_PYTHON", "") not in ("", "0"):
    from . import _paths_py as _engine
else:
    try:
        from . import _paths as _engine
    except ImportError:
        from . import _paths_py as _engine

BACKEND = _engine.BACKEND

# flagged fraction at or above this marks the whole run as degraded
DEGRADED_FRACTION = 1e-3

_CHUNK = 32768


def _thread_count(threads: Optional[int]) -> int:
    if threads is None:
        threads = int(os.environ.get("DUNKL_THREADS", "1"))
    return max(1, threads)


@dataclass(frozen=True)
class SimConfig:
    """Run description: start point, horizon, base step, path count.

    The base step dt is the skeleton spacing; substeps shrink below it
    wherever the jump rate demands.  p_jump_max caps the per-substep jump
    probability.
    """

    x0: tuple
    T: float
    dt: float
    n: int
    seed: int = 0
    p_jump_max: float = 0.1

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if x0.ndim != 1 or x0.size < 1:
            raise DomainError("x0 must be a point (d,)")
        object.__setattr__(self, "x0", tuple(float(v) for v in x0))
        if not (self.T > 0.0):
            raise DomainError(f"horizon T must be positive, got {self.T}")
        if not (0.0 < self.dt <= self.T):
            raise DomainError(f"base step dt must lie in (0, T], got {self.dt}")
        if self.n < 1:
            raise DomainError(f"path count must be >= 1, got {self.n}")
        if not (0.0 < self.p_jump_max < 1.0):
            raise DomainError(
                f"p_jump_max must lie in (0, 1), got {self.p_jump_max}"
            )

    @property
    def dim(self) -> int:
        return len(self.x0)

    @property
    def n_base(self) -> int:
        return max(1, int(round(self.T / self.dt)))

    def times(self) -> np.ndarray:
        """Skeleton boundaries: 0, dt, 2 dt, ..., with the last pinned to T."""
        t = self.dt * np.arange(self.n_base + 1)
        t[-1] = self.T
        return t

    def echo(self) -> dict:
        return {
            "x0": list(self.x0), "T": self.T, "dt": self.dt, "n": self.n,
            "seed": self.seed, "p_jump_max": self.p_jump_max,
        }


@dataclass
class PathSample:
    """Skeletons, jump log, and diagnostics for a batch of paths.

    states is (n, K+1, d) on the boundaries of ``times`` (terminal-only
    runs carry a single row).  Each jump-log row is
    [path, time, root, pre_1..pre_d, post_1..post_d], where post is the
    mirror image of pre (exact sign flip for axis systems).  Flagged paths
    keep their skeleton frozen at the stall state so every array stays
    finite; they are excluded from statistics.

    The martingale/bracket accumulators are populated by
    :func:`attach_brackets` for the leading ``n_bracket`` paths; the
    bracket columns are running left-rule sums over ``slice_times``, so
    each row is nondecreasing.
    """

    times: np.ndarray
    states: np.ndarray
    jumps: np.ndarray
    flagged: np.ndarray
    diagnostics: dict
    slice_times: Optional[np.ndarray] = None
    martingale: Optional[np.ndarray] = None
    bracket_grad: Optional[np.ndarray] = None
    bracket_jump: Optional[np.ndarray] = None

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[2]

    @property
    def flagged_fraction(self) -> float:
        return float(np.mean(self.flagged))

    @property
    def degraded(self) -> bool:
        return self.flagged_fraction >= DEGRADED_FRACTION

    def bracket(self) -> np.ndarray:
        """Total <N>_T per accumulated path (gradient plus jump halves)."""
        if self.bracket_grad is None:
            raise DomainError(
                "no bracket accumulators attached; run attach_brackets first"
            )
        return self.bracket_grad[:, -1] + self.bracket_jump[:, -1]


def _axes_vector(rs: RootSystem) -> np.ndarray:
    """Axis index per root for coordinate systems, -1 for general roots.

    Nonnegative entries make the engine flip the coordinate exactly, so
    the involution and the jump-log invariant post = r(pre) are bitwise.
    """
    axes = np.full(rs.num_roots, -1, dtype=np.int64)
    if rs.is_axis_system:
        for i in range(rs.num_roots):
            axes[i] = int(np.argmax(np.abs(rs.roots[i])))
    return axes


def _check_start(cfg: SimConfig, rs: RootSystem, radial: bool) -> None:
    if cfg.dim != rs.dim:
        raise DomainError(
            f"x0 has dimension {cfg.dim}, the system is {rs.dim}-dimensional"
        )
    x0 = np.asarray(cfg.x0)
    if radial:
        if not rs.is_axis_system:
            raise DomainError(
                "the radial sampler covers rank-one and Z_2^d chambers only"
            )
        if float(np.min(x0)) <= HYPERPLANE_EPS:
            raise DomainError(
                "radial start must lie in the open chamber (all coordinates "
                f"positive), got {cfg.x0}"
            )
        return
    if float(np.linalg.norm(x0)) <= HYPERPLANE_EPS:
        raise DomainError("the process must not start from 0")
    if float(np.min(rs.min_hyperplane_dist(x0))) <= HYPERPLANE_EPS:
        raise DomainError(
            f"start {cfg.x0} lies on a mirror (distance below "
            f"{HYPERPLANE_EPS:g}); the jump rate is undefined there"
        )


def _chunk_ranges(n: int) -> list:
    return [(lo, min(lo + _CHUNK, n)) for lo in range(0, n, _CHUNK)]


def _run_full_chunk(cfg: SimConfig, rs: RootSystem, axes: np.ndarray,
                    stream: int, lo: int, hi: int, save_skeleton: bool):
    m = hi - lo
    d = cfg.dim
    n_base = cfg.n_base
    rows = (n_base + 1) if save_skeleton else 1
    jcap = max(1024, 8 * m)
    x0 = np.asarray(cfg.x0)
    roots = np.asarray(rs.roots, dtype=float)
    kappas = np.asarray(rs.kappa, dtype=float)
    while True:
        states = np.zeros((m, rows, d))
        flagged = np.zeros(m, dtype=np.uint8)
        jumps = np.empty((jcap, 3 + 2 * d))
        substeps = np.zeros(m, dtype=np.int64)
        capped = np.zeros(m, dtype=np.int64)
        minwall = np.full(m, np.inf)
        njumps = np.zeros(m, dtype=np.int64)
        total = _engine.run_paths(
            x0, cfg.T, cfg.dt, cfg.p_jump_max, cfg.seed, stream + lo, m,
            n_base, roots, kappas, axes, save_skeleton, states, flagged,
            jumps, substeps, capped, minwall, njumps,
        )
        if total >= 0:
            log = jumps[:total].copy()
            log[:, 0] += lo
            return states, flagged, log, substeps, capped, minwall, njumps
        # deterministic rerun with a roomier log: streams are per-path
        jcap *= 2


def simulate_path(cfg: SimConfig, rs: RootSystem, stream: int = 0,
                  save_skeleton: bool = True,
                  threads: Optional[int] = None) -> PathSample:
    """Run cfg.n paths of the full jump diffusion; skeletons on cfg.times().

    ``stream`` offsets the per-path RNG streams, so disjoint offsets give
    independent batches under one seed.  The result is identical for any
    thread count or backend.
    """
    _check_start(cfg, rs, radial=False)
    axes = _axes_vector(rs)
    ranges = _chunk_ranges(cfg.n)
    nt = _thread_count(threads)
    if nt > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=nt) as pool:
            parts = list(pool.map(
                lambda r: _run_full_chunk(cfg, rs, axes, stream, r[0], r[1],
                                          save_skeleton), ranges))
    else:
        parts = [_run_full_chunk(cfg, rs, axes, stream, lo, hi, save_skeleton)
                 for lo, hi in ranges]

    states = np.concatenate([p[0] for p in parts])
    flagged = np.concatenate([p[1] for p in parts]).astype(bool)
    jumps = np.concatenate([p[2] for p in parts])
    diag = {
        "backend": BACKEND,
        "seed": cfg.seed,
        "stream": stream,
        "substeps": np.concatenate([p[3] for p in parts]),
        "cap_activations": np.concatenate([p[4] for p in parts]),
        "min_wall_distance": np.concatenate([p[5] for p in parts]),
        "jump_counts": np.concatenate([p[6] for p in parts]),
    }
    times = cfg.times() if save_skeleton else np.array([cfg.T])
    return PathSample(times=times, states=states, jumps=jumps,
                      flagged=flagged, diagnostics=diag)


def _run_radial_chunk(cfg: SimConfig, rs: RootSystem, stream: int,
                      lo: int, hi: int, save_skeleton: bool):
    m = hi - lo
    d = cfg.dim
    n_base = cfg.n_base
    rows = (n_base + 1) if save_skeleton else 1
    kappas = np.asarray(rs.kappa, dtype=float)
    states = np.zeros((m, rows, d))
    flagged = np.zeros(m, dtype=np.uint8)
    substeps = np.zeros(m, dtype=np.int64)
    halvings = np.zeros(m, dtype=np.int64)
    minwall = np.full(m, np.inf)
    _engine.run_radial(np.asarray(cfg.x0), cfg.T, cfg.dt, cfg.seed,
                       stream + lo, m, n_base, kappas, save_skeleton,
                       states, flagged, substeps, halvings, minwall)
    return states, flagged, substeps, halvings, minwall


def simulate_radial(cfg: SimConfig, rs: RootSystem, stream: int = 0,
                    save_skeleton: bool = True,
                    threads: Optional[int] = None) -> PathSample:
    """Run the drifted diffusion in the closed positive chamber.

    Per-coordinate drift 2 kappa_i / x_i; proposals that exit the chamber
    are rejected with the step halved, which realizes the boundary
    reflection without inventing a teleport rule.  Axis systems only.
    """
    _check_start(cfg, rs, radial=True)
    ranges = _chunk_ranges(cfg.n)
    nt = _thread_count(threads)
    if nt > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=nt) as pool:
            parts = list(pool.map(
                lambda r: _run_radial_chunk(cfg, rs, stream, r[0], r[1],
                                            save_skeleton), ranges))
    else:
        parts = [_run_radial_chunk(cfg, rs, stream, lo, hi, save_skeleton)
                 for lo, hi in ranges]
    states = np.concatenate([p[0] for p in parts])
    flagged = np.concatenate([p[1] for p in parts]).astype(bool)
    diag = {
        "backend": BACKEND,
        "seed": cfg.seed,
        "stream": stream,
        "substeps": np.concatenate([p[2] for p in parts]),
        "halvings": np.concatenate([p[3] for p in parts]),
        "min_wall_distance": np.concatenate([p[4] for p in parts]),
        "jump_counts": np.zeros(cfg.n, dtype=np.int64),
    }
    times = cfg.times() if save_skeleton else np.array([cfg.T])
    return PathSample(times=times, states=states,
                      jumps=np.empty((0, 3 + 2 * cfg.dim)), flagged=flagged,
                      diagnostics=diag)


# -- martingale diagnostics ----------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryStats:
    """Summary of the Lemma-style martingale run.

    mean/var refer to N_T = f(X_T) - H_T f(x0); mean_bracket is the sample
    mean of <N>_T over the accumulated subset; bracket_flow is the same
    left-rule time discretization of 2 int_0^T H_s[Gamma(H_{T-s} f)](x0) ds
    evaluated by quadrature, so the Dynkin gap carries no discretization
    mismatch.  Standard errors are the usual n^{-1/2} estimators on the
    unflagged paths.
    """

    n: int
    n_used: int
    n_bracket: int
    mean_mart: float
    se_mart: float
    var_mart: float
    se_var: float
    mean_bracket: float
    se_bracket: float
    bracket_flow: float
    mean_terminal: float
    se_terminal: float
    semigroup_value: float
    diagnostics: dict = field(repr=False)

    @property
    def isometry_gap(self) -> float:
        """Relative gap between Var(N_T) and E<N>_T."""
        scale = max(abs(self.mean_bracket), 1e-300)
        return abs(self.var_mart - self.mean_bracket) / scale

    @property
    def dynkin_gap(self) -> float:
        """Relative gap between the sampled and quadrature bracket means."""
        scale = max(abs(self.bracket_flow), 1e-300)
        return abs(self.mean_bracket - self.bracket_flow) / scale


def _slice_rows(n_base: int, stride: Optional[int]) -> np.ndarray:
    if stride is None:
        stride = max(1, n_base // 48)
    rows = np.arange(0, n_base + 1, stride)
    if rows[-1] != n_base:
        rows = np.append(rows, n_base)
    return rows


def attach_brackets(sample: PathSample, f: ScalarField, cfg: SimConfig,
                    rs: RootSystem, ev: Optional[SemigroupEvaluator] = None,
                    n_bracket: Optional[int] = None,
                    stride: Optional[int] = None) -> SemigroupEvaluator:
    """Fill the martingale and bracket accumulators on a leading subset.

    For slice times s_k the rows become N_{s_k} = H_{T-s_k} f(X_{s_k}) -
    H_T f(x0) and the running trapezoid sums of 2 |grad H_{T-s} f|^2 and
    2 sum_a kappa_a delta_a^2 along each path (the s = T slice is exact:
    H_0 is the identity).  The subset size trades the kernel-evaluation
    cost per slice against the bracket standard error; the terminal
    statistics in martingale_stats always use every path.
    """
    if sample.states.shape[1] != cfg.n_base + 1:
        raise DomainError("bracket accumulation needs a skeleton run")
    nb = sample.n_paths if n_bracket is None else min(n_bracket, sample.n_paths)
    if ev is None:
        ev = SemigroupEvaluator(f, rs)
    rows = _slice_rows(cfg.n_base, stride)
    times = sample.times[rows]
    S = len(rows)
    T = cfg.T
    x0 = np.asarray(cfg.x0)
    h0 = float(ev.point_parts(np.array([T]), x0[None], need_grad=False,
                              need_refl=False)[0][0, 0])

    mart = np.empty((nb, S))
    bg = np.zeros((nb, S))
    bj = np.zeros((nb, S))
    prev = None
    for idx, k in enumerate(rows):
        tau = max(T - sample.times[k], 0.0)
        pts = sample.states[:nb, k, :]
        vals, grad_sq, jump_q = ev.gamma_split(np.array([tau]), pts)
        mart[:, idx] = vals[0] - h0
        if idx > 0:
            ds = times[idx] - times[idx - 1]
            bg[:, idx] = bg[:, idx - 1] + (prev[0] + grad_sq[0]) * ds
            bj[:, idx] = bj[:, idx - 1] + (prev[1] + jump_q[0]) * ds
        prev = (grad_sq[0], jump_q[0])
    sample.slice_times = times
    sample.martingale = mart
    sample.bracket_grad = bg
    sample.bracket_jump = bj
    return ev


def _flow_bracket(ev: SemigroupEvaluator, x0: np.ndarray, T: float,
                  times: np.ndarray) -> float:
    """Trapezoid quadrature of 2 int_0^T H_s[Gamma(H_{T-s} f)](x0) ds.

    Uses the same slice grid and rule as the sampled bracket, so the
    Dynkin comparison carries no discretization mismatch.  Below the
    kernel resolution time H_s is taken as the identity (exact at s = 0,
    an O(s) shortcut never reached by the default slice spacing);
    elsewhere the on-grid Gamma tensor goes through the kernel.
    """
    shape = ev.grid.shape
    pt = x0[None, :]
    vals = np.empty(len(times))
    for idx, s in enumerate(times):
        s = float(s)
        tau = max(T - s, 0.0)
        if s < ev.t_cross:
            vals[idx] = ev.gamma_at(np.array([tau]), pt)[0, 0]
        else:
            gam = ev.gamma_on_grid(tau).reshape(shape)
            vals[idx] = ev.apply_to_grid(s, gam, pt)[0, 0]
    return float(np.trapezoid(2.0 * vals, times))


def _variance_se(x: np.ndarray) -> float:
    """Standard error of the sample variance via the fourth moment."""
    n = len(x)
    c = x - x.mean()
    m2 = float(np.mean(c ** 2))
    m4 = float(np.mean(c ** 4))
    return math.sqrt(max(m4 - m2 ** 2, 0.0) / n)


def martingale_stats(f: ScalarField, cfg: SimConfig, rs: RootSystem,
                     grid: Optional[QuadratureGrid] = None,
                     n_bracket: int = 10000, stride: Optional[int] = None,
                     threads: Optional[int] = None) -> TrajectoryStats:
    """Simulate, accumulate, and cross-check the martingale structure.

    Reports mean and variance of N_T over all unflagged paths, the mean
    sampled bracket <N>_T over an unflagged subset, and the quadrature
    value of the same bracket started from x0.  Flagged paths never enter
    any estimate; their count rides along in the diagnostics, and the run
    is marked degraded when they exceed the documented fraction.
    """
    sample = simulate_path(cfg, rs, threads=threads)
    ev = SemigroupEvaluator(f, rs, grid)
    attach_brackets(sample, f, cfg, rs, ev=ev, n_bracket=n_bracket,
                    stride=stride)

    used = ~sample.flagged
    n_used = int(used.sum())
    if n_used < 2:
        raise DomainError(
            f"only {n_used} of {cfg.n} paths survived; the start point is "
            "too close to the mirror set for this configuration"
        )
    x0 = np.asarray(cfg.x0)
    h0 = float(ev.point_parts(np.array([cfg.T]), x0[None], need_grad=False,
                              need_refl=False)[0][0, 0])
    term = f.value(sample.states[:, -1, :])
    mart_T = term[used] - h0
    mean_mart = float(mart_T.mean())
    se_mart = float(mart_T.std(ddof=1) / math.sqrt(n_used))
    var_mart = float(mart_T.var(ddof=1))
    se_var = _variance_se(mart_T)

    nb = sample.martingale.shape[0]
    sub_used = used[:nb]
    qv = sample.bracket()[sub_used]
    mean_bracket = float(qv.mean())
    se_bracket = float(qv.std(ddof=1) / math.sqrt(len(qv)))
    flow = _flow_bracket(ev, x0, cfg.T, sample.slice_times)

    diag = {
        "backend": BACKEND,
        "flagged": int(cfg.n - n_used),
        "flagged_fraction": sample.flagged_fraction,
        "degraded": sample.degraded,
        "jumps_total": int(sample.diagnostics["jump_counts"].sum()),
        "jumps_per_path": float(sample.diagnostics["jump_counts"].mean()),
        "cap_activations": int(sample.diagnostics["cap_activations"].sum()),
        "min_wall_distance": float(
            sample.diagnostics["min_wall_distance"].min()),
        "substeps_mean": float(sample.diagnostics["substeps"].mean()),
        "slices": len(sample.slice_times),
        "stride_dt": float(np.max(np.diff(sample.slice_times))),
    }
    return TrajectoryStats(
        n=cfg.n, n_used=n_used, n_bracket=int(sub_used.sum()),
        mean_mart=mean_mart, se_mart=se_mart, var_mart=var_mart,
        se_var=se_var, mean_bracket=mean_bracket, se_bracket=se_bracket,
        bracket_flow=flow, mean_terminal=float(term[used].mean()),
        se_terminal=float(term[used].std(ddof=1) / math.sqrt(n_used)),
        semigroup_value=h0, diagnostics=diag,
    )


def mc_semigroup(f: ScalarField, t: float, x0, n: int, rs: RootSystem,
                 seed: int = 0, dt: Optional[float] = None,
                 threads: Optional[int] = None) -> tuple:
    """Monte Carlo estimate of H_t f(x0): (sample mean of f(X_t), SE).

    The only semigroup route available for general root systems; for axis
    systems it cross-checks the kernel quadrature.  The default base step
    t/250 keeps the Euler bias well under typical standard errors.
    """
    if not (t > 0.0):
        raise DomainError(f"time must be positive, got {t}")
    cfg = SimConfig(x0=tuple(np.atleast_1d(np.asarray(x0, float))), T=t,
                    dt=(t / 250.0 if dt is None else dt), n=n, seed=seed)
    sample = simulate_path(cfg, rs, save_skeleton=False, threads=threads)
    used = ~sample.flagged
    n_used = int(used.sum())
    if n_used < 2:
        raise DomainError(
            f"only {n_used} of {n} paths survived to t = {t}"
        )
    vals = f.value(sample.states[used, 0, :])
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_used))


# -- exports -------------------------------------------------------------------------


def export_paths_csv(sample: PathSample, dest) -> None:
    """Write skeleton rows and jump rows as CSV, sorted per path by time.

    Columns: path, time, x_1..x_d, jump_flag, root_index.  Skeleton rows
    carry jump_flag 0 and root_index -1; each jump contributes one row at
    its jump time with the post-flip state (pre = mirror image of post).
    """
    close = False
    if not hasattr(dest, "write"):
        dest = open(dest, "w", newline="")
        close = True
    try:
        w = csv.writer(dest, lineterminator="\n")
        d = sample.dim
        w.writerow(["path", "time"] + [f"x_{j + 1}" for j in range(d)]
                   + ["jump_flag", "root_index"])
        jlog = sample.jumps
        jptr = 0
        order = np.lexsort((jlog[:, 1], jlog[:, 0])) if len(jlog) else []
        jlog = jlog[order] if len(jlog) else jlog
        for p in range(sample.n_paths):
            rows = []
            for k, t in enumerate(sample.times):
                rows.append((float(t), 0, list(sample.states[p, k]), 0, -1))
            while jptr < len(jlog) and int(jlog[jptr, 0]) == p:
                r = jlog[jptr]
                rows.append((float(r[1]), 1, list(r[3 + d:3 + 2 * d]), 1,
                             int(r[2])))
                jptr += 1
            rows.sort(key=lambda row: (row[0], row[1]))
            for t, _, xs, flag, root in rows:
                w.writerow([p, f"{t:.12g}"] + [f"{v:.17g}" for v in xs]
                           + [flag, root])
    finally:
        if close:
            dest.close()


def stats_json(stats: TrajectoryStats, cfg: SimConfig,
               rs: RootSystem) -> str:
    """Serialize a stats report with the config echo the run came from."""
    payload = {
        "config": cfg.echo(),
        "system": {"kind": rs.kind, "dim": rs.dim,
                   "kappa": list(rs.kappa)},
        "backend": BACKEND,
        "estimates": {
            "mean_martingale": stats.mean_mart,
            "se_martingale": stats.se_mart,
            "var_martingale": stats.var_mart,
            "se_variance": stats.se_var,
            "mean_bracket": stats.mean_bracket,
            "se_bracket": stats.se_bracket,
            "bracket_flow": stats.bracket_flow,
            "isometry_gap": stats.isometry_gap,
            "dynkin_gap": stats.dynkin_gap,
            "mean_terminal": stats.mean_terminal,
            "se_terminal": stats.se_terminal,
            "semigroup_value": stats.semigroup_value,
        },
        "counts": {"n": stats.n, "n_used": stats.n_used,
                   "n_bracket": stats.n_bracket},
        "diagnostics": stats.diagnostics,
    }
    return json.dumps(payload, indent=2)
