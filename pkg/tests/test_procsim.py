"""Path simulation: engine parity, moment laws, martingale diagnostics."""

import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

import dunkl.procsim as procsim
from dunkl import _paths_py
from dunkl.numcalc import DomainError, ScalarField, gaussian_field
from dunkl.procsim import (
    BACKEND,
    PathSample,
    SimConfig,
    TrajectoryStats,
    attach_brackets,
    export_paths_csv,
    martingale_stats,
    mc_semigroup,
    simulate_path,
    simulate_radial,
    stats_json,
)
from dunkl.rootsys import make_general, make_rank_one, make_z2d

RS1 = make_rank_one(1.0)
RS2 = make_z2d(2, [0.6, 0.9])

# equal-length dihedral system: closed, genuinely non-axis
_S = math.sqrt(2.0)
RSD = make_general([[_S, 0.0], [0.0, _S], [1.0, 1.0], [1.0, -1.0]],
                   (0.4, 0.4, 0.3, 0.3))


def xsq_field(dim):
    return ScalarField(fn=lambda p: np.sum(p ** 2, axis=1),
                       grad=lambda p: 2.0 * p, dim=dim,
                       name="|x|^2", audit=False)


def coord_field(dim):
    return ScalarField(fn=lambda p: p[:, 0], dim=dim,
                       grad=lambda p: np.tile(np.eye(dim)[0], (len(p), 1)),
                       name="x_1", audit=False)


# -- configuration validation -------------------------------------------------


def test_config_rejects_bad_inputs():
    good = dict(x0=(1.0,), T=1.0, dt=0.1, n=10)
    SimConfig(**good)
    with pytest.raises(DomainError):
        SimConfig(**{**good, "T": 0.0})
    with pytest.raises(DomainError):
        SimConfig(**{**good, "dt": 2.0})
    with pytest.raises(DomainError):
        SimConfig(**{**good, "dt": 0.0})
    with pytest.raises(DomainError):
        SimConfig(**{**good, "n": 0})
    with pytest.raises(DomainError):
        SimConfig(**{**good, "p_jump_max": 1.0})


def test_start_point_must_avoid_mirrors():
    cfg = SimConfig(x0=(0.0, 1.0), T=0.5, dt=0.01, n=4)
    with pytest.raises(DomainError):
        simulate_path(cfg, RS2)
    with pytest.raises(DomainError):
        simulate_path(SimConfig(x0=(1.0,), T=0.5, dt=0.01, n=4), RS2)


def test_radial_needs_axis_system_and_open_chamber():
    with pytest.raises(DomainError):
        simulate_radial(SimConfig(x0=(0.5, 0.5), T=0.2, dt=0.01, n=4), RSD)
    with pytest.raises(DomainError):
        simulate_radial(SimConfig(x0=(0.5, -0.5), T=0.2, dt=0.01, n=4), RS2)


def test_times_end_exactly_at_horizon():
    cfg = SimConfig(x0=(1.0,), T=0.37, dt=0.01, n=1)
    t = cfg.times()
    assert t[0] == 0.0 and t[-1] == 0.37
    assert len(t) == cfg.n_base + 1


# -- determinism and backend parity -------------------------------------------


def test_same_seed_reproduces_bitwise():
    cfg = SimConfig(x0=(0.8, 1.1), T=0.3, dt=0.01, n=60, seed=11)
    a = simulate_path(cfg, RS2)
    b = simulate_path(cfg, RS2)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.jumps, b.jumps)
    c = simulate_path(cfg, RS2, stream=60)
    assert not np.array_equal(a.states, c.states)


def test_chunking_and_threads_leave_results_unchanged(monkeypatch):
    cfg = SimConfig(x0=(0.8, 1.1), T=0.2, dt=0.01, n=50, seed=3)
    base = simulate_path(cfg, RS2)
    monkeypatch.setattr(procsim, "_CHUNK", 13)
    split = simulate_path(cfg, RS2, threads=3)
    assert np.array_equal(base.states, split.states)
    assert np.array_equal(base.jumps, split.jumps)
    assert np.array_equal(base.diagnostics["substeps"],
                          split.diagnostics["substeps"])


def _engine_case(eng, rs, x0, seed, n=60, n_base=25, dt=0.01, T=0.25):
    d = len(x0)
    axes = np.full(rs.num_roots, -1, dtype=np.int64)
    if rs.is_axis_system:
        for i in range(rs.num_roots):
            axes[i] = int(np.argmax(np.abs(rs.roots[i])))
    states = np.zeros((n, n_base + 1, d))
    flagged = np.zeros(n, np.uint8)
    jumps = np.empty((20000, 3 + 2 * d))
    subs = np.zeros(n, np.int64)
    caps = np.zeros(n, np.int64)
    mw = np.full(n, np.inf)
    nj = np.zeros(n, np.int64)
    tot = eng.run_paths(np.asarray(x0, float), T, dt, 0.1, seed, 0, n,
                        n_base, np.asarray(rs.roots, float),
                        np.asarray(rs.kappa, float), axes, True, states,
                        flagged, jumps, subs, caps, mw, nj)
    return states, flagged, jumps[:tot], subs, caps, mw, nj


@pytest.mark.skipif(BACKEND == "python", reason="only one engine present")
@pytest.mark.parametrize("rs,x0", [(RS1, [1.0]), (RS2, [0.8, 1.1]),
                                   (RSD, [0.9, 0.4])])
def test_backends_agree_bit_for_bit(rs, x0):
    from dunkl import _paths
    a = _engine_case(_paths, rs, x0, seed=12345)
    b = _engine_case(_paths_py, rs, x0, seed=12345)
    for u, v in zip(a, b):
        assert np.array_equal(u, v)


@pytest.mark.skipif(BACKEND == "python", reason="only one engine present")
def test_radial_backends_agree_bit_for_bit():
    from dunkl import _paths
    out = []
    for eng in (_paths, _paths_py):
        states = np.zeros((80, 26, 2))
        flagged = np.zeros(80, np.uint8)
        subs = np.zeros(80, np.int64)
        halv = np.zeros(80, np.int64)
        mw = np.full(80, np.inf)
        eng.run_radial(np.array([0.3, 0.3]), 0.25, 0.01, 7, 0, 80, 25,
                       np.asarray(RS2.kappa, float), True, states, flagged,
                       subs, halv, mw)
        out.append((states.copy(), flagged.copy(), subs.copy(),
                    halv.copy(), mw.copy()))
    for u, v in zip(out[0], out[1]):
        assert np.array_equal(u, v)


def test_pure_python_override_selects_fallback():
    code = ("import dunkl.procsim as p; print(p.BACKEND)")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, env={"PYTHONPATH": "src",
                                         "DUNKL_PURE_PYTHON": "1"})
    assert out.stdout.strip() == "python"


# -- moment laws ---------------------------------------------------------------


def test_zero_kappa_is_plain_brownian_motion():
    rs = make_z2d(2, [0.0, 0.0])
    cfg = SimConfig(x0=(0.4, -0.7), T=0.8, dt=0.004, n=20000, seed=21)
    s = simulate_path(cfg, rs, save_skeleton=False)
    assert s.flagged_fraction == 0.0
    assert s.diagnostics["jump_counts"].sum() == 0
    xT = s.states[:, -1, :]
    for j, x0j in enumerate(cfg.x0):
        m, v = xT[:, j].mean(), xT[:, j].var(ddof=1)
        se_m = xT[:, j].std(ddof=1) / math.sqrt(cfg.n)
        assert abs(m - x0j) < 3 * se_m
        # Var = 2T per coordinate; chi-square SE ~ v sqrt(2/n)
        assert abs(v - 2 * cfg.T) < 3 * v * math.sqrt(2.0 / cfg.n)


def test_second_moment_matches_generator_rate():
    # d/dt E|X_t|^2 = 2d + 4 sum kappa, exact for the generator
    cfg = SimConfig(x0=(1.0,), T=0.5, dt=0.002, n=40000, seed=42)
    s = simulate_path(cfg, RS1, save_skeleton=False)
    used = ~s.flagged
    x2 = s.states[used, -1, 0] ** 2
    exact = 1.0 + (2.0 + 4.0 * 1.0) * 0.5
    se = x2.std(ddof=1) / math.sqrt(used.sum())
    assert abs(x2.mean() - exact) < 3 * se
    assert s.flagged_fraction < 1e-3
    assert not s.degraded


def test_dt_refinement_stays_within_noise():
    vals = []
    for dt in (0.004, 0.002):
        cfg = SimConfig(x0=(1.0,), T=0.5, dt=dt, n=20000, seed=9)
        s = simulate_path(cfg, RS1, save_skeleton=False)
        used = ~s.flagged
        x2 = s.states[used, -1, 0] ** 2
        vals.append((x2.mean(), x2.std(ddof=1) / math.sqrt(used.sum())))
    (m1, s1), (m2, s2) = vals
    assert abs(m1 - m2) < 3 * math.hypot(s1, s2)


def test_jump_log_is_exact_mirror_data():
    cfg = SimConfig(x0=(0.8, 1.1), T=0.4, dt=0.01, n=300, seed=17)
    s = simulate_path(cfg, RS2)
    assert len(s.jumps) > 100
    d = 2
    for row in s.jumps:
        path, t, r = int(row[0]), row[1], int(row[2])
        pre, post = row[3:3 + d], row[3 + d:3 + 2 * d]
        assert 0 <= path < cfg.n and 0.0 < t <= cfg.T
        ref = np.asarray(RS2.reflect(r, pre))
        assert np.array_equal(ref, post)  # axis flips are exact


def test_general_system_jump_log_reflects():
    cfg = SimConfig(x0=(0.9, 0.4), T=0.4, dt=0.01, n=300, seed=23)
    s = simulate_path(cfg, RSD)
    assert len(s.jumps) > 100
    for row in s.jumps:
        r = int(row[2])
        pre, post = row[3:5], row[5:7]
        ref = np.asarray(RSD.reflect(r, pre))
        assert np.allclose(ref, post, rtol=0, atol=1e-14)


def test_jump_counts_match_thinning_rate():
    # paired per-path check of the thinning intensity: jumps whose pre
    # state lies in a window of bounded rate against the occupation sum
    # sum_k lambda(x_k) 1[x_k in window] dt on the same path (the window
    # keeps lambda = kappa / x^2 bounded; globally it has heavy tails)
    lo, hi = 0.5, 2.0
    cfg = SimConfig(x0=(1.0,), T=0.5, dt=0.001, n=20000, seed=31)
    s = simulate_path(cfg, RS1)
    used = ~s.flagged
    states = np.abs(s.states[used, :-1, 0])
    kap = RS1.kappa[0]
    inside = (states >= lo) & (states <= hi)
    expected = ((kap / states ** 2) * inside
                * np.diff(s.times)[None, :]).sum(axis=1)
    pre = np.abs(s.jumps[:, 3])
    sel = (pre >= lo) & (pre <= hi)
    observed = np.bincount(s.jumps[sel, 0].astype(int),
                           minlength=cfg.n)[used].astype(float)
    diff = observed - expected
    se = diff.std(ddof=1) / math.sqrt(len(diff))
    assert abs(diff.mean()) < 3 * se


# -- flagged paths -------------------------------------------------------------


def test_flagging_appears_at_critical_multiplicity():
    # kappa = 0.5 is the critical Bessel dimension: the true process
    # visits any neighbourhood of the wall with positive probability, so
    # a percent-level flagged fraction is the honest outcome and the run
    # must say degraded
    cfg = SimConfig(x0=(1.0,), T=1.0, dt=0.005, n=4000, seed=2)
    s = simulate_path(cfg, make_rank_one(0.5), save_skeleton=False)
    assert 0.01 < s.flagged_fraction < 0.12
    assert s.degraded
    # frozen skeletons keep every state finite
    assert np.isfinite(s.states).all()


def test_degraded_property_threshold():
    base = dict(times=np.array([0.0]), states=np.zeros((1000, 1, 1)),
                jumps=np.empty((0, 5)), diagnostics={})
    ok = PathSample(flagged=np.zeros(1000, bool), **base)
    assert not ok.degraded
    bad = PathSample(flagged=np.arange(1000) < 2, **base)
    assert bad.degraded


# -- radial sampler ------------------------------------------------------------


def test_radial_zero_kappa_is_reflected_brownian():
    rs = make_rank_one(0.0)
    cfg = SimConfig(x0=(0.7,), T=0.5, dt=0.002, n=30000, seed=13)
    s = simulate_radial(cfg, rs, save_skeleton=False)
    x = s.states[~s.flagged, -1, 0]
    assert (x > 0).all()
    # |N(x0, 2T)| moments
    mu, sig = 0.7, math.sqrt(2 * 0.5)
    z = mu / sig
    folded_mean = (sig * math.sqrt(2 / math.pi) * math.exp(-z * z / 2)
                   + mu * math.erf(z / math.sqrt(2)))
    se = x.std(ddof=1) / math.sqrt(len(x))
    assert abs(x.mean() - folded_mean) < 3 * se
    x2se = (x ** 2).std(ddof=1) / math.sqrt(len(x))
    assert abs((x ** 2).mean() - (mu * mu + sig * sig)) < 3 * x2se


def test_radial_matches_full_process_modulus():
    cfg = SimConfig(x0=(1.0,), T=0.5, dt=0.002, n=30000, seed=19)
    rad = simulate_radial(cfg, RS1, save_skeleton=False)
    full = simulate_path(cfg, RS1, save_skeleton=False)
    a = rad.states[~rad.flagged, -1, 0] ** 2
    b = full.states[~full.flagged, -1, 0] ** 2
    se = math.hypot(a.std(ddof=1) / math.sqrt(len(a)),
                    b.std(ddof=1) / math.sqrt(len(b)))
    assert abs(a.mean() - b.mean()) < 3 * se


def test_radial_stays_in_chamber_without_blowups():
    # regression: the uncapped Euler drift 2 kappa / x once hurled a
    # near-wall path to |x| ~ 40 in one substep
    cfg = SimConfig(x0=(1.0,), T=0.5, dt=0.002, n=50000, seed=11)
    s = simulate_radial(cfg, RS1, save_skeleton=False)
    x = s.states[~s.flagged, -1, 0]
    assert (x > 0).all()
    assert x.max() < 15.0
    se = (x ** 2).std(ddof=1) / math.sqrt(len(x))
    assert abs((x ** 2).mean() - 4.0) < 3 * se


# -- martingale diagnostics ----------------------------------------------------


@pytest.fixture(scope="module")
def mart_run():
    f = gaussian_field(1, a=1.0, center=[0.5])
    cfg = SimConfig(x0=(1.0,), T=0.5, dt=0.002, n=6000, seed=42)
    stats = martingale_stats(f, cfg, RS1, n_bracket=1500, stride=10)
    return cfg, stats


def test_martingale_mean_vanishes(mart_run):
    _, st = mart_run
    assert abs(st.mean_mart) < 3.5 * st.se_mart
    assert st.semigroup_value > 0
    assert st.n_used == st.n


def test_ito_isometry_within_noise(mart_run):
    _, st = mart_run
    # 5 percent is the production claim at n = 1e5; at this size the
    # variance estimate alone carries ~2.5 percent of noise
    assert st.isometry_gap < 0.10
    assert st.mean_bracket > 0


def test_dynkin_quadrature_agrees(mart_run):
    _, st = mart_run
    assert st.dynkin_gap < 0.05
    assert st.bracket_flow > 0


def test_bracket_paths_are_nondecreasing():
    f = gaussian_field(1, a=1.0, center=[0.5])
    cfg = SimConfig(x0=(1.0,), T=0.3, dt=0.01, n=200, seed=5)
    sample = simulate_path(cfg, RS1)
    attach_brackets(sample, f, cfg, RS1, n_bracket=50, stride=5)
    qv = sample.bracket_grad + sample.bracket_jump
    assert (np.diff(qv, axis=1) >= -1e-15).all()
    assert np.allclose(sample.martingale[:, 0], 0.0, atol=1e-12)
    assert (qv[:, -1] == sample.bracket()).all()


def test_stats_json_round_trips(mart_run):
    cfg, st = mart_run
    doc = json.loads(stats_json(st, cfg, RS1))
    assert doc["config"]["n"] == cfg.n
    assert doc["config"]["seed"] == cfg.seed
    assert doc["backend"] == BACKEND
    assert doc["counts"]["n_used"] == st.n_used
    est = doc["estimates"]
    assert est["var_martingale"] == st.var_mart
    assert est["isometry_gap"] == st.isometry_gap
    assert "flagged_fraction" in doc["diagnostics"]


# -- semigroup by Monte Carlo --------------------------------------------------


def test_mc_semigroup_constant_is_exact():
    one = ScalarField(fn=lambda p: np.ones(len(p)), dim=1, name="one",
                      audit=False)
    mean, se = mc_semigroup(one, 0.5, (1.0,), 500, RS1, seed=1)
    assert mean == 1.0 and se == 0.0


def test_mc_semigroup_coordinate_is_harmonic():
    # D_xi x = 0 in mean: the first coordinate is harmonic for the
    # generator, so E[X_t] = x0
    mean, se = mc_semigroup(coord_field(1), 0.6, (1.1,), 30000, RS1, seed=8)
    assert abs(mean - 1.1) < 3 * se


def test_mc_semigroup_square_moment_rate():
    mean, se = mc_semigroup(xsq_field(1), 1.0, (1.0,), 30000, RS1, seed=4)
    assert abs(mean - (1.0 + 6.0)) < 3 * se


def test_mc_semigroup_critical_kappa_censoring():
    # at kappa = 1/2 the exact value is x0^2 + (2 + 4 kappa) t = 5; the
    # flag-and-exclude rule censors the paths that sink toward the wall,
    # so the estimate sits above the true value by a documented margin
    mean, se = mc_semigroup(xsq_field(1), 1.0, (1.0,), 20000,
                            make_rank_one(0.5), seed=3)
    assert mean > 5.0 - 3 * se
    assert mean - 5.0 < 0.35


# -- exports -------------------------------------------------------------------


def test_csv_export_has_skeleton_and_jump_rows():
    cfg = SimConfig(x0=(0.8, 1.1), T=0.2, dt=0.02, n=25, seed=5)
    s = simulate_path(cfg, RS2)
    buf = io.StringIO()
    export_paths_csv(s, buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0] == "path,time,x_1,x_2,jump_flag,root_index"
    assert len(lines) - 1 == 25 * (cfg.n_base + 1) + len(s.jumps)
    prev = {}
    njump = 0
    for ln in lines[1:]:
        cells = ln.split(",")
        p, t = int(cells[0]), float(cells[1])
        flag, root = int(cells[-2]), int(cells[-1])
        assert t >= prev.get(p, 0.0) - 1e-15  # per-path time order
        prev[p] = t
        if flag:
            njump += 1
            assert root >= 0
        else:
            assert root == -1
    assert njump == len(s.jumps)


def test_csv_export_to_file(tmp_path):
    cfg = SimConfig(x0=(1.0,), T=0.1, dt=0.05, n=3, seed=1)
    s = simulate_path(cfg, RS1)
    dest = tmp_path / "paths.csv"
    export_paths_csv(s, str(dest))
    rows = dest.read_text().strip().split("\n")
    assert rows[0].startswith("path,time,x_1")
    assert len(rows) == 1 + 3 * 3 + len(s.jumps)
