import math

import numpy as np
import pytest

from dunkl.rootsys import (
    ConfigError,
    ValidationError,
    format_config,
    make_general,
    make_rank_one,
    make_z2d,
    parse_config,
    reflect,
    weight,
)

RNG = np.random.default_rng(20260819)


def random_off_wall_points(rs, n, scale=2.0):
    pts = RNG.uniform(-scale, scale, size=(n, rs.dim))
    keep = rs.min_hyperplane_dist(pts) > 1e-3
    return pts[keep]


# -- construction ------------------------------------------------------------


def test_make_z2d_rank_one_kind():
    rs = make_z2d(1, [0.7])
    assert rs.kind == "rank_one"
    assert rs.dim == 1
    assert rs.gamma == pytest.approx(0.7)


def test_make_z2d_zero_kappa_classical():
    rs = make_z2d(2, [0.0, 0.0])
    assert rs.gamma == 0.0
    pts = RNG.normal(size=(50, 2))
    assert np.allclose(rs.weight(pts), 1.0)


def test_make_z2d_gamma_sum():
    rs = make_z2d(3, [0.5, 1, 2])
    assert rs.gamma == pytest.approx(3.5)


def test_negative_multiplicity_rejected():
    with pytest.raises(ValidationError):
        make_z2d(2, [0.5, -0.1])


def test_root_norms():
    rs = make_z2d(4, [0.1, 0.2, 0.3, 0.4])
    norms = np.sum(rs.roots**2, axis=1)
    assert np.all(np.abs(norms - 2.0) < 1e-12)


def test_roots_are_read_only():
    rs = make_z2d(2, [1.0, 2.0])
    with pytest.raises(ValueError):
        rs.roots[0, 0] = 3.0


# -- reflections --------------------------------------------------------------


def test_reflect_flips_coordinate():
    rs = make_z2d(2, [1.0, 1.0])
    assert np.array_equal(reflect(rs, 0, [3.0, 5.0]), [-3.0, 5.0])


def test_reflect_fixes_hyperplane():
    rs = make_z2d(2, [1.0, 1.0])
    x = np.array([0.0, 4.0])
    assert np.array_equal(reflect(rs, 0, x), x)


def test_reflect_involution_exact():
    rs = make_z2d(3, [0.5, 1.5, 2.0])
    pts = RNG.normal(size=(100, 3))
    for i in range(3):
        twice = rs.reflect(i, rs.reflect(i, pts))
        assert np.array_equal(twice, pts)


def test_reflect_batch_matches_single():
    rs = make_z2d(2, [0.5, 1.5])
    pts = RNG.normal(size=(10, 2))
    batch = rs.reflect(1, pts)
    for row, ref in zip(pts, batch):
        assert np.array_equal(rs.reflect(1, row), ref)


def a2_system(kappa=1.0):
    # type-A roots e_i - e_j in R^3 are already of squared norm 2
    roots = [[1, -1, 0], [1, 0, -1], [0, 1, -1]]
    return make_general(roots, [kappa] * 3)


def test_general_reflect_isometry():
    rs = a2_system()
    x = RNG.normal(size=(40, 3))
    y = RNG.normal(size=(40, 3))
    for i in range(rs.num_roots):
        lhs = np.linalg.norm(rs.reflect(i, x) - rs.reflect(i, y), axis=1)
        rhs = np.linalg.norm(x - y, axis=1)
        assert np.all(np.abs(lhs - rhs) < 1e-12)


def test_general_reflect_involution():
    rs = a2_system()
    pts = RNG.normal(size=(40, 3))
    for i in range(rs.num_roots):
        twice = rs.reflect(i, rs.reflect(i, pts))
        assert np.allclose(twice, pts, atol=1e-14)


# -- weight --------------------------------------------------------------------


def test_weight_rank_one_value():
    # kappa = 1 at x = 1: |sqrt(2)*1|^2 = 2
    rs = make_rank_one(1.0)
    assert rs.weight(np.array([1.0])) == pytest.approx(2.0)


def test_weight_homogeneity():
    rs = make_z2d(3, [0.5, 1.0, 0.25])
    pts = random_off_wall_points(rs, 200)
    ratio = rs.weight(2.0 * pts) / rs.weight(pts)
    assert np.allclose(ratio, 2.0 ** (2 * rs.gamma), rtol=1e-12)


def test_weight_reflection_invariant():
    for rs in (make_z2d(3, [0.5, 1.0, 2.0]), a2_system(0.7)):
        pts = random_off_wall_points(rs, 200)
        w = rs.weight(pts)
        for i in range(rs.num_roots):
            wr = rs.weight(rs.reflect(i, pts))
            assert np.all(np.abs(wr - w) <= 1e-12 * np.abs(w))


def test_weight_vanishes_on_wall():
    rs = make_z2d(2, [0.5, 0.0])
    assert rs.weight(np.array([0.0, 3.0])) == 0.0
    # zero multiplicity on axis 2: no blowup, no zero from that factor
    assert rs.weight(np.array([1.0, 0.0])) > 0.0


# -- general-kind validation -----------------------------------------------------


def test_general_closure_accepts_dihedral():
    c = math.cos(math.pi / 4)
    roots = [[1, 0], [c, c], [0, 1], [-c, c]]
    rs = make_general(roots, [0.3, 0.7, 0.3, 0.7])
    assert rs.num_roots == 4
    assert rs.gamma == pytest.approx(2.0)


def test_general_closure_rejects_open_set():
    with pytest.raises(ValidationError, match="not closed"):
        make_general([[1, 0], [math.cos(math.pi / 4), math.sin(math.pi / 4)]],
                     [1.0, 1.0])


def test_general_rejects_orbit_kappa_mismatch():
    c = math.cos(math.pi / 4)
    roots = [[1, 0], [c, c], [0, 1], [-c, c]]
    # axes {0, 2} form one orbit; giving them different kappas must fail
    with pytest.raises(ValidationError, match="invariant"):
        make_general(roots, [0.3, 0.7, 0.4, 0.7])


def test_general_rejects_duplicate_roots():
    with pytest.raises(ValidationError, match="duplicates"):
        make_general([[1, 0], [-1, 0]], [1.0, 1.0])


# -- config round trip -------------------------------------------------------------


def test_parse_config_documented_form():
    rs = parse_config('dim = 2\nkind = "z2d"\nkappa = [0.5, 1.5]\n')
    assert rs.kind == "z2d"
    assert rs.dim == 2
    assert rs.kappa == (0.5, 1.5)


def test_config_round_trip_z2d():
    rs = make_z2d(3, [0.5, 0.0, 2.25])
    back = parse_config(format_config(rs))
    assert back.kind == rs.kind
    assert back.kappa == rs.kappa
    assert np.array_equal(back.roots, rs.roots)


def test_config_round_trip_general():
    rs = a2_system(0.75)
    back = parse_config(format_config(rs))
    assert back.kind == "general"
    assert np.allclose(back.roots, rs.roots, atol=1e-15)
    assert back.kappa == rs.kappa


def test_config_comments_and_blanks():
    text = "# weights\n\ndim = 1\nkind = \"rank_one\"\nkappa = [1.0]  # one root\n"
    rs = parse_config(text)
    assert rs.kind == "rank_one"


def test_config_error_positions():
    with pytest.raises(ConfigError) as err:
        parse_config('dim = 2\nkind "z2d"\nkappa = [0.5, 1.5]\n')
    assert err.value.line == 2
    assert err.value.column == 1

    with pytest.raises(ConfigError) as err:
        parse_config('dim = 2\nkind = "z2d"\nkappa = [0.5, oops]\n')
    assert err.value.line == 3
    assert err.value.column == 9

    with pytest.raises(ConfigError) as err:
        parse_config('dim = 2\nsize = 3\n')
    assert (err.value.line, err.value.column) == (2, 1)


def test_config_missing_key():
    with pytest.raises(ConfigError, match="missing required key"):
        parse_config("dim = 2\nkappa = [1.0, 1.0]\n")


def test_config_duplicate_key():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config('dim = 2\ndim = 3\nkind = "z2d"\nkappa = [1, 1]\n')


def test_config_rejects_bad_types():
    with pytest.raises(ConfigError, match="dim"):
        parse_config('dim = 2.5\nkind = "z2d"\nkappa = [1, 1]\n')
    with pytest.raises(ConfigError, match="kind"):
        parse_config('dim = 2\nkind = "weird"\nkappa = [1, 1]\n')
    with pytest.raises(ConfigError, match="roots"):
        parse_config('dim = 2\nkind = "z2d"\nkappa = [1, 1]\nroots = [[1, 0]]\n')


def test_weight_function_alias():
    rs = make_z2d(2, [0.5, 1.5])
    pts = RNG.normal(size=(5, 2))
    assert np.array_equal(weight(rs, pts), rs.weight(pts))
