"""Numeric operator routes pinned against the exact polynomial engine."""

from fractions import Fraction as F

import numpy as np
import pytest

from dunkl import polyx
from dunkl.numcalc import (
    AuditError,
    DomainError,
    GpParams,
    NumericError,
    QuadratureError,
    ScalarField,
    SingularityError,
    bump_field,
    check_lemma22,
    dunkl_grad_sq,
    dunkl_laplacian_num,
    field_from_spec,
    gamma2_definition,
    gamma2_explicit_rank1,
    gamma2_explicit_z2d,
    gamma_num,
    gaussian_field,
    gp_definition,
    gp_integral,
    poly_field,
    read_points_csv,
    write_results_csv,
)
from dunkl.rootsys import make_general, make_rank_one, make_z2d

X = polyx.Polynomial.variable

A2_ROOTS = [(1.0, -1.0, 0.0), (0.0, 1.0, -1.0), (1.0, 0.0, -1.0)]


def off_mirror_points(rng, n, d, floor=0.15):
    """Random points with every coordinate bounded away from the mirrors."""
    pts = rng.uniform(0.3, 1.8, size=(n, d)) * rng.choice([-1.0, 1.0], size=(n, d))
    assert np.abs(pts).min() >= floor
    return pts


def exact_at(poly, pts):
    return np.array([float(poly.eval_exact([F(v) for v in row])) for row in pts])


# -- ScalarField machinery ----------------------------------------------------


def test_fd_gradient_accuracy():
    f = ScalarField(fn=lambda x: np.exp(np.sin(x[:, 0]) + 0.5 * x[:, 1]), dim=2)
    pts = np.array([[0.3, -0.7], [1.2, 0.4]])
    g = f.gradient(pts)
    fx = f.value(pts)
    want = np.stack([np.cos(pts[:, 0]) * fx, 0.5 * fx], axis=1)
    assert np.max(np.abs(g - want)) < 1e-9


def test_fd_hessian_values_path():
    f = ScalarField(fn=lambda x: np.cos(x[:, 0] * x[:, 1]), dim=2)
    p = np.array([[0.6, -0.9]])
    H = f.hessian(p)[0]
    a, b = p[0]
    s, c = np.sin(a * b), np.cos(a * b)
    want = np.array([[-b * b * c, -s - a * b * c], [-s - a * b * c, -a * a * c]])
    assert np.max(np.abs(H - want)) < 1e-7
    assert H[0, 1] == H[1, 0]


def test_audit_catches_wrong_gradient():
    with pytest.raises(AuditError, match="gradient"):
        ScalarField(
            fn=lambda x: np.exp(-np.sum(x * x, axis=1)),
            grad=lambda x: -2.01 * x * np.exp(-np.sum(x * x, axis=1))[:, None],
            dim=2,
        )


def test_audit_catches_wrong_hessian():
    good = gaussian_field(1, a=1.0)
    with pytest.raises(AuditError, match="Hessian"):
        ScalarField(fn=good.fn, grad=good.grad,
                    hess=lambda x: 1.02 * good.hess(x), dim=1)


def test_audit_record_populated():
    f = gaussian_field(2, a=0.8)
    assert f.audit_record["points"] == 100
    assert f.audit_record["grad_worst_rel"] < 1e-6
    assert f.audit_record["hess_worst_rel"] < 1e-6


def test_point_and_batch_shapes():
    f = gaussian_field(3)
    p = np.array([0.2, -0.4, 1.0])
    batch = np.stack([p, 2 * p])
    assert np.isscalar(f.value(p)) or f.value(p).ndim == 0
    assert f.gradient(p).shape == (3,)
    assert f.hessian(p).shape == (3, 3)
    assert f.value(batch).shape == (2,)
    assert f.gradient(batch).shape == (2, 3)
    assert f.hessian(batch).shape == (2, 3, 3)
    assert f.value(batch)[0] == pytest.approx(f.value(p))


def test_field_validation():
    with pytest.raises(ValueError, match="dim"):
        ScalarField(fn=lambda x: x[:, 0], dim=0)
    with pytest.raises(ValueError, match="smoothness"):
        ScalarField(fn=lambda x: x[:, 0], dim=1, smoothness="C3")


# -- built-in families --------------------------------------------------------


def test_gaussian_values():
    f = gaussian_field(2, a=2.0, center=[1.0, -1.0], amplitude=3.0)
    assert f.value([1.0, -1.0]) == pytest.approx(3.0)
    assert f.value([2.0, -1.0]) == pytest.approx(3.0 * np.exp(-2.0))
    with pytest.raises(ValueError):
        gaussian_field(1, a=-1.0)
    with pytest.raises(ValueError):
        gaussian_field(2, center=[0.0])


def test_bump_support():
    f = bump_field(2, radius=1.5, amplitude=2.0)
    assert f.value([0.0, 0.0]) == pytest.approx(2.0 * np.exp(-1.0))
    assert f.value([1.5, 0.1]) == 0.0
    assert np.all(f.gradient([2.0, 0.0]) == 0.0)
    # smooth decay toward the support boundary
    assert f.value([1.49, 0.0]) < 1e-10


def test_poly_field_matches_exact():
    f = polyx.parse_polynomial("3/2 x1^2 x2 - 1 x2^3 + 2 x1")
    fld = poly_field(f)
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(20, 2))
    assert np.allclose(fld.value(pts), exact_at(f, pts), rtol=1e-12, atol=1e-12)
    g1 = fld.gradient(pts)[:, 0]
    assert np.allclose(g1, exact_at(f.partial(0), pts), rtol=1e-12, atol=1e-12)
    H01 = fld.hessian(pts)[:, 0, 1]
    assert np.allclose(H01, exact_at(f.partial(0).partial(1), pts), rtol=1e-12,
                       atol=1e-12)


def test_field_from_spec():
    g = field_from_spec("gaussian:a=2,c=0.5", 2)
    assert g.value([0.5, 0.5]) == pytest.approx(1.0)
    b = field_from_spec("bump:r=2", 1)
    assert b.value([0.0]) == pytest.approx(np.exp(-1.0))
    p = field_from_spec("poly:1 x1^2 - 2 x2", 2)
    assert p.value([3.0, 1.0]) == pytest.approx(7.0)
    one = field_from_spec("one", 3)
    assert np.all(one.value(np.zeros((4, 3))) == 1.0)
    with pytest.raises(ValueError, match="unknown field family"):
        field_from_spec("mexican_hat:a=1", 2)
    with pytest.raises(ValueError, match="bad field parameter"):
        field_from_spec("gaussian:a", 2)


# -- first-order operators vs the exact engine --------------------------------


@pytest.mark.parametrize("dim,kappa", [(1, [0.7]), (2, [0.5, 1.5]), (3, [0.3, 0.0, 2.0])])
def test_gamma_matches_exact(dim, kappa):
    rng = np.random.default_rng(101 + dim)
    rs = make_z2d(dim, kappa)
    kap = [F(k).limit_denominator(10) for k in kappa]
    for _ in range(3):
        f = polyx.random_polynomial(rng, dim, max_degree=5)
        exact = polyx.gamma(f, f, kap)
        pts = off_mirror_points(rng, 25, dim)
        got = gamma_num(poly_field(f), poly_field(f), pts, rs)
        want = exact_at(exact, pts)
        scale = 1.0 + np.abs(want)
        assert np.max(np.abs(got - want) / scale) < 1e-9


def test_gamma_two_arguments():
    rng = np.random.default_rng(55)
    rs = make_z2d(2, [0.5, 1.5])
    f = polyx.parse_polynomial("1 x1^3 - 2 x1 x2")
    g = polyx.parse_polynomial("1 x2^2 + 1/2 x1")
    exact = polyx.gamma(f, g, [F(1, 2), F(3, 2)])
    pts = off_mirror_points(rng, 15, 2)
    got = gamma_num(poly_field(f), poly_field(g), pts, rs)
    assert np.allclose(got, exact_at(exact, pts), rtol=1e-10, atol=1e-10)


def test_gamma_near_mirror_limit():
    rs = make_z2d(2, [0.5, 1.5])
    f = polyx.parse_polynomial("1 x1^3 - 2 x1 x2 + 1 x2^2")
    exact = polyx.gamma(f, f, [F(1, 2), F(3, 2)])
    # first coordinate below the 1e-6 switch: the quotient is replaced by its
    # directional-derivative limit, which must land within O(eps) of truth
    pts = np.array([[1e-9, 0.8], [0.0, -1.1], [1e-7, 0.5]])
    got = gamma_num(poly_field(f), poly_field(f), pts, rs)
    want = exact_at(exact, pts)
    assert np.max(np.abs(got - want)) < 1e-6


@pytest.mark.parametrize("dim,kappa", [(1, [0.7]), (3, [0.3, 0.0, 2.0])])
def test_dunkl_grad_sq_matches_exact(dim, kappa):
    rng = np.random.default_rng(31 + dim)
    rs = make_z2d(dim, kappa)
    kap = [F(k).limit_denominator(10) for k in kappa]
    f = polyx.random_polynomial(rng, dim, max_degree=4)
    grads = polyx.dunkl_gradient(f, kap)
    exact = polyx.Polynomial.zero(dim)
    for g in grads:
        exact = exact + g * g
    pts = off_mirror_points(rng, 20, dim)
    got = dunkl_grad_sq(poly_field(f), pts, rs)
    want = exact_at(exact, pts)
    assert np.max(np.abs(got - want) / (1.0 + np.abs(want))) < 1e-9


def test_grad_bound_constant():
    # |grad_k f|^2 <= (1 + 2 gamma) Gamma(f), the pointwise comparison the
    # square-function domination rests on
    rs = make_z2d(2, [0.6, 1.1])
    bound = 1.0 + 2.0 * rs.gamma
    rng = np.random.default_rng(99)
    pts = off_mirror_points(rng, 40, 2)
    for fld in (gaussian_field(2, a=0.7, center=[0.4, -0.2]),
                poly_field(polyx.parse_polynomial("1 x1^2 x2 - 1 x2"))):
        lhs = dunkl_grad_sq(fld, pts, rs)
        rhs = bound * gamma_num(fld, fld, pts, rs)
        assert np.all(lhs <= rhs * (1.0 + 1e-12) + 1e-12)


@pytest.mark.parametrize("dim,kappa", [(1, [0.5]), (2, [0.5, 1.5]), (3, [0.25, 1.0, 0.0])])
def test_laplacian_matches_exact(dim, kappa):
    rng = np.random.default_rng(17 + dim)
    rs = make_z2d(dim, kappa)
    kap = [F(k).limit_denominator(10) for k in kappa]
    f = polyx.random_polynomial(rng, dim, max_degree=5)
    exact = polyx.dunkl_laplacian(f, kap)
    pts = off_mirror_points(rng, 20, dim)
    got = dunkl_laplacian_num(poly_field(f), pts, rs)
    want = exact_at(exact, pts)
    assert np.max(np.abs(got - want) / (1.0 + np.abs(want))) < 1e-9


def test_laplacian_near_mirror_limit():
    rs = make_rank_one(0.8)
    f = polyx.parse_polynomial("1 x1^4 - 3 x1^2")
    exact = polyx.dunkl_laplacian(f, F(4, 5))
    pts = np.array([[1e-9], [0.0]])
    got = dunkl_laplacian_num(poly_field(f), pts, rs)
    want = exact_at(exact, pts)
    assert np.max(np.abs(got - want)) < 1e-6


def test_general_system_radial_identities():
    # |x|^2 is invariant under every reflection, so the difference part
    # degenerates and L |x|^2 = 2 d + 4 gamma exactly
    rs = make_general(A2_ROOTS, [0.4, 0.4, 0.4])
    f = ScalarField(
        fn=lambda x: np.sum(x * x, axis=1),
        grad=lambda x: 2.0 * x,
        hess=lambda x: np.broadcast_to(2.0 * np.eye(3), (len(x), 3, 3)).copy(),
        dim=3,
    )
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(12, 3)) + 0.1
    got = dunkl_laplacian_num(f, pts, rs)
    assert np.allclose(got, 2 * 3 + 4 * rs.gamma, rtol=1e-12)
    # Gamma(|x|^2) = 4 |x|^2: the reflection differences vanish identically
    gam = gamma_num(f, f, pts, rs)
    assert np.allclose(gam, 4.0 * np.sum(pts * pts, axis=1), rtol=1e-10)


# -- second-order forms --------------------------------------------------------


def test_gamma2_rank1_cubic():
    fld = poly_field(X(0, 1) ** 3)
    for kap in (0.0, 0.5, 1.5):
        for x in (0.4, -1.2, 2.0):
            got = gamma2_explicit_rank1(fld, [x], kap)
            assert got == pytest.approx((36.0 + 24.0 * kap) * x * x, rel=1e-12)


def test_gamma2_rank1_singularity():
    fld = poly_field(X(0, 1) ** 3)
    with pytest.raises(SingularityError, match="definition route"):
        gamma2_explicit_rank1(fld, [1e-8], 0.5)


def test_gamma2_rank1_matches_definition():
    rs = make_rank_one(0.9)
    fld = gaussian_field(1, a=0.6, center=[0.3])
    pts = np.array([[0.5], [-1.1], [2.0]])
    explicit = gamma2_explicit_rank1(fld, pts, 0.9)
    definition = gamma2_definition(fld, pts, rs)
    assert np.max(np.abs(explicit - definition) / (1.0 + np.abs(explicit))) < 1e-6


def test_gamma2_z2d_product_example():
    rs = make_z2d(2, [0.5, 1.5])
    fld = poly_field(X(0, 2) * X(1, 2))
    rng = np.random.default_rng(8)
    br = gamma2_explicit_z2d(fld, off_mirror_points(rng, 10, 2), rs)
    k1, k2 = 0.5, 1.5
    assert np.allclose(br.hess_sq, 2.0, rtol=1e-12)
    assert np.allclose(br.a_part, 4 * k1 + 4 * k2, rtol=1e-11)
    assert np.allclose(br.b2_part, 8 * k1 * k2, rtol=1e-11)
    assert np.allclose(br.total, 2.0 + 4 * k1 + 4 * k2 + 8 * k1 * k2, rtol=1e-11)


@pytest.mark.parametrize("dim,kappa", [(2, [F(1, 2), F(3, 2)]),
                                       (3, [F(1, 3), F(2), F(0)])])
def test_gamma2_z2d_matches_exact(dim, kappa):
    rng = np.random.default_rng(211 + dim)
    rs = make_z2d(dim, [float(k) for k in kappa])
    f = polyx.random_polynomial(rng, dim, max_degree=4)
    parts = polyx.gamma2_z2d_parts(f, kappa)
    pts = off_mirror_points(rng, 20, dim)
    br = gamma2_explicit_z2d(poly_field(f), pts, rs)
    for got, exact in ((br.hess_sq, parts.hess_sq), (br.a_part, parts.a_part),
                       (br.b2_part, parts.b2_part), (br.total, parts.total)):
        want = exact_at(exact, pts)
        assert np.max(np.abs(got - want) / (1.0 + np.abs(want))) < 1e-9


def test_gamma2_z2d_matches_definition():
    rs = make_z2d(2, [0.5, 1.5])
    fld = gaussian_field(2, a=0.5, center=[0.2, -0.4])
    pts = np.array([[0.7, 0.9], [-1.2, 0.5], [1.5, -1.5]])
    br = gamma2_explicit_z2d(fld, pts, rs)
    definition = gamma2_definition(fld, pts, rs)
    assert np.max(np.abs(br.total - definition) / (1.0 + np.abs(br.total))) < 1e-6


def test_gamma2_z2d_singularity():
    rs = make_z2d(2, [0.5, 1.5])
    fld = gaussian_field(2)
    with pytest.raises(SingularityError):
        gamma2_explicit_z2d(fld, [0.5, 1e-8], rs)


def test_gamma2_parts_nonnegative_float():
    # the decomposition is evaluated as weighted sums of squares, so the
    # curvature lower bound Gamma_2 >= ||Hess||^2 survives in floating point
    rng = np.random.default_rng(2024)
    for dim in (1, 2, 3, 4):
        rs = make_z2d(dim, rng.uniform(0.1, 2.0, size=dim))
        pts = off_mirror_points(rng, 200, dim)
        for _ in range(3):
            f = polyx.random_polynomial(rng, dim, max_degree=3)
            br = gamma2_explicit_z2d(poly_field(f), pts, rs)
            assert br.a_part.min() >= 0.0
            assert br.b2_part.min() >= 0.0
            assert np.all(br.total >= br.hess_sq)


# -- pseudo-gradient -----------------------------------------------------------


def test_gp_params_validation():
    with pytest.raises(ValueError, match=r"p must lie in \(1, 2\]"):
        GpParams(p=1.0)
    with pytest.raises(ValueError, match=r"p must lie"):
        GpParams(p=2.5)
    with pytest.raises(ValueError, match="8 quadrature nodes"):
        GpParams(p=1.5, nodes=4)


def test_gp_p2_equals_gamma():
    params = GpParams(p=2.0)
    for dim, kappa in ((1, [0.8]), (2, [0.5, 1.5])):
        rs = make_z2d(dim, kappa)
        fld = gaussian_field(dim, a=0.7, center=[0.3] * dim)
        rng = np.random.default_rng(4 + dim)
        pts = off_mirror_points(rng, 30, dim)
        gp = gp_definition(fld, pts, params, rs)
        gam = gamma_num(fld, fld, pts, rs)
        assert np.max(np.abs(gp - gam) / (1.0 + np.abs(gam))) < 1e-10


@pytest.mark.parametrize("p", [1.2, 1.5, 1.9])
def test_gp_definition_matches_integral(p):
    params = GpParams(p=p)
    for dim, kappa in ((1, [0.6]), (2, [0.5, 1.5])):
        rs = make_z2d(dim, kappa)
        fld = gaussian_field(dim, a=0.5, center=[0.4] * dim)
        rng = np.random.default_rng(40 + dim)
        pts = off_mirror_points(rng, 25, dim)
        a = gp_definition(fld, pts, params, rs)
        b = gp_integral(fld, pts, params, rs)
        assert np.max(np.abs(a - b) / (1.0 + np.abs(b))) < 1e-8
        assert np.all(a >= -1e-10)


def test_gp_domain_error_names_point():
    rs = make_z2d(2, [0.5, 0.5])
    fld = poly_field(polyx.parse_polynomial("1 x1", dim=2))  # positive only for x1 > 0
    with pytest.raises(DomainError, match="strictly positive"):
        gp_definition(fld, [1.0, 1.0], GpParams(p=1.5), rs)
    try:
        gp_definition(fld, [1.0, 1.0], GpParams(p=1.5), rs)
    except DomainError as e:
        assert "-1.0" in str(e)  # the reflected probe is the offender


def test_gp_zero_kappa_classical():
    rs = make_z2d(2, [0.0, 0.0])
    fld = gaussian_field(2, a=0.8, center=[0.5, 0.5])
    rng = np.random.default_rng(12)
    pts = off_mirror_points(rng, 20, 2)
    p = 1.4
    gp = gp_definition(fld, pts, GpParams(p=p), rs)
    g = fld.gradient(pts)
    want = (p - 1.0) * np.einsum("nj,nj->n", g, g)
    assert np.max(np.abs(gp - want) / (1.0 + np.abs(want))) < 1e-9


def test_gp_on_mirror_uses_directional_limit():
    # on the hyperplane itself the quotient [f(rx)-f(x)]/<a,x> tends to the
    # directional derivative, so G_p must keep the full reflection term
    rs = make_z2d(1, [0.5])
    fld = gaussian_field(1, a=0.8, center=[0.3])
    grad0 = fld.gradient(np.array([[0.0]]))[0]
    d = float(grad0 @ rs.roots[0])
    g2 = float(grad0[0]) ** 2
    for p in (1.3, 2.0):
        got = float(gp_integral(fld, [[0.0]], GpParams(p=p), rs)[0])
        want = (p - 1.0) * (g2 + 0.5 * d * d)
        assert abs(got - want) < 1e-12 * (1.0 + want)
    gam = float(gamma_num(fld, fld, [[0.0]], rs)[0])
    gp2 = float(gp_integral(fld, [[0.0]], GpParams(p=2.0), rs)[0])
    assert abs(gp2 - gam) < 1e-12


def test_gp_symmetric_field_drops_difference_term():
    # even Gaussian: f o r = f, the indicator gates the jump term to zero and
    # G_p collapses to (p-1)|grad f|^2 for every kappa
    rs = make_z2d(1, [1.3])
    fld = gaussian_field(1, a=1.0)
    pts = np.array([[0.6], [-1.4]])
    p = 1.3
    got = gp_integral(fld, pts, GpParams(p=p), rs)
    g = fld.gradient(pts)[:, 0]
    assert np.allclose(got, (p - 1.0) * g * g, rtol=1e-12)


def test_gp_quadrature_doubling_guard(monkeypatch):
    import dunkl.numcalc as nc

    real = nc._gl_nodes

    def corrupted(n):
        nodes, wts = real(n)
        if n == 128:
            wts = wts * (1.0 + 1e-5)
        return nodes, wts

    monkeypatch.setattr(nc, "_gl_nodes", corrupted)
    rs = make_z2d(1, [0.9])
    fld = gaussian_field(1, a=0.5, center=[0.7])
    with pytest.raises(QuadratureError, match="128 nodes"):
        gp_integral(fld, [[1.1]], GpParams(p=1.5, nodes=64), rs)


# -- comparison record ----------------------------------------------------------


@pytest.mark.parametrize("p", [1.2, 1.5, 2.0])
def test_lemma22_invariant_field_all_pass(p):
    # reflection-invariant f: difference terms vanish, both comparisons
    # degenerate to |grad f|^2 = |grad f|^2 and hold with equality
    for dim in (1, 2):
        rs = make_z2d(dim, [0.7] * dim)
        fld = gaussian_field(dim, a=0.6)
        rng = np.random.default_rng(77 + dim)
        pts = off_mirror_points(rng, 15, dim)
        rec = check_lemma22(fld, pts, p, rs)
        assert rec["pass"] is True
        assert np.all(rec["rhs_21"] >= -1e-10)
        assert rec["gp_orbit"].shape == (15, rs.num_roots)


@pytest.mark.parametrize("p", [1.2, 1.5, 2.0])
def test_lemma22_passes_where_orbit_increases(p):
    # on the side where f(x) <= f(r_alpha x) for every root, the s-integral
    # factor is <= 1/2 and the full record holds
    for dim in (1, 2):
        rs = make_z2d(dim, [0.7] * dim)
        fld = gaussian_field(dim, a=0.6, center=[0.4] * dim)
        rng = np.random.default_rng(30 + dim)
        pts = -np.abs(off_mirror_points(rng, 12, dim))  # negative orthant
        rec = check_lemma22(fld, pts, p, rs)
        assert rec["pass"] is True


def test_lemma22_orbit_and_sign_hold_even_when_domination_reverses():
    # on the strictly decreasing side of the orbit the lower comparison
    # (a) genuinely reverses for p < 2; the record must report it rather
    # than clip, while nonnegativity and the orbit bound (b) still hold
    rs = make_rank_one(0.7)
    fld = gaussian_field(1, a=0.6, center=[0.3])
    pts = np.array([[0.672], [1.5]])  # f(x) > f(-x) here
    rec = check_lemma22(fld, pts, 1.2, rs)
    assert rec["pass"] is False
    assert "failure_point" in rec
    assert np.all(rec["rhs_21"] > rec["lhs_21"])         # the reversal
    assert np.all(rec["rhs_21"] >= -1e-10)               # sign still holds
    assert np.all(rec["lhs_22"] <= rec["rhs_22"] + 1e-8)  # orbit bound holds
    # at p = 2 the same points pass: the comparison is an equality case
    assert check_lemma22(fld, pts, 2.0, rs)["pass"] is True


def test_lemma22_failure_is_reported(monkeypatch):
    import dunkl.numcalc as nc

    real = nc.gp_definition
    monkeypatch.setattr(nc, "gp_definition",
                        lambda f, x, params, rs: real(f, x, params, rs) + 10.0)
    rs = make_rank_one(0.8)
    fld = gaussian_field(1, a=0.5, center=[0.4])
    rec = nc.check_lemma22(fld, [[0.9]], 1.5, rs)
    assert rec["pass"] is False
    assert rec["failure_point"] == [0.9]
    assert "gp_orbit" in rec["failure_values"]


# -- error handling and CSV -----------------------------------------------------


def test_non_finite_value_reported():
    rs = make_rank_one(0.5)
    fld = ScalarField(
        fn=lambda x: np.where(x[:, 0] > -0.5, x[:, 0] ** 2, np.nan), dim=1
    )
    with pytest.raises(NumericError, match="non-finite"):
        gamma_num(fld, fld, [[-1.0]], rs)


def test_csv_roundtrip(tmp_path):
    pts = np.array([[0.25, -1.5], [2.0, 0.125]])
    src = tmp_path / "points.csv"
    src.write_text("x1,x2\n0.25,-1.5\n2.0,0.125\n")
    got = read_points_csv(src, dim=2)
    assert np.array_equal(got, pts)
    out = tmp_path / "vals.csv"
    write_results_csv(out, pts, {"gamma": np.array([1.0, 2.5])})
    back = read_points_csv(out)
    assert np.array_equal(back[:, :2], pts)
    assert np.array_equal(back[:, 2], [1.0, 2.5])


def test_csv_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("0.1,0.2\n0.3,oops\n")
    with pytest.raises(ValueError, match="row 2"):
        read_points_csv(bad)
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("0.1,0.2\n0.3\n")
    with pytest.raises(ValueError, match="inconsistent column counts"):
        read_points_csv(ragged)
    wrong = tmp_path / "wrong.csv"
    wrong.write_text("0.1,0.2\n")
    with pytest.raises(ValueError, match="expected 3 columns"):
        read_points_csv(wrong, dim=3)
    empty = tmp_path / "empty.csv"
    empty.write_text("# only a comment\n")
    with pytest.raises(ValueError, match="no data rows"):
        read_points_csv(empty)
