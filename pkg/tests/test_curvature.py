import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bakry_emery.curvature import (
    bakry_emery_at,
    bakry_emery_tensor,
    cd_check,
    conformal_curvature_check,
    conformal_identity_check,
    curvature_at,
    weighted_curvature_check,
)
from bakry_emery.scenario import random_direction
from bakry_emery.spacetime import (
    SyntheticDimension,
    anti_de_sitter,
    build_spacetime,
    de_sitter,
    einstein_static,
    minkowski,
    minkowski_with_f,
    twisted_product,
    warped_product,
)
from oracles import fd_christoffel, fd_hessian, fd_riemann

MODELS = {
    "minkowski_with_f": minkowski_with_f(4, "0.3*t + 0.2*x*y + 0.1*sin(z)"),
    "de_sitter": de_sitter(4, "0.2*t + 0.1*cos(chi)"),
    "anti_de_sitter": anti_de_sitter(4, "0.1*t*x + 0.2*y"),
    "einstein_static": einstein_static(4, "0.3*sin(t)"),
    "warped": warped_product(4, "0.5*t + 0.2*t*t"),
    "warped_round3": warped_product(3, "0.4*t", base="round"),
    "twisted": twisted_product(4, "t*y1 + 0.2*y2*y3"),
}

unit = st.floats(0.0, 1.0)


def _point(model, fractions):
    lo = np.array([a for a, _ in model.domain_hint])
    hi = np.array([b for _, b in model.domain_hint])
    return lo + (hi - lo) * (0.2 + 0.6 * np.array(fractions))


@pytest.mark.parametrize("name", sorted(MODELS))
def test_riemann_matches_finite_difference_oracle(name):
    model = MODELS[name]
    p = _point(model, np.full(model.n, 0.4))
    cb = curvature_at(model, p)
    assert np.allclose(cb.christoffel, fd_christoffel(model, p), atol=1e-9)
    assert np.allclose(cb.riemann, fd_riemann(model, p), atol=1e-6)


@pytest.mark.parametrize("name", sorted(MODELS))
def test_hessian_of_potential(name):
    model = MODELS[name]
    p = _point(model, np.full(model.n, 0.6))
    cb = curvature_at(model, p)
    ddf = fd_hessian(model.potential.value, p)
    hess = ddf - np.einsum("kij,k->ij", fd_christoffel(model, p), cb.df)
    assert np.allclose(cb.hess_f, hess, atol=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(sorted(MODELS)), st.lists(unit, min_size=4, max_size=4))
def test_riemann_symmetries(name, fr):
    model = MODELS[name]
    cb = curvature_at(model, _point(model, fr[: model.n]))
    R = cb.riemann_lowered()
    assert np.allclose(R, -np.swapaxes(R, 2, 3), atol=1e-10)
    assert np.allclose(R, -np.swapaxes(R, 0, 1), atol=1e-10)
    assert np.allclose(R, np.transpose(R, (2, 3, 0, 1)), atol=1e-10)
    bianchi = R + np.transpose(R, (0, 2, 3, 1)) + np.transpose(R, (0, 3, 1, 2))
    assert np.max(np.abs(bianchi)) < 1e-10
    assert np.allclose(cb.ricci, cb.ricci.T, atol=1e-10)


@pytest.mark.parametrize("model,k", [(de_sitter(4), 3.0), (anti_de_sitter(4), -3.0), (de_sitter(3), 2.0)])
def test_einstein_constants(model, k):
    p = _point(model, np.full(model.n, 0.3))
    cb = curvature_at(model, p)
    assert np.allclose(cb.ricci, k * cb.g, atol=1e-10)


def test_einstein_static_ricci():
    model = einstein_static(4)
    cb = curvature_at(model, _point(model, [0.5, 0.4, 0.4, 0.4]))
    spatial = cb.g.copy()
    spatial[0, 0] = 0.0
    assert np.allclose(cb.ricci, 2.0 * spatial, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(sorted(MODELS)), st.lists(unit, min_size=4, max_size=4),
       st.sampled_from(["timelike", "null"]),
       st.one_of(st.none(), st.floats(-20, 20).filter(lambda v: min(abs(v - 3), abs(v - 4)) > 0.05)),
       st.integers(0, 2**31))
def test_trace_identity_property(name, fr, mode, N, seed):
    model = MODELS[name]
    n = model.n
    p = _point(model, fr[:n])
    v = random_direction(model, p, np.random.default_rng(seed), mode, 2.0)
    if N is not None and abs(N - n) < 0.05:
        N = None
    ND = SyntheticDimension.parse(N, n)
    be = bakry_emery_at(model, p, v, ND)
    assert be.trace_identity_residual < 1e-8 * max(1.0, abs(be.trace_identity_rhs))


def test_bakry_emery_tensor_formula():
    model = MODELS["minkowski_with_f"]
    p = np.array([0.1, 0.2, 0.3, 0.4])
    cb = curvature_at(model, p)
    for N in (1.0, -5.0, 6.0):
        expect = cb.ricci + cb.hess_f + np.outer(cb.df, cb.df) / (4 - N)
        assert np.allclose(bakry_emery_tensor(cb, SyntheticDimension.finite(N, 4)), expect)
    assert np.allclose(bakry_emery_tensor(cb, SyntheticDimension.infinite(4)), cb.ricci + cb.hess_f)


@pytest.mark.parametrize("name", sorted(MODELS))
def test_weighted_connection_curvature(name):
    model = MODELS[name]
    r = weighted_curvature_check(model, _point(model, np.full(model.n, 0.45)))
    assert r["riemann"] < 1e-9
    assert r["ricci_vs_ric_f_1"] < 1e-9


@pytest.mark.parametrize("name", sorted(MODELS))
def test_conformal_connection_is_rescaled_levi_civita(name):
    model = MODELS[name]
    r = conformal_curvature_check(model, _point(model, np.full(model.n, 0.55)))
    assert r["christoffel_vs_metric"] < 1e-10
    assert r["connection_vs_metric"] < 1e-9
    assert r["formula_vs_metric"] < 1e-9


def test_literal_conformal_coefficient_fails_when_df_nonzero():
    model = minkowski_with_f(4, "0.5*t + 0.3*x")
    r = conformal_identity_check(model, [0.1, 0.2, 0.3, 0.4])
    # |df|^2 = -0.25 + 0.09; the two coefficients differ by 2|df|^2/(n-2) times g
    assert r["full"] < 1e-12
    assert r["full_literal"] == pytest.approx(abs(2 * (-0.25 + 0.09) / 2), rel=1e-9)


def test_cd_check_flat_holds_and_is_seeded():
    inf = SyntheticDimension.infinite(4)
    a = cd_check(minkowski(4), "TCD", inf, points=5, seed=3)
    b = cd_check(minkowski(4), "TCD", inf, points=5, seed=3)
    assert a.verdict == "holds" and a.min_value == 0.0
    assert a.to_dict() == b.to_dict()


def test_ncd_on_de_sitter_is_zero():
    r = cd_check(de_sitter(4), "NCD", SyntheticDimension.infinite(4), points=10, seed=1)
    assert abs(r.min_value) < 1e-9
    assert r.verdict == "holds"


def test_cd_rejects_unknown_condition():
    with pytest.raises(ValueError):
        cd_check(minkowski(4), "XCD", SyntheticDimension.infinite(4))


def test_tcd_negative_synthetic_dimension_detects_gradient_term():
    # f = a t on Minkowski: Ric_f^N(dt, dt) = a^2/(n - N), negative for N > n
    model = minkowski_with_f(4, "0.5*t")
    r = cd_check(model, "TCD", SyntheticDimension.finite(6.0, 4), points=5, seed=0, rapidity_max=0.0)
    assert r.min_value == pytest.approx(0.25 / (4 - 6.0) * 1.0, rel=1e-9)
    assert r.verdict == "violated"
