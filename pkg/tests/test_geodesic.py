import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bakry_emery.geodesic import (
    ConnectionKind,
    PolygonPath,
    geodesic_residual,
    integrate_geodesic,
    lift_twisted_geodesic,
    parallel_transport,
    reparametrize,
    verify_reparametrization,
)
from bakry_emery.ode import DormandPrince
from bakry_emery.scenario import random_direction, random_point
from bakry_emery.spacetime import (
    TangentVector,
    de_sitter,
    einstein_static,
    minkowski,
    minkowski_with_f,
    twisted_product,
    warped_product,
)
from oracles import simpson

MODELS = {
    "minkowski_with_f": minkowski_with_f(4, "0.3*t + 0.2*x*y"),
    "de_sitter": de_sitter(4, "0.2*t + 0.1*cos(chi)"),
    "einstein_static": einstein_static(4, "0.3*sin(t)"),
    "warped": warped_product(4, "0.5*t + 0.2*t*t"),
    "twisted": twisted_product(4, "0.5*t*y1"),
}


def _geo(model, kind, x, v, span, rtol=1e-11):
    return integrate_geodesic(model, kind, TangentVector(np.asarray(x, float), np.asarray(v, float)), (0.0, span),
                              rtol=rtol, atol=rtol * 1e-2)


def test_dormand_prince_exponential():
    sol = DormandPrince(rtol=1e-11, atol=1e-13).solve(lambda t, y: -y, 0.0, np.array([1.0]), 2.0)
    assert sol.status == "ok"
    assert abs(sol.y[-1, 0] - math.exp(-2.0)) < 1e-10


def test_minkowski_line_is_straight():
    p = _geo(minkowski(4), "levi_civita", [0, 0, 0, 0], [1.5, 0.3, 0.2, 0.1], 2.0)
    assert np.allclose(p.x[-1], 2.0 * np.array([1.5, 0.3, 0.2, 0.1]), atol=1e-12)
    assert p.causal_type == "timelike"


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(sorted(MODELS)), st.sampled_from(["timelike", "null", "spacelike"]), st.integers(0, 2**31))
def test_levi_civita_speed_is_conserved(name, causal, seed):
    model = MODELS[name]
    rng = np.random.default_rng(seed)
    p = random_point(model, rng, 0.5)
    v = random_direction(model, p, rng, causal, 1.0)
    path = _geo(model, "levi_civita", p, v, 0.8)
    q = path.speed_sq()
    assert np.ptp(q) < 1e-8
    assert geodesic_residual(path) < 1e-6


@pytest.mark.parametrize("kind,causal", [("weighted", "timelike"), ("conformal", "null"), ("weighted", "null")])
@pytest.mark.parametrize("name", ["minkowski_with_f", "warped", "de_sitter"])
def test_weighted_speed_first_integral(name, kind, causal):
    # sigma' = e^{2f/alpha} gamma' for a Levi-Civita geodesic gamma, so e^{-4f/alpha} g(sigma', sigma') is constant
    model = MODELS[name]
    rng = np.random.default_rng(4)
    p = random_point(model, rng, 0.5)
    v = random_direction(model, p, rng, causal, 0.8)
    k = ConnectionKind.parse(kind)
    alpha = k.alpha(model.n)
    path = _geo(model, kind, p, v, 0.6)
    vals = [math.exp(-4 * model.potential.value(x) / alpha) * float(w @ model.metric_matrix(x) @ w)
            for x, w in zip(path.x, path.v)]
    assert np.ptp(vals) < 1e-8 * max(1.0, abs(vals[0]))
    assert geodesic_residual(path) < 1e-6


def test_killing_energy_on_einstein_static():
    model = einstein_static(4)
    path = _geo(model, "levi_civita", [0, 1.2, 1.0, 0.3], [1.3, 0.2, 0.3, 0.4], 2.0)
    energy = [-(model.metric_matrix(x) @ v)[0] for x, v in zip(path.x, path.v)]
    ang = [(model.metric_matrix(x) @ v)[3] for x, v in zip(path.x, path.v)]
    assert np.ptp(energy) < 1e-9 and np.ptp(ang) < 1e-9


def test_domain_exit_truncates():
    model = einstein_static(4)
    path = _geo(model, "levi_civita", [0, 1.0, 0.3, 0.0], [1, 0, -1, 0], 3.0)
    assert path.truncated
    assert path.t[-1] < 3.0


def test_reparametrization_matches_quadrature():
    model = MODELS["minkowski_with_f"]
    path = _geo(model, "levi_civita", [0, 0.1, 0.2, 0.3], [1.2, 0.3, -0.2, 0.5], 1.5)
    table = reparametrize(model, path, 3.0)

    def weight(t):
        x, _ = path.state_at(t)
        return math.exp(-2 * model.potential.value(x) / 3.0)

    for t in (0.37, 0.9, 1.5):
        assert table.s_of_t(t) == pytest.approx(simpson(weight, 0.0, t, 400), abs=1e-11)
        assert table.t_of_s(table.s_of_t(t))[0] == pytest.approx(t, abs=1e-12)


def test_reparametrization_is_additive():
    # s over [0, T] equals s over [0, T1] plus s over [T1, T] from the continued path
    model = MODELS["warped"]
    full = _geo(model, "levi_civita", [0, 0.1, 0.2, 0.3], [1.2, 0.3, -0.2, 0.1], 1.2)
    head = _geo(model, "levi_civita", [0, 0.1, 0.2, 0.3], [1.2, 0.3, -0.2, 0.1], 0.5)
    x, v = full.state_at(0.5)
    tail = integrate_geodesic(model, "levi_civita", TangentVector(x, v), (0.5, 1.2), rtol=1e-11, atol=1e-13)
    s_full = reparametrize(model, full, 3.0).s[-1]
    s_parts = reparametrize(model, head, 3.0).s[-1] + reparametrize(model, tail, 3.0).s[-1]
    assert s_full == pytest.approx(s_parts, abs=1e-10)


def test_wrong_weight_breaks_the_reparametrization():
    model = MODELS["minkowski_with_f"]
    path = _geo(model, "levi_civita", [0, 0.1, 0.2, 0.3], [1.2, 0.3, -0.2, 0.5], 1.0)
    good = verify_reparametrization(model, path, "weighted")
    bad = verify_reparametrization(model, path, "weighted", table=reparametrize(model, path, 2.0))
    assert good["residual"] < 1e-7
    assert bad["residual"] > 1e-3


def test_conformal_reparametrization_needs_null_path():
    model = MODELS["minkowski_with_f"]
    path = _geo(model, "levi_civita", [0, 0, 0, 0], [1.2, 0.3, 0, 0], 0.5)
    with pytest.raises(ValueError, match="null"):
        verify_reparametrization(model, path, "conformal")


@pytest.mark.parametrize("model,w0,v0", [
    (twisted_product(4, "0.5*t*y1"), 1.3, [0.3, -0.2, 0.4]),
    (twisted_product(4, "0.5*t + 0.3*sin(y2)"), 1.2, [0.2, 0.1, -0.3]),
    (warped_product(4, "t"), 1.1, [0.3, 0.2, 0.1]),
])
def test_lift_agrees_with_direct_integration(model, w0, v0):
    res = lift_twisted_geodesic(model, np.array([0.1, 0.1, 0.2, 0.3]), w0, np.array(v0), (0.0, 1.0))
    diag = res.diagnostics()
    assert diag["geodesic"] < 1e-6
    assert diag["direct"] < 1e-8
    assert diag["speed_law"] < 1e-6
    assert diag["speed_sq_spread"] < 1e-8


def test_lift_speed_constant_for_warped():
    res = lift_twisted_geodesic(warped_product(4, "t"), np.array([0.1, 0.1, 0.2, 0.3]), 1.1,
                                np.array([0.3, 0.2, 0.1]), (0.0, 1.0))
    assert res.diagnostics()["speed_constancy"] < 1e-9


def test_lift_rejects_non_product():
    with pytest.raises(ValueError):
        lift_twisted_geodesic(de_sitter(4), np.zeros(4), 1.0, np.zeros(3), (0, 1))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_levi_civita_transport_is_isometric(seed):
    model = MODELS["de_sitter"]
    rng = np.random.default_rng(seed)
    verts = np.array([random_point(model, rng, 0.6) for _ in range(4)])
    V0 = rng.standard_normal(4)
    W0 = rng.standard_normal(4)
    V = parallel_transport(model, "levi_civita", PolygonPath(verts), V0)
    W = parallel_transport(model, "levi_civita", PolygonPath(verts), W0)
    g0, g1 = model.metric_matrix(verts[0]), model.metric_matrix(verts[-1])
    assert float(V.final @ g1 @ W.final) == pytest.approx(float(V0 @ g0 @ W0), abs=1e-9)


def test_transport_along_geodesic_keeps_tangent():
    model = MODELS["warped"]
    path = _geo(model, "weighted", [0, 0.1, 0.2, 0.3], [1.2, 0.3, -0.2, 0.1], 0.8)
    res = parallel_transport(model, "weighted", path, path.v[0])
    assert np.allclose(res.final, path.v[-1], atol=1e-9)
