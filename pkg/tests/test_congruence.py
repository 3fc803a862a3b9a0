import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bakry_emery.congruence import (
    detect_conjugate,
    f_generic_probe,
    focusing_bound_check,
    index_form,
    propagate_jacobi,
    rank_for_mode,
    raychaudhuri_residual,
    transform_jacobi,
)
from bakry_emery.geodesic import integrate_geodesic
from bakry_emery.scenario import random_direction, random_point
from bakry_emery.spacetime import (
    SyntheticDimension,
    TangentVector,
    anti_de_sitter,
    de_sitter,
    einstein_static,
    minkowski,
    minkowski_with_f,
    warped_product,
)
from catalog import conformally_flat

INF = SyntheticDimension.infinite(4)


def _geo(model, x, v, span):
    return integrate_geodesic(model, "levi_civita", TangentVector(np.asarray(x, float), np.asarray(v, float)),
                              (0.0, span), rtol=1e-11, atol=1e-13)


def test_rank_for_mode():
    assert rank_for_mode("timelike", 4) == 3
    assert rank_for_mode("null", 4) == 2
    assert rank_for_mode("spacelike", 5) == 4


def test_minkowski_point_congruence_is_linear():
    model = minkowski(4)
    evo = propagate_jacobi(model, _geo(model, [0, 0, 0, 0], [1.25, 0.75, 0, 0], 2.0))
    for t, A in zip(evo.t, evo.A):
        assert np.allclose(A, t * np.eye(3), atol=1e-10)
    assert detect_conjugate(evo).verdict == "none"


@pytest.mark.parametrize("model,x,v,mode,expect", [
    (anti_de_sitter(4), [0, 0, 0, 0], [1, 0, 0, 0], None, math.pi),
    (de_sitter(4), [0, math.pi / 2, math.pi / 2, 0.2], [0, 0, 0, 1], "spacelike", math.pi),
    (einstein_static(4), [0, math.pi / 2, math.pi / 2, 0.2], [0, 0, 0, 1], "spacelike", math.pi),
    (einstein_static(4), [0, math.pi / 2, math.pi / 2, 0.2], [1, 0, 0, 1], "null", math.pi),
])
def test_exact_conjugate_points(model, x, v, mode, expect):
    evo = propagate_jacobi(model, _geo(model, x, v, 3.6), mode=mode)
    rep = detect_conjugate(evo)
    assert rep.verdict == "found"
    assert rep.first_parameter == pytest.approx(expect, abs=1e-6)


def test_einstein_static_timelike_has_no_conjugate_point():
    model = einstein_static(4)
    evo = propagate_jacobi(model, _geo(model, [0, 1.2, 1.0, 0.3], [1, 0, 0, 0], 4.0))
    assert detect_conjugate(evo).verdict == "none"


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["timelike", "null"]))
def test_lagrange_bracket_is_conserved(seed, causal):
    model = conformally_flat()
    rng = np.random.default_rng(seed)
    p = random_point(model, rng, 0.4)
    v = random_direction(model, p, rng, causal, 0.8)
    d = 3 if causal == "timelike" else 2
    S = rng.standard_normal((d, d))
    evo = propagate_jacobi(model, _geo(model, p, v, 0.7), np.eye(d), S + S.T)
    assert evo.lagrange_drift() < 1e-9
    assert evo.lagrange_bracket() < 1e-9
    assert evo.jacobi_residual() < 1e-6
    assert evo.frame.gram_drift(model, evo.x, evo.v) < 1e-9


def test_vorticity_is_rejected():
    model = minkowski_with_f(4, "0.2*t")
    evo = propagate_jacobi(model, _geo(model, [0, 0, 0, 0], [1, 0, 0, 0], 0.5), np.eye(3),
                           np.array([[0, 1.0, 0], [-1.0, 0, 0], [0, 0, 0]]))
    assert evo.lagrange_bracket() > 0.5
    with pytest.raises(ValueError, match="vorticity"):
        raychaudhuri_residual(evo, INF)


def test_coefficient_vanishes_exactly_at_critical_dimension():
    model = warped_product(4, "0.5*t + 0.2*t*t")
    tl = propagate_jacobi(model, _geo(model, [0, 0.1, 0.2, 0.3], [1.2, 0.3, -0.2, 0.1], 1.0))
    nl = propagate_jacobi(model, _geo(model, [0, 0.1, 0.2, 0.3], [1.0, 0.6, 0.0, 0.8], 1.0), mode="null")
    assert raychaudhuri_residual(tl, SyntheticDimension.finite(1.0, 4))["coefficient"] == 0.0
    assert raychaudhuri_residual(nl, SyntheticDimension.finite(2.0, 4))["coefficient"] == 0.0
    assert raychaudhuri_residual(tl, SyntheticDimension.finite(2.0, 4))["coefficient"] != 0.0


def test_scalars_on_flat_point_congruence():
    model = minkowski_with_f(4, "0.5*t")
    evo = propagate_jacobi(model, _geo(model, [0, 0, 0, 0], [1, 0, 0, 0], 1.0))
    s = evo.scalars(evo.A[-1], evo.Ap[-1], evo.f1[-1])
    t = evo.t[-1]
    # A = tI: theta = 3/t, theta_f = 3/t - f', no shear, x_f = theta_f/3
    assert s["theta"] == pytest.approx(3 / t)
    assert s["theta_f"] == pytest.approx(3 / t - 0.5)
    assert s["sigma_sq"] == pytest.approx(0.0, abs=1e-18)
    assert s["x_f"] == pytest.approx((3 / t - 0.5) / 3)


def test_focusing_weighted_regime_with_potential():
    # hypersurface congruence in Minkowski with f = a t: B_f(0) = -f'/3 - c, focal point where A = 0
    model = minkowski_with_f(4, "0.3*t")
    evo = propagate_jacobi(model, _geo(model, [0, 0, 0, 0], [1, 0, 0, 0], 3.0), np.eye(3), -0.5 * np.eye(3))
    rep = focusing_bound_check(evo, INF)
    assert rep.first_parameter == pytest.approx(2.0, abs=1e-8)
    assert rep.delta == pytest.approx(1.5 + 0.3)
    assert rep.compared_parameter == "weighted"
    assert rep.within_bound
    assert rep.literal_bound == pytest.approx(rep.bound_parameter / 3)


def test_focusing_affine_regime():
    model = minkowski(4)
    evo = propagate_jacobi(model, _geo(model, [0, 0, 0, 0], [1, 0, 0, 0], 3.0), np.eye(3), -0.5 * np.eye(3))
    rep = focusing_bound_check(evo, SyntheticDimension.finite(6.0, 4))
    assert rep.compared_parameter == "affine"
    assert rep.rigorous_bound == pytest.approx(5 / 1.5)
    assert rep.within_bound


def test_focusing_needs_converging_start():
    model = minkowski(4)
    evo = propagate_jacobi(model, _geo(model, [0, 0, 0, 0], [1, 0, 0, 0], 1.0), np.eye(3), 0.5 * np.eye(3))
    with pytest.raises(ValueError, match="theta_f"):
        focusing_bound_check(evo, INF)


def test_f_generic_probe():
    flat = minkowski(4)
    path = _geo(flat, [0, 0, 0, 0], [1, 0, 0, 0], 1.0)
    assert not f_generic_probe(flat, path, INF)["hit"]
    weighted = minkowski_with_f(4, "0.5*t")
    r = f_generic_probe(weighted, _geo(weighted, [0, 0, 0, 0], [1, 0, 0, 0], 1.0), INF)
    assert r["hit"] and r["first_parameter"] == 0.0
    assert r["consistent_with_trace_identity"]


@pytest.mark.parametrize("mode,alpha", [(None, 3.0), ("null", 2.0)])
def test_transform_on_conformally_flat(mode, alpha):
    model = conformally_flat()
    v = [1.0, 0.8, 0.6, 0.0] if mode == "null" else [1.3, 0.2, 0.5, 0.1]
    evo = propagate_jacobi(model, _geo(model, [0, 0.1, 0.2, 0.1], v, 0.8), mode=mode)
    r = transform_jacobi(evo)
    assert r["alpha"] == alpha
    assert r["jacobi"] < 1e-6
    assert max(r["B"], r["theta"], r["sigma"]) < 1e-7
    assert r["quotient_leak"] < 1e-8


def test_index_form_sine_field():
    # flat, f = 0, v = sin(pi t) e_1 on [0, 1]: I = pi^2 / 2
    model = minkowski(4)
    path = _geo(model, [0, 0, 0, 0], [1, 0, 0, 0], 1.0)
    r = index_form(model, path, lambda t: np.array([math.sin(math.pi * t), 0, 0]),
                   lambda t: np.array([math.pi * math.cos(math.pi * t), 0, 0]))
    assert r["I"] == pytest.approx(math.pi ** 2 / 2, abs=1e-10)
    assert r["residual"] < 1e-10


def test_index_form_de_sitter_tidal_term():
    # dS comoving observer: R(Y, v)v = -Y, so I = int |v'|^2 + |v|^2 = pi^2/2 + 1/2
    model = de_sitter(4, "0.2*t")
    path = _geo(model, [0, 1.0, 1.2, 1.0], [1, 0, 0, 0], 1.0)
    r = index_form(model, path, lambda t: np.array([math.sin(math.pi * t), 0, 0]),
                   lambda t: np.array([math.pi * math.cos(math.pi * t), 0, 0]))
    assert r["I"] == pytest.approx(math.pi ** 2 / 2 + 0.5, abs=1e-8)
    assert r["residual"] < 1e-6


def test_index_form_rejects_null():
    model = minkowski(4)
    path = _geo(model, [0, 0, 0, 0], [1, 1, 0, 0], 1.0)
    with pytest.raises(ValueError):
        index_form(model, path, lambda t: np.zeros(3))


def test_de_sitter_comoving_point_congruence_is_sinh():
    # Ric = 3g makes the tidal matrix -id, so A'' = A: A = sinh(t) id and theta = 3 coth(t)
    model = de_sitter(4)
    evo = propagate_jacobi(model, _geo(model, [0, 1.0, 1.2, 1.0], [1, 0, 0, 0], 3.0))
    for t, A, Ap in zip(evo.t[1:], evo.A[1:], evo.Ap[1:]):
        assert np.allclose(A, math.sinh(t) * np.eye(3), atol=1e-6 * math.cosh(t))
        if t > 0.1:
            s = evo.scalars(A, Ap, 0.0)
            assert s["theta"] == pytest.approx(3 / math.tanh(t), rel=1e-6)
    assert np.allclose(evo.R_hat[5], -np.eye(3), atol=1e-10)
    r = f_generic_probe(model, evo.path, INF)
    assert r["hit"] and r["first_node"] == 0
