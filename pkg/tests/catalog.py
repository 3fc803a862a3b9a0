"""Congruences used by the Raychaudhuri conformance suite."""

import math

import numpy as np

from bakry_emery.congruence import propagate_jacobi
from bakry_emery.geodesic import integrate_geodesic
from bakry_emery.hypersurface import round_sphere, surface_jacobi_data
from bakry_emery.spacetime import (
    TangentVector,
    anti_de_sitter,
    build_spacetime,
    de_sitter,
    einstein_static,
    minkowski_with_f,
    warped_product,
)


def _geo(model, x, v, span):
    return integrate_geodesic(model, "levi_civita", TangentVector(np.array(x, float), np.array(v, float)),
                              (0.0, span), rtol=1e-11, atol=1e-13)


def _point(model, x, v, span, mode=None):
    return propagate_jacobi(model, _geo(model, x, v, span), mode=mode)


def _sheared(model, x, v, span):
    # symmetric A'(0) A(0)^{-1}: vorticity free, nonzero shear
    d = model.n - 1
    S = np.array([[0.3, 0.1, 0.0], [0.1, -0.2, 0.05], [0.0, 0.05, 0.1]])[:d, :d]
    return propagate_jacobi(model, _geo(model, x, v, span), np.eye(d), S)


def _sphere(model, radius, params, span):
    surf = round_sphere(model, radius)
    x, k, L, E, A0, A0p = surface_jacobi_data(model, surf, params, "-")
    path = integrate_geodesic(model, "levi_civita", TangentVector(x, k), (0.0, span), rtol=1e-11, atol=1e-13)
    return propagate_jacobi(model, path, A0, A0p, mode="null", frame0=E, L0=L)


def _null_point(model, x, v, span):
    return propagate_jacobi(model, _geo(model, x, v, span), mode="null")


def conformally_flat(phi="0.2*x + 0.1*t*y", f="0.3*t + 0.2*x*z"):
    metric = {"0,0": f"-exp(2*({phi}))", "1,1": f"exp(2*({phi}))", "2,2": f"exp(2*({phi}))",
              "3,3": f"exp(2*({phi}))"}
    return build_spacetime({"coords": ["t", "x", "y", "z"], "metric": metric, "potential": f,
                            "domain_hint": [[-1, 1]] * 4, "name": "conformally_flat"})


def catalog():
    """(label, JacobiEvolution) pairs covering timelike and null congruences."""
    mf = minkowski_with_f(4, "0.3*t + 0.2*x*y + 0.1*sin(z)")
    wp = warped_product(4, "0.5*t + 0.2*t*t")
    ds = de_sitter(4, "0.2*t + 0.1*cos(chi)")
    ads = anti_de_sitter(4, "0.1*t*x + 0.2*y")
    es = einstein_static(4, "0.3*sin(t)")
    cf = conformally_flat()
    return [
        ("minkowski_with_f/timelike-point", _point(mf, [0, 0.1, 0.2, 0.3], [1.2, 0.3, -0.2, 0.5], 1.5)),
        ("minkowski_with_f/timelike-sheared", _sheared(mf, [0, 0.1, 0.2, 0.3], [1.1, 0.2, 0.3, -0.2], 1.2)),
        ("warped/timelike-point", _point(wp, [0, 0.1, 0.2, 0.3], [1.2, 0.3, -0.2, 0.1], 1.5)),
        ("de_sitter_f/timelike-point", _point(ds, [0, 1.0, 1.2, 1.0], [1.1, 0.2, 0.1, 0.3], 1.0)),
        ("anti_de_sitter_f/timelike-point", _point(ads, [0, 0.1, 0, 0], [1.0, 0.0, 0.2, 0.1], 2.5)),
        ("einstein_static_f/timelike-sheared", _sheared(es, [0, 1.0, 1.2, 1.0], [1.05, 0.2, 0.1, 0.1], 1.5)),
        ("minkowski_with_f/null-sphere", _sphere(mf, 2.0, [1.2, 0.4], 1.5)),
        ("warped/null-point", _null_point(wp, [0, 0.1, 0.2, 0.3], [1.0, 0.6, 0.0, 0.8 * math.exp(-(0.0) / 3)], 1.2)),
        ("conformally_flat/null-point", _null_point(cf, [0, 0.1, 0.2, 0.1], [1.0, 0.8, 0.6, 0.0], 1.0)),
        ("conformally_flat/timelike-point", _point(cf, [0, 0.1, 0.2, 0.1], [1.3, 0.2, 0.5, 0.1], 1.0)),
    ]
