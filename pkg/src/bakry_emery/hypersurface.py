"""Second fundamental forms, mean curvature and null expansions of embedded
hypersurfaces and codimension-2 surfaces, f-trapped verdicts, the twisted
product splitting identities and the Lorentzian Laplacian comparison."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .curvature import bakry_emery_tensor, christoffel_at, curvature_at
from .expr import DomainError, Expression, parse_expr
from .geodesic import fd_derivative, integrate_geodesic, reparametrize
from .spacetime import SpacetimeModel, SyntheticDimension, TangentVector, orthonormal_frame

__all__ = [
    "HypersurfaceModel",
    "ShapeData",
    "make_surface",
    "coordinate_slice",
    "round_sphere",
    "shape_at",
    "surface_jacobi_data",
    "trapped_check",
    "splitting_diagnostics",
    "laplacian_comparison_check",
    "UMBILIC_TOL",
]

UMBILIC_TOL = 1e-8
_FD_STEP = 1e-3


@dataclass(frozen=True, eq=False)
class HypersurfaceModel:
    """Parametrized embedding u -> Phi(u) of a hypersurface (n-1 params) or a
    codimension-2 surface (n-2 params)."""

    name: str
    params: tuple
    embedding: tuple  # n Expressions over ``params``
    ranges: tuple  # per-parameter (lo, hi)
    periodic: tuple  # per-parameter bool
    causal_type: str = "spacelike"  # or "null" (hypersurfaces only)
    center: tuple | None = None  # reference point for the outgoing null normal
    outward: tuple | None = None  # optional n Expressions giving an outward direction

    @property
    def dim(self) -> int:
        return len(self.params)

    def point(self, u) -> np.ndarray:
        return np.array([e.value(u) for e in self.embedding])

    def jets(self, u):
        """(Phi, dPhi [n, k], ddPhi [n, k, k])."""
        u = np.asarray(u, dtype=float)
        k = self.dim
        x = np.empty(len(self.embedding))
        J = np.empty((len(self.embedding), k))
        H = np.empty((len(self.embedding), k, k))
        for i, e in enumerate(self.embedding):
            jt = e.jet(u, 2)
            x[i], J[i], H[i] = jt.v, jt.g, jt.h
        return x, J, H

    def grid(self, per_dim: int = 12) -> list:
        """Cell-centred parameter grid (avoids coordinate poles at range ends)."""
        axes = []
        for lo, hi in self.ranges:
            axes.append([lo + (j + 0.5) * (hi - lo) / per_dim for j in range(per_dim)])
        return [np.array(p) for p in itertools.product(*axes)]


def make_surface(model: SpacetimeModel, embedding: Sequence[str], params: Sequence[str], ranges,
                 periodic=None, causal_type: str = "spacelike", center=None, outward=None,
                 name: str = "surface", validate: bool = True) -> HypersurfaceModel:
    params = tuple(params)
    if len(embedding) != model.n:
        raise ValueError(f"embedding needs {model.n} components, got {len(embedding)}")
    k = len(params)
    if k not in (model.n - 1, model.n - 2):
        raise ValueError(f"surface must have {model.n - 1} or {model.n - 2} parameters")
    if causal_type not in ("spacelike", "null"):
        raise ValueError(f"unknown causal type {causal_type!r}")
    if causal_type == "null" and k != model.n - 1:
        raise ValueError("null surfaces must be hypersurfaces")
    emb = tuple(parse_expr(s, params) if isinstance(s, str) else s for s in embedding)
    out = None
    if outward is not None:
        out = tuple(parse_expr(s, params) if isinstance(s, str) else s for s in outward)
    periodic = tuple(bool(p) for p in (periodic or [False] * k))
    surf = HypersurfaceModel(name, params, emb, tuple(tuple(map(float, r)) for r in ranges), periodic,
                             causal_type, None if center is None else tuple(map(float, center)), out)
    if validate:
        for u in surf.grid(3):
            _induced(model, surf, u)
    return surf


def coordinate_slice(model: SpacetimeModel, index: int = 0, value: float = 0.0, ranges=None,
                     name: str | None = None) -> HypersurfaceModel:
    """The hypersurface x^index = value parametrized by the remaining coordinates."""
    names = [c for i, c in enumerate(model.coords) if i != index]
    params = tuple(f"u_{c}" for c in names)
    emb = []
    j = 0
    for i in range(model.n):
        if i == index:
            emb.append(repr(float(value)))
        else:
            emb.append(params[j])
            j += 1
    if ranges is None:
        ranges = [model.domain_hint[i] for i in range(model.n) if i != index]
    return make_surface(model, emb, params, ranges, name=name or f"{model.coords[index]}={value}")


def round_sphere(model: SpacetimeModel, radius: float = 1.0, t0: float = 0.0, center=(0.0, 0.0, 0.0)) -> HypersurfaceModel:
    """Round 2-sphere {t = t0, |x - c| = radius} in Cartesian coordinates (n = 4)."""
    if model.n != 4:
        raise ValueError("round_sphere is defined for n = 4 Cartesian charts")
    cx, cy, cz = map(float, center)
    r = float(radius)
    emb = [repr(float(t0)), f"{cx} + {r} * sin(th) * cos(ph)", f"{cy} + {r} * sin(th) * sin(ph)",
           f"{cz} + {r} * cos(th)"]
    return make_surface(model, emb, ("th", "ph"), [(0.0, math.pi), (0.0, 2 * math.pi)], [False, True],
                        center=(float(t0), cx, cy, cz), name=f"sphere(r={r})")


@dataclass
class ShapeData:
    point: np.ndarray
    kind: str  # "spacelike-hypersurface", "null-hypersurface" or "codim2"
    h: np.ndarray  # induced metric in parameter coordinates
    K: object  # coordinate matrix, or dict {"+": .., "-": ..} for codim2
    K_frame: object
    H: float | None = None
    H_div: float | None = None
    H_f: float | None = None
    theta_pair: tuple | None = None
    theta_pair_div: tuple | None = None
    theta_f_pair: tuple | None = None
    theta_pair_unit: tuple | None = None
    theta_f_pair_unit: tuple | None = None
    theta: float | None = None  # null hypersurface expansion
    normals: dict = field(default_factory=dict)
    umbilic_defect: float | None = None
    totally_umbilic: bool | None = None
    totally_geodesic: bool | None = None
    sign_check: float | None = None
    normalization: str = ""

    def to_dict(self) -> dict:
        def conv(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, dict):
                return {k: conv(x) for k, x in v.items()}
            if isinstance(v, tuple):
                return [conv(x) for x in v]
            if isinstance(v, (np.floating, np.bool_)):
                return v.item()
            return v

        return {k: conv(v) for k, v in self.__dict__.items()}


def _induced(model, surf, u):
    x, J, H = surf.jets(u)
    g = model.metric_matrix(x)
    h = J.T @ g @ J
    k = surf.dim
    if np.linalg.matrix_rank(J, tol=1e-10) < k:
        raise ValueError(f"embedding Jacobian is rank deficient at {np.asarray(u).tolist()}")
    ev = np.linalg.eigvalsh(h)
    if surf.causal_type == "spacelike":
        if ev[0] <= 1e-12:
            raise ValueError(f"induced metric is not Riemannian at {np.asarray(u).tolist()} (eigenvalues {ev.tolist()})")
    else:
        scale = max(1.0, float(np.max(np.abs(ev))))
        if abs(ev[0]) > 1e-9 * scale or ev[1] <= 1e-12:
            raise ValueError(f"induced metric is not degenerate of rank {k - 1} at {np.asarray(u).tolist()}")
    return x, J, H, g, h


def _normal_space(g, J):
    """Basis (columns) of the g-orthogonal complement of span J."""
    M = J.T @ g
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > 1e-12 * max(1.0, s[0])))
    return vt[rank:].T


def _normals(model, surf, u, x, J, g):
    """Normal fields at u.  spacelike hypersurface: {"nu"}; null hypersurface:
    {"l"}; codim-2: {"T", "R", "+", "-"} with l+- = T +- R."""
    T_ref = orthonormal_frame(g)[:, 0]
    Nsp = _normal_space(g, J)
    if surf.dim == model.n - 1:
        nvec = Nsp[:, 0]
        q = float(nvec @ g @ nvec)
        if surf.causal_type == "spacelike":
            if q >= 0:
                raise ValueError("normal of a spacelike hypersurface must be timelike")
            nu = nvec / math.sqrt(-q)
            if nu @ g @ T_ref > 0:
                nu = -nu
            return {"nu": nu}
        l = nvec / -(float(nvec @ g @ T_ref))
        return {"l": l}
    # codimension 2: orthonormal (T, R) of the normal plane
    P = Nsp
    G = P.T @ g @ P
    # project the reference observer into the normal plane
    c = np.linalg.solve(G, P.T @ g @ T_ref)
    T = P @ c
    qT = float(T @ g @ T)
    if qT >= 0:
        raise ValueError("normal plane is not Lorentzian; surface is not spacelike")
    T = T / math.sqrt(-qT)
    if T @ g @ T_ref > 0:
        T = -T
    R = None
    for col in range(P.shape[1]):
        w = P[:, col] + float(T @ g @ P[:, col]) * T
        qq = float(w @ g @ w)
        if qq > 1e-12:
            R = w / math.sqrt(qq)
            break
    if R is None:
        raise ValueError("failed to build a spacelike normal")
    if surf.outward is not None:
        out = np.array([e.value(u) for e in surf.outward])
        sgn = float(R @ g @ out)
    else:
        centre = np.zeros(model.n) if surf.center is None else np.array(surf.center)
        sgn = float(R[1:] @ (x - centre)[1:])
    if sgn < 0:
        R = -R
    return {"T": T, "R": R, "+": T + R, "-": T - R}


def _K(nvec, g, gam, J, Hphi):
    """K(n, e_a, e_b) = -g(n, nabla_{e_a} e_b) on coordinate tangent vectors."""
    cov = Hphi + np.einsum("kij,ia,jb->kab", gam, J, J)
    return -np.einsum("k,kl,lab->ab", nvec, g, cov)


def _divergence(model, surf, u, key, J, g, gam, hinv):
    """h^{ab} g(nabla_{e_a} n, e_b) with the normal field differentiated along the surface."""
    k = surf.dim
    out = 0.0
    for a in range(k):
        step = np.zeros(k)
        step[a] = 1.0

        def field_at(s):
            uu = u + s * step
            xx, JJ, _ = surf.jets(uu)
            return _normals(model, surf, uu, xx, JJ, model.metric_matrix(xx))[key]

        dn = fd_derivative(field_at, 0.0, _FD_STEP)
        n0 = field_at(0.0)
        cov = dn + np.einsum("kij,i,j->k", gam, J[:, a], n0)
        out += float(hinv[a] @ (J.T @ g @ cov))
    return out


def _frame_matrix(M, h):
    """Components of a bilinear form in an h-orthonormal frame."""
    w, V = np.linalg.eigh(h)
    S = V / np.sqrt(w)
    return S.T @ M @ S


def shape_at(model: SpacetimeModel, surf: HypersurfaceModel, params, umbilic_tol: float = UMBILIC_TOL) -> ShapeData:
    u = np.asarray(params, dtype=float)
    x, J, Hphi, g, h = _induced(model, surf, u)
    _, _, gam, df = christoffel_at(model, x)
    nrm = _normals(model, surf, u, x, J, g)
    if surf.dim == model.n - 1 and surf.causal_type == "spacelike":
        nu = nrm["nu"]
        K = _K(nu, g, gam, J, Hphi)
        hinv = np.linalg.inv(h)
        H = float(np.sum(hinv * K))
        H_div = _divergence(model, surf, u, "nu", J, g, gam, hinv)
        d = surf.dim
        Kf = _frame_matrix(K, h)
        defect = float(np.linalg.norm(Kf - H / d * np.eye(d)))
        umb = defect < umbilic_tol
        return ShapeData(x, "spacelike-hypersurface", h, K, Kf, H=H, H_div=H_div, H_f=H - float(df @ nu),
                         normals=nrm, umbilic_defect=defect, totally_umbilic=umb,
                         totally_geodesic=umb and abs(H) < umbilic_tol, sign_check=abs(H - H_div),
                         normalization="future unit normal; H = div nu = tr_h K")
    if surf.dim == model.n - 1:
        l = nrm["l"]
        K = _K(l, g, gam, J, Hphi)
        w, V = np.linalg.eigh(h)
        S = V[:, 1:] / np.sqrt(w[1:])  # screen directions in parameter space
        Ks = S.T @ K @ S
        theta = float(np.trace(Ks))
        d = Ks.shape[0]
        defect = float(np.linalg.norm(Ks - theta / d * np.eye(d)))
        return ShapeData(x, "null-hypersurface", h, K, Ks, theta=theta, normals=nrm,
                         umbilic_defect=defect, totally_umbilic=defect < umbilic_tol,
                         totally_geodesic=defect < umbilic_tol and abs(theta) < umbilic_tol,
                         normalization="null normal with g(l, e0) = -1 for the coordinate observer e0")
    hinv = np.linalg.inv(h)
    Ks = {s: _K(nrm[s], g, gam, J, Hphi) for s in ("+", "-")}
    th = tuple(float(np.sum(hinv * Ks[s])) for s in ("+", "-"))
    th_div = tuple(_divergence(model, surf, u, s, J, g, gam, hinv) for s in ("+", "-"))
    thf = tuple(th[i] - float(df @ nrm[s]) for i, s in enumerate(("+", "-")))
    r2 = 1.0 / math.sqrt(2.0)
    return ShapeData(x, "codim2", h, Ks, {s: _frame_matrix(Ks[s], h) for s in Ks},
                     theta_pair=th, theta_pair_div=th_div, theta_f_pair=thf,
                     theta_pair_unit=(th[0] * r2, th[1] * r2), theta_f_pair_unit=(thf[0] * r2, thf[1] * r2),
                     normals=nrm, sign_check=max(abs(a - b) for a, b in zip(th, th_div)),
                     normalization="l+- = T +- R with T future unit, R outward unit, g(l+, l-) = -2; "
                                   "unit pair rescaled by 1/sqrt(2) to g(l+, l-) = -1")


def surface_jacobi_data(model: SpacetimeModel, surf: HypersurfaceModel, params, which: str = "-"):
    """Initial data for the null congruence orthogonal to a codim-2 surface.

    Returns (point, k, L, screen E [n, n-2], A0 = I, A0' = K(k) in the screen frame).
    """
    if surf.dim != model.n - 2:
        raise ValueError("surface congruences need a codimension-2 surface")
    u = np.asarray(params, dtype=float)
    x, J, Hphi, g, h = _induced(model, surf, u)
    _, _, gam, _ = christoffel_at(model, x)
    nrm = _normals(model, surf, u, x, J, g)
    k = nrm[which]
    other = nrm["-" if which == "+" else "+"]
    L = other / -(float(k @ g @ other))
    w, V = np.linalg.eigh(h)
    S = V / np.sqrt(w)
    E = J @ S
    Kc = _K(k, g, gam, J, Hphi)
    A0p = S.T @ Kc @ S
    d = surf.dim
    return x, k, L, E, np.eye(d), A0p


def trapped_check(model: SpacetimeModel, surf: HypersurfaceModel, per_dim: int = 12) -> dict:
    """f-trapped iff both f-expansions share one strict sign at every sampled point."""
    if surf.dim != model.n - 2:
        raise ValueError("trapped check needs a codimension-2 surface")
    points = []
    plus, minus, plus0, minus0 = [], [], [], []
    for u in surf.grid(per_dim):
        sd = shape_at(model, surf, u)
        tp, tm = sd.theta_f_pair
        plus.append(tp)
        minus.append(tm)
        plus0.append(sd.theta_pair[0])
        minus0.append(sd.theta_pair[1])
        points.append({"params": u.tolist(), "theta_f": [tp, tm], "theta": list(sd.theta_pair)})
    plus, minus = np.array(plus), np.array(minus)

    def verdict(a, b):
        if np.all(a < 0) and np.all(b < 0):
            return "future-trapped", float(min(np.min(-a), np.min(-b)))
        if np.all(a > 0) and np.all(b > 0):
            return "past-trapped", float(min(np.min(a), np.min(b)))
        same = (np.sign(a) == np.sign(b)) & (a != 0)
        return "not-trapped", -float(np.mean(~same))

    v, margin = verdict(plus, minus)
    v0, _ = verdict(np.array(plus0), np.array(minus0))
    same_sign = int(np.sum((np.sign(plus) == np.sign(minus)) & (plus != 0)))
    return {
        "verdict": v,
        "f_trapped": v != "not-trapped",
        "margin": margin,
        "ordinary_verdict": v0,
        "samples": len(points),
        "same_sign_samples": same_sign,
        "theta_f_plus_range": [float(plus.min()), float(plus.max())],
        "theta_f_minus_range": [float(minus.min()), float(minus.max())],
        "points": points,
    }


def splitting_diagnostics(model: SpacetimeModel, t0: float = 0.0, samples: int = 20, seed: int = 0) -> dict:
    """Mixed t-y identities of a twisted product -dt^2 + e^{2f/(n-1)} hhat on the slice t = t0.

    ric: Ric(dt, dy) + (n-2)/(n-1) f_ty
    hess: Hess f(dt, dy) + f_t f_y/(n-1) - f_ty
    ric_f_1: Ric_f^1(dt, dy) - f_ty/(n-1)
    Curvature comes from the metric; f is the twist function.  The split test
    is max |f_ty|, zero iff f = F(t) + G(y) on the sampled slice.
    """
    if model.product is None:
        raise ValueError(f"model {model.name!r} has no product structure")
    n = model.n
    f_expr = model.product.warp
    rng = np.random.default_rng(seed)
    pts = model.sample_points(samples, rng)
    pts[:, 0] = t0
    worst = {"ric": 0.0, "hess": 0.0, "ric_f_1": 0.0, "ric_direct_vs_bundle": 0.0}
    split = 0.0
    one = SyntheticDimension(1.0, n)
    for p in pts:
        cb = curvature_at(model, p)
        jt = f_expr.jet(p, 2)
        fg, fh = np.asarray(jt.g), np.asarray(jt.h)
        hess_w = fh - np.einsum("kij,k->ij", cb.christoffel, fg)
        ric1 = cb.ricci + hess_w + np.outer(fg, fg) / (n - 1)
        for a in range(1, n):
            fty = fh[0, a]
            split = max(split, abs(fty))
            worst["ric"] = max(worst["ric"], abs(cb.ricci[0, a] + (n - 2) / (n - 1) * fty))
            worst["hess"] = max(worst["hess"], abs(hess_w[0, a] + fg[0] * fg[a] / (n - 1) - fty))
            worst["ric_f_1"] = max(worst["ric_f_1"], abs(ric1[0, a] - fty / (n - 1)))
        if f_expr is model.potential or f_expr.to_source() == model.potential.to_source():
            be = bakry_emery_tensor(cb, one)
            worst["ric_direct_vs_bundle"] = max(worst["ric_direct_vs_bundle"],
                                                float(np.max(np.abs(be - ric1))))
    return {**worst, "split_test": split, "splits": split < 1e-9, "samples": len(pts), "t0": t0,
            "kind": model.product.kind}


def laplacian_comparison_check(model: SpacetimeModel, distance, q, start, tol: float = 1e-7,
                               endpoint_tol: float = 1e-8) -> dict:
    """Compare Delta_f d(q) = box d - g(grad f, grad d) with
    -(n-1) e^{-2f(q)/(n-1)} / s(rho), s(rho) = int_0^rho e^{-2f(sigma)/(n-1)} dt
    along the geodesic sigma from ``start`` to ``q`` (rho = d(q)).

    ``distance`` is a closed-form expression over the model coordinates; the
    geodesic is the straight segment of a flat chart and is checked to end at q.
    """
    n = model.n
    q = np.asarray(q, dtype=float)
    start = np.asarray(start, dtype=float)
    expr = parse_expr(distance, model.coords) if isinstance(distance, str) else distance
    try:
        jt = expr.jet(q, 2)
    except DomainError as exc:
        raise ValueError(f"distance oracle is not differentiable at q: {exc}") from exc
    rho = float(jt.v)
    grad, hess = np.asarray(jt.g), np.asarray(jt.h)
    if not (math.isfinite(rho) and rho > 0) or not np.all(np.isfinite(hess)):
        raise ValueError("distance oracle is not differentiable at q (light cone or outside the domain)")
    g, gi, gam, df = christoffel_at(model, q)
    box = float(np.sum(gi * (hess - np.einsum("kij,k->ij", gam, grad))))
    drift = float(df @ gi @ grad)
    lhs = box - drift
    eikonal = float(grad @ gi @ grad)
    v0 = (q - start) / rho
    speed = float(v0 @ model.metric_matrix(start) @ v0)
    if abs(speed + 1.0) > 1e-8:
        raise ValueError(f"segment from start has length {rho * math.sqrt(max(-speed, 0.0)):.6g}, not d(q) = {rho:.6g}")
    path = integrate_geodesic(model, "levi-civita", TangentVector(start, v0), (0.0, rho), rtol=1e-11, atol=1e-13)
    miss = float(np.max(np.abs(path.x[-1] - q)))
    if path.truncated or miss > endpoint_tol:
        raise ValueError(f"straight segment from start does not reach q as a geodesic (miss {miss:.3e})")
    if path.causal_type != "timelike":
        raise ValueError("comparison needs a timelike segment")
    table = reparametrize(model, path, float(n - 1))
    s_rho = float(table.s[-1])
    rhs = -(n - 1) * math.exp(-2.0 * model.f_value(q) / (n - 1)) / s_rho
    slack = lhs - rhs
    return {
        "lhs": lhs,
        "rhs": rhs,
        "slack": slack,
        "holds": slack >= -tol,
        "box_d": box,
        "drift_term": drift,
        "rho": rho,
        "s_rho": s_rho,
        "eikonal": eikonal,
        "endpoint_miss": miss,
    }
