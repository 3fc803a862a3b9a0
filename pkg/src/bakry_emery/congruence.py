"""Jacobi tensors along geodesics: expansion/shear scalars, Raychaudhuri and
Riccati residuals, conjugate/focal detection, focusing bounds, the f-generic
probe, the weighted/conformal Jacobi transformation and the weighted index form."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .curvature import (
    adapted_frame,
    bakry_emery_at,
    bakry_emery_tensor,
    connection_curvature,
    curvature_at,
    null_frame,
)
from .geodesic import (
    ConnectionKind,
    GeodesicPath,
    ReparamTable,
    fd_derivative,
    geodesic_acceleration,
    reparametrize,
    _mid_parameters,
)
from .ode import DormandPrince, dp_step
from .spacetime import SpacetimeModel, SyntheticDimension, conformal_rescale

__all__ = [
    "PropagatedFrame",
    "JacobiEvolution",
    "FocusReport",
    "propagate_jacobi",
    "raychaudhuri_residual",
    "detect_conjugate",
    "focusing_bound_check",
    "f_generic_probe",
    "transform_jacobi",
    "index_form",
    "rank_for_mode",
]


def rank_for_mode(mode: str, n: int) -> int:
    return n - 2 if mode == "null" else n - 1


@dataclass
class PropagatedFrame:
    mode: str
    signs: np.ndarray  # eta_a of the frame vectors (all +1 unless spacelike mode)
    E: np.ndarray  # [node, n, d]
    L: np.ndarray | None  # [node, n] for null mode

    def gram_drift(self, model: SpacetimeModel, x: np.ndarray, v: np.ndarray) -> float:
        """Max change of frame inner products (with the tangent) along the path."""
        ref = None
        worst = 0.0
        for k in range(len(x)):
            g = model.metric_matrix(x[k])
            cols = [self.E[k][:, a] for a in range(self.E.shape[2])] + [v[k]]
            if self.L is not None:
                cols.append(self.L[k])
            M = np.array(cols)
            G = M @ g @ M.T
            if ref is None:
                ref = G
            worst = max(worst, float(np.max(np.abs(G - ref))))
        return worst


class _Layout:
    def __init__(self, n: int, d: int, null: bool):
        self.n, self.d, self.null = n, d, null
        o = 0
        self.x = slice(o, o + n); o += n
        self.v = slice(o, o + n); o += n
        self.E = slice(o, o + n * d); o += n * d
        self.L = slice(o, o + n if null else o); o += n if null else 0
        self.A = slice(o, o + d * d); o += d * d
        self.Ap = slice(o, o + d * d); o += d * d
        self.size = o

    def unpack(self, y):
        n, d = self.n, self.d
        return (
            y[self.x],
            y[self.v],
            y[self.E].reshape(n, d),
            y[self.L] if self.null else None,
            y[self.A].reshape(d, d),
            y[self.Ap].reshape(d, d),
        )


def _tidal(cb, v, E, signs):
    T = cb.tidal(v)
    M = E.T @ cb.g @ T @ E
    return signs[:, None] * M


@dataclass
class JacobiEvolution:
    model: SpacetimeModel
    path: GeodesicPath
    mode: str
    d: int
    frame: PropagatedFrame
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    A: np.ndarray
    Ap: np.ndarray
    R_hat: np.ndarray
    f: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    bundles: list = field(repr=False)
    status: str = "ok"
    _rhs: object = field(default=None, repr=False)
    _layout: _Layout | None = field(default=None, repr=False)
    _y: np.ndarray | None = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    # -- evaluation ---------------------------------------------------------
    def _index(self, tq: float) -> int:
        i = int(np.searchsorted(self.t, tq, side="right")) - 1
        return min(max(i, 0), len(self.t) - 1)

    def state_at(self, tq: float, index: int | None = None) -> dict:
        """Joint state (x, v, E, L, A, A', tidal, f-jets) at ``tq`` by one
        Runge-Kutta step of the joint system from the preceding node."""
        key = (float(tq), index)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        i = self._index(tq) if index is None else index
        h = tq - self.t[i]
        y = self._y[i] if h == 0.0 else dp_step(self._rhs, self.t[i], self._y[i], h)[0]
        x, v, E, L, A, Ap = self._layout.unpack(y)
        cb = curvature_at(self.model, x)
        out = self._derive(x, v, E, L, A, Ap, cb)
        if len(self._cache) > 20000:
            self._cache.clear()
        self._cache[key] = out
        return out

    def _derive(self, x, v, E, L, A, Ap, cb):
        signs = self.frame.signs
        Rh = _tidal(cb, v, E, signs)
        f1 = float(cb.df @ v)
        acc = geodesic_acceleration(self.model, ConnectionKind.LEVI_CIVITA, x, v)
        f2 = float(v @ cb.ddf @ v + cb.df @ acc)
        return {"x": x, "v": v, "E": E, "L": L, "A": A, "Ap": Ap, "R_hat": Rh, "cb": cb,
                "f": cb.f, "f1": f1, "f2": f2}

    # -- scalars ------------------------------------------------------------
    def scalars(self, A, Ap, f1) -> dict:
        d = self.d
        eta = self.frame.signs
        try:
            B = Ap @ np.linalg.inv(A)
        except np.linalg.LinAlgError:
            nan = np.full((d, d), np.nan)
            return {"B": nan, "B_f": nan, "theta": math.nan, "theta_f": math.nan,
                    "sigma_f": nan, "omega": nan, "x_f": math.nan, "sigma_sq": math.nan}
        Bf = B - f1 / d * np.eye(d)
        theta = float(np.trace(B))
        theta_f = theta - f1
        low = eta[:, None] * Bf  # lowered with the frame metric
        sym = 0.5 * (low + low.T)
        anti = 0.5 * (low - low.T)
        sigma_low = sym - (theta_f / d) * np.diag(eta)
        sigma = eta[:, None] * sigma_low  # back to an endomorphism
        return {
            "B": B,
            "B_f": Bf,
            "theta": theta,
            "theta_f": theta_f,
            "sigma_f": sigma,
            "omega": eta[:, None] * anti,
            "x_f": theta_f / d,
            "sigma_sq": float(np.trace(sigma @ sigma)),
        }

    def node_scalars(self) -> list:
        return [self.scalars(self.A[k], self.Ap[k], self.f1[k]) for k in range(len(self.t))]

    def det_A(self) -> np.ndarray:
        return np.array([np.linalg.det(a) for a in self.A])

    def lagrange_drift(self) -> float:
        eta = np.diag(self.frame.signs)
        W0 = None
        worst = 0.0
        for A, Ap in zip(self.A, self.Ap):
            W = A.T @ eta @ Ap - Ap.T @ eta @ A
            if W0 is None:
                W0 = W
            worst = max(worst, float(np.max(np.abs(W - W0))))
        return worst

    def lagrange_bracket(self) -> float:
        eta = np.diag(self.frame.signs)
        A, Ap = self.A[0], self.Ap[0]
        return float(np.max(np.abs(A.T @ eta @ Ap - Ap.T @ eta @ A)))

    def jacobi_residual(self, count: int | None = 30) -> float:
        """max |A'' + R_hat A| at interval midpoints, A'' by finite differences of A'."""
        worst = 0.0
        for i, tm, h in _mid_parameters(self.path_like(), count):
            App = fd_derivative(lambda q: self.state_at(q, i)["Ap"], tm, h)
            st = self.state_at(tm, i)
            worst = max(worst, float(np.max(np.abs(App + st["R_hat"] @ st["A"]))))
        return worst

    def path_like(self):
        return _Nodes(self.t)

    def history(self) -> tuple:
        """(header, rows) with theta_f, x_f, sigma^2 and det A per node."""
        header = ["parameter", "theta", "theta_f", "x_f", "sigma_sq", "det_A"]
        rows = []
        for k, sc in enumerate(self.node_scalars()):
            rows.append([float(self.t[k]), sc["theta"], sc["theta_f"], sc["x_f"], sc["sigma_sq"],
                         float(np.linalg.det(self.A[k]))])
        return header, rows


@dataclass
class _Nodes:
    t: np.ndarray


def propagate_jacobi(model: SpacetimeModel, path: GeodesicPath, A0=None, A0p=None, mode: str | None = None,
                     frame0=None, L0=None, rtol: float = 1e-10, atol: float = 1e-12,
                     max_step: float | None = None) -> JacobiEvolution:
    """Integrate geodesic, parallel frame and Jacobi tensor A'' + R_hat A = 0 jointly.

    ``A0``/``A0p`` default to the point congruence (0, id).  ``frame0`` (n x d)
    overrides the initial frame; in null mode ``L0`` may be supplied with it.
    """
    if path.connection is not ConnectionKind.LEVI_CIVITA:
        raise ValueError("Jacobi propagation needs a Levi-Civita geodesic")
    n = model.n
    mode = mode or path.causal_type
    if mode not in ("timelike", "null", "spacelike"):
        raise ValueError(f"unknown mode {mode!r}")
    d = rank_for_mode(mode, n)
    x0, v0 = path.x[0], path.v[0]
    g0 = model.metric_matrix(x0)
    if mode == "null":
        if frame0 is None:
            L, E = null_frame(g0, v0)
        else:
            E = np.asarray(frame0, float)
            L = _complete_null(g0, v0, E) if L0 is None else np.asarray(L0, float)
        signs = np.ones(d)
    else:
        if frame0 is None:
            E, signs = adapted_frame(g0, v0)
        else:
            E = np.asarray(frame0, float)
            signs = np.sign(np.einsum("ia,ij,ja->a", E, g0, E))
        L = None
    _check_frame(g0, v0, E, signs, L, mode)
    A0 = np.zeros((d, d)) if A0 is None else np.asarray(A0, float)
    A0p = np.eye(d) if A0p is None else np.asarray(A0p, float)
    if A0.shape != (d, d) or A0p.shape != (d, d):
        raise ValueError(f"Jacobi data must be {d}x{d} for mode {mode}")
    lay = _Layout(n, d, mode == "null")

    def rhs(_t, y):
        x, v, Ef, Lf, A, Ap = lay.unpack(y)
        cb = curvature_at(model, x)
        gam = cb.christoffel
        acc = -np.einsum("kij,i,j->k", gam, v, v)
        dE = -np.einsum("kij,i,ja->ka", gam, v, Ef)
        Rh = _tidal(cb, v, Ef, signs)
        parts = [v, acc, dE.ravel()]
        if Lf is not None:
            parts.append(-np.einsum("kij,i,j->k", gam, v, Lf))
        parts += [Ap.ravel(), (-Rh @ A).ravel()]
        return np.concatenate(parts)

    y0 = np.concatenate([x0, v0, E.ravel()] + ([L] if L is not None else []) + [A0.ravel(), A0p.ravel()])
    span = path.t[-1] - path.t[0]
    solver = DormandPrince(rtol=rtol, atol=atol, max_step=max_step or span / 8.0)
    sol = solver.solve(rhs, path.t[0], y0, path.t[-1], accept=lambda _t, y: model.in_domain(y[:n]))
    Es, Ls, As, Aps, xs, vs = [], [], [], [], [], []
    for y in sol.y:
        x, v, Ef, Lf, A, Ap = lay.unpack(y)
        xs.append(x); vs.append(v); Es.append(Ef); As.append(A); Aps.append(Ap)
        if Lf is not None:
            Ls.append(Lf)
    frame = PropagatedFrame(mode, signs, np.array(Es), np.array(Ls) if Ls else None)
    evo = JacobiEvolution(model, path, mode, d, frame, sol.t, np.array(xs), np.array(vs),
                          np.array(As), np.array(Aps), np.zeros((len(sol.t), d, d)),
                          np.zeros(len(sol.t)), np.zeros(len(sol.t)), np.zeros(len(sol.t)), [],
                          sol.status, rhs, lay, sol.y)
    for k in range(len(sol.t)):
        st = evo._derive(xs[k], vs[k], Es[k], Ls[k] if Ls else None, As[k], Aps[k], curvature_at(model, xs[k]))
        evo.R_hat[k] = st["R_hat"]
        evo.f[k], evo.f1[k], evo.f2[k] = st["f"], st["f1"], st["f2"]
        evo.bundles.append(st["cb"])
    return evo


def _complete_null(g, k, E):
    """Null L with g(k, L) = -1 orthogonal to the screen E."""
    n = g.shape[0]
    for i in range(n):
        c = np.eye(n)[i] - E @ (E.T @ g[:, i])
        if abs(c @ g @ k) > 1e-8:
            break
    c = c / (-(c @ g @ k))
    return c + 0.5 * float(c @ g @ c) * k


def _check_frame(g, v, E, signs, L, mode, tol=1e-8):
    d = E.shape[1]
    G = E.T @ g @ E
    if np.max(np.abs(G - np.diag(signs))) > tol:
        raise ValueError("initial frame is not orthonormal")
    if np.max(np.abs(E.T @ g @ v)) > tol * max(1.0, float(np.linalg.norm(v))):
        raise ValueError("initial frame is not orthogonal to the tangent")
    if mode == "null":
        if L is None or abs(float(L @ g @ v) + 1.0) > tol or abs(float(L @ g @ L)) > tol:
            raise ValueError("null frame needs L with g(k, L) = -1 and g(L, L) = 0")
        if np.max(np.abs(E.T @ g @ L)) > tol:
            raise ValueError("screen must be orthogonal to L")
    elif d != len(v) - 1:
        raise ValueError("frame rank mismatch")


# ---------------------------------------------------------------------------
# Raychaudhuri / Riccati residuals
# ---------------------------------------------------------------------------


def _coefficient(N: SyntheticDimension, mode: str, n: int) -> float:
    """Coefficient of f'^2 in the normalized Raychaudhuri equation.

    timelike: (N-1)/((N-n)(n-1)^2); null: (N-2)/((N-n)(n-2)^2); 1/d^2 at N = inf.
    """
    d = rank_for_mode(mode, n)
    a = 2.0 if mode == "null" else 1.0
    return N.ratio(a, n) / (d * d)


def raychaudhuri_residual(evo: JacobiEvolution, N: SyntheticDimension, count: int | None = 25,
                          min_singular: float = 0.2, vorticity_tol: float = 1e-8) -> dict:
    """Residuals of the scalar (x_f), matrix (B_f) and integrating-factor forms.

    Samples where the smallest singular value of A drops below
    ``min_singular * max(1, |A'|)`` are skipped: B blows up there and the
    finite-difference derivative loses accuracy.
    """
    if evo.mode == "spacelike":
        raise ValueError("Raychaudhuri residuals are defined for timelike and null congruences")
    n, d = evo.model.n, evo.d
    if N.n != n:
        N = SyntheticDimension(N.value, n)
    if evo.lagrange_bracket() > vorticity_tol:
        raise ValueError("congruence has vorticity; Raychaudhuri residuals need the vorticity-free case")
    c = _coefficient(N, evo.mode, n)
    worst = {"scalar": 0.0, "riccati": 0.0, "integrating_factor": 0.0}
    used = 0
    eye = np.eye(d)

    def sc(q, i):
        st = evo.state_at(q, i)
        return st, evo.scalars(st["A"], st["Ap"], st["f1"])

    for i, tm, h in _mid_parameters(evo.path_like(), count):
        st = evo.state_at(tm, i)
        scale = max(1.0, float(np.linalg.norm(st["Ap"], 2)))
        if np.linalg.svd(st["A"], compute_uv=False)[-1] < min_singular * scale:
            continue
        used += 1
        s0 = evo.scalars(st["A"], st["Ap"], st["f1"])
        cb = st["cb"]
        v, f1, f2 = st["v"], st["f1"], st["f2"]
        ric = float(v @ bakry_emery_tensor(cb, N) @ v)
        xf = s0["x_f"]
        rhs = -(ric + s0["sigma_sq"]) / d - xf * xf - 2.0 * xf * f1 / d - c * f1 * f1
        dx = fd_derivative(lambda q: sc(q, i)[1]["x_f"], tm, h)
        worst["scalar"] = max(worst["scalar"], abs(float(dx) - rhs))
        Rf = st["R_hat"] + (f2 + f1 * f1 / d) / d * eye
        Bf = s0["B_f"]
        dB = fd_derivative(lambda q: sc(q, i)[1]["B_f"], tm, h)
        worst["riccati"] = max(worst["riccati"], float(np.max(np.abs(dB + Rf + Bf @ Bf + 2.0 * f1 / d * Bf))))

        def weighted(q):
            s_, scal = sc(q, i)
            return math.exp(2.0 * s_["f"] / d) * scal["x_f"]

        lhs = math.exp(-2.0 * st["f"] / d) * float(fd_derivative(weighted, tm, h)) + xf * xf
        rhs313 = -(ric + s0["sigma_sq"]) / d - c * f1 * f1
        worst["integrating_factor"] = max(worst["integrating_factor"], abs(lhs - rhs313))
    worst["samples"] = used
    worst["coefficient"] = c
    worst["coefficient_is_zero"] = c == 0.0
    return worst


# ---------------------------------------------------------------------------
# conjugate / focal points
# ---------------------------------------------------------------------------


@dataclass
class FocusReport:
    kind: str
    first_parameter: float | None
    verdict: str  # "found", "none", "grazing-inconclusive"
    bound_parameter: float | None = None
    literal_bound: float | None = None
    rigorous_bound: float | None = None
    epsilon_N: float | None = None
    delta: float | None = None
    first_weighted_parameter: float | None = None
    compared_parameter: str | None = None
    saturated: bool | None = None
    within_bound: bool | None = None
    hypothesis_holds: bool | None = None
    hypothesis_min: float | None = None
    method: str | None = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            if isinstance(v, (np.floating,)):
                v = float(v)
            out[k] = v
        return out


def _sigma_min(evo, q):
    return float(np.linalg.svd(evo.state_at(q)["A"], compute_uv=False)[-1])


def _hermite_scan(evo, samples_per_interval):
    """(parameter, A) samples: cubic Hermite interpolation of A using A' at nodes."""
    qs, As = [float(evo.t[0])], [evo.A[0]]
    for i in range(len(evo.t) - 1):
        a, b = evo.t[i], evo.t[i + 1]
        h = b - a
        for u in np.linspace(0.0, 1.0, samples_per_interval + 2)[1:]:
            h00 = 2 * u**3 - 3 * u**2 + 1
            h10 = u**3 - 2 * u**2 + u
            h01 = -2 * u**3 + 3 * u**2
            h11 = u**3 - u**2
            A = h00 * evo.A[i] + h10 * h * evo.Ap[i] + h01 * evo.A[i + 1] + h11 * h * evo.Ap[i + 1]
            qs.append(float(a + u * h))
            As.append(A)
    return np.array(qs), As


def _small_eigenvalue(A):
    """Real eigenvalue of smallest modulus, or None if it is not real."""
    ev = np.linalg.eigvals(A)
    k = int(np.argmin(np.abs(ev)))
    lam = ev[k]
    if abs(lam.imag) > 1e-12 * max(1.0, abs(lam)):
        return None
    return float(lam.real)


def _eigen_bisect(evo, a, b):
    """Bisect a sign change of the smallest real eigenvalue of A on [a, b].

    Zeros of even multiplicity in det A (e.g. A = (1 - t/r) I) still show a
    simple sign change in the eigenvalue itself.
    """
    la, lb = _small_eigenvalue(evo.state_at(a)["A"]), _small_eigenvalue(evo.state_at(b)["A"])
    if la is None or lb is None or la * lb >= 0:
        return None
    while b - a > 1e-12:
        m = 0.5 * (a + b)
        lm = _small_eigenvalue(evo.state_at(m)["A"])
        if lm is None:
            return None
        if lm * la > 0:
            a, la = m, lm
        else:
            b = m
    return float(0.5 * (a + b))


def detect_conjugate(evo: JacobiEvolution, kind: str = "conjugate", samples_per_interval: int = 6,
                     zero_tol: float = 1e-9, grazing_tol: float = 1e-6, candidate_tol: float = 1e-2) -> FocusReport:
    """First degeneracy of A after the initial parameter.

    The scan uses Hermite interpolation of A between nodes; candidates are
    refined on the integrated state.  Sign changes of det A are bisected;
    tangential zeros (even multiplicity) are found as local minima of the
    smallest singular value of A.
    """
    scale = max(1.0, float(np.max([np.linalg.norm(a, 2) for a in evo.A])))
    qs, As = _hermite_scan(evo, samples_per_interval)
    dets = np.array([np.linalg.det(A) for A in As])
    sig = np.array([np.linalg.svd(A, compute_uv=False)[-1] for A in As])
    first = 1 if sig[0] < zero_tol * scale else 0
    grazing = None
    for j in range(first, len(qs) - 1):
        if dets[j] * dets[j + 1] < 0:
            lo, hi, dlo = qs[j], qs[j + 1], dets[j]
            while hi - lo > 1e-12:
                mid = 0.5 * (lo + hi)
                dm = np.linalg.det(evo.state_at(mid)["A"])
                if dm * dlo > 0:
                    lo, dlo = mid, dm
                else:
                    hi = mid
            return FocusReport(kind, float(0.5 * (lo + hi)), "found", method="det-sign-change")
        if j >= first + 1 and sig[j] <= sig[j - 1] and sig[j] <= sig[j + 1] and sig[j] < candidate_tol * scale:
            root = _eigen_bisect(evo, qs[j - 1], qs[j + 1])
            if root is not None and _sigma_min(evo, root) < zero_tol * scale:
                return FocusReport(kind, root, "found", method="eigenvalue-sign-change")
            res = minimize_scalar(lambda q: _sigma_min(evo, q), bounds=(qs[j - 1], qs[j + 1]),
                                  method="bounded", options={"xatol": 1e-13})
            val = float(res.fun)
            if val < zero_tol * scale:
                return FocusReport(kind, float(res.x), "found", method="singular-value-minimum")
            if val < grazing_tol * scale and grazing is None:
                grazing = float(res.x)
    if grazing is not None:
        return FocusReport(kind, grazing, "grazing-inconclusive", method="singular-value-minimum",
                           notes=["near-zero minimum of the smallest singular value"])
    return FocusReport(kind, None, "none")


def _epsilon(N: SyntheticDimension, mode: str, n: int, f_p: float) -> tuple:
    """(epsilon_N, regime) for the focusing window."""
    d = rank_for_mode(mode, n)
    crit = 2.0 if mode == "null" else 1.0
    if N.is_infinite or N.value <= crit:
        return math.exp(-2.0 * f_p / d), "weighted"
    if N.value > n:
        return 1.0, "affine"
    return math.nan, "outside"


def focusing_bound_check(evo: JacobiEvolution, N: SyntheticDimension, kind: str = "focal",
                         hypothesis_tol: float = 1e-9) -> FocusReport:
    """Compare the first focal/conjugate parameter with the focusing window.

    delta = -theta_f at the start.  For N <= 2 (null) / N <= 1 (timelike) and
    N = inf the window d*eps_N/delta is measured in the weighted parameter
    s(t) = int exp(-2f/d); for N > n it is measured in the affine parameter,
    where (N-1)/delta resp. (N-2)/delta is also reported as the sharp bound.
    """
    n, d, mode = evo.model.n, evo.d, evo.mode
    if N.n != n:
        N = SyntheticDimension(N.value, n)
    s0 = evo.scalars(evo.A[0], evo.Ap[0], evo.f1[0])
    theta_f = s0["theta_f"]
    if not math.isfinite(theta_f):
        raise ValueError("initial expansion undefined; focusing bound needs A(0) invertible")
    delta = -theta_f
    if delta <= 0:
        raise ValueError(f"focusing bound needs theta_f < 0 at the start (got {theta_f!r})")
    eps, regime = _epsilon(N, mode, n, evo.f[0])
    rep = detect_conjugate(evo, kind)
    rep.delta = delta
    rep.epsilon_N = eps
    rep.bound_parameter = d * eps / delta
    rep.literal_bound = eps / delta
    ricN = [float(v @ bakry_emery_tensor(cb, N) @ v) for v, cb in zip(evo.v, evo.bundles)]
    rep.hypothesis_min = min(ricN)
    rep.hypothesis_holds = rep.hypothesis_min >= -hypothesis_tol
    if regime == "affine":
        rep.rigorous_bound = (N.value - (2.0 if mode == "null" else 1.0)) / delta
        rep.compared_parameter = "affine"
    elif regime == "weighted":
        rep.rigorous_bound = rep.bound_parameter
        rep.compared_parameter = "weighted"
    else:
        rep.compared_parameter = "none"
        rep.notes.append("N outside the focusing bound's range")
    if rep.first_parameter is not None:
        if regime == "weighted":
            table = reparametrize(evo.model, evo.path, float(d))
            tf = rep.first_parameter
            rep.first_weighted_parameter = table.s_of_t(tf) if tf < table.t[-1] else float(table.s[-1])
            compared = rep.first_weighted_parameter
        else:
            compared = rep.first_parameter
        B = rep.bound_parameter
        rep.saturated = abs(compared - B) < 1e-3 * B
        if rep.hypothesis_holds and regime != "outside":
            rep.within_bound = compared <= rep.rigorous_bound * (1 + 1e-9) + 1e-9
    if not rep.hypothesis_holds:
        rep.notes.append("curvature-dimension hypothesis fails along the path; comparison is advisory")
    return rep


# ---------------------------------------------------------------------------
# f-generic probe
# ---------------------------------------------------------------------------


def f_generic_probe(model: SpacetimeModel, path: GeodesicPath, N: SyntheticDimension, tol: float = 1e-9) -> dict:
    """First node where the tidal endomorphism R_f (R_f-bar for null) is nonzero."""
    n = model.n
    if N.n != n:
        N = SyntheticDimension(N.value, n)
    first = None
    consistent = True
    crit = 2.0 if path.causal_type == "null" else 1.0
    forced_range = N.is_infinite or N.value <= crit or N.value > n
    for k, (t, x, v) in enumerate(zip(path.t, path.x, path.v)):
        be = bakry_emery_at(model, x, v, N)
        M = be.R_f if be.mode == "timelike" else be.Rbar_f
        norm = float(np.linalg.norm(M))
        hit = norm > tol
        if forced_range and float(v @ be.ric_f_N @ v) > tol and not hit:
            consistent = False
        if hit and first is None:
            first = (float(t), k, norm)
    return {
        "hit": first is not None,
        "first_parameter": None if first is None else first[0],
        "first_node": None if first is None else first[1],
        "norm": None if first is None else first[2],
        "consistent_with_trace_identity": consistent,
    }


# ---------------------------------------------------------------------------
# weighted / conformal Jacobi transformation
# ---------------------------------------------------------------------------


def _target_tidal(model, target_model, kind, x, Xhat, Ehat, screen_mode):
    """Quotient components of Y -> R^(Y, Xhat) Xhat in the basis Ehat (mod Xhat)."""
    if kind is ConnectionKind.WEIGHTED:
        cb = curvature_at(model, x)
        R, _ = connection_curvature("weighted", cb)
    else:
        R = curvature_at(target_model, x).riemann
    T = np.einsum("lkij,j,k->li", R, Xhat, Xhat)
    img = T @ Ehat  # columns R^(Ehat_b, Xhat) Xhat
    n = len(x)
    basis = np.column_stack([Ehat, Xhat])
    if basis.shape[1] < n:
        # null case: complete with any vector transverse to the screen and Xhat
        extra = np.linalg.svd(basis.T)[2][-1]
        basis = np.column_stack([basis, extra])
    coeffs = np.linalg.solve(basis, img)
    d = Ehat.shape[1]
    leak = float(np.max(np.abs(coeffs[d + 1:]))) if basis.shape[1] > d + 1 else 0.0
    return coeffs[:d], leak


def transform_jacobi(evo: JacobiEvolution, alpha: float | None = None, count: int = 20,
                     table: ReparamTable | None = None) -> dict:
    """Check that Ahat = e^{-f/alpha} A is a Jacobi tensor of the target connection
    along sigma = gamma o s^{-1}, and the expansion/shear relations.

    The Jacobi residual is |d^2 Ahat/ds^2 + Rhat(Ahat)| with d/ds by finite
    differences in s and the target tidal operator computed from the target
    connection (weighted: coefficient jets; conformal: rescaled metric).
    """
    model = evo.model
    n, d = model.n, evo.d
    if evo.mode == "timelike":
        kind, default_alpha = ConnectionKind.WEIGHTED, n - 1
    elif evo.mode == "null":
        kind, default_alpha = ConnectionKind.CONFORMAL, n - 2
    else:
        raise ValueError("transformation defined for timelike and null congruences")
    alpha = float(default_alpha if alpha is None else alpha)
    if alpha != default_alpha:
        raise ValueError(f"alpha must be {default_alpha} for a {evo.mode} congruence")
    table = table or reparametrize(model, evo.path, alpha)
    target_model = conformal_rescale(model) if kind is ConnectionKind.CONFORMAL else None

    def at_s(sq):
        tq, i = table.t_of_s(sq)
        i = min(max(int(np.searchsorted(evo.t, tq, side="right")) - 1, 0), len(evo.t) - 1)
        st = evo.state_at(tq, i)
        w = math.exp(-st["f"] / alpha)
        return st, w * st["A"]

    res = {"jacobi": 0.0, "B": 0.0, "sigma": 0.0, "theta": 0.0, "det": 0.0, "quotient_leak": 0.0,
           "sign_agreement": True, "B_zero_implies": True}
    s = table.s
    used = 0
    idx = range(len(s) - 1)
    if len(s) - 1 > count:
        idx = np.unique(np.linspace(0, len(s) - 2, count).astype(int))
    for i in idx:
        sm = 0.5 * (s[i] + s[i + 1])
        h = min(1e-3, (s[i + 1] - s[i]) / 6.0)
        st, Ahat = at_s(sm)
        if np.linalg.svd(st["A"], compute_uv=False)[-1] < 1e-3:
            continue
        used += 1
        dA = fd_derivative(lambda q: at_s(q)[1], sm, h)
        # second derivative from the s-derivative of dAhat/ds
        def dAhat(q):
            st_, _ = at_s(q)
            e = math.exp(2.0 * st_["f"] / alpha)
            return e * math.exp(-st_["f"] / alpha) * (st_["Ap"] - st_["f1"] / alpha * st_["A"])
        d2A = fd_derivative(dAhat, sm, h)
        ef = math.exp(st["f"] / alpha)
        Xhat = math.exp(2.0 * st["f"] / alpha) * st["v"]
        Ehat = ef * st["E"]
        Rq, leak = _target_tidal(model, target_model, kind, st["x"], Xhat, Ehat, evo.mode)
        res["quotient_leak"] = max(res["quotient_leak"], leak)
        res["jacobi"] = max(res["jacobi"], float(np.max(np.abs(d2A + Rq @ Ahat))))
        Btil = dA @ np.linalg.inv(Ahat)
        sc = evo.scalars(st["A"], st["Ap"], st["f1"])
        e2 = math.exp(2.0 * st["f"] / alpha)
        res["B"] = max(res["B"], float(np.max(np.abs(Btil - e2 * sc["B_f"]))))
        theta_t = float(np.trace(Btil))
        res["theta"] = max(res["theta"], abs(theta_t - e2 * sc["theta_f"]))
        eta = evo.frame.signs
        low = eta[:, None] * Btil
        sig_t = 0.5 * (low + low.T) - theta_t / d * np.diag(eta)
        sig_t = eta[:, None] * sig_t / e2
        res["sigma"] = max(res["sigma"], float(np.max(np.abs(sig_t - sc["sigma_f"]))))
        det_ratio = np.linalg.det(Ahat) - math.exp(-d * st["f"] / alpha) * np.linalg.det(st["A"])
        res["det"] = max(res["det"], abs(float(det_ratio)))
        if theta_t * sc["theta_f"] < 0 and abs(sc["theta_f"]) > 1e-9:
            res["sign_agreement"] = False
        if np.max(np.abs(sc["B_f"])) == 0.0 and np.max(np.abs(e2 * sc["B_f"])) != 0.0:
            res["B_zero_implies"] = False
    res["samples"] = used
    res["alpha"] = alpha
    res["target"] = kind.value
    return res


# ---------------------------------------------------------------------------
# index form
# ---------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def index_form(model: SpacetimeModel, path, v_func, dv_func=None, evo: JacobiEvolution | None = None,
               panels: int = 64) -> dict:
    """Index form I(v,v) of a field given by frame components v_func(t) (length n-1)
    along a timelike geodesic, and the residual of its weighted rewriting.

    LHS: int_0^rho [|v'|^2 - g(R(v,gamma')gamma', v)] dt in the affine parameter.
    RHS: (fdot/(n-1)) |w|^2 |_0^rho + int_0^{s(rho)} [|wdot|^2 - e^{4f/(n-1)} R_f(w,w)] ds
    with w = e^{-f/(n-1)} v and dot = d/ds.  Both integrals use composite
    Gauss-Legendre rules on ``panels`` uniform panels.
    """
    n = model.n
    d = n - 1
    if evo is None:
        if path.causal_type != "timelike":
            raise ValueError("index form needs a timelike geodesic")
        evo = propagate_jacobi(model, path, np.eye(d), np.zeros((d, d)), mode="timelike")
    if evo.mode != "timelike":
        raise ValueError("index form needs a timelike geodesic")
    if dv_func is None:
        def dv_func(t):
            h = 1e-4
            return fd_derivative(v_func, t, h)

    t = evo.t
    # frame components keep the field orthogonal to the geodesic
    probe = np.asarray(v_func(float(t[0])), float)
    if probe.shape != (d,):
        raise ValueError(f"variation field must have {d} frame components")

    def tidal_form(st, vec):
        return float(vec @ st["R_hat"] @ vec)

    lhs = 0.0
    tgrid = np.linspace(t[0], t[-1], panels + 1)
    for a, b in zip(tgrid[:-1], tgrid[1:]):
        half, mid = 0.5 * (b - a), 0.5 * (a + b)
        for xg, wg in zip(_GL_X, _GL_W):
            q = mid + half * xg
            st = evo.state_at(q)
            vv = np.asarray(v_func(q), float)
            dv = np.asarray(dv_func(q), float)
            lhs += wg * half * (float(dv @ dv) - tidal_form(st, vv))
    table = reparametrize(model, evo.path, float(d))
    s = table.s
    integral = 0.0
    sgrid = np.linspace(s[0], s[-1], panels + 1)
    for a, b in zip(sgrid[:-1], sgrid[1:]):
        half, mid = 0.5 * (b - a), 0.5 * (a + b)
        for xg, wg in zip(_GL_X, _GL_W):
            sq = mid + half * xg
            tq, _ = table.t_of_s(sq)
            j = min(max(int(np.searchsorted(evo.t, tq, side="right")) - 1, 0), len(evo.t) - 1)
            st = evo.state_at(tq, j)
            f, f1, f2 = st["f"], st["f1"], st["f2"]
            vv = np.asarray(v_func(tq), float)
            dv = np.asarray(dv_func(tq), float)
            w = math.exp(-f / d) * vv
            wdot = math.exp(f / d) * (dv - f1 / d * vv)
            Rf = st["R_hat"] + (f2 + f1 * f1 / d) / d * np.eye(d)
            integral += wg * half * (float(wdot @ wdot) - math.exp(4.0 * f / d) * float(w @ Rf @ w))
    bd = 0.0
    for q, sign in ((t[-1], 1.0), (t[0], -1.0)):
        j = min(max(int(np.searchsorted(evo.t, q, side="right")) - 1, 0), len(evo.t) - 1)
        st = evo.state_at(q, j)
        w = math.exp(-st["f"] / d) * np.asarray(v_func(q), float)
        fdot = st["f1"] * math.exp(2.0 * st["f"] / d)
        bd += sign * fdot / d * float(w @ w)
    rhs = bd + integral
    return {"I": lhs, "rhs": rhs, "boundary": bd, "residual": abs(lhs - rhs), "s_final": float(s[-1])}
