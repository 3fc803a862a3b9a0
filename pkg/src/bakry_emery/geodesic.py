"""Geodesics of the Levi-Civita, weighted and conformal connections,
f-reparametrization, lifting in twisted products and parallel transport."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .curvature import christoffel_at
from .ode import DormandPrince, dp_step
from .spacetime import SpacetimeModel, TangentVector, classify_vector

__all__ = [
    "ConnectionKind",
    "GeodesicPath",
    "PolygonPath",
    "ReparamTable",
    "integrate_geodesic",
    "geodesic_acceleration",
    "geodesic_residual",
    "reparametrize",
    "verify_reparametrization",
    "lift_twisted_geodesic",
    "LiftResult",
    "parallel_transport",
    "TransportResult",
    "fd_derivative",
]


class ConnectionKind(enum.Enum):
    LEVI_CIVITA = "levi_civita"
    WEIGHTED = "weighted"
    CONFORMAL = "conformal"

    def alpha(self, n: int) -> float:
        if self is ConnectionKind.WEIGHTED:
            return float(n - 1)
        if self is ConnectionKind.CONFORMAL:
            if n < 3:
                raise ValueError("conformal connection needs n >= 3")
            return float(n - 2)
        raise ValueError("the Levi-Civita connection has no reparametrization weight")

    @classmethod
    def parse(cls, value) -> "ConnectionKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"lc": "levi_civita", "levicivita": "levi_civita", "f": "weighted"}
        return cls(aliases.get(key, key))


def _connection_term(kind: ConnectionKind, n, g, g_inv, df, X, Y) -> np.ndarray:
    """Difference tensor (nabla' - nabla)(X, Y) for the chosen connection."""
    if kind is ConnectionKind.LEVI_CIVITA:
        return np.zeros(n)
    dX, dY = float(df @ X), float(df @ Y)
    if kind is ConnectionKind.WEIGHTED:
        return -(dX * Y + dY * X) / (n - 1)
    grad = g_inv @ df
    return -(dX * Y + dY * X - float(X @ g @ Y) * grad) / (n - 2)


def geodesic_acceleration(model: SpacetimeModel, kind: ConnectionKind, x, v) -> np.ndarray:
    """x'' for a geodesic of the given connection through (x, v)."""
    g, gi, gam, df = christoffel_at(model, x)
    a = -np.einsum("kij,i,j->k", gam, v, v)
    return a - _connection_term(kind, model.n, g, gi, df, v, v)


@dataclass
class GeodesicPath:
    model: SpacetimeModel
    connection: ConnectionKind
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    a: np.ndarray
    causal_type: str
    status: str = "ok"
    message: str = ""
    rtol: float = 1e-9
    atol: float = 1e-11

    @property
    def truncated(self) -> bool:
        return self.status != "ok"

    @property
    def n(self) -> int:
        return self.model.n

    @property
    def nodes(self):
        return list(zip(self.t, self.x, self.v))

    def _rhs(self, _t, y):
        n = self.n
        return np.concatenate([y[n:], geodesic_acceleration(self.model, self.connection, y[:n], y[n:])])

    def _index(self, tq: float) -> int:
        if tq < self.t[0] - 1e-12 or tq > self.t[-1] + 1e-12:
            raise ValueError(f"parameter {tq!r} outside path range [{self.t[0]}, {self.t[-1]}]")
        i = int(np.searchsorted(self.t, tq, side="right")) - 1
        return min(max(i, 0), len(self.t) - 1)

    def state_at(self, tq: float, index: int | None = None) -> tuple:
        """(x, v) at ``tq`` by a single Runge-Kutta step from the preceding node."""
        i = self._index(tq) if index is None else index
        h = tq - self.t[i]
        y = np.concatenate([self.x[i], self.v[i]])
        if h == 0.0:
            return self.x[i].copy(), self.v[i].copy()
        y5, _, _ = dp_step(self._rhs, self.t[i], y, h)
        return y5[: self.n], y5[self.n:]

    def hermite_at(self, tq: float) -> tuple:
        """Cubic Hermite interpolation of position (from x, v) and velocity (from v, a)."""
        i = min(self._index(tq), len(self.t) - 2)
        t0, t1 = self.t[i], self.t[i + 1]
        h = t1 - t0
        s = (tq - t0) / h
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        x = h00 * self.x[i] + h10 * h * self.v[i] + h01 * self.x[i + 1] + h11 * h * self.v[i + 1]
        v = h00 * self.v[i] + h10 * h * self.a[i] + h01 * self.v[i + 1] + h11 * h * self.a[i + 1]
        return x, v

    def f_along(self) -> np.ndarray:
        return np.array([self.model.potential.value(p) for p in self.x])

    def f_derivatives(self) -> tuple:
        """(f, f', f'') along nodes, f' = df(v), f'' = Hess_coord f(v,v) + df(a)."""
        pot = self.model.potential
        F0, F1, F2 = [], [], []
        for x, v, a in zip(self.x, self.v, self.a):
            if pot.is_constant:
                F0.append(pot.value(x))
                F1.append(0.0)
                F2.append(0.0)
                continue
            j = pot.jet(x, order=2)
            F0.append(j.v)
            F1.append(float(j.g @ v))
            F2.append(float(v @ j.h @ v + j.g @ a))
        return np.array(F0), np.array(F1), np.array(F2)

    def speed_sq(self) -> np.ndarray:
        return np.array([v @ self.model.metric_matrix(x) @ v for x, v in zip(self.x, self.v)])

    def to_rows(self) -> list:
        return [[float(t), *map(float, x), *map(float, v)] for t, x, v in zip(self.t, self.x, self.v)]

    def csv_header(self) -> list:
        c = self.model.coords
        return ["parameter", *c, *[f"d{k}" for k in c]]


def integrate_geodesic(model: SpacetimeModel, connection, init: TangentVector, span,
                       rtol: float = 1e-9, atol: float = 1e-11, max_step: float = math.inf,
                       null_tol: float = 1e-9) -> GeodesicPath:
    kind = ConnectionKind.parse(connection)
    t0, t1 = map(float, span)
    if not t1 > t0:
        raise ValueError("span must be increasing")
    x0 = np.asarray(init.base, dtype=float)
    v0 = np.asarray(init.components, dtype=float)
    n = model.n
    if len(x0) != n:
        raise ValueError("initial point has wrong dimension")
    if not model.in_domain(x0):
        raise ValueError("initial point outside the model domain")
    g0 = model.metric_matrix(x0)
    ctype = classify_vector(g0, v0, null_tol * max(1.0, float(v0 @ v0)))

    def rhs(_t, y):
        return np.concatenate([y[n:], geodesic_acceleration(model, kind, y[:n], y[n:])])

    solver = DormandPrince(rtol=rtol, atol=atol, max_step=max_step)
    sol = solver.solve(rhs, t0, np.concatenate([x0, v0]), t1,
                       accept=lambda _t, y: model.in_domain(y[:n]))
    xs, vs = sol.y[:, :n], sol.y[:, n:]
    acc = np.array([geodesic_acceleration(model, kind, x, v) for x, v in zip(xs, vs)])
    return GeodesicPath(model, kind, sol.t, xs, vs, acc, ctype, sol.status, sol.message, rtol, atol)


# ---------------------------------------------------------------------------
# residual evaluation
# ---------------------------------------------------------------------------

_FD4 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def fd_derivative(func, t: float, h: float):
    """Fourth-order central difference of a (vector) function."""
    vals = [np.asarray(func(t + k * h), dtype=float) for k in (-2, -1, 1, 2)]
    return (vals[0] * _FD4[0] + vals[1] * _FD4[1] + vals[2] * _FD4[3] + vals[3] * _FD4[4]) / h


def _mid_parameters(path: GeodesicPath, count: int | None = None) -> list:
    """Midpoints of node intervals with the FD step kept inside each interval."""
    t = path.t
    idx = range(len(t) - 1)
    if count is not None and len(t) - 1 > count:
        idx = np.unique(np.linspace(0, len(t) - 2, count).astype(int))
    out = []
    for i in idx:
        h = t[i + 1] - t[i]
        out.append((i, 0.5 * (t[i] + t[i + 1]), min(1e-3, h / 6.0)))
    return out


def geodesic_residual(path: GeodesicPath, connection=None, count: int | None = 40) -> float:
    """Max |x'' - geodesic acceleration| at interval midpoints, x'' by finite differences."""
    kind = path.connection if connection is None else ConnectionKind.parse(connection)
    worst = 0.0
    for i, tm, h in _mid_parameters(path, count):
        acc = fd_derivative(lambda s: path.state_at(s, i)[1], tm, h)
        x, v = path.state_at(tm, i)
        r = float(np.max(np.abs(acc - geodesic_acceleration(path.model, kind, x, v))))
        worst = max(worst, r)
    return worst


# ---------------------------------------------------------------------------
# f-reparametrization
# ---------------------------------------------------------------------------

_CHEB_DEG = 16
_CHEB_NODES = np.cos(np.pi * (np.arange(_CHEB_DEG + 1) + 0.5) / (_CHEB_DEG + 1))


def _weight_fits(path: GeodesicPath, alpha: float) -> list:
    """Per-interval Chebyshev antiderivatives of exp(-2 f(path)/alpha)."""
    pot = path.model.potential
    fits = []
    for i in range(len(path.t) - 1):
        a, b = path.t[i], path.t[i + 1]
        if pot.is_constant:
            w = np.full(_CHEB_DEG + 1, math.exp(-2.0 * pot.value(path.x[i]) / alpha))
        else:
            taus = 0.5 * (a + b) + 0.5 * (b - a) * _CHEB_NODES
            w = np.array([math.exp(-2.0 * pot.value(path.state_at(q, i)[0]) / alpha) for q in taus])
        cheb = np.polynomial.Chebyshev.fit(_CHEB_NODES, w, _CHEB_DEG, domain=[-1, 1])
        anti = cheb.integ(lbnd=-1) * (0.5 * (b - a))
        fits.append((a, b, cheb, anti))
    return fits


@dataclass
class ReparamTable:
    """s(t) along a path; node values plus per-interval Chebyshev antiderivatives."""

    path: GeodesicPath
    alpha: float
    t: np.ndarray
    s: np.ndarray
    limit_estimate: float
    limit_kind: str  # analytic-finite, analytic-divergent, extrapolated, divergent-bound, undetermined
    divergent: bool
    notes: str = ""
    fits: list = field(default_factory=list, repr=False)
    _inverse: PchipInterpolator | None = field(default=None, repr=False)

    @property
    def samples(self):
        return list(zip(self.t, self.s))

    def _local(self, tq, i):
        a, b = self.t[i], self.t[i + 1]
        return (2.0 * tq - a - b) / (b - a)

    def s_of_t(self, tq: float, index: int | None = None) -> float:
        i = self.path._index(tq) if index is None else index
        i = min(i, len(self.t) - 2)
        return float(self.s[i] + self.fits[i][3](self._local(tq, i)))

    def ds_dt(self, tq: float, index: int | None = None) -> float:
        i = self.path._index(tq) if index is None else index
        i = min(i, len(self.t) - 2)
        return float(self.fits[i][2](self._local(tq, i)))

    def t_of_s(self, sq: float) -> tuple:
        """(t, interval index) with s(t) = sq; PCHIP guess polished by Newton."""
        if self._inverse is None:
            self._inverse = PchipInterpolator(self.s, self.t)
        i = int(np.searchsorted(self.s, sq, side="right")) - 1
        i = min(max(i, 0), len(self.t) - 2)
        t = float(self._inverse(sq))
        for _ in range(50):
            step = (self.s_of_t(t, i) - sq) / self.ds_dt(t, i)
            t -= step
            if abs(step) <= 1e-16 * max(1.0, abs(t)):
                break
        return t, i


def reparametrize(model: SpacetimeModel, path: GeodesicPath, alpha: float,
                  divergence_bound: float = 1e6, affine_tol: float = 1e-10) -> ReparamTable:
    """s(t) = int_{t0}^t exp(-2 f(path)/alpha), with a tail estimate for s(inf)."""
    alpha = float(alpha)
    t = path.t
    fits = _weight_fits(path, alpha)
    s = np.zeros(len(t))
    for i, fit in enumerate(fits):
        s[i + 1] = s[i] + float(fit[3](1.0))
    F0, F1, F2 = path.f_derivatives()
    slope = F1[-1]
    affine = bool(np.all(np.abs(F2) <= affine_tol * max(1.0, float(np.max(np.abs(F1))))))
    affine = affine and bool(np.all(np.abs(F1 - slope) <= 1e-9 * max(1.0, abs(slope))))
    table = ReparamTable(path, alpha, t.copy(), s, math.nan, "undetermined", False, "", fits)
    if affine:
        if slope > 0:
            tail = alpha / (2.0 * slope) * math.exp(-2.0 * F0[-1] / alpha)
            table.limit_estimate, table.limit_kind = s[-1] + tail, "analytic-finite"
        else:
            table.limit_estimate, table.limit_kind, table.divergent = math.inf, "analytic-divergent", True
        table.notes = "f is affine along the path; tail integrated in closed form"
    elif s[-1] > divergence_bound:
        table.limit_estimate, table.limit_kind, table.divergent = math.inf, "divergent-bound", True
        table.notes = f"partial integral exceeds {divergence_bound:g} (heuristic)"
    else:
        T0, T1 = t[0], t[-1]
        vals = [table.s_of_t(T0 + (T1 - T0) * q) for q in (0.25, 0.5)] + [s[-1]]
        d1, d2 = vals[1] - vals[0], vals[2] - vals[1]
        if d1 > 0 and 0 <= d2 < d1:
            table.limit_estimate = vals[2] + d2 * d2 / (d1 - d2)
            table.limit_kind = "extrapolated"
            table.notes = "Aitken extrapolation of partial integrals (heuristic)"
        else:
            table.notes = "partial integrals not contracting; no limit estimate (heuristic)"
    return table


def verify_reparametrization(model: SpacetimeModel, g_path: GeodesicPath, target,
                         count: int = 30, table: ReparamTable | None = None) -> dict:
    """Residual of the target-connection geodesic equation along gamma o s^{-1}."""
    kind = ConnectionKind.parse(target)
    if kind is ConnectionKind.LEVI_CIVITA:
        raise ValueError("target must be weighted or conformal")
    if g_path.connection is not ConnectionKind.LEVI_CIVITA:
        raise ValueError("reparametrization check starts from a Levi-Civita geodesic")
    if kind is ConnectionKind.CONFORMAL and g_path.causal_type != "null":
        raise ValueError("conformal case requires a null geodesic")
    alpha = kind.alpha(model.n)
    table = table or reparametrize(model, g_path, alpha)
    pot = model.potential

    def sigma_dot(sq):
        tq, i = table.t_of_s(sq)
        x, v = g_path.state_at(tq, i)
        return x, v * math.exp(2.0 * pot.value(x) / alpha)


    worst = 0.0
    scale = 0.0
    s = table.s
    idx = range(len(s) - 1)
    if len(s) - 1 > count:
        idx = np.unique(np.linspace(0, len(s) - 2, count).astype(int))
    for i in idx:
        sm = 0.5 * (s[i] + s[i + 1])
        h = min(1e-3, (s[i + 1] - s[i]) / 6.0)
        acc = fd_derivative(lambda q: sigma_dot(q)[1], sm, h)
        x, v = sigma_dot(sm)
        expect = geodesic_acceleration(model, kind, x, v)
        worst = max(worst, float(np.max(np.abs(acc - expect))))
        scale = max(scale, float(np.max(np.abs(expect))))
    return {"residual": worst, "scale": scale, "alpha": alpha, "samples": len(idx),
            "s_final": float(s[-1])}


# ---------------------------------------------------------------------------
# twisted-product lift
# ---------------------------------------------------------------------------


@dataclass
class LiftResult:
    path: GeodesicPath  # lifted curve eta(lambda) with its velocity at nodes
    lambda_: np.ndarray
    state: np.ndarray  # rows (omega, w, sigma, sigma', s)
    rhs: object = field(repr=False)
    warp_expr: object = field(repr=False)

    @property
    def n(self) -> int:
        return self.path.n

    @property
    def s(self) -> np.ndarray:
        return self.state[:, -1]

    @property
    def sigma(self) -> np.ndarray:
        return self.state[:, 2:self.n + 1]

    @property
    def sigma_prime(self) -> np.ndarray:
        return self.state[:, self.n + 1:2 * self.n]

    def lift_state_at(self, lam: float, index: int | None = None) -> np.ndarray:
        """State of the lift system at ``lam`` by one Runge-Kutta step of that system."""
        i = self.path._index(lam) if index is None else index
        h = lam - self.lambda_[i]
        if h == 0.0:
            return self.state[i].copy()
        return dp_step(self.rhs, self.lambda_[i], self.state[i], h)[0]

    def eta_at(self, lam: float, index: int | None = None) -> tuple:
        y = self.lift_state_at(lam, index)
        n = self.n
        p = np.concatenate([[y[0]], y[2:n + 1]])
        u = self.warp_expr.value(p) / (n - 1)
        return p, np.concatenate([[y[1]], y[n + 1:2 * n] * math.exp(-2.0 * u)])

    def hhat_speed(self) -> np.ndarray:
        out = []
        for y in self.state:
            p = np.concatenate([[y[0]], y[2:self.n + 1]])
            h, _, _ = _base_christoffel(self.path.model, p)
            sp = y[self.n + 1:2 * self.n]
            out.append(float(sp @ h @ sp))
        return np.array(out)

    def warp_values(self) -> np.ndarray:
        n = self.n
        return np.array([self.warp_expr.value(p) / (n - 1) for p in self.path.x])

    def diagnostics(self, count: int = 30, direct_rtol: float = 1e-11) -> dict:
        """Residuals of the lift.

        geodesic: Levi-Civita equation of the full metric along eta, with eta''
        from finite differences of the lift system's own states.
        speed_law: d/ds log hhat(sigma',sigma') - 2 du_y(sigma') (holds for any twist).
        speed_constancy / warp_ratio_spread: spread of hhat(sigma',sigma') and of
        hhat(sigma',sigma') e^{-2u}; the first vanishes for warped products,
        the second when the twist does not depend on t.
        direct: pointwise gap to a direct integration of the full geodesic equation.
        """
        path = self.path
        model = path.model
        n = self.n
        geo = 0.0
        law = 0.0
        for i, lm, h in _mid_parameters(path, count):
            acc = fd_derivative(lambda q: self.eta_at(q, i)[1], lm, h)
            x, v = self.eta_at(lm, i)
            geo = max(geo, float(np.max(np.abs(acc - geodesic_acceleration(model, ConnectionKind.LEVI_CIVITA, x, v)))))

            def logspeed(q):
                y = self.lift_state_at(q, i)
                pq = np.concatenate([[y[0]], y[2:n + 1]])
                hh, _, _ = _base_christoffel(model, pq)
                sp = y[n + 1:2 * n]
                return math.log(float(sp @ hh @ sp))

            y = self.lift_state_at(lm, i)
            sp = y[n + 1:2 * n]
            pm = np.concatenate([[y[0]], y[2:n + 1]])
            hh, _, _ = _base_christoffel(model, pm)
            if float(sp @ hh @ sp) > 1e-12:
                dlog_dlam = fd_derivative(logspeed, lm, h)
                if self.warp_expr.is_constant:
                    du = np.zeros(n)
                    u = self.warp_expr.value(pm) / (n - 1)
                else:
                    j = self.warp_expr.jet(pm, order=1)
                    du = np.asarray(j.g) / (n - 1)
                    u = j.v / (n - 1)
                dlog_ds = float(dlog_dlam) * math.exp(2.0 * u)
                law = max(law, abs(dlog_ds - 2.0 * float(du[1:] @ sp)))
        speed = self.hhat_speed()
        ratio = speed * np.exp(-2.0 * self.warp_values())
        direct = integrate_geodesic(model, ConnectionKind.LEVI_CIVITA,
                                    TangentVector(path.x[0], path.v[0]),
                                    (path.t[0], path.t[-1]), rtol=direct_rtol, atol=direct_rtol * 1e-2)
        gap = 0.0
        for lam, x in zip(path.t, path.x):
            if lam > direct.t[-1]:
                break
            gap = max(gap, float(np.max(np.abs(direct.state_at(lam)[0] - x))))
        return {
            "geodesic": geo,
            "speed_law": law,
            "speed_constancy": float(np.max(speed) - np.min(speed)),
            "warp_ratio_spread": float(np.max(ratio) - np.min(ratio)),
            "direct": gap,
            "causal_type": path.causal_type,
            "speed_sq_spread": float(np.ptp(path.speed_sq())),
        }


def _base_christoffel(model: SpacetimeModel, y_full):
    """Christoffel symbols of hhat on the spatial coordinates and hhat itself."""
    n = model.n
    base = model.product.base
    m = n - 1
    h = np.zeros((m, m))
    dh = np.zeros((m, m, m))
    for (i, j), e in base.items():
        a, b = i - 1, j - 1
        if e.is_constant:
            h[a, b] = h[b, a] = e.value(y_full)
            continue
        jet = e.jet(y_full, order=1)
        h[a, b] = h[b, a] = jet.v
        dh[:, a, b] = dh[:, b, a] = np.asarray(jet.g)[1:]
    hi = np.linalg.inv(h)
    low = 0.5 * (np.einsum("ilj->lij", dh) + np.einsum("jli->lij", dh) - dh)
    return h, hi, np.einsum("kl,lij->kij", hi, low)


def lift_twisted_geodesic(model: SpacetimeModel, start, w0: float, v0, span,
                          rtol: float = 1e-10, atol: float = 1e-12) -> LiftResult:
    """Lift base data (w0, v0) at ``start`` to a geodesic of -dt^2 + e^{2u} hhat.

    With u = warp/(n-1) and ds/dlambda = e^{-2u}:
        d^2 omega/dlambda^2 = -u_t e^{-2u} hhat(sigma', sigma'),
        D_s sigma' = hhat(sigma', sigma') grad_hhat u.
    The lifted tangent at ``start`` is (w0, e^{-2u} v0).
    """
    if model.product is None:
        raise ValueError(f"model {model.name!r} is not a twisted product")
    n = model.n
    warp = model.product.warp
    start = np.asarray(start, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if len(v0) != n - 1:
        raise ValueError("base tangent must have n-1 components")

    def u_jet(p):
        if warp.is_constant:
            return warp.value(p) / (n - 1), np.zeros(n)
        j = warp.jet(p, order=1)
        return j.v / (n - 1), np.asarray(j.g) / (n - 1)

    # state: omega, w, sigma (n-1), sigma' (n-1), s
    def rhs(_lam, y):
        om, w = y[0], y[1]
        sig = y[2:n + 1]
        sp = y[n + 1:2 * n]
        p = np.concatenate([[om], sig])
        u, du = u_jet(p)
        h, hi, gam = _base_christoffel(model, p)
        e2 = math.exp(-2.0 * u)
        q = float(sp @ h @ sp)
        dw = -du[0] * e2 * q
        dsp = e2 * (-np.einsum("kij,i,j->k", gam, sp, sp) + q * (hi @ du[1:]))
        return np.concatenate([[w, dw], sp * e2, dsp, [e2]])

    y0 = np.concatenate([[start[0], float(w0)], start[1:], v0, [0.0]])
    lam0, lam1 = map(float, span)
    sol = DormandPrince(rtol=rtol, atol=atol).solve(
        rhs, lam0, y0, lam1, accept=lambda _t, y: model.in_domain(np.concatenate([[y[0]], y[2:n + 1]]))
    )
    Y = sol.y
    xs = np.column_stack([Y[:, 0], Y[:, 2:n + 1]])
    us = np.array([u_jet(p)[0] for p in xs])
    vel = np.column_stack([Y[:, 1], Y[:, n + 1:2 * n] * np.exp(-2.0 * us)[:, None]])
    acc = np.array([geodesic_acceleration(model, ConnectionKind.LEVI_CIVITA, x, v) for x, v in zip(xs, vel)])
    g0 = model.metric_matrix(xs[0])
    ctype = classify_vector(g0, vel[0], 1e-9 * max(1.0, float(vel[0] @ vel[0])))
    path = GeodesicPath(model, ConnectionKind.LEVI_CIVITA, sol.t, xs, vel, acc, ctype,
                        sol.status, sol.message, rtol, atol)
    return LiftResult(path, sol.t, Y, rhs, warp)


# ---------------------------------------------------------------------------
# parallel transport
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolygonPath:
    """Piecewise-linear coordinate path through ``vertices``, parameter = segment index + fraction."""

    vertices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float))

    @property
    def segments(self) -> int:
        return len(self.vertices) - 1


@dataclass
class TransportResult:
    t: np.ndarray
    x: np.ndarray
    V: np.ndarray
    status: str = "ok"

    @property
    def final(self) -> np.ndarray:
        return self.V[-1]


def _transport_rate(model, kind, x, xdot, V):
    g, gi, gam, df = christoffel_at(model, x)
    rate = -np.einsum("kij,i,j->k", gam, xdot, V)
    return rate - _connection_term(kind, model.n, g, gi, df, xdot, V)


def parallel_transport(model: SpacetimeModel, connection, path, v0, rtol: float = 1e-11,
                       atol: float = 1e-13) -> TransportResult:
    """Solve V' = -C(x', V) along a GeodesicPath or PolygonPath."""
    kind = ConnectionKind.parse(connection)
    n = model.n
    v0 = np.asarray(v0, dtype=float)
    solver = DormandPrince(rtol=rtol, atol=atol)
    if isinstance(path, GeodesicPath):
        pk = path.connection

        def rhs(_t, y):
            x, v, V = y[:n], y[n:2 * n], y[2 * n:]
            return np.concatenate([v, geodesic_acceleration(model, pk, x, v), _transport_rate(model, kind, x, v, V)])

        sol = solver.solve(rhs, path.t[0], np.concatenate([path.x[0], path.v[0], v0]), path.t[-1])
        return TransportResult(sol.t, sol.y[:, :n], sol.y[:, 2 * n:], sol.status)
    if isinstance(path, PolygonPath):
        ts, xs, Vs = [0.0], [path.vertices[0]], [v0]
        V = v0
        status = "ok"
        for k in range(path.segments):
            a, b = path.vertices[k], path.vertices[k + 1]
            d = b - a

            def rhs(tau, y, a=a, d=d):
                return _transport_rate(model, kind, a + tau * d, d, y)

            sol = solver.solve(rhs, 0.0, V, 1.0)
            if sol.status != "ok":
                status = sol.status
            V = sol.y[-1]
            for tau, y in zip(sol.t[1:], sol.y[1:]):
                ts.append(k + tau)
                xs.append(a + tau * d)
                Vs.append(y)
        return TransportResult(np.array(ts), np.array(xs), np.array(Vs), status)
    raise TypeError("path must be a GeodesicPath or PolygonPath")
