"""Single-chart Lorentzian spacetimes (M, g, f) and a catalog of test models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .expr import Expression, parse_expr, constant
from .expr import BinOp, Call, Num

__all__ = [
    "SpacetimeModel",
    "SyntheticDimension",
    "TangentVector",
    "ProductStructure",
    "MetricJet",
    "SignatureError",
    "ZeroVectorError",
    "build_spacetime",
    "metric_at",
    "classify_vector",
    "conformal_rescale",
    "validate_signature",
    "orthonormal_frame",
    "BUILTINS",
    "default_coords",
    "minkowski",
    "minkowski_with_f",
    "de_sitter",
    "anti_de_sitter",
    "einstein_static",
    "warped_product",
    "twisted_product",
]

SIGNATURE_TOL = 1e-10


class SignatureError(ValueError):
    def __init__(self, message, point=None, eigenvalues=None):
        self.point = None if point is None else np.asarray(point, dtype=float)
        self.eigenvalues = None if eigenvalues is None else np.asarray(eigenvalues)
        super().__init__(message)


class ZeroVectorError(ValueError):
    pass


# ---------------------------------------------------------------------------
# synthetic dimension
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticDimension:
    """Synthetic dimension N; ``value=None`` is the single point N = ±inf."""

    value: float | None
    n: int

    def __post_init__(self):
        if self.value is not None:
            if not math.isfinite(self.value):
                raise ValueError("use SyntheticDimension.infinite for N = inf")
            if self.value == self.n:
                raise ValueError(f"N = n = {self.n} is not allowed")

    @classmethod
    def finite(cls, value: float, n: int) -> "SyntheticDimension":
        return cls(float(value), n)

    @classmethod
    def infinite(cls, n: int) -> "SyntheticDimension":
        return cls(None, n)

    @classmethod
    def parse(cls, value, n: int) -> "SyntheticDimension":
        if value is None:
            return cls.infinite(n)
        if isinstance(value, str):
            v = value.strip().lower()
            if v in ("inf", "infinity", "+inf", "-inf", "infinite", "oo"):
                return cls.infinite(n)
            return cls.finite(float(v), n)
        if isinstance(value, (int, float)) and not math.isfinite(value):
            return cls.infinite(n)
        return cls.finite(float(value), n)

    @property
    def is_infinite(self) -> bool:
        return self.value is None

    def inv_gap(self, n: int | None = None) -> float:
        """1/(n - N), zero at infinity."""
        n = self.n if n is None else n
        return 0.0 if self.value is None else 1.0 / (n - self.value)

    def ratio(self, a: float, n: int | None = None) -> float:
        """(a - N)/(n - N), one at infinity."""
        n = self.n if n is None else n
        if self.value is None:
            return 1.0
        return (a - self.value) / (n - self.value)

    def label(self) -> str:
        if self.value is None:
            return "inf"
        return repr(self.value)

    def __str__(self) -> str:
        return self.label()


@dataclass(frozen=True)
class TangentVector:
    base: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.base, dtype=float)
        c = np.asarray(self.components, dtype=float)
        if b.shape != c.shape or b.ndim != 1:
            raise ValueError("base and components must be 1-d arrays of equal length")
        object.__setattr__(self, "base", b)
        object.__setattr__(self, "components", c)


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProductStructure:
    """g = -dt^2 + e^{2u} hhat with u = warp/(n-1); hhat lives on coords 1..n-1."""

    kind: str  # "warped" or "twisted"
    warp: Expression
    base: Mapping  # (i, j) -> Expression, i <= j, indices 1..n-1


@dataclass(frozen=True, eq=False)
class SpacetimeModel:
    name: str
    coords: tuple
    metric: Mapping  # (i, j) with i <= j -> Expression
    potential: Expression
    domain_hint: tuple  # per-coordinate (lo, hi) for sampling
    domain: tuple | None = None  # per-coordinate validity box for integration
    product: ProductStructure | None = None
    params: Mapping = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.coords)

    def component(self, i: int, j: int) -> Expression:
        if i > j:
            i, j = j, i
        return self.metric[(i, j)]

    def validity_box(self) -> tuple:
        return self.domain if self.domain is not None else tuple(
            (-math.inf, math.inf) for _ in self.coords
        )

    def in_domain(self, p) -> bool:
        for (lo, hi), x in zip(self.validity_box(), p):
            if not (lo < x < hi) or not math.isfinite(x):
                return False
        return True

    def sample_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        lo = np.array([a for a, _ in self.domain_hint])
        hi = np.array([b for _, b in self.domain_hint])
        return lo + (hi - lo) * rng.random((count, self.n))

    def f_value(self, p) -> float:
        return self.potential.value(p)

    def metric_matrix(self, p) -> np.ndarray:
        n = self.n
        g = np.empty((n, n))
        for (i, j), e in self.metric.items():
            g[i, j] = g[j, i] = e.value(p)
        return g

    def describe(self) -> dict:
        return {
            "name": self.name,
            "coords": list(self.coords),
            "metric": {f"{i},{j}": e.to_source() for (i, j), e in sorted(self.metric.items())},
            "potential": self.potential.to_source(),
            "domain_hint": [list(iv) for iv in self.domain_hint],
            "params": dict(self.params),
        }


@dataclass(frozen=True)
class MetricJet:
    g: np.ndarray
    g_inv: np.ndarray
    dg: np.ndarray  # dg[k, i, j] = d_k g_ij
    ddg: np.ndarray | None  # ddg[k, l, i, j] = d_k d_l g_ij

    def __iter__(self):
        return iter((self.g, self.g_inv, self.dg, self.ddg))


def metric_at(model: SpacetimeModel, p, order: int = 2) -> MetricJet:
    """Metric, inverse and exact coordinate derivatives at ``p``."""
    p = np.asarray(p, dtype=float)
    n = model.n
    if p.shape != (n,):
        raise ValueError(f"point has shape {p.shape}, expected ({n},)")
    g = np.zeros((n, n))
    dg = np.zeros((n, n, n))
    ddg = np.zeros((n, n, n, n)) if order >= 2 else None
    for (i, j), e in model.metric.items():
        if e.is_constant:
            g[i, j] = g[j, i] = e.value(p)
            continue
        jet = e.jet(p, order=order)
        g[i, j] = g[j, i] = jet.v
        dg[:, i, j] = dg[:, j, i] = jet.g
        if ddg is not None:
            ddg[:, :, i, j] = ddg[:, :, j, i] = jet.h
    try:
        g_inv = np.linalg.inv(g)
    except np.linalg.LinAlgError as exc:
        raise SignatureError(f"degenerate metric at {p.tolist()}", p) from exc
    if not np.all(np.isfinite(g_inv)):
        raise SignatureError(f"degenerate metric at {p.tolist()}", p)
    g_inv = 0.5 * (g_inv + g_inv.T)
    return MetricJet(g, g_inv, dg, ddg)


def classify_vector(g, v, tol: float = 1e-9) -> str:
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise ZeroVectorError("zero vector has no causal character")
    q = float(v @ np.asarray(g) @ v)
    if q < -tol:
        return "timelike"
    if abs(q) <= tol:
        return "null"
    return "spacelike"


def validate_signature(model: SpacetimeModel, samples: int = 100, seed: int = 0,
                       tol: float = SIGNATURE_TOL) -> None:
    """Raise SignatureError unless g has signature (-,+,...,+) at sampled points."""
    rng = np.random.default_rng(seed)
    for p in model.sample_points(samples, rng):
        g = model.metric_matrix(p)
        if not np.all(np.isfinite(g)):
            raise SignatureError(f"non-finite metric at {p.tolist()}", p)
        ev = np.linalg.eigvalsh(g)
        neg = int(np.sum(ev < -tol))
        pos = int(np.sum(ev > tol))
        if neg != 1 or pos != model.n - 1:
            raise SignatureError(
                f"metric of {model.name!r} has eigenvalues {ev.tolist()} at {p.tolist()}",
                p,
                ev,
            )


def orthonormal_frame(g, first=None) -> np.ndarray:
    """Columns e_0..e_{n-1} with g(e_a, e_b) = diag(-1, 1, ..., 1).

    ``first`` (timelike) becomes e_0 after normalization; otherwise the
    future unit normal to x0 = const is used.
    """
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    if first is None:
        ginv = np.linalg.inv(g)
        first = -ginv[:, 0]
    first = np.asarray(first, dtype=float)
    if first @ g @ first >= 0:
        raise ValueError("first frame vector must be timelike")
    basis = [first] + [np.eye(n)[k] for k in range(n)]
    out: list[np.ndarray] = []
    signs: list[float] = []
    for v in basis:
        w = v.copy()
        for e, s in zip(out, signs):
            w = w - s * (e @ g @ w) * e
        q = w @ g @ w
        if abs(q) < 1e-10 * max(1.0, float(v @ v)):
            continue
        w = w / math.sqrt(abs(q))
        out.append(w)
        signs.append(-1.0 if q < 0 else 1.0)
        if len(out) == n:
            break
    if len(out) != n or signs[0] != -1.0 or any(s != 1.0 for s in signs[1:]):
        raise ValueError("failed to build an orthonormal frame")
    frame = np.array(out).T
    if frame[0, 0] < 0:  # orient e_0 to the future of x0
        frame[:, 0] *= -1
    return frame


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def default_coords(n: int) -> tuple:
    if n < 2:
        raise ValueError("dimension must be at least 2")
    if n <= 4:
        return ("t", "x", "y", "z")[:n]
    return ("t",) + tuple(f"x{k}" for k in range(1, n))


def _sphere_coords(n: int) -> tuple:
    m = n - 1
    if m == 1:
        return ("t", "phi")
    if m == 2:
        return ("t", "theta", "phi")
    if m == 3:
        return ("t", "chi", "theta", "phi")
    return ("t",) + tuple(f"a{k}" for k in range(1, m + 1))


def _sphere_components(n: int) -> dict:
    """Diagonal round-sphere components over hyperspherical angles 1..n-1."""
    coords = _sphere_coords(n)
    comps = {}
    for k in range(1, n):
        factors = [f"sin({coords[j]})^2" for j in range(1, k)]
        comps[k] = " * ".join(factors) if factors else "1"
    return comps


def _sphere_hint(n: int) -> list:
    hint = []
    for k in range(1, n):
        hint.append((0.1, 2 * math.pi - 0.1) if k == n - 1 else (0.1, math.pi - 0.1))
    return hint


def _sphere_domain(n: int) -> list:
    dom = []
    for k in range(1, n):
        dom.append((-math.inf, math.inf) if k == n - 1 else (1e-6, math.pi - 1e-6))
    return dom


def _diag(coords, entries: Mapping[int, str]) -> dict:
    n = len(coords)
    metric = {}
    for i in range(n):
        for j in range(i, n):
            src = entries.get(i, "0") if i == j else "0"
            metric[(i, j)] = parse_expr(src, coords)
    return metric


def _model(name, coords, metric, potential, hint, domain=None, product=None, params=None):
    if isinstance(potential, str):
        potential = parse_expr(potential, coords)
    return SpacetimeModel(
        name=name,
        coords=tuple(coords),
        metric=metric,
        potential=potential,
        domain_hint=tuple(tuple(float(a) for a in iv) for iv in hint),
        domain=None if domain is None else tuple(tuple(float(a) for a in iv) for iv in domain),
        product=product,
        params=dict(params or {}),
    )


def minkowski(n: int = 4, f: str = "0", name: str | None = None) -> SpacetimeModel:
    coords = default_coords(n)
    metric = _diag(coords, {0: "-1", **{k: "1" for k in range(1, n)}})
    hint = [(-1.0, 1.0)] * n
    base = {(i, j): parse_expr("1" if i == j else "0", coords) for i in range(1, n) for j in range(i, n)}
    pot = parse_expr(f, coords)
    return _model(
        name or ("minkowski" if f == "0" else "minkowski_with_f"),
        coords,
        metric,
        pot,
        hint,
        product=ProductStructure("twisted", constant(0.0, coords), base),
        params={"n": n, "f": f} if f != "0" else {"n": n},
    )


def minkowski_with_f(n: int = 4, f: str = "t") -> SpacetimeModel:
    return minkowski(n, f, name="minkowski_with_f")


def de_sitter(n: int = 4, f: str = "0") -> SpacetimeModel:
    """-dt^2 + cosh^2(t) dOmega_{n-1}; Ric = (n-1) g."""
    coords = _sphere_coords(n)
    sph = _sphere_components(n)
    entries = {0: "-1"}
    for k, s in sph.items():
        entries[k] = "cosh(t)^2" if s == "1" else f"cosh(t)^2 * {s}"
    hint = [(-1.5, 1.5)] + _sphere_hint(n)
    return _model("de_sitter", coords, _diag(coords, entries), f, hint,
                  domain=[(-math.inf, math.inf)] + _sphere_domain(n), params={"n": n})


def anti_de_sitter(n: int = 4, f: str = "0") -> SpacetimeModel:
    """Global AdS in Cartesian spatial coordinates; Ric = -(n-1) g.

    g = -(1 + r^2) dt^2 + dx.dx - (x.dx)^2 / (1 + r^2).
    """
    coords = default_coords(n)
    xs = coords[1:]
    r2 = " + ".join(f"{x}^2" for x in xs) if xs else "0"
    metric = {}
    for i in range(n):
        for j in range(i, n):
            if i == 0:
                src = f"-(1 + {r2})" if j == 0 else "0"
            else:
                xi, xj = coords[i], coords[j]
                if i == j:
                    src = f"1 - {xi}^2 / (1 + {r2})"
                else:
                    src = f"-({xi} * {xj}) / (1 + {r2})"
            metric[(i, j)] = parse_expr(src, coords)
    hint = [(-1.0, 1.0)] * n
    return _model("anti_de_sitter", coords, metric, f, hint, params={"n": n})


def einstein_static(n: int = 4, f: str = "0") -> SpacetimeModel:
    """-dt^2 + dOmega_{n-1}, unit radius."""
    coords = _sphere_coords(n)
    sph = _sphere_components(n)
    entries = {0: "-1", **sph}
    hint = [(-1.0, 1.0)] + _sphere_hint(n)
    base = {}
    for i in range(1, n):
        for j in range(i, n):
            base[(i, j)] = parse_expr(sph[i] if i == j else "0", coords)
    return _model("einstein_static", coords, _diag(coords, entries), f, hint,
                  domain=[(-math.inf, math.inf)] + _sphere_domain(n),
                  product=ProductStructure("warped", constant(0.0, coords), base),
                  params={"n": n})


def warped_product(n: int = 4, F: str = "t", base: str = "flat") -> SpacetimeModel:
    """-dt^2 + e^{2F(t)/(n-1)} h with potential F(t), h flat or unit round."""
    if base == "flat":
        coords = ("t",) + tuple(f"y{k}" for k in range(1, n))
        sph = {k: "1" for k in range(1, n)}
        hint = [(-1.0, 1.0)] * n
        domain = None
    elif base == "round":
        coords = _sphere_coords(n)
        sph = _sphere_components(n)
        hint = [(-1.0, 1.0)] + _sphere_hint(n)
        domain = [(-math.inf, math.inf)] + _sphere_domain(n)
    else:
        raise ValueError(f"unknown base {base!r} (flat or round)")
    pot = parse_expr(F, coords)
    bad = pot.free_indices - {0}
    if bad:
        raise ValueError("warped-product potential must depend on t only")
    factor = f"exp(2 * ({F}) / {n - 1})"
    entries = {0: "-1"}
    for k, s in sph.items():
        entries[k] = factor if s == "1" else f"{factor} * {s}"
    hbase = {}
    for i in range(1, n):
        for j in range(i, n):
            hbase[(i, j)] = parse_expr(sph[i] if i == j else "0", coords)
    return _model("warped_product", coords, _diag(coords, entries), pot, hint, domain=domain,
                  product=ProductStructure("warped", pot, hbase),
                  params={"n": n, "F": F, "base": base})


def twisted_product(n: int = 4, f: str = "t*y1") -> SpacetimeModel:
    """-dt^2 + e^{2f/(n-1)} hhat with flat hhat and potential f(t, y)."""
    coords = ("t",) + tuple(f"y{k}" for k in range(1, n))
    pot = parse_expr(f, coords)
    factor = f"exp(2 * ({f}) / {n - 1})"
    entries = {0: "-1", **{k: factor for k in range(1, n)}}
    hbase = {}
    for i in range(1, n):
        for j in range(i, n):
            hbase[(i, j)] = parse_expr("1" if i == j else "0", coords)
    return _model("twisted_product", coords, _diag(coords, entries), pot, [(-1.0, 1.0)] * n,
                  product=ProductStructure("twisted", pot, hbase),
                  params={"n": n, "f": f})


BUILTINS = {
    "minkowski": minkowski,
    "minkowski_with_f": minkowski_with_f,
    "de_sitter": de_sitter,
    "anti_de_sitter": anti_de_sitter,
    "einstein_static": einstein_static,
    "warped_product": warped_product,
    "twisted_product": twisted_product,
}


def _custom(spec: Mapping) -> SpacetimeModel:
    coords = tuple(spec["coords"])
    n = len(coords)
    if n < 2:
        raise ValueError("a spacetime needs at least 2 coordinates")
    table = spec["metric"]
    metric = {(i, j): None for i in range(n) for j in range(i, n)}
    for key, src in table.items():
        parts = [s.strip() for s in str(key).split(",")]
        if len(parts) != 2:
            raise ValueError(f"metric key {key!r} must look like 'i,j'")
        idx = []
        for s in parts:
            if s in coords:
                idx.append(coords.index(s))
            else:
                k = int(s)
                if not 0 <= k < n:
                    raise ValueError(f"metric index {k} out of range for n = {n}")
                idx.append(k)
        i, j = sorted(idx)
        expr = parse_expr(str(src), coords)
        if metric[(i, j)] is not None and metric[(i, j)] != expr:
            raise ValueError(f"conflicting entries for metric component {i},{j}")
        metric[(i, j)] = expr
    for k, v in metric.items():
        if v is None:
            metric[k] = constant(0.0, coords)
    hint = spec.get("domain_hint") or [(-1.0, 1.0)] * n
    if len(hint) != n:
        raise ValueError("domain_hint needs one interval per coordinate")
    domain = spec.get("domain")
    return _model(spec.get("name", "custom"), coords, metric, str(spec.get("potential", "0")),
                  hint, domain=domain)


def build_spacetime(spec, validate: bool = True, **params) -> SpacetimeModel:
    """Build a builtin (by name plus keyword parameters) or a custom model.

    ``spec`` may be a builtin name, a mapping ``{"builtin": name, ...params}``,
    or a custom table ``{"coords": [...], "metric": {"i,j": expr}, "potential": expr}``.
    """
    if isinstance(spec, str):
        name, kwargs = spec, dict(params)
    elif isinstance(spec, Mapping) and "builtin" in spec:
        kwargs = {k: v for k, v in spec.items() if k not in ("builtin", "name")}
        kwargs.update(params)
        name = spec["builtin"]
    elif isinstance(spec, Mapping):
        model = _custom(spec)
        if validate:
            validate_signature(model)
        return model
    else:
        raise TypeError("spacetime spec must be a builtin name or a mapping")
    if name not in BUILTINS:
        raise ValueError(f"unknown builtin {name!r}; available: {', '.join(sorted(BUILTINS))}")
    model = BUILTINS[name](**kwargs)
    if validate:
        validate_signature(model)
    return model


def _scale(expr: Expression, factor) -> Expression:
    if expr.is_zero():
        return expr
    return Expression(BinOp("*", factor, expr.root), expr.coords)


def conformal_rescale(model: SpacetimeModel) -> SpacetimeModel:
    """Metric e^{-2f/(n-2)} g with zero potential."""
    n = model.n
    if n < 3:
        raise ValueError("conformal rescaling needs n >= 3")
    coords = model.coords
    if model.potential.is_zero():
        metric = dict(model.metric)
    else:
        arg = BinOp("/", BinOp("*", Num(-2.0), model.potential.root), Num(float(n - 2)))
        factor = Call("exp", arg)
        metric = {k: _scale(e, factor) for k, e in model.metric.items()}
    return SpacetimeModel(
        name=f"conformal({model.name})",
        coords=coords,
        metric=metric,
        potential=constant(0.0, coords),
        domain_hint=model.domain_hint,
        domain=model.domain,
        product=None,
        params={"source": model.name},
    )
