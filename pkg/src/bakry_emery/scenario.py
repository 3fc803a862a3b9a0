"""Scenario loading, validation and check execution for the batch runner."""

from __future__ import annotations

import json
import math
import re
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import __version__
from .congruence import (
    detect_conjugate,
    f_generic_probe,
    focusing_bound_check,
    index_form,
    propagate_jacobi,
    raychaudhuri_residual,
    transform_jacobi,
)
from .curvature import (
    bakry_emery_at,
    cd_check,
    conformal_curvature_check,
    conformal_identity_check,
    curvature_at,
    weighted_curvature_check,
)
from .expr import parse_expr
from .geodesic import (
    ConnectionKind,
    PolygonPath,
    geodesic_residual,
    integrate_geodesic,
    lift_twisted_geodesic,
    parallel_transport,
    reparametrize,
    verify_reparametrization,
)
from .hypersurface import (
    coordinate_slice,
    laplacian_comparison_check,
    make_surface,
    round_sphere,
    shape_at,
    splitting_diagnostics,
    surface_jacobi_data,
    trapped_check,
)
from .spacetime import (
    BUILTINS,
    SpacetimeModel,
    SyntheticDimension,
    TangentVector,
    build_spacetime,
    orthonormal_frame,
)

__all__ = [
    "ScenarioError",
    "Scenario",
    "CheckResult",
    "RunReport",
    "DEFAULT_TOLERANCES",
    "CHECK_TYPES",
    "load_scenario",
    "parse_scenario",
    "run_checks",
    "to_jsonable",
]

DEFAULT_TOLERANCES = {
    "trace": 1e-8,
    "conformal": 1e-7,
    "curvature": 1e-7,
    "geodesic": 1e-6,
    "first_integral": 1e-8,
    "reparam": 1e-6,
    "limit": 1e-9,
    "jacobi": 1e-6,
    "conjugate": 1e-5,
    "focal": 1e-6,
    "saturation": 1e-3,
    "raychaudhuri": 1e-6,
    "transform_jacobi": 1e-6,
    "transform_scalar": 1e-7,
    "index_form": 1e-6,
    "splitting": 1e-7,
    "split_zero": 1e-9,
    "shape": 1e-8,
    "laplacian": 1e-7,
    "lift": 1e-6,
    "transport": 1e-7,
    "cd": 1e-9,
}

TOP_LEVEL_KEYS = {"name", "description", "spacetime", "potential", "N", "checks", "output", "seed",
                  "tolerances", "surfaces"}


class ScenarioError(ValueError):
    """Scenario parse/validation failure with a field path and, if known, a line number."""

    def __init__(self, message: str, field_path: str = "", line: int | None = None):
        self.field_path = field_path
        self.line = line
        where = field_path or "<root>"
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"{where}: {message}")


@dataclass
class Scenario:
    name: str
    model: SpacetimeModel
    N: SyntheticDimension
    checks: list
    surfaces: dict
    seed: int
    tolerances: dict
    output: str | None
    source: dict = field(repr=False, default_factory=dict)


@dataclass
class CheckResult:
    name: str
    type: str
    status: str  # pass | fail | advisory | error
    payload: dict
    message: str = ""
    wall_time: float = 0.0
    histories: dict = field(default_factory=dict, repr=False)  # name -> (header, rows)

    def to_dict(self) -> dict:
        return {"name": self.name, "type": self.type, "status": self.status, "message": self.message,
                "payload": to_jsonable(self.payload)}


@dataclass
class RunReport:
    scenario: str
    seed: int
    tolerances: dict
    results: list

    @property
    def exit_code(self) -> int:
        return 1 if any(r.status in ("fail", "error") for r in self.results) else 0

    def to_dict(self) -> dict:
        counts = {s: sum(r.status == s for r in self.results) for s in ("pass", "fail", "advisory", "error")}
        return {
            "engine": {"name": "bakry_emery", "version": __version__},
            "scenario": self.scenario,
            "seed": self.seed,
            "tolerances": dict(sorted(self.tolerances.items())),
            "checks": [r.to_dict() for r in self.results],
            "counts": counts,
            "exit_code": self.exit_code,
        }


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become strings so the output stays strict JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, TangentVector):
        return {"base": to_jsonable(obj.base), "components": to_jsonable(obj.components)}
    if isinstance(obj, SyntheticDimension):
        return obj.label()
    return obj


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return None if m is None else text.count("\n", 0, m.start()) + 1


def _parse_N(value, n: int, path: str, text=None) -> SyntheticDimension:
    try:
        if value is None:
            return SyntheticDimension(None, n)
        if isinstance(value, str):
            return SyntheticDimension.parse(value, n)
        return SyntheticDimension(float(value), n)
    except (ValueError, TypeError) as exc:
        raise ScenarioError(str(exc), path, _line_of(text, path.split(".")[-1])) from exc


def load_scenario(path: str, seed: int | None = None, tol_scale: float = 1.0) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg} (column {exc.colno})", "", exc.lineno) from exc
    return parse_scenario(data, seed=seed, tol_scale=tol_scale, text=text)


def _build_surface(model, sid, spec, text):
    path = f"surfaces.{sid}"
    try:
        if "sphere" in spec:
            sp = spec["sphere"]
            return round_sphere(model, float(sp.get("radius", 1.0)), float(sp.get("t0", 0.0)),
                                tuple(sp.get("center", (0.0, 0.0, 0.0))))
        if "slice" in spec:
            sp = spec["slice"]
            return coordinate_slice(model, int(sp.get("index", 0)), float(sp.get("value", 0.0)),
                                    sp.get("ranges"))
        return make_surface(model, spec["embedding"], spec["params"], spec["ranges"], spec.get("periodic"),
                            spec.get("causal_type", "spacelike"), spec.get("center"), spec.get("outward"),
                            name=sid)
    except KeyError as exc:
        raise ScenarioError(f"missing field {exc}", path, _line_of(text, sid)) from exc
    except (ValueError, TypeError) as exc:
        raise ScenarioError(str(exc), path, _line_of(text, sid)) from exc


def parse_scenario(data: dict, seed: int | None = None, tol_scale: float = 1.0, text: str | None = None) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    unknown = set(data) - TOP_LEVEL_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise ScenarioError(f"unknown field {key!r}", key, _line_of(text, key))
    if "spacetime" not in data:
        raise ScenarioError("missing field 'spacetime'", "spacetime")
    st = data["spacetime"]
    try:
        if isinstance(st, dict) and "builtin" in st:
            params = dict(st.get("params", {}))
            extra = {k: v for k, v in st.items() if k not in ("builtin", "params")}
            params.update(extra)
            model = build_spacetime(st["builtin"], **params)
        else:
            model = build_spacetime(st)
    except (ValueError, TypeError, KeyError) as exc:
        raise ScenarioError(f"cannot build spacetime: {exc}", "spacetime", _line_of(text, "spacetime")) from exc
    if "potential" in data:
        try:
            model = replace(model, potential=parse_expr(str(data["potential"]), model.coords))
        except ValueError as exc:
            raise ScenarioError(str(exc), "potential", _line_of(text, "potential")) from exc
    N = _parse_N(data.get("N", "infinite"), model.n, "N", text)
    tols = dict(DEFAULT_TOLERANCES)
    for k, v in (data.get("tolerances") or {}).items():
        if k not in tols:
            raise ScenarioError(f"unknown tolerance {k!r}", f"tolerances.{k}", _line_of(text, k))
        tols[k] = float(v)
    if not (tol_scale > 0):
        raise ScenarioError("tol-scale must be positive", "--tol-scale")
    tols = {k: v * tol_scale for k, v in tols.items()}
    surfaces = {}
    for sid, spec in (data.get("surfaces") or {}).items():
        surfaces[sid] = _build_surface(model, sid, spec, text)
    checks = data.get("checks")
    if not isinstance(checks, list) or not checks:
        raise ScenarioError("'checks' must be a non-empty list", "checks", _line_of(text, "checks"))
    defined: dict[str, str] = {}
    names = set()
    for i, chk in enumerate(checks):
        p = f"checks[{i}]"
        if not isinstance(chk, dict) or "type" not in chk:
            raise ScenarioError("check must be an object with a 'type'", p)
        ctype = chk["type"]
        if ctype not in CHECK_TYPES:
            raise ScenarioError(f"unknown check type {ctype!r}; known: {', '.join(sorted(CHECK_TYPES))}",
                                f"{p}.type", _line_of(text, "type"))
        if "N" in chk:
            _parse_N(chk["N"], model.n, f"{p}.N", text)
        for ref_key, kind in (("geodesic", "geodesic"), ("jacobi", "jacobi")):
            ref = chk.get(ref_key)
            if isinstance(ref, str):
                if defined.get(ref) != kind:
                    raise ScenarioError(f"{ref_key} {ref!r} is not defined by an earlier {kind} check",
                                        f"{p}.{ref_key}", _line_of(text, ref_key))
        sref = chk.get("surface")
        if sref is None and isinstance(chk.get("congruence"), dict):
            sref = chk["congruence"].get("surface")
        if sref is not None and sref not in surfaces:
            raise ScenarioError(f"surface {sref!r} is not defined", f"{p}.surface", _line_of(text, "surface"))
        name = chk.get("name", f"{i:02d}_{ctype}")
        if name in names:
            raise ScenarioError(f"duplicate check name {name!r}", f"{p}.name")
        names.add(name)
        if "id" in chk:
            defined[chk["id"]] = ctype
    sd = int(data.get("seed", 0)) if seed is None else int(seed)
    return Scenario(data.get("name", "scenario"), model, N, checks, surfaces, sd, tols, data.get("output"), data)


# ---------------------------------------------------------------------------
# random initial data
# ---------------------------------------------------------------------------


def random_direction(model: SpacetimeModel, p, rng, causal: str = "timelike", rapidity_max: float = 1.0):
    g = model.metric_matrix(p)
    E = orthonormal_frame(g)
    u = rng.standard_normal(model.n - 1)
    u /= np.linalg.norm(u)
    space = E[:, 1:] @ u
    if causal == "null":
        return E[:, 0] + space
    chi = rapidity_max * rng.random()
    if causal == "timelike":
        return math.cosh(chi) * E[:, 0] + math.sinh(chi) * space
    return math.sinh(chi) * E[:, 0] + math.cosh(chi) * space


def random_point(model: SpacetimeModel, rng, shrink: float = 0.5):
    lo = np.array([a for a, _ in model.domain_hint])
    hi = np.array([b for _, b in model.domain_hint])
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo) * shrink
    return mid + half * (2 * rng.random(model.n) - 1)


# ---------------------------------------------------------------------------
# check runners
# ---------------------------------------------------------------------------


class _Ctx:
    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.model = scenario.model
        self.tol = scenario.tolerances
        self.geodesics: dict = {}
        self.jacobis: dict = {}

    def N(self, chk):
        if "N" in chk:
            return _parse_N(chk["N"], self.model.n, "N")
        return self.sc.N

    def rng(self, chk, index):
        return np.random.default_rng([self.sc.seed, int(chk.get("seed", 0)), index])

    def geodesic(self, chk):
        ref = chk.get("geodesic")
        if isinstance(ref, str):
            return self.geodesics[ref]
        raise ValueError("check needs a 'geodesic' reference")


def _expect_value(payload, key, value, spec, default_tol):
    tol = float(spec.get("tol", default_tol)) if isinstance(spec, dict) else default_tol
    target = float(spec["value"]) if isinstance(spec, dict) else float(spec)
    if value is None:
        payload[f"{key}_error"] = None
        return False
    err = abs(float(value) - target)
    payload[f"{key}_expected"] = target
    payload[f"{key}_error"] = err
    return err < tol


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def _run_cd(ctx, chk, idx):
    N = ctx.N(chk)
    rep = cd_check(ctx.model, chk.get("condition", "TCD"), N, float(chk.get("lambda", 0.0)),
                   int(chk.get("points", 50)), float(chk.get("rapidity_max", 5.0)),
                   seed=ctx.sc.seed + int(chk.get("seed", 0)), directions=int(chk.get("directions", 16)),
                   tol=ctx.tol["cd"])
    payload = rep.to_dict()
    payload["null_form_min"] = rep.null_form_min
    expect = chk.get("expect", "holds")
    ok = rep.verdict == expect
    if "expect_min" in chk:
        ok = _expect_value(payload, "min_value", rep.min_value, chk["expect_min"], 1e-6) and ok
    if rep.verdict == "inconclusive-near-tolerance" and expect != rep.verdict:
        return "advisory", payload, {}, "verdict inside the tolerance band"
    return _status(ok), payload, {}, f"verdict {rep.verdict}"


def _run_trace(ctx, chk, idx):
    model = ctx.model
    n = model.n
    rng = ctx.rng(chk, idx)
    Ns = [SyntheticDimension.parse(str(v), n) if isinstance(v, str) else SyntheticDimension(float(v), n)
          for v in chk.get("N_values", [1, 2, -5, n + 2, "inf"])]
    worst = {"timelike": 0.0, "null": 0.0}
    count = 0
    for _ in range(int(chk.get("samples", 100))):
        p = random_point(model, rng, 1.0)
        cb = curvature_at(model, p)
        for mode in ("timelike", "null"):
            v = random_direction(model, p, rng, mode, float(chk.get("rapidity_max", 2.0)))
            for N in Ns:
                be = bakry_emery_at(model, p, v, N, cb)
                worst[mode] = max(worst[mode], be.trace_identity_residual)
                count += 1
    payload = {"timelike_residual": worst["timelike"], "null_residual": worst["null"], "tuples": count,
               "N_values": [N.label() for N in Ns]}
    ok = max(worst.values()) < ctx.tol["trace"]
    return _status(ok), payload, {}, ""


def _run_conformal(ctx, chk, idx):
    model = ctx.model
    n = model.n
    rng = ctx.rng(chk, idx)
    N = ctx.N(chk)
    keys = ("full", "full_literal", "eq52", "null", "null_ric2")
    worst = {k: 0.0 for k in keys}
    for _ in range(int(chk.get("samples", 100))):
        p = random_point(model, rng, 1.0)
        X = random_direction(model, p, rng, "null")
        r = conformal_identity_check(model, p, X, N)
        for k in keys:
            worst[k] = max(worst[k], r[k])
    ok = worst["full"] < ctx.tol["conformal"] and worst["null"] < ctx.tol["conformal"]
    payload = dict(worst, N=N.label(), samples=int(chk.get("samples", 100)), n=n)
    return _status(ok), payload, {}, "full_literal is the printed Delta f + |df|^2 coefficient, reported only"


def _run_connection_curvature(ctx, chk, idx):
    model = ctx.model
    rng = ctx.rng(chk, idx)
    keys_w = ("riemann", "ricci_vs_ric_f_1", "ricci_asymmetry")
    keys_c = ("connection_vs_metric", "formula_vs_metric", "literal_formula_vs_metric", "christoffel_vs_metric")
    worst = {k: 0.0 for k in keys_w + keys_c}
    for _ in range(int(chk.get("samples", 20))):
        p = random_point(model, rng, 1.0)
        cb = curvature_at(model, p)
        for k, v in weighted_curvature_check(model, p, cb).items():
            worst[k] = max(worst[k], v)
        for k, v in conformal_curvature_check(model, p, cb).items():
            worst[k] = max(worst[k], v)
    tol = ctx.tol["curvature"]
    ok = all(worst[k] < tol for k in ("riemann", "ricci_vs_ric_f_1", "connection_vs_metric",
                                      "formula_vs_metric", "christoffel_vs_metric"))
    return _status(ok), worst, {}, "literal_formula_vs_metric is reported only"


def _integrate(ctx, chk):
    model = ctx.model
    return integrate_geodesic(model, chk.get("connection", "levi_civita"),
                              TangentVector(np.array(chk["point"], float), np.array(chk["velocity"], float)),
                              tuple(chk.get("span", (0.0, 1.0))), rtol=float(chk.get("rtol", 1e-10)),
                              atol=float(chk.get("atol", 1e-12)))


def _run_geodesic(ctx, chk, idx):
    path = _integrate(ctx, chk)
    if "id" in chk:
        ctx.geodesics[chk["id"]] = path
    res = geodesic_residual(path)
    q = path.speed_sq()
    drift = float(np.max(np.abs(q - q[0])))
    payload = {"status": path.status, "causal_type": path.causal_type, "nodes": len(path.t),
               "final_parameter": float(path.t[-1]), "final_point": path.x[-1], "residual": res,
               "first_integral_drift": drift, "message": path.message}
    ok = res < ctx.tol["geodesic"]
    if path.connection is ConnectionKind.LEVI_CIVITA:
        ok = ok and drift < ctx.tol["first_integral"] * (1 + abs(q[0]))
    if path.truncated and not chk.get("allow_truncation", False):
        ok = False
    return _status(ok), payload, {"path": (path.csv_header(), path.to_rows())}, path.message


def _run_reparam(ctx, chk, idx):
    model = ctx.model
    target = ConnectionKind.parse(chk.get("target", "weighted"))
    causal = "null" if target is ConnectionKind.CONFORMAL else "timelike"
    rows = []
    worst = 0.0
    if isinstance(chk.get("geodesic"), str):
        paths = [ctx.geodesic(chk)]
    else:
        rng = ctx.rng(chk, idx)
        paths = []
        for _ in range(int(chk.get("cases", 20))):
            p = random_point(model, rng, 0.6)
            v = random_direction(model, p, rng, causal, 1.0)
            span = 0.4 + 0.8 * rng.random()
            paths.append(integrate_geodesic(model, "levi_civita", TangentVector(p, v), (0.0, span),
                                            rtol=1e-10, atol=1e-12))
    for k, path in enumerate(paths):
        r = verify_reparametrization(model, path, target)
        worst = max(worst, r["residual"])
        rows.append([k, r["residual"], r["s_final"], float(path.t[-1])])
    payload = {"target": target.value, "cases": len(paths), "max_residual": worst}
    return _status(worst < ctx.tol["reparam"]), payload, {
        "cases": (["parameter", "residual", "s_final", "t_final"], rows)}, ""


def _alpha_for(model, chk, path):
    if "alpha" in chk:
        return float(chk["alpha"])
    kind = chk.get("connection")
    if kind is None:
        kind = "conformal" if path.causal_type == "null" else "weighted"
    return ConnectionKind.parse(kind).alpha(model.n)


def _run_f_completeness(ctx, chk, idx):
    path = ctx.geodesic(chk)
    alpha = _alpha_for(ctx.model, chk, path)
    table = reparametrize(ctx.model, path, alpha, divergence_bound=float(chk.get("divergence_bound", 1e6)))
    payload = {"alpha": alpha, "s_final": float(table.s[-1]), "limit_estimate": table.limit_estimate,
               "limit_kind": table.limit_kind, "divergent": table.divergent, "notes": list(table.notes)}
    ok = True
    if "expect_limit" in chk:
        ok = _expect_value(payload, "limit", table.limit_estimate, chk["expect_limit"], ctx.tol["limit"])
    if "expect_divergent" in chk:
        ok = ok and bool(table.divergent) == bool(chk["expect_divergent"])
    rows = [[float(t), float(s)] for t, s in zip(table.t, table.s)]
    status = _status(ok) if ("expect_limit" in chk or "expect_divergent" in chk) else "advisory"
    return status, payload, {"reparam": (["parameter", "s"], rows)}, "divergence is a heuristic verdict"


def _run_jacobi(ctx, chk, idx):
    model = ctx.model
    cong = chk.get("congruence", "point")
    if isinstance(cong, dict) and "surface" in cong:
        surf = ctx.sc.surfaces[cong["surface"]]
        x, k, L, E, A0, A0p = surface_jacobi_data(model, surf, cong.get("params"), cong.get("which", "-"))
        path = integrate_geodesic(model, "levi_civita", TangentVector(x, k), tuple(chk.get("span", (0.0, 1.0))),
                                  rtol=1e-11, atol=1e-13)
        evo = propagate_jacobi(model, path, A0, A0p, mode="null", frame0=E, L0=L)
        kind = "focal"
    else:
        path = ctx.geodesic(chk) if isinstance(chk.get("geodesic"), str) else _integrate(ctx, chk)
        A0 = A0p = None
        if isinstance(cong, dict):
            A0, A0p = cong.get("A0"), cong.get("A0p")
        evo = propagate_jacobi(model, path, A0, A0p, mode=chk.get("mode"))
        kind = "conjugate" if A0 is None else "focal"
    if "id" in chk:
        ctx.jacobis[chk["id"]] = evo
    rep = detect_conjugate(evo, kind)
    jres = evo.jacobi_residual()
    payload = {"mode": evo.mode, "rank": evo.d, "nodes": len(evo.t), "status": evo.status,
               "final_parameter": float(evo.t[-1]), "detection": rep.to_dict(), "jacobi_residual": jres,
               "lagrange_drift": evo.lagrange_drift(),
               "frame_drift": evo.frame.gram_drift(model, evo.x, evo.v)}
    ok = jres < ctx.tol["jacobi"]
    exp = chk.get("expect_first")
    if exp == "none":
        ok = ok and rep.verdict == "none"
    elif exp is not None:
        ok = ok and rep.verdict == "found" and _expect_value(payload, "first_parameter", rep.first_parameter,
                                                             exp, ctx.tol["conjugate"])
    header, rows = evo.history()
    return _status(ok), payload, {"history": (header, rows)}, rep.verdict


def _run_raychaudhuri(ctx, chk, idx):
    evo = ctx.jacobis[chk["jacobi"]]
    n = ctx.model.n
    crit = 2.0 if evo.mode == "null" else 1.0
    Ns = [SyntheticDimension.parse(str(v), n) if isinstance(v, str) else SyntheticDimension(float(v), n)
          for v in chk.get("N_values", [crit, "inf", -5, n + 2])]
    out = {}
    worst = 0.0
    ok = True
    for N in Ns:
        r = raychaudhuri_residual(evo, N)
        out[N.label()] = r
        worst = max(worst, r["scalar"], r["riccati"], r["integrating_factor"])
        if N.value == crit and not r["coefficient_is_zero"]:
            ok = False
        if r["samples"] == 0:
            ok = False
    payload = {"mode": evo.mode, "max_residual": worst, "per_N": out}
    return _status(ok and worst < ctx.tol["raychaudhuri"]), payload, {}, ""


def _run_focusing(ctx, chk, idx):
    evo = ctx.jacobis[chk["jacobi"]]
    rep = focusing_bound_check(evo, ctx.N(chk))
    payload = rep.to_dict()
    ok = rep.within_bound is not False
    if "expect_first" in chk:
        ok = _expect_value(payload, "first_parameter", rep.first_parameter, chk["expect_first"],
                           ctx.tol["focal"]) and ok
    if chk.get("expect_saturated") is not None:
        B = rep.bound_parameter
        compared = rep.first_weighted_parameter if rep.compared_parameter == "weighted" else rep.first_parameter
        rel = None if compared is None else abs(compared - B) / B
        payload["saturation_gap"] = rel
        sat = rel is not None and rel < ctx.tol["saturation"]
        ok = ok and sat == bool(chk["expect_saturated"])
    status = _status(ok) if rep.hypothesis_holds else ("advisory" if ok else "fail")
    return status, payload, {}, "; ".join(rep.notes)


def _run_transform(ctx, chk, idx):
    evo = ctx.jacobis[chk["jacobi"]]
    r = transform_jacobi(evo)
    ok = (r["jacobi"] < ctx.tol["transform_jacobi"] and r["samples"] > 0
          and max(r["B"], r["theta"], r["sigma"]) < ctx.tol["transform_scalar"])
    return _status(ok), r, {}, ""


def _run_f_generic(ctx, chk, idx):
    path = ctx.geodesic(chk)
    r = f_generic_probe(ctx.model, path, ctx.N(chk))
    ok = r["consistent_with_trace_identity"]
    if "expect_hit" in chk:
        ok = ok and r["hit"] == bool(chk["expect_hit"])
    return _status(ok), r, {}, ""


def _random_field(rng, d, t0, L):
    c = rng.standard_normal((d, 3))
    b = rng.standard_normal(d) * 0.3

    def v(t):
        x = (t - t0) / L
        return np.array([sum(c[a, k] * math.sin((k + 1) * math.pi * x) for k in range(3)) + b[a] * x
                         for a in range(d)])

    def dv(t):
        x = (t - t0) / L
        return np.array([sum(c[a, k] * (k + 1) * math.pi / L * math.cos((k + 1) * math.pi * x) for k in range(3))
                         + b[a] / L for a in range(d)])

    return v, dv


def _run_index_form(ctx, chk, idx):
    model = ctx.model
    path = ctx.geodesic(chk)
    d = model.n - 1
    t0, t1 = float(path.t[0]), float(path.t[-1])
    evo = propagate_jacobi(model, path, np.eye(d), np.zeros((d, d)), mode="timelike")
    fields = []
    if "fields" in chk:
        for comps in chk["fields"]:
            exprs = [parse_expr(str(s), ("t",)) for s in comps]
            fields.append((lambda t, ex=exprs: np.array([e.value([t]) for e in ex]),
                           lambda t, ex=exprs: np.array([e.jet([t], 1).g[0] for e in ex])))
    rng = ctx.rng(chk, idx)
    for _ in range(int(chk.get("random_fields", 0 if fields else 10))):
        fields.append(_random_field(rng, d, t0, t1 - t0))
    rows = []
    worst = 0.0
    for k, (v, dv) in enumerate(fields):
        r = index_form(model, path, v, dv, evo=evo)
        worst = max(worst, r["residual"])
        rows.append([k, r["I"], r["rhs"], r["residual"]])
    payload = {"fields": len(fields), "max_residual": worst, "values": [row[1] for row in rows]}
    ok = worst < ctx.tol["index_form"]
    if "expect_I" in chk and rows:
        ok = _expect_value(payload, "I", rows[0][1], chk["expect_I"], ctx.tol["index_form"]) and ok
    return _status(ok), payload, {"fields": (["parameter", "I", "rhs", "residual"], rows)}, ""


def _run_splitting(ctx, chk, idx):
    r = splitting_diagnostics(ctx.model, float(chk.get("t0", 0.0)), int(chk.get("samples", 20)),
                              seed=ctx.sc.seed + int(chk.get("seed", 0)))
    tol = ctx.tol["splitting"]
    ok = max(r["ric"], r["hess"], r["ric_f_1"], r["ric_direct_vs_bundle"]) < tol
    r["splits"] = r["split_test"] < ctx.tol["split_zero"]
    if "expect_split" in chk:
        ok = ok and r["splits"] == bool(chk["expect_split"])
    return _status(ok), r, {}, ""


def _run_shape(ctx, chk, idx):
    surf = ctx.sc.surfaces[chk["surface"]]
    pts = chk.get("params")
    pts = surf.grid(int(chk.get("per_dim", 3))) if pts is None else [np.array(p, float) for p in pts]
    results = [shape_at(ctx.model, surf, p) for p in pts]
    tol = ctx.tol["shape"]
    worst_sign = max(r.sign_check or 0.0 for r in results)
    payload = {"samples": len(results), "sign_check": worst_sign, "kind": results[0].kind,
               "normalization": results[0].normalization}
    ok = worst_sign < tol
    first = results[0]
    if first.kind == "spacelike-hypersurface":
        payload.update(H=[r.H for r in results], H_f=[r.H_f for r in results],
                       umbilic_defect=max(r.umbilic_defect for r in results),
                       totally_umbilic=all(r.totally_umbilic for r in results),
                       totally_geodesic=all(r.totally_geodesic for r in results))
        for key in ("H", "H_f"):
            if f"expect_{key}" in chk:
                for j, r in enumerate(results):
                    ok = _expect_value(payload, f"{key}_{j}", getattr(r, key), chk[f"expect_{key}"], tol) and ok
        for key in ("totally_umbilic", "totally_geodesic"):
            if f"expect_{key}" in chk:
                ok = ok and payload[key] == bool(chk[f"expect_{key}"])
    elif first.kind == "codim2":
        payload.update(theta_pair=[r.theta_pair for r in results], theta_f_pair=[r.theta_f_pair for r in results],
                       theta_pair_unit=[r.theta_pair_unit for r in results])
        if "expect_theta_pair" in chk:
            want = np.array(chk["expect_theta_pair"], float)
            err = max(float(np.max(np.abs(np.array(r.theta_pair) - want))) for r in results)
            payload["theta_pair_error"] = err
            ok = ok and err < tol
    else:
        payload.update(theta=[r.theta for r in results])
    return _status(ok), payload, {}, ""


def _run_trapped(ctx, chk, idx):
    surf = ctx.sc.surfaces[chk["surface"]]
    r = trapped_check(ctx.model, surf, int(chk.get("per_dim", 12)))
    rows = [[k, *p["theta_f"], *p["theta"]] for k, p in enumerate(r.pop("points"))]
    ok = True
    if "expect" in chk:
        ok = r["verdict"] == chk["expect"]
    status = _status(ok) if "expect" in chk else "advisory"
    return status, r, {"samples": (["parameter", "theta_f_plus", "theta_f_minus", "theta_plus", "theta_minus"],
                                   rows)}, r["verdict"]


def _run_laplacian(ctx, chk, idx):
    r = laplacian_comparison_check(ctx.model, chk["distance"], chk["q"], chk["start"], tol=ctx.tol["laplacian"])
    ok = r["holds"]
    if "expect_lhs" in chk:
        ok = _expect_value(r, "lhs", r["lhs"], chk["expect_lhs"], ctx.tol["laplacian"]) and ok
    return _status(ok), r, {}, ""


def _run_lift(ctx, chk, idx):
    res = lift_twisted_geodesic(ctx.model, np.array(chk["start"], float), float(chk["w0"]),
                                np.array(chk["v0"], float), tuple(chk.get("span", (0.0, 1.0))))
    diag = res.diagnostics()
    tol = ctx.tol["lift"]
    ok = diag["geodesic"] < tol and diag["direct"] < tol and diag["speed_law"] < tol
    rows = [[float(lam), *map(float, row)] for lam, row in zip(res.lambda_, res.state)]
    n = ctx.model.n
    header = ["parameter", "omega", "w", *[f"sigma{k}" for k in range(1, n)],
              *[f"dsigma{k}" for k in range(1, n)], "s"]
    return _status(ok), diag, {"lift": (header, rows)}, ""


def _run_transport(ctx, chk, idx):
    model = ctx.model
    kind = chk.get("connection", "weighted")
    field_exprs = [parse_expr(str(s), model.coords) for s in chk["field"]]

    def P(x):
        return np.array([e.value(x) for e in field_exprs])

    start = np.array(chk["start"], float)
    end = np.array(chk["end"], float)
    polys = [np.array(pl, float) for pl in chk.get("paths", [])]
    rng = ctx.rng(chk, idx)
    for _ in range(int(chk.get("random_paths", 0 if polys else 10))):
        mids = [random_point(model, rng, 0.8) for _ in range(int(chk.get("vertices", 2)))]
        polys.append(np.array([start, *mids, end]))
    finals, errs = [], []
    for poly in polys:
        res = parallel_transport(model, kind, PolygonPath(poly), P(poly[0]))
        finals.append(res.final)
        errs.append(float(np.max(np.abs(res.final - P(poly[-1])))))
    same_end = [f for f, poly in zip(finals, polys) if np.allclose(poly[-1], end)]
    spread = float(np.max(np.ptp(np.array(same_end), axis=0))) if len(same_end) > 1 else 0.0
    payload = {"paths": len(polys), "max_field_error": max(errs), "path_independence": spread}
    ok = max(errs) < ctx.tol["transport"] and spread < ctx.tol["transport"]
    return _status(ok), payload, {}, ""


CHECK_TYPES: dict[str, Callable] = {
    "cd_check": _run_cd,
    "trace_identity": _run_trace,
    "conformal_identity": _run_conformal,
    "connection_curvature": _run_connection_curvature,
    "geodesic": _run_geodesic,
    "reparam": _run_reparam,
    "f_completeness": _run_f_completeness,
    "jacobi": _run_jacobi,
    "raychaudhuri": _run_raychaudhuri,
    "focusing": _run_focusing,
    "transform": _run_transform,
    "f_generic": _run_f_generic,
    "index_form": _run_index_form,
    "splitting": _run_splitting,
    "shape": _run_shape,
    "trapped": _run_trapped,
    "laplacian_comparison": _run_laplacian,
    "lift": _run_lift,
    "transport": _run_transport,
}


def run_checks(scenario: Scenario) -> RunReport:
    """Execute checks in order; a runtime error marks that check and continues."""
    ctx = _Ctx(scenario)
    results = []
    for i, chk in enumerate(scenario.checks):
        ctype = chk["type"]
        name = chk.get("name", f"{i:02d}_{ctype}")
        start = time.perf_counter()
        try:
            status, payload, hist, msg = CHECK_TYPES[ctype](ctx, chk, i)
        except Exception as exc:  # a failing check must not abort the batch
            status, payload, hist, msg = "error", {}, {}, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, ctype, status, payload, msg, time.perf_counter() - start, hist))
    return RunReport(scenario.name, scenario.seed, scenario.tolerances, results)


def builtin_catalog() -> dict:
    import inspect

    out = {}
    for name, fn in sorted(BUILTINS.items()):
        sig = inspect.signature(fn)
        out[name] = {k: (None if p.default is inspect.Parameter.empty else p.default)
                     for k, p in sig.parameters.items() if k != "name"}
    return out
