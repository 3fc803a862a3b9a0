"""Dormand-Prince 5(4) integrator with PI step-size control."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .expr import DomainError

__all__ = ["DormandPrince", "Solution", "solve_ivp_dp", "dp_step", "StepRejected"]


class StepRejected(Exception):
    """Raised by a right-hand side or acceptance hook to force a smaller step."""


# Butcher tableau
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
E = B5 - B4


def dp_step(rhs: Callable, t: float, y: np.ndarray, h: float, k0: np.ndarray | None = None):
    """One Dormand-Prince step; returns (y5, error estimate, k-stages)."""
    k = [None] * 7
    k[0] = rhs(t, y) if k0 is None else k0
    for i in range(1, 7):
        acc = y.copy()
        for j, a in enumerate(A[i]):
            if a:
                acc = acc + h * a * k[j]
        k[i] = rhs(t + C[i] * h, acc)
    y5 = y + h * sum(b * kk for b, kk in zip(B5, k) if b)
    err = h * sum(e * kk for e, kk in zip(E, k) if e)
    return y5, err, k


@dataclass
class Solution:
    t: np.ndarray
    y: np.ndarray
    status: str  # "ok", "truncated" or "underflow"
    message: str = ""
    nfev: int = 0
    rejected: int = 0
    extra: dict = field(default_factory=dict)


@dataclass
class DormandPrince:
    rtol: float = 1e-9
    atol: float = 1e-11
    max_step: float = math.inf
    first_step: float | None = None
    min_step: float = 1e-13
    max_steps: int = 200000
    safety: float = 0.9
    beta: float = 0.04  # PI controller: h_new ~ err^(-alpha) * err_prev^(beta)

    def solve(self, rhs: Callable, t0: float, y0, t1: float,
              accept: Callable | None = None) -> Solution:
        """Integrate y' = rhs(t, y) from t0 to t1 (either direction).

        ``accept(t, y)`` may return False to reject a step (e.g. the state left
        the chart); persistent rejection truncates the solution there.
        """
        y = np.array(y0, dtype=float)
        direction = 1.0 if t1 >= t0 else -1.0
        span = abs(t1 - t0)
        ts = [t0]
        ys = [y.copy()]
        if span == 0:
            return Solution(np.array(ts), np.array(ys), "ok")
        nfev = 0
        rejected = 0
        counter = [0]

        def f(t, yy):
            counter[0] += 1
            return np.asarray(rhs(t, yy), dtype=float)

        try:
            k0 = f(t0, y)
        except (DomainError, StepRejected, FloatingPointError) as exc:
            return Solution(np.array(ts), np.array(ys), "truncated", str(exc))
        h = self.first_step or self._initial_step(f, t0, y, k0, direction)
        h = min(h, self.max_step, span)
        t = t0
        alpha = 0.2 - 0.75 * self.beta
        err_prev = 1e-4
        status, message = "ok", ""
        for _ in range(self.max_steps):
            remaining = abs(t1 - t)
            if remaining <= 1e-14 * max(1.0, abs(t1)):
                break
            h = min(h, remaining, self.max_step)
            try:
                ynew, err, k = dp_step(f, t, y, direction * h, k0)
                if not np.all(np.isfinite(ynew)):
                    raise StepRejected("non-finite state")
                scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(ynew))
                en = float(np.sqrt(np.mean((err / scale) ** 2)))
                if not math.isfinite(en):
                    raise StepRejected("non-finite error")
                if en <= 1.0 and accept is not None and not accept(t + direction * h, ynew):
                    raise StepRejected("rejected by domain check")
            except (DomainError, StepRejected, FloatingPointError, np.linalg.LinAlgError,
                    ValueError) as exc:
                rejected += 1
                h *= 0.25
                if h < self.min_step * max(1.0, abs(t)):
                    status, message = "truncated", str(exc)
                    break
                continue
            if en <= 1.0:
                t = t + direction * h if remaining - h > 1e-14 * max(1.0, abs(t1)) else t1
                y = ynew
                k0 = k[6]
                ts.append(t)
                ys.append(y.copy())
                en = max(en, 1e-10)
                fac = self.safety * en ** (-alpha) * err_prev ** self.beta
                fac = min(5.0, max(0.2, fac))
                err_prev = en
                h *= fac
            else:
                rejected += 1
                h *= max(0.1, self.safety * en ** (-0.2))
                if h < self.min_step * max(1.0, abs(t)):
                    status, message = "underflow", f"step size underflow at t = {t!r}"
                    break
        else:
            status, message = "underflow", "maximum number of steps reached"
        nfev = counter[0]
        return Solution(np.array(ts), np.array(ys), status, message, nfev, rejected)

    def _initial_step(self, f, t0, y0, k0, direction):
        scale = self.atol + np.abs(y0) * self.rtol
        d0 = float(np.sqrt(np.mean((y0 / scale) ** 2)))
        d1 = float(np.sqrt(np.mean((k0 / scale) ** 2)))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        try:
            k1 = f(t0 + direction * h0, y0 + direction * h0 * k0)
            d2 = float(np.sqrt(np.mean(((k1 - k0) / scale) ** 2))) / h0
        except Exception:
            return h0
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** 0.2
        return min(100 * h0, h1)


def solve_ivp_dp(rhs, t0, y0, t1, rtol=1e-9, atol=1e-11, max_step=math.inf, accept=None) -> Solution:
    return DormandPrince(rtol=rtol, atol=atol, max_step=max_step).solve(rhs, t0, y0, t1, accept)
