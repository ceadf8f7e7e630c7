"""Quadrature kernels used by the criterion and the fixed-point operator.

Everything here works on plain ``float -> float`` callables (compiled
expressions or hand-written functions).  The recurring shapes are

* running integrals from a fixed start, memoized at unit checkpoints
  (CumulativeExponent), so exponential damping weights over long horizons
  cost two table lookups instead of a fresh integration;
* exponentially weighted integrals  int_a^t exp(G(s) - G(t)) f(s) ds, both
  one-shot and swept incrementally along a grid (WeightedSweep);
* supremum scans over long windows with local refinement (sup_scan).
"""

from __future__ import annotations

import math
import threading
from bisect import bisect_right
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .concurrency import parallel_map
from .errors import QuadratureError

__all__ = [
    "adaptive_simpson",
    "CumulativeExponent",
    "damping_weight",
    "weighted_integral",
    "WeightedSweep",
    "window_integral",
    "sup_scan",
    "SupScanResult",
]

# At max recursion depth a panel is still accepted if its Richardson defect
# is below this floor; lets integrable kinks through, keeps divergences fatal.
_DEPTH_FLOOR = 1e-9


def _sample(f: Callable[[float], float], x: float) -> float:
    v = f(x)
    if not math.isfinite(v):
        raise QuadratureError(f"non-finite integrand sample {v!r} at t={x!r}")
    return v


def _adaptive(f, a, fa, b, fb, m, fm, whole, tol, depth):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = _sample(f, lm)
    frm = _sample(f, rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if abs(delta) <= tol:
        return left + right + delta / 15.0
    if depth <= 0:
        if abs(delta) <= _DEPTH_FLOOR:
            return left + right + delta / 15.0
        raise QuadratureError(
            f"no convergence on [{a!r}, {b!r}] after max refinement depth "
            f"(defect {abs(delta):.3e})"
        )
    half = 0.5 * tol
    return _adaptive(f, a, fa, m, fm, lm, flm, left, half, depth - 1) + _adaptive(
        f, m, fm, b, fb, rm, frm, right, half, depth - 1
    )


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
    max_depth: int = 40,
) -> float:
    """Integrate f over [a, b] (a <= b) with Richardson-corrected Simpson.

    A panel is accepted when its two-half defect |S2 - S1| <= tol and the
    returned value carries the S2 + (S2 - S1)/15 correction.  Raises
    QuadratureError on non-finite samples or depth exhaustion.
    """
    if b < a:
        raise ValueError("adaptive_simpson needs a <= b; use window_integral for signed windows")
    if a == b:
        return 0.0
    fa = _sample(f, a)
    fb = _sample(f, b)
    m = 0.5 * (a + b)
    fm = _sample(f, m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _adaptive(f, a, fa, b, fb, m, fm, whole, tol, max_depth)


def window_integral(
    f: Callable[[float], float], t1: float, t2: float, tol: float = 1e-10
) -> float:
    """Signed integral of f from t1 to t2 (antisymmetric under swap)."""
    if t1 <= t2:
        return adaptive_simpson(f, t1, t2, tol)
    return -adaptive_simpson(f, t2, t1, tol)


class CumulativeExponent:
    """Running integral G(t) = int_start^t f, memoized at checkpoints.

    When f is a damping rate g, ``weight(s, t) = exp(G(s) - G(t))`` is the
    damping factor over [s, t]; the class is equally used for plain running
    integrals of nonnegative windows.  Readers are thread-safe; table
    extension happens under a lock.
    """

    def __init__(
        self,
        f: Callable[[float], float],
        start: float,
        checkpoint: float = 1.0,
        tol_per_unit: float = 1e-11,
    ):
        if checkpoint <= 0:
            raise ValueError("checkpoint spacing must be positive")
        self.f = f
        self.start = float(start)
        self.checkpoint = float(checkpoint)
        self.tol_per_unit = float(tol_per_unit)
        self._table = [0.0]
        self._lock = threading.Lock()

    def _extend(self, k: int) -> None:
        with self._lock:
            while len(self._table) <= k:
                i = len(self._table) - 1
                a = self.start + i * self.checkpoint
                b = a + self.checkpoint
                panel = adaptive_simpson(self.f, a, b, self.tol_per_unit)
                self._table.append(self._table[-1] + panel)

    def cumulative(self, t: float) -> float:
        if t < self.start:
            if t < self.start - 1e-9 * max(1.0, abs(self.start)):
                raise QuadratureError(
                    f"cumulative query at t={t!r} below start {self.start!r}"
                )
            t = self.start
        k = int((t - self.start) / self.checkpoint)
        base = self.start + k * self.checkpoint
        if base > t:  # float fuzz at a checkpoint boundary
            k -= 1
            base = self.start + k * self.checkpoint
        if k >= len(self._table):
            self._extend(k)
        partial = adaptive_simpson(self.f, base, t, self.tol_per_unit)
        return self._table[k] + partial

    def weight(self, s: float, t: float) -> float:
        return math.exp(self.cumulative(s) - self.cumulative(t))


def damping_weight(gexp: CumulativeExponent, s: float, t: float) -> float:
    """exp(-int_s^t g) via the cumulative table of g."""
    return gexp.weight(s, t)


def weighted_integral(
    f: Callable[[float], float],
    gexp: CumulativeExponent,
    t: float,
    t_start: float | None = None,
    tol: float = 1e-10,
) -> float:
    """One-shot int_{t_start}^{t} exp(G(s) - G(t)) f(s) ds."""
    a = gexp.start if t_start is None else float(t_start)
    gt = gexp.cumulative(t)
    return adaptive_simpson(
        lambda s: math.exp(gexp.cumulative(s) - gt) * f(s), a, t, tol
    )


class WeightedSweep:
    """Exp-weighted running integral advanced panel-by-panel along a grid.

    Uses I(t2) = exp(G(t1) - G(t2)) I(t1) + int_{t1}^{t2} exp(G(s) - G(t2)) f,
    so a length-N grid costs N panel integrations instead of N full ones.
    ``at(t)`` evaluates between grid points from the nearest left node.
    """

    def __init__(
        self,
        f: Callable[[float], float],
        gexp: CumulativeExponent,
        grid: Sequence[float],
        tol: float = 1e-11,
    ):
        self.f = f
        self.gexp = gexp
        self.grid = np.asarray(grid, dtype=float)
        if self.grid.ndim != 1 or len(self.grid) < 1:
            raise ValueError("grid must be a non-empty 1-d sequence")
        self.tol = float(tol)
        self._G = [gexp.cumulative(t) for t in self.grid]
        vals = np.empty(len(self.grid))
        vals[0] = 0.0
        for i in range(1, len(self.grid)):
            gi = self._G[i]
            panel = adaptive_simpson(
                lambda s: math.exp(self.gexp.cumulative(s) - gi) * self.f(s),
                self.grid[i - 1],
                self.grid[i],
                self.tol,
            )
            vals[i] = math.exp(self._G[i - 1] - gi) * vals[i - 1] + panel
        self.values = vals

    def at(self, t: float) -> float:
        if t < self.grid[0] - 1e-9 or t > self.grid[-1] + 1e-9:
            raise ValueError(f"t={t!r} outside the sweep grid")
        i = int(np.searchsorted(self.grid, t, side="right")) - 1
        i = max(0, min(i, len(self.grid) - 1))
        ti = self.grid[i]
        if t <= ti:
            return float(self.values[i])
        gt = self.gexp.cumulative(t)
        panel = adaptive_simpson(
            lambda s: math.exp(self.gexp.cumulative(s) - gt) * self.f(s),
            ti,
            t,
            self.tol,
        )
        return math.exp(self._G[i] - gt) * float(self.values[i]) + panel


@dataclass(frozen=True)
class SupScanResult:
    sup: float
    argsup: float
    tail_slope: float


def _golden_max(h, a: float, b: float, iters: int = 80) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = _sample(h, c)
    fd = _sample(h, d)
    for _ in range(iters):
        if (b - a) <= 1e-12 * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = _sample(h, c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = _sample(h, d)
    return (c, fc) if fc >= fd else (d, fd)


def sup_scan(
    h: Callable[[float], float],
    lo: float,
    hi: float,
    n: int = 4096,
    samples: Sequence[float] | None = None,
) -> SupScanResult:
    """Estimate sup h over [lo, hi]: coarse grid, then local refinement.

    The top three coarse cells each get a 64-point sub-scan followed by a
    golden-section polish, so narrow peaks between grid points are caught.
    The result never undercuts any sample taken.  ``tail_slope`` is the
    secant slope of h over the last tenth of the window, the growth witness
    used by the certification verdicts.  With ``samples`` given, they are
    taken as h on ``linspace(lo, hi, n)`` and not recomputed.
    """
    if hi < lo:
        raise ValueError("sup_scan needs lo <= hi")
    if hi == lo:
        v = _sample(h, lo)
        return SupScanResult(v, lo, 0.0)
    if n < 64:
        raise ValueError("need at least 64 coarse samples")
    ts = np.linspace(lo, hi, n)
    if samples is None:
        vals = np.asarray(parallel_map(h, ts), dtype=float)
    else:
        vals = np.asarray(samples, dtype=float)
        if vals.shape != ts.shape:
            raise ValueError("samples length must match n")
    if not np.all(np.isfinite(vals)):
        bad = int(np.argmax(~np.isfinite(vals)))
        raise QuadratureError(f"non-finite scan sample at t={ts[bad]!r}")

    best = float(vals.max())
    arg = float(ts[int(vals.argmax())])

    # refine around the three best, mutually non-adjacent coarse cells
    order = np.argsort(vals)[::-1]
    picked: list[int] = []
    for idx in order:
        if len(picked) == 3:
            break
        if all(abs(int(idx) - p) > 1 for p in picked):
            picked.append(int(idx))
    for idx in picked:
        a = float(ts[max(idx - 1, 0)])
        b = float(ts[min(idx + 1, n - 1)])
        if b <= a:
            continue
        sub = np.linspace(a, b, 64)
        subvals = np.asarray([_sample(h, x) for x in sub])
        j = int(subvals.argmax())
        if float(subvals[j]) > best:
            best = float(subvals[j])
            arg = float(sub[j])
        ga, gb = float(sub[max(j - 1, 0)]), float(sub[min(j + 1, 63)])
        if gb > ga:
            x, v = _golden_max(h, ga, gb)
            if v > best:
                best = v
                arg = x

    ta = hi - 0.1 * (hi - lo)
    slope = (float(vals[-1]) - _sample(h, ta)) / (hi - ta)
    return SupScanResult(best, arg, slope)
