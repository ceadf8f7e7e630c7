"""Direct integration of the neutral delay equations, plus stability runs.

Method of steps with classical 4-stage Runge-Kutta and cubic Hermite dense
output.  Delayed state and delayed derivative are read from the dense
output; when a delayed argument lands inside the step currently being
computed (vanishing-delay overlap near t0 for proportional lags, or a
neutral term with zero lag), the step closes with an inner fixed-point
correction: predict the right endpoint by extrapolation, run the stages
against the provisional panel, re-evaluate, and iterate to tolerance.
Sustained non-convergence halves the step and restarts, a bounded number
of times.

The derivative at the junction t0 comes from the equation itself, solved
by the same inner iteration (the history only supplies the predictor), so
a neutral term with a vanishing lag at t0 is handled as long as its
coefficient keeps the self-reference contractive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .concurrency import parallel_map
from .errors import IntegrationError, ValidationError
from .expressions import parse_expression, signed_power
from .model import (
    AuxiliarySpec,
    HistoryFunction,
    ProblemSpec,
    bind,
    horizon,
)

_INNER_TOL = 1e-12
_INNER_MAX = 25
_MAX_HALVINGS = 6
_FAMILY_NOTE = (
    "history family is an artifact choice (constants, cosine, ramp), "
    "not part of the stability definitions"
)


class _StepRetry(Exception):
    """Inner fixed point failed to settle; retry the run with h/2."""


class Trajectory:
    """A completed run: nodes (t, x, x'), dense output, and the history.

    Dense queries use cubic Hermite on the step panels, reproduce node
    values and derivatives exactly at nodes, return psi on [m, t0), and
    reject arguments outside [m, T].  Immutable after construction.
    """

    def __init__(self, ts, xs, ds, history: HistoryFunction, m: float, h: float):
        self._ts = np.asarray(ts, dtype=float)
        self._xs = np.asarray(xs, dtype=float)
        self._ds = np.asarray(ds, dtype=float)
        for arr in (self._ts, self._xs, self._ds):
            arr.setflags(write=False)
        self.history = history
        self.m = float(m)
        self.h = float(h)
        self._psi = history.psi.compiled()
        self._psi_prime = history.derivative_expression().compiled()

    @property
    def t0(self) -> float:
        return float(self._ts[0])

    @property
    def T(self) -> float:
        return float(self._ts[-1])

    @property
    def nodes(self) -> np.ndarray:
        return self._ts

    @property
    def values(self) -> np.ndarray:
        return self._xs

    @property
    def derivatives(self) -> np.ndarray:
        return self._ds

    # ------------------------------------------------------------------
    def _panel(self, t: float) -> int:
        i = int((t - self.t0) / self.h)
        return max(0, min(i, len(self._ts) - 2))

    def _guard(self, t: float) -> None:
        fuzz = 1e-9 * max(1.0, abs(self.T - self.m))
        if t < self.m - fuzz or t > self.T + fuzz:
            raise ValidationError(
                f"query t={t!r} outside the trajectory domain [{self.m!r}, {self.T!r}]"
            )

    def eval(self, t: float) -> float:
        self._guard(t)
        if t < self.t0:
            return float(self._psi(t))
        i = self._panel(t)
        if t == self._ts[i]:
            return float(self._xs[i])
        if t == self._ts[i + 1]:
            return float(self._xs[i + 1])
        h = self.h
        s = min(max((t - self._ts[i]) / h, 0.0), 1.0)
        s2, s3 = s * s, s * s * s
        return float(
            (2 * s3 - 3 * s2 + 1) * self._xs[i]
            + (s3 - 2 * s2 + s) * h * self._ds[i]
            + (-2 * s3 + 3 * s2) * self._xs[i + 1]
            + (s3 - s2) * h * self._ds[i + 1]
        )

    __call__ = eval

    def deriv(self, t: float) -> float:
        self._guard(t)
        if t < self.t0:
            return float(self._psi_prime(t))
        i = self._panel(t)
        if t == self._ts[i]:
            return float(self._ds[i])
        if t == self._ts[i + 1]:
            return float(self._ds[i + 1])
        h = self.h
        s = min(max((t - self._ts[i]) / h, 0.0), 1.0)
        return float(
            (6 * s * s - 6 * s) / h * (self._xs[i] - self._xs[i + 1])
            + (3 * s * s - 4 * s + 1) * self._ds[i]
            + (3 * s * s - 2 * s) * self._ds[i + 1]
        )

    # ------------------------------------------------------------------
    def max_abs(self) -> float:
        return float(np.max(np.abs(self._xs)))

    def end_abs(self) -> float:
        return float(abs(self._xs[-1]))

    def window_max(self, lo: float, hi: float) -> float:
        mask = (self._ts >= lo) & (self._ts <= hi)
        if not np.any(mask):
            return 0.0
        return float(np.max(np.abs(self._xs[mask])))

    def to_csv(self, path) -> None:
        lines = [
            f"# trajectory nodes={len(self._ts)} t0={self.t0!r} T={self.T!r}"
            f" h={self.h!r} m={self.m!r}",
            "t,x,xprime",
        ]
        lines += [
            f"{float(t)!r},{float(x)!r},{float(d)!r}"
            for t, x, d in zip(self._ts, self._xs, self._ds)
        ]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------- rhs


def _rhs_linear(problem: ProblemSpec):
    a = problem.a.compiled()
    b = problem.b.compiled()
    c = problem.c.compiled()
    G = problem.G.compiled()
    tau1 = problem.r1.tau_fn()
    tau2 = problem.r2.tau_fn()
    gamma = float(problem.gamma)
    # syntactically zero coefficients skip their lookups entirely, so a
    # plain ODE never touches the open panel and stays classical RK4
    has_b = not problem.b.is_zero()
    has_c = not problem.c.is_zero()

    def rhs(t, y, X, Xp):
        u1 = tau1(t)
        out = -a(t) * X(u1, t, y)
        if has_b:
            out += b(t) * Xp(u1, t)
        if has_c:
            u2 = tau2(t)
            out += c(t) * G(signed_power(X(u2, t, y), gamma))
        return out

    return rhs


def _rhs_general(problem: ProblemSpec):
    a = problem.a.compiled()
    c = problem.c.compiled()
    d = problem.d.compiled()
    Qt = problem.Q_t.compiled()
    Qx = problem.Q_x.compiled()
    F = problem.F.compiled()
    G = problem.G.compiled()
    tau1 = problem.r1.tau_fn()
    tau2 = problem.r2.tau_fn()
    slope1 = problem.r1.slope_fn()
    gamma = float(problem.gamma)
    has_q = not problem.Q.is_zero()
    has_c = not problem.c.is_zero()

    def rhs(t, y, X, Xp):
        u1 = tau1(t)
        x1 = X(u1, t, y)
        out = -a(t) * x1
        if has_q:
            out += Qt(t, x1) + Qx(t, x1) * Xp(u1, t) * (1.0 - slope1(t))
        dv = d(t)
        if dv != 0.0:
            out += dv * F(x1, X(tau2(t), t, y))
        if has_c:
            out += c(t) * G(signed_power(X(tau2(t), t, y), gamma))
        return out

    return rhs


def _rhs_transformed(bound):
    """Right-hand side of the reshaped equation z' (x = p z)."""
    b = bound
    gamma = b.gamma

    def rhs(t, y, X, Xp):
        u1 = b.tau1(t)
        u2 = b.tau2(t)
        z1 = X(u1, t, y)
        z2 = X(u2, t, y)
        p1 = b.p_of(u1)
        pt = b.p_raw(t)
        w = p1 * z1
        wp = (b.pp_of(u1) * z1 + p1 * Xp(u1, t)) * (1.0 - b.r1_slope(t))
        out = -(b.pp_of(t) / pt) * y - (b.a(t) / pt) * w
        out += (b.Qt_fn(t, w) + b.Qx_fn(t, w) * wp) / pt
        dv = b.d(t)
        if dv != 0.0:
            out += dv / pt * b.F_fn(w, b.p_of(u2) * z2)
        out += b.c(t) / pt * b.G_fn(b.p_of(u2) ** gamma * signed_power(z2, gamma))
        return out

    return rhs


# ------------------------------------------------------------------- stepper


class _Stepper:
    """One fixed-step sweep; owns the dense lookups and the open panel."""

    def __init__(self, rhs, history, t0, T, h, tol, m):
        n = max(1, math.ceil((T - t0) / h - 1e-9))
        self.h = (T - t0) / n
        self.n = n
        self.t0 = t0
        self.m = m
        self.tol = tol
        self.rhs = rhs
        self.ts = t0 + self.h * np.arange(n + 1)
        self.xs = np.empty(n + 1)
        self.ds = np.empty(n + 1)
        self.psi = history.psi.compiled()
        self.psi_prime = history.derivative_expression().compiled()
        self.k = 0  # open panel index: [ts[k], ts[k+1]]
        self.xr = 0.0  # provisional right endpoint of the open panel
        self.dr = 0.0
        self.touched = False  # some lookup read the provisional panel
        self._fuzz = 1e-12 * max(1.0, abs(T))
        self._mfuzz = 1e-9 * max(1.0, abs(m))

    # dense value lookup: stage self-reference, history, closed or open panel
    def X(self, u, t, y):
        if abs(u - t) <= self._fuzz:
            return y
        if u < self.t0:
            if u < self.m - self._mfuzz:
                raise ValidationError(
                    f"delayed argument {u!r} below the horizon m = {self.m!r}"
                )
            return self.psi(u)
        i = int((u - self.t0) / self.h)
        if i >= self.k:
            if u <= self.ts[self.k] + self._fuzz:
                return self.xs[self.k]
            self.touched = True
            return self._panel_value(u)
        return self._hermite(i, u)

    def Xp(self, u, t):
        if u < self.t0:
            if u < self.m - self._mfuzz:
                raise ValidationError(
                    f"delayed argument {u!r} below the horizon m = {self.m!r}"
                )
            return self.psi_prime(u)
        i = int((u - self.t0) / self.h)
        if i >= self.k:
            if u <= self.ts[self.k] + self._fuzz:
                return self.ds[self.k]
            self.touched = True
            return self._panel_deriv(u)
        return self._hermite_deriv(i, u)

    def _hermite(self, i, u):
        h = self.h
        s = (u - self.ts[i]) / h
        s2, s3 = s * s, s * s * s
        return (
            (2 * s3 - 3 * s2 + 1) * self.xs[i]
            + (s3 - 2 * s2 + s) * h * self.ds[i]
            + (-2 * s3 + 3 * s2) * self.xs[i + 1]
            + (s3 - s2) * h * self.ds[i + 1]
        )

    def _hermite_deriv(self, i, u):
        h = self.h
        s = (u - self.ts[i]) / h
        return (
            (6 * s * s - 6 * s) / h * (self.xs[i] - self.xs[i + 1])
            + (3 * s * s - 4 * s + 1) * self.ds[i]
            + (3 * s * s - 2 * s) * self.ds[i + 1]
        )

    def _panel_value(self, u):
        h = self.h
        k = self.k
        s = min((u - self.ts[k]) / h, 1.0)
        s2, s3 = s * s, s * s * s
        return (
            (2 * s3 - 3 * s2 + 1) * self.xs[k]
            + (s3 - 2 * s2 + s) * h * self.ds[k]
            + (-2 * s3 + 3 * s2) * self.xr
            + (s3 - s2) * h * self.dr
        )

    def _panel_deriv(self, u):
        h = self.h
        k = self.k
        s = min((u - self.ts[k]) / h, 1.0)
        return (
            (6 * s * s - 6 * s) / h * (self.xs[k] - self.xr)
            + (3 * s * s - 4 * s + 1) * self.ds[k]
            + (3 * s * s - 2 * s) * self.dr
        )

    # ------------------------------------------------------------------
    def _bootstrap(self):
        """x'(t0) from the equation itself; the history only predicts."""
        x0 = float(self.psi(self.t0))
        self.xs[0] = x0
        d0 = float(self.psi_prime(self.t0))
        t0 = self.t0
        fuzz = self._fuzz

        def X0(u, t, y):
            if abs(u - t0) <= fuzz:
                return y
            if u < self.m - self._mfuzz:
                raise ValidationError(
                    f"delayed argument {u!r} below the horizon m = {self.m!r}"
                )
            return self.psi(u)

        for _ in range(_INNER_MAX):
            def Xp0(u, t, _d0=d0):
                if abs(u - t0) <= fuzz:
                    return _d0
                if u < self.m - self._mfuzz:
                    raise ValidationError(
                        f"delayed argument {u!r} below the horizon m = {self.m!r}"
                    )
                return self.psi_prime(u)

            d_new = self.rhs(t0, x0, X0, Xp0)
            if abs(d_new - d0) <= self.tol:
                self.ds[0] = d_new
                return
            d0 = d_new
        raise IntegrationError(
            "derivative at t0 did not settle: the neutral self-reference at the "
            "junction is not contractive"
        )

    def run(self):
        self._bootstrap()
        h = self.h
        half = 0.5 * h
        rhs = self.rhs
        for k in range(self.n):
            self.k = k
            t = self.ts[k]
            tn = self.ts[k + 1]
            xk = self.xs[k]
            k1 = self.ds[k]
            self.xr = xk + h * k1
            self.dr = k1
            settled = False
            for _ in range(_INNER_MAX):
                self.touched = False
                k2 = rhs(t + half, xk + half * k1, self.X, self.Xp)
                k3 = rhs(t + half, xk + half * k2, self.X, self.Xp)
                k4 = rhs(tn, xk + h * k3, self.X, self.Xp)
                x_new = xk + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                x_prev, d_prev = self.xr, self.dr
                self.xr = x_new
                self.dr = rhs(tn, x_new, self.X, self.Xp)
                if not self.touched:
                    settled = True
                    break
                if max(abs(self.xr - x_prev), h * abs(self.dr - d_prev)) <= self.tol:
                    settled = True
                    break
            if not settled:
                raise _StepRetry
            if not (math.isfinite(self.xr) and math.isfinite(self.dr)):
                raise IntegrationError(
                    f"state became non-finite near t = {float(tn)!r}"
                )
            self.xs[k + 1] = self.xr
            self.ds[k + 1] = self.dr
        return self.ts, self.xs, self.ds


def _drive(rhs, history, t0, T, h, tol, m) -> Trajectory:
    if not T > t0:
        raise ValidationError("horizon T must exceed t0")
    if not h > 0:
        raise ValidationError("step h must be positive")
    step = h
    for _ in range(_MAX_HALVINGS + 1):
        stepper = _Stepper(rhs, history, t0, T, step, tol, m)
        try:
            ts, xs, ds = stepper.run()
        except _StepRetry:
            step *= 0.5
            continue
        return Trajectory(ts, xs, ds, history, m, stepper.h)
    raise IntegrationError(
        f"inner step correction kept failing down to h = {step!r}; "
        "the delay overlap is too strong for this stepper"
    )


# ------------------------------------------------------------------- public


def integrate(
    problem: ProblemSpec,
    psi: HistoryFunction,
    T: float,
    h: float = 1e-3,
    tol: float = _INNER_TOL,
) -> Trajectory:
    """Solve the equation forward from the history psi on [t0, T]."""
    rhs = _rhs_linear(problem) if problem.form == "linear-neutral" else _rhs_general(problem)
    m = min(horizon(problem, T).m, problem.t0)
    return _drive(rhs, psi, problem.t0, T, h, tol, m)


def integrate_transformed(
    problem: ProblemSpec,
    aux: AuxiliarySpec,
    psi: HistoryFunction,
    T: float,
    h: float = 1e-3,
    tol: float = _INNER_TOL,
) -> Trajectory:
    """Solve the reshaped equation for z (x = p z) from the z-history psi.

    The coefficient path is disjoint from :func:`integrate` (weighted
    extensions instead of the raw equation), which makes the pair a
    cross-method consistency oracle.
    """
    prob = problem.as_general() if problem.form == "linear-neutral" else problem
    bound = bind(prob, aux, tmax=T)
    rhs = _rhs_transformed(bound)
    return _drive(rhs, psi, prob.t0, T, h, tol, bound.m)


@dataclass(frozen=True)
class StabilityReport:
    """Outcome of a family of perturbed starts around the zero solution."""

    eps: float
    delta: float
    T: float
    h: float
    labels: tuple[str, ...]
    max_abs: tuple[float, ...]
    end_abs: tuple[float, ...]
    trend_decreasing: tuple[bool, ...]
    stable: bool
    asymptotic: bool
    note: str = _FAMILY_NOTE

    def to_text(self) -> str:
        rows = [
            f"stability.eps = {float(self.eps)!r}",
            f"stability.delta = {float(self.delta)!r}",
            f"stability.T = {float(self.T)!r}",
            f"stability.h = {float(self.h)!r}",
        ]
        for label, mx, end, tr in zip(
            self.labels, self.max_abs, self.end_abs, self.trend_decreasing
        ):
            rows.append(f"trajectory.{label}.max_abs = {float(mx)!r}")
            rows.append(f"trajectory.{label}.end_abs = {float(end)!r}")
            rows.append(f"trajectory.{label}.trend_decreasing = {str(tr).lower()}")
        rows.append(f"verdict.eps_bounded = {str(self.stable).lower()}")
        rows.append(f"verdict.asymptotic = {str(self.asymptotic).lower()}")
        rows.append(f"note = {self.note}")
        return "\n".join(rows)


def default_history_family(
    delta: float, t0: float, m: float
) -> list[tuple[str, HistoryFunction]]:
    """Constants of both signs, a cosine arch, and a ramp, all of size delta."""
    # plain floats only: the reprs below are parsed back as expression text
    delta, t0 = float(delta), float(t0)
    span = max(1.0, t0 - float(m))
    mk = parse_expression
    return [
        ("const_plus", HistoryFunction(mk(f"{delta!r} + 0*t"))),
        ("const_minus", HistoryFunction(mk(f"-{delta!r} + 0*t"))),
        ("cosine", HistoryFunction(mk(f"{delta!r} * cos(t - {t0!r})"))),
        ("ramp", HistoryFunction(mk(f"{delta!r} * (1 + (t - {t0!r}) / {span!r})"))),
    ]


def stability_experiment(
    problem: ProblemSpec,
    eps: float,
    delta: float,
    T: float,
    psi_family: Sequence[tuple[str, HistoryFunction]] | None = None,
    h: float = 0.02,
    tol: float = _INNER_TOL,
) -> StabilityReport:
    """Integrate a family of size-delta histories and grade the outcome.

    "eps-bounded" requires every trajectory to stay below eps in absolute
    value; the asymptotic verdict additionally wants small end values with
    a decreasing last-decade trend.
    """
    if delta <= 0:
        raise ValidationError("delta must be positive")
    t0 = problem.t0
    m = min(horizon(problem, T).m, t0)
    family = list(psi_family) if psi_family is not None else default_history_family(delta, t0, m)
    labels = tuple(label for label, _ in family)

    def one(item):
        _, psi = item
        return integrate(problem, psi, T, h=h, tol=tol)

    runs = parallel_map(one, family)
    max_abs = tuple(tr.max_abs() for tr in runs)
    end_abs = tuple(tr.end_abs() for tr in runs)
    decade = (T - t0) / 10.0
    trend = tuple(
        tr.window_max(T - decade, T) <= tr.window_max(T - 2 * decade, T - decade)
        for tr in runs
    )
    stable = all(mx < eps for mx in max_abs)
    asymptotic = stable and all(e < 0.01 * eps for e in end_abs) and all(trend)
    return StabilityReport(
        eps=eps,
        delta=delta,
        T=T,
        h=h,
        labels=labels,
        max_abs=max_abs,
        end_abs=end_abs,
        trend_decreasing=trend,
        stable=stable,
        asymptotic=asymptotic,
    )


def convergence_order(
    problem: ProblemSpec,
    psi: HistoryFunction,
    T: float,
    steps: Sequence[float],
    probes: int = 101,
) -> float:
    """Self-convergence slope: least squares of log error against log h.

    Errors are sup-differences on a fixed probe grid against a reference
    run at half the finest step.
    """
    steps = sorted(float(h) for h in steps)
    if len(steps) < 3:
        raise ValidationError("need at least three step sizes")
    ref = integrate(problem, psi, T, h=min(steps) / 2.0)
    grid = np.linspace(problem.t0, T, probes)
    errors = []
    for h in steps:
        tr = integrate(problem, psi, T, h=h)
        err = max(abs(tr.eval(float(t)) - ref.eval(float(t))) for t in grid)
        errors.append(err)
    if max(errors) < 1e-14:
        raise ValidationError(
            "errors are all at rounding level; the study is degenerate"
        )
    slope, _ = np.polyfit(np.log(steps), np.log(np.maximum(errors, 1e-300)), 1)
    return float(slope)
