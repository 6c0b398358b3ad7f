"""Uncertainty-relation evaluators and the special functions they need.

Every evaluator returns a :class:`BoundReport` carrying both sides, the
slack, the inputs with their provenance, and whether the stated
precondition held. The inequalities themselves are exact, so a bound fed
by exact statistics is "satisfied" only within 1e-9 slack; Monte Carlo
inputs widen the tolerance to three propagated standard errors so noise
cannot manufacture violations. A failed precondition marks the report
not applicable (``satisfied is None``) rather than violated.

Bound inventory:

* windowed activity bound: squared coefficient-of-variation combination
  against cot^2 of the half angle integral of sqrt(A(t))/t,
* rate-form bound: Var / (tau d_tau E)^2 against 1 / A(tau) (which the
  Poisson fixture saturates),
* moment-ratio bounds for arbitrary orders 0 < r < s (sin form with the
  angle precondition, exponential form valid for every horizon),
* entropy-production bound csch^2(h(Sigma/2)) and its weaker companion
  2/(e^Sigma - 1), plus the inverted form that lower-bounds Sigma from
  current statistics alone,
* the no-jump survival bound exp(-a(0) tau).

h(y) here is the inverse of x tanh(x), computed by safeguarded Newton on
the bracket [y, y+1].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .counting import CountingObservable, MomentResult, ThermoCurve, mean_rate
from .engine import survival_probability
from .operators import LindbladModel

EXACT_TOL = 1e-9
MC_SIGMAS = 3.0


@dataclass(frozen=True)
class InputStat:
    """One statistic feeding a bound, with provenance."""

    value: float
    source: str = "exact"
    stderr: float | None = None

    @classmethod
    def exact(cls, value: float) -> "InputStat":
        return cls(float(value), "exact", None)

    @classmethod
    def monte_carlo(cls, value: float, stderr: float) -> "InputStat":
        return cls(float(value), "monte_carlo", float(stderr))


@dataclass(frozen=True)
class BoundReport:
    """Evaluated inequality lhs >= rhs.

    ``satisfied`` is None when the precondition failed (the bound does
    not apply); otherwise slack >= -tol decides it. ``extra`` holds
    chained right-hand sides and companion values.
    """

    name: str
    lhs: float
    rhs: float
    slack: float
    satisfied: bool | None
    tol: float
    precondition_ok: bool = True
    inputs: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "satisfied": self.satisfied,
            "tol": self.tol,
            "precondition_ok": self.precondition_ok,
            "inputs": {
                k: {"value": v.value, "source": v.source, "stderr": v.stderr}
                for k, v in self.inputs.items()
            },
            "extra": dict(self.extra),
        }

    def to_csv_row(self) -> dict:
        row = {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "satisfied": "" if self.satisfied is None else str(self.satisfied).lower(),
            "precondition_ok": str(self.precondition_ok).lower(),
            "tol": self.tol,
        }
        for key, stat in self.inputs.items():
            row[f"input_{key}"] = stat.value
            row[f"input_{key}_source"] = stat.source
            if stat.stderr is not None:
                row[f"input_{key}_stderr"] = stat.stderr
        for key, value in self.extra.items():
            row[f"extra_{key}"] = value
        return row

    def __str__(self) -> str:
        return json.dumps(self.to_json())


def _finish(name, lhs, rhs, inputs, extra=None, stderr_lhs=None, precondition_ok=True):
    tol = EXACT_TOL if not stderr_lhs else max(EXACT_TOL, MC_SIGMAS * stderr_lhs)
    slack = lhs - rhs
    satisfied = None if not precondition_ok else bool(slack >= -tol)
    return BoundReport(
        name=name,
        lhs=float(lhs),
        rhs=float(rhs),
        slack=float(slack),
        satisfied=satisfied,
        tol=float(tol),
        precondition_ok=precondition_ok,
        inputs=inputs,
        extra=extra or {},
    )


def inverse_x_tanh_x(y: float) -> float:
    """The h with h tanh(h) = y, for y >= 0; residual <= 1e-12 max(1, y).

    Newton iteration safeguarded by the bracket [y, y+1] (expanded on the
    rare occasions the upper end is not yet a sign change).
    """
    if y < 0:
        raise ValueError(f"argument must be nonnegative, got {y}")
    if y == 0.0:
        return 0.0

    def f(h):
        return h * math.tanh(h) - y

    lo, hi = y, y + 1.0
    while f(hi) < 0.0:
        hi += 1.0
    h = min(max(math.sqrt(y), lo), hi)
    for _ in range(100):
        val = f(h)
        if val > 0:
            hi = h
        else:
            lo = h
        deriv = math.tanh(h) + h / math.cosh(h) ** 2 if h < 350 else 1.0
        step = val / deriv if deriv > 0 else 0.0
        nxt = h - step
        if not (lo <= nxt <= hi):
            nxt = 0.5 * (lo + hi)
        if abs(val) <= 1e-15 * max(1.0, y) or nxt == h:
            h = nxt
            break
        h = nxt
    if abs(f(h)) > 1e-12 * max(1.0, y):
        raise RuntimeError(f"inverse of x tanh x failed to converge at y={y}")
    return h


def half_angle_integral(curve: ThermoCurve, t1: float, t2: float) -> float:
    """(1/2) integral of sqrt(A(t))/t over [t1, t2].

    The substitution t = u^2 removes the integrable 1/sqrt(t) endpoint
    singularity (A grows linearly from zero), after which a trapezoid on
    the transformed grid is accurate — and exact at stationarity.
    """
    if t2 <= t1:
        return 0.0
    if t1 < 0:
        raise ValueError("window start must be nonnegative")
    u = np.linspace(math.sqrt(t1), math.sqrt(t2), 2049)
    a_vals = np.interp(u * u, curve.times, curve.activity)
    integrand = np.empty_like(u)
    positive = u > 0
    integrand[positive] = 2.0 * np.sqrt(np.maximum(a_vals[positive], 0.0)) / u[positive]
    if not positive.all():
        integrand[~positive] = 2.0 * math.sqrt(max(curve.activity_rate[0], 0.0))
    return float(0.5 * np.trapezoid(integrand, u))


def _variance_stat(m: MomentResult) -> InputStat:
    if m.method == "monte_carlo":
        return InputStat.monte_carlo(m.variance, m.stderr_variance or 0.0)
    return InputStat.exact(m.variance)


def _mean_stat(m: MomentResult) -> InputStat:
    if m.method == "monte_carlo":
        return InputStat.monte_carlo(m.mean, m.stderr_mean or 0.0)
    return InputStat.exact(m.mean)


def tur_activity_integral(
    moments_1: MomentResult,
    moments_2: MomentResult,
    curve: ThermoCurve,
    t1: float,
    t2: float,
) -> BoundReport:
    """Windowed activity bound between two horizons t1 < t2.

    lhs = ((sqrt Var_2 + sqrt Var_1) / (E_2 - E_1))^2, rhs = cot^2 of the
    half angle integral; applies only while that angle stays below pi/2.
    """
    de = moments_2.mean - moments_1.mean
    if de <= 0:
        raise ValueError("mean at the later horizon must exceed the earlier one")
    s1 = math.sqrt(max(moments_1.variance, 0.0))
    s2 = math.sqrt(max(moments_2.variance, 0.0))
    lhs = ((s1 + s2) / de) ** 2
    angle = half_angle_integral(curve, t1, t2)
    precondition_ok = angle <= math.pi / 2 + 1e-12
    tangent = math.tan(angle)
    rhs = tangent**-2 if tangent != 0.0 else math.inf

    stderr_lhs = None
    if moments_1.method == "monte_carlo" or moments_2.method == "monte_carlo":
        var_terms = 0.0
        for m, s in ((moments_1, s1), (moments_2, s2)):
            if m.method == "monte_carlo":
                if m.stderr_variance and s > 0:
                    var_terms += (lhs / (s * (s1 + s2)) * m.stderr_variance) ** 2
                if m.stderr_mean:
                    var_terms += (2 * lhs / de * m.stderr_mean) ** 2
        stderr_lhs = math.sqrt(var_terms)

    inputs = {
        "mean_1": _mean_stat(moments_1),
        "mean_2": _mean_stat(moments_2),
        "variance_1": _variance_stat(moments_1),
        "variance_2": _variance_stat(moments_2),
        "half_angle": InputStat.exact(angle),
    }
    return _finish(
        "activity_window_bound",
        lhs,
        rhs,
        inputs,
        extra={"half_angle": angle},
        stderr_lhs=stderr_lhs,
        precondition_ok=precondition_ok,
    )


def kur_differential(
    model: LindbladModel,
    rho_tau: np.ndarray,
    obs: CountingObservable,
    tau: float,
    activity_total: float,
    moments: MomentResult,
) -> BoundReport:
    """Rate-form bound Var / (tau d_tau E)^2 >= 1 / A(tau).

    The mean growth rate is evaluated exactly from the state at tau; at
    stationarity this is the relative-variance form with A = a tau.
    """
    dmean = mean_rate(model, rho_tau, obs)
    if dmean == 0.0:
        raise ValueError("mean growth rate vanishes; the bound is undefined")
    lhs = moments.variance / (tau * dmean) ** 2
    rhs = 1.0 / activity_total
    stderr_lhs = None
    if moments.method == "monte_carlo" and moments.stderr_variance:
        stderr_lhs = moments.stderr_variance / (tau * dmean) ** 2
    inputs = {
        "variance": _variance_stat(moments),
        "mean_growth_rate": InputStat.exact(dmean),
        "activity": InputStat.exact(activity_total),
    }
    return _finish("activity_rate_bound", lhs, rhs, inputs, stderr_lhs=stderr_lhs)


def moment_ratio_bounds(
    abs_moment_r: InputStat,
    abs_moment_s: InputStat,
    r: float,
    s: float,
    tau: float,
    curve: ThermoCurve | None = None,
    initial_rate: float | None = None,
) -> tuple[BoundReport, BoundReport]:
    """Moment-ratio bounds for orders 0 < r < s.

    Returns the (sin form, exponential form) pair; the sin form needs the
    activity curve and its half-angle precondition, the exponential form
    only the initial jump rate and holds for every tau > 0. Counting
    observables vanish on the empty trajectory by construction, which is
    the assumption both bounds inherit.
    """
    if not 0 < r < s:
        raise ValueError("orders must satisfy 0 < r < s")
    if abs_moment_r.value <= 0 or abs_moment_s.value <= 0:
        raise ValueError("absolute moments must be positive")
    er, es = r / (s - r), s / (s - r)
    lhs = abs_moment_s.value**er / abs_moment_r.value**es
    stderr_lhs = None
    if "monte_carlo" in (abs_moment_r.source, abs_moment_s.source):
        rel_sq = 0.0
        if abs_moment_s.stderr:
            rel_sq += (er * abs_moment_s.stderr / abs_moment_s.value) ** 2
        if abs_moment_r.stderr:
            rel_sq += (es * abs_moment_r.stderr / abs_moment_r.value) ** 2
        stderr_lhs = lhs * math.sqrt(rel_sq)
    inputs = {"abs_moment_r": abs_moment_r, "abs_moment_s": abs_moment_s}

    if curve is None:
        sin_report = None
    else:
        angle = half_angle_integral(curve, 0.0, tau)
        pre = 0.0 < angle <= math.pi / 2 + 1e-12
        rhs_sin = math.sin(angle) ** (-2) if pre else 0.0
        sin_report = _finish(
            "moment_ratio_sin_bound",
            lhs,
            rhs_sin,
            dict(inputs, half_angle=InputStat.exact(angle)),
            extra={"r": r, "s": s},
            stderr_lhs=stderr_lhs,
            precondition_ok=pre,
        )

    if initial_rate is None:
        exp_report = None
    else:
        if tau <= 0:
            raise ValueError("the exponential form needs tau > 0")
        rhs_exp = 1.0 / (1.0 - math.exp(-initial_rate * tau))
        exp_report = _finish(
            "moment_ratio_exp_bound",
            lhs,
            rhs_exp,
            dict(inputs, initial_rate=InputStat.exact(initial_rate)),
            extra={"r": r, "s": s},
            stderr_lhs=stderr_lhs,
        )
    return sin_report, exp_report


def gamma_factor(var_first_half: float, var_second_half: float, var_total: float) -> float:
    """Windowed-variance factor 4 max(half variances) / total variance."""
    if var_total <= 0:
        raise ValueError("total variance must be positive")
    return 4.0 * max(var_first_half, var_second_half) / var_total


def windowed_gamma(
    model: LindbladModel,
    rho0: np.ndarray,
    obs: CountingObservable,
    tau: float,
    coherent: bool = True,
) -> float:
    """gamma(tau) from exact windowed variances at tau/2."""
    from .counting import counting_moments

    half = tau / 2.0
    first = counting_moments(model, rho0, obs.with_window((0.0, half)), tau, coherent)
    second = counting_moments(model, rho0, obs.with_window((half, tau)), tau, coherent)
    total = counting_moments(model, rho0, obs.with_window((0.0, tau)), tau, coherent)
    return gamma_factor(first.variance, second.variance, total.variance)


def csch_squared_bound(sigma: float) -> float:
    """csch^2(h(Sigma/2)): the strong entropy-production bound."""
    if sigma < 0:
        raise ValueError("entropy production must be nonnegative")
    if sigma == 0.0:
        return math.inf
    h = inverse_x_tanh_x(sigma / 2.0)
    return 1.0 / math.sinh(h) ** 2


def ep_lower_bound(mean_j: float, var_j: float, gamma: float = 1.0) -> float:
    """Entropy lower bound 2 arcsinh(1/sqrt(R)) / sqrt(R+1), R = gamma Var/E^2."""
    if mean_j == 0.0:
        raise ValueError("mean current vanishes; the bound is undefined")
    ratio = gamma * var_j / mean_j**2
    if ratio <= 0:
        return math.inf
    return 2.0 * math.asinh(1.0 / math.sqrt(ratio)) / math.sqrt(ratio + 1.0)


def ep_tur(
    mean_j: InputStat,
    var_j: InputStat,
    gamma: float,
    sigma: float,
) -> BoundReport:
    """Entropy-production bound R >= csch^2(h(Sigma/2)) >= 2/(e^Sigma - 1).

    R = gamma Var[J]/E[J]^2; pass gamma = 1 for the stationary form. The
    report also carries the inverted bound on Sigma and the equivalent
    arctanh/arcsinh representations.
    """
    if mean_j.value == 0.0:
        raise ValueError("mean current vanishes; the bound is undefined")
    ratio = gamma * var_j.value / mean_j.value**2
    rhs_strong = csch_squared_bound(sigma)
    rhs_weak = 2.0 / math.expm1(sigma) if sigma > 0 else math.inf
    stderr_lhs = None
    if "monte_carlo" in (mean_j.source, var_j.source):
        rel_sq = 0.0
        if var_j.stderr and var_j.value != 0:
            rel_sq += (var_j.stderr / var_j.value) ** 2
        if mean_j.stderr:
            rel_sq += (2.0 * mean_j.stderr / mean_j.value) ** 2
        stderr_lhs = abs(ratio) * math.sqrt(rel_sq)
    extra = {
        "rhs_weak": rhs_weak,
        "entropy_lower_bound": ep_lower_bound(mean_j.value, var_j.value, gamma),
        "arctanh_form": math.atanh(1.0 / math.sqrt(ratio + 1.0)) if ratio > 0 else math.inf,
        "arcsinh_form": math.asinh(1.0 / math.sqrt(ratio)) if ratio > 0 else math.inf,
        "gamma": gamma,
    }
    inputs = {
        "mean_current": mean_j,
        "variance_current": var_j,
        "entropy_production": InputStat.exact(sigma),
    }
    return _finish("entropy_production_bound", ratio, rhs_strong, inputs, extra, stderr_lhs)


def survival_bound_check(model: LindbladModel, rho0: np.ndarray, tau: float) -> BoundReport:
    """No-jump probability against exp(-a(0) tau)."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    lhs = survival_probability(model, rho0, tau)
    obs = CountingObservable.total_count(model.n_channels)
    a0 = mean_rate(model, np.asarray(rho0, complex), obs)
    rhs = math.exp(-a0 * tau)
    inputs = {
        "survival_probability": InputStat.exact(lhs),
        "initial_rate": InputStat.exact(a0),
    }
    return _finish("survival_bound", lhs, rhs, inputs)
