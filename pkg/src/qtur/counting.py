"""Exact moments of counting observables and thermodynamic rate curves.

The first two moments of a weighted jump count come from an augmented
linear system rather than counting-field finite differences: stacking
(rho, rho1, rho2) and integrating

    d rho  / dt = L rho
    d rho1 / dt = L rho1 + J_c rho
    d rho2 / dt = L rho2 + 2 J_c rho1 + J_c2 rho

with J_w rho = sum_m w_m L_m rho L_m^dag gives mean = Tr rho1(tau) and
second moment = Tr rho2(tau) exactly (the block-triangular generator is
exponentiated per window segment, with the source blocks active only
inside the observation window). No step-size tuning enters anywhere.

Activity and entropy-flow curves integrate the instantaneous jump rates
with a composite trapezoid on a configurable grid (default 2048 points;
the integrands are smooth and the generators cheap to step).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .engine import build_generator, sandwich, step_propagator, unvec, vec
from .operators import (
    LindbladModel,
    ModelValidationError,
    dagger,
    von_neumann_trace_term,
)

DEFAULT_GRID = 2048


@dataclass(frozen=True)
class CountingObservable:
    """Real weights over channels, with an optional observation window.

    ``window=None`` means the full horizon [0, tau]. A current is a
    counting observable whose weights are exactly antisymmetric under the
    channel pairing; use :meth:`check_antisymmetry` against a model.
    """

    weights: tuple
    window: tuple | None = None
    antisymmetric: bool = False

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.window is not None:
            a, b = self.window
            if a > b:
                raise ValueError(f"window [{a}, {b}] is reversed")
            object.__setattr__(self, "window", (float(a), float(b)))

    @classmethod
    def total_count(cls, n_channels: int, window=None) -> "CountingObservable":
        """Unit weights: the raw number of jumps (dynamical activity)."""
        return cls(weights=(1.0,) * n_channels, window=window)

    def with_window(self, window) -> "CountingObservable":
        return CountingObservable(self.weights, window, self.antisymmetric)

    def check_antisymmetry(self, model: LindbladModel) -> None:
        for m, c in enumerate(model.channels):
            if c.partner is None:
                raise ModelValidationError(f"channel {m} is unpaired; no current exists")
            if self.weights[c.partner] != -self.weights[m]:
                raise ModelValidationError(
                    f"weights are not antisymmetric at pair ({m}, {c.partner})"
                )

    def resolved_window(self, tau: float) -> tuple[float, float]:
        if self.window is None:
            return (0.0, tau)
        a, b = self.window
        if a < -1e-12 or b > tau * (1 + 1e-12) + 1e-12:
            raise ValueError(f"window [{a}, {b}] outside [0, {tau}]")
        return (max(a, 0.0), min(b, tau))


@dataclass(frozen=True)
class MomentResult:
    """First two moments of a counting observable.

    ``method`` is "exact" (hierarchy) or "monte_carlo"; the stderr fields
    are populated only on the Monte Carlo path.
    """

    mean: float
    second_moment: float
    variance: float
    method: str = "exact"
    stderr_mean: float | None = None
    stderr_variance: float | None = None
    n_samples: int | None = None


@dataclass(frozen=True)
class ThermoCurve:
    """Jump-rate curves on a time grid.

    ``activity_rate``/``activity`` are the instantaneous and integrated
    total jump rates; the entropy fields are present only when every
    channel carries an entropy change.
    """

    times: np.ndarray
    activity_rate: np.ndarray
    activity: np.ndarray
    entropy_rate: np.ndarray | None = None
    entropy_flow: np.ndarray | None = None

    def activity_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.activity))


def _weighted_jump_superop(model: LindbladModel, weights) -> np.ndarray:
    d = model.dim
    out = np.zeros((d * d, d * d), dtype=complex)
    for w, c in zip(weights, model.channels):
        if w != 0.0:
            out += w * sandwich(c.L)
    return out


def counting_moments(
    model: LindbladModel,
    rho0: np.ndarray,
    obs: CountingObservable,
    tau: float,
    coherent: bool = True,
) -> MomentResult:
    """Exact mean/variance of the windowed count up to ``tau``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if len(obs.weights) != model.n_channels:
        raise ValueError("weight vector length does not match the channel count")
    t_a, t_b = obs.resolved_window(tau)

    gen = build_generator(model, coherent=coherent).matrix
    n = gen.shape[0]
    j1 = _weighted_jump_superop(model, obs.weights)
    j2 = _weighted_jump_superop(model, [w * w for w in obs.weights])

    zero = np.zeros_like(gen)
    active = np.block([[gen, zero, zero], [j1, gen, zero], [j2, 2 * j1, gen]])
    idle = np.block([[gen, zero, zero], [zero, gen, zero], [zero, zero, gen]])

    y = np.zeros(3 * n, dtype=complex)
    y[:n] = vec(rho0)
    for lo, hi, block in ((0.0, t_a, idle), (t_a, t_b, active), (t_b, tau, idle)):
        if hi > lo:
            y = expm(block * (hi - lo)) @ y
    tr = vec(np.eye(model.dim)).conj()
    mean = float(np.real(tr @ y[n : 2 * n]))
    second = float(np.real(tr @ y[2 * n :]))
    return MomentResult(mean=mean, second_moment=second, variance=second - mean * mean)


def mean_rate(model: LindbladModel, rho_t: np.ndarray, obs: CountingObservable) -> float:
    """Instantaneous weighted jump rate sum_m c_m Tr[L_m rho L_m^dag]."""
    rho_t = np.asarray(rho_t, dtype=complex)
    rate = 0.0
    for w, c in zip(obs.weights, model.channels):
        if w != 0.0:
            rate += w * np.real(np.trace(dagger(c.L) @ c.L @ rho_t))
    return float(rate)


def channel_rates(model: LindbladModel, rho_t: np.ndarray) -> np.ndarray:
    """Tr[L_m rho L_m^dag] for every channel."""
    rho_t = np.asarray(rho_t, dtype=complex)
    return np.array(
        [float(np.real(np.trace(dagger(c.L) @ c.L @ rho_t))) for c in model.channels]
    )


def _rate_curves(
    model: LindbladModel,
    rho0: np.ndarray,
    tau: float,
    n_grid: int,
    coherent: bool,
    entropy_weights: np.ndarray | None,
):
    if tau > 0 and n_grid < 2:
        raise ValueError("a positive horizon needs at least two grid points")
    gen = build_generator(model, coherent=coherent)
    times = np.linspace(0.0, tau, n_grid)
    step = step_propagator(gen, times[1] - times[0]) if n_grid > 1 else None
    ops = [dagger(c.L) @ c.L for c in model.channels]

    a_rate = np.empty(n_grid)
    s_rate = np.empty(n_grid) if entropy_weights is not None else None
    x = vec(rho0)
    rho_tau = unvec(x)
    for k in range(n_grid):
        rho = unvec(x)
        rates = np.array([float(np.real(np.trace(op @ rho))) for op in ops])
        a_rate[k] = rates.sum()
        if s_rate is not None:
            s_rate[k] = float(entropy_weights @ rates)
        if k == n_grid - 1:
            rho_tau = rho
        elif step is not None:
            x = step @ x
    return times, a_rate, s_rate, rho_tau


def _cumtrapz(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    if len(times) > 1:
        out[1:] = np.cumsum(np.diff(times) * (values[1:] + values[:-1]) / 2.0)
    return out


def activity_curve(
    model: LindbladModel,
    rho0: np.ndarray,
    tau: float,
    n_grid: int = DEFAULT_GRID,
    coherent: bool = True,
) -> ThermoCurve:
    """Instantaneous and integrated total jump rate on [0, tau].

    When the model carries entropy weights the entropy-flow curves come
    along for free.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    ds = model.entropy_weights() if model.has_entropy_weights else None
    times, a_rate, s_rate, _ = _rate_curves(model, rho0, tau, n_grid, coherent, ds)
    return ThermoCurve(
        times=times,
        activity_rate=a_rate,
        activity=_cumtrapz(times, a_rate),
        entropy_rate=s_rate,
        entropy_flow=None if s_rate is None else _cumtrapz(times, s_rate),
    )


def entropy_production(
    model: LindbladModel,
    rho0: np.ndarray,
    tau: float,
    n_grid: int = DEFAULT_GRID,
    coherent: bool = True,
) -> float:
    """Total entropy production over [0, tau].

    System term Tr[rho(0) ln rho(0)] - Tr[rho(tau) ln rho(tau)] plus the
    integrated environment entropy flow. Requires ds on every channel.
    """
    ds = model.entropy_weights()
    times, _, s_rate, rho_tau = _rate_curves(model, rho0, tau, n_grid, coherent, ds)
    flow = float(np.trapezoid(s_rate, times))
    return von_neumann_trace_term(rho0) - von_neumann_trace_term(rho_tau) + flow


def entropy_production_rate(model: LindbladModel, rho: np.ndarray) -> float:
    """sum_m ds_m Tr[L_m rho L_m^dag]; at stationarity Sigma(tau) = rate * tau."""
    ds = model.entropy_weights()
    return float(ds @ channel_rates(model, rho))


def _split_rates(model: LindbladModel, rho: np.ndarray, weights: np.ndarray):
    from .operators import split_diagonal_offdiagonal

    rho_d, rho_nd = split_diagonal_offdiagonal(rho)
    part_d = float(weights @ channel_rates(model, rho_d))
    part_nd = float(weights @ channel_rates(model, rho_nd))
    return part_d, part_nd


def decompose_activity(model: LindbladModel, rho: np.ndarray) -> tuple[float, float]:
    """Split the total jump rate into diagonal / off-diagonal state parts."""
    ones = np.ones(model.n_channels)
    return _split_rates(model, rho, ones)


def decompose_sigma(model: LindbladModel, rho: np.ndarray) -> tuple[float, float]:
    """Split the entropy production rate the same way (needs ds)."""
    return _split_rates(model, rho, model.entropy_weights())
