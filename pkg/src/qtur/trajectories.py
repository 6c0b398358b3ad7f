"""Jump-unraveled Monte Carlo trajectories and path-density bookkeeping.

Sampling follows the waiting-time construction: evolve an unnormalized
pure state with the no-jump contraction D(t) = exp(-Gamma t / 2), draw a
uniform u and bisect the survival norm ||D(t) psi||^2 = u to locate the
next jump exactly (no first-order-in-dt bias), then select the channel
with probability proportional to <psi|L_m^dag L_m|psi> and renormalize.
Since Gamma = sum_m L_m^dag L_m is Hermitian, the whole sampler runs in
its eigenbasis where D(t) is diagonal and the survival norm is a plain
exponential sum.

By default the Hamiltonian is dropped (the jump statistics are identical
with and without it, which the test suite verifies rather than assumes);
``coherent=True`` samples with the full non-Hermitian propagator instead,
applying the commuting unitary factor after each no-jump stretch, and
measures the final label in the correspondingly rotated basis.

Records begin with an initial eigenstate label drawn from the spectral
weights of rho(0) and end with a measured label in the eigenbasis of the
Hamiltonian-free state at the horizon, which is exactly the sample space
of the forward path density P. The reverse path density Q re-runs the
record backwards through the partner channels; their log-ratio per record
is ln q_i(0) - ln q_i'(tau) + sum_j ds_{m_j}, the per-trajectory entropy
production.

Reproducibility: trajectory k derives its own 64-bit seed from
(master_seed, k) through the splitmix64 finalizer, so ensembles are
bit-identical for any worker count and merge order is fixed.
"""

from __future__ import annotations

import multiprocessing
import os
from dataclasses import dataclass

import numpy as np

from .counting import CountingObservable, MomentResult
from .engine import build_generator, propagate
from .operators import (
    EIGENVALUE_CLIP,
    LindbladModel,
    ModelValidationError,
    dagger,
    spectral_decompose,
)

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
BISECTION_REL_TOL = 1e-9


class ZeroProbabilityLabelError(ValueError):
    """A record references an eigenstate with (clipped) zero weight."""


def splitmix64(x: int) -> int:
    """One splitmix64 finalization round (public-domain mixing constants)."""
    z = x & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


@dataclass(frozen=True)
class SeedPolicy:
    """Deterministic per-trajectory seeds.

    seed(k) = splitmix64(master_seed + (k + 1) * GOLDEN), i.e. the k-th
    output of the splitmix64 stream started at master_seed.
    """

    master_seed: int

    def trajectory_seed(self, index: int) -> int:
        return splitmix64((self.master_seed + (index + 1) * _GOLDEN) & _MASK64)


@dataclass(frozen=True)
class TrajectoryRecord:
    """Ordered jump list on (0, tau] plus sampled endpoint labels."""

    jumps: tuple
    initial_label: int
    final_label: int
    horizon: float

    def __post_init__(self):
        last = 0.0
        for t, _ in self.jumps:
            if not (last < t <= self.horizon):
                raise ValueError("jump times must be strictly increasing within (0, tau]")
            last = t

    @property
    def n_jumps(self) -> int:
        return len(self.jumps)


def _draw(rng: np.random.Generator, p: np.ndarray) -> int:
    """Inverse-CDF draw; explicit so the stream layout stays frozen."""
    x = rng.random() * p.sum()
    acc = 0.0
    for k, pk in enumerate(p):
        acc += pk
        if x < acc:
            return k
    return len(p) - 1


class TrajectorySampler:
    """Precomputed sampling context for one (model, rho0, tau) triple."""

    def __init__(
        self,
        model: LindbladModel,
        rho0: np.ndarray,
        tau: float,
        coherent: bool = False,
    ):
        if tau < 0:
            raise ValueError("tau must be nonnegative")
        self.model = model
        self.tau = float(tau)
        self.coherent = bool(coherent)

        gamma = model.total_decay()
        g, w = np.linalg.eigh(gamma)
        if g.min() < -1e-10:
            raise ModelValidationError(f"decay operator has negative eigenvalue {g.min():.3e}")
        self._decay_rates = np.clip(g, 0.0, None)
        self._decay_basis = w

        # Channels expressed in the decay eigenbasis, where the no-jump
        # damping is diagonal.
        self._jump_ops = [dagger(w) @ c.L @ w for c in model.channels]
        self._jump_norms = [dagger(lt) @ lt for lt in self._jump_ops]

        start = spectral_decompose(np.asarray(rho0, complex))
        self.initial_probabilities = start.probabilities
        self._initial_states = dagger(w) @ start.vectors

        gen0 = build_generator(model, coherent=False)
        final = spectral_decompose(propagate(gen0, rho0, tau)) if tau > 0 else start
        self.final_probabilities = final.probabilities
        final_vectors = final.vectors

        if self.coherent:
            eps, e = np.linalg.eigh(model.H)
            c = dagger(w) @ e
            self._rotation = lambda dt: (c * np.exp(-1j * eps * dt)) @ dagger(c)
            u_tau = (e * np.exp(-1j * eps * tau)) @ dagger(e)
            final_vectors = u_tau @ final_vectors
        else:
            self._rotation = None
        self._final_projectors = dagger(final_vectors) @ w

    def _survival(self, amplitudes_sq: np.ndarray):
        rates = self._decay_rates

        def s(dt: float) -> float:
            return float(amplitudes_sq @ np.exp(-rates * dt))

        return s

    def _locate_jump(self, surv, u: float, hi: float) -> float:
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if surv(mid) >= u:
                lo = mid
            else:
                hi = mid
            if hi - lo <= BISECTION_REL_TOL * hi:
                return 0.5 * (lo + hi)
        raise RuntimeError("survival bisection did not converge")

    def sample(self, seed: int) -> TrajectoryRecord:
        rng = np.random.Generator(np.random.PCG64(seed))
        label0 = _draw(rng, self.initial_probabilities)
        phi = self._initial_states[:, label0].copy()

        t = 0.0
        jumps = []
        while True:
            phi = phi / np.linalg.norm(phi)
            amp_sq = np.abs(phi) ** 2
            surv = self._survival(amp_sq)
            if surv(0.0) > 1.0 + 1e-9:
                raise ModelValidationError("state norm increased during no-jump evolution")
            remaining = self.tau - t
            u = rng.random()
            if u == 0.0 or surv(remaining) >= u:
                phi = np.exp(-self._decay_rates * remaining / 2.0) * phi
                if self.coherent:
                    phi = self._rotation(remaining) @ phi
                break
            dt = self._locate_jump(surv, u, remaining)
            # keep jump times strictly increasing even if dt underflows
            t = t + dt if t + dt > t else float(np.nextafter(t, np.inf))
            phi = np.exp(-self._decay_rates * dt / 2.0) * phi
            if self.coherent:
                phi = self._rotation(dt) @ phi
            probs = np.array(
                [max(float(np.real(phi.conj() @ (m @ phi))), 0.0) for m in self._jump_norms]
            )
            if probs.sum() <= 0.0:
                raise ModelValidationError("no channel has positive jump probability")
            channel = _draw(rng, probs)
            phi = self._jump_ops[channel] @ phi
            jumps.append((t, channel))

        overlaps = np.abs(self._final_projectors @ phi) ** 2
        s = overlaps.sum()
        if s <= 0.0:
            raise ModelValidationError("final state has no overlap with the horizon basis")
        label1 = _draw(rng, overlaps / s)
        return TrajectoryRecord(
            jumps=tuple(jumps),
            initial_label=label0,
            final_label=label1,
            horizon=self.tau,
        )


def sample_trajectory(
    model: LindbladModel,
    rho0: np.ndarray,
    tau: float,
    seed: int,
    coherent: bool = False,
) -> TrajectoryRecord:
    return TrajectorySampler(model, rho0, tau, coherent=coherent).sample(seed)


def resolve_workers(workers: int | None = None) -> int:
    """Worker count, capped by the QTUR_THREADS environment variable."""
    cap = os.environ.get("QTUR_THREADS")
    cap = int(cap) if cap else None
    if workers is None:
        workers = cap if cap is not None else (os.cpu_count() or 1)
    if cap is not None:
        workers = min(workers, cap)
    return max(1, int(workers))


_WORKER_SAMPLER: TrajectorySampler | None = None


def _init_worker(model, rho0, tau, coherent):
    global _WORKER_SAMPLER
    _WORKER_SAMPLER = TrajectorySampler(model, rho0, tau, coherent=coherent)


def _sample_chunk(args):
    lo, hi, master_seed = args
    policy = SeedPolicy(master_seed)
    return [_WORKER_SAMPLER.sample(policy.trajectory_seed(i)) for i in range(lo, hi)]


def sample_ensemble(
    model: LindbladModel,
    rho0: np.ndarray,
    tau: float,
    n: int,
    policy: SeedPolicy,
    coherent: bool = False,
    workers: int | None = None,
) -> list[TrajectoryRecord]:
    """Sample ``n`` records; identical output for every worker count.

    Trajectory i always consumes seed policy.trajectory_seed(i); chunks
    are merged back in index order.
    """
    workers = resolve_workers(workers)
    if workers == 1 or n < 256:
        sampler = TrajectorySampler(model, rho0, tau, coherent=coherent)
        return [sampler.sample(policy.trajectory_seed(i)) for i in range(n)]

    chunk = max(64, (n + 4 * workers - 1) // (4 * workers))
    tasks = [(lo, min(lo + chunk, n), policy.master_seed) for lo in range(0, n, chunk)]
    with multiprocessing.Pool(
        workers, initializer=_init_worker, initargs=(model, rho0, tau, coherent)
    ) as pool:
        chunks = pool.map(_sample_chunk, tasks)
    return [rec for part in chunks for rec in part]


def record_observable(record: TrajectoryRecord, obs: CountingObservable) -> float:
    """Weighted jump count of the record inside the observation window."""
    t_a, t_b = obs.resolved_window(record.horizon)
    total = 0.0
    for t, m in record.jumps:
        if t_a <= t <= t_b:
            total += obs.weights[m]
    return total


@dataclass(frozen=True)
class PathDensityPair:
    """Forward and backward path densities of one record.

    ``predicted_backward`` is exp(-sum ds) * (q_i'(tau)/q_i(0)) * forward,
    the closed-form value the backward density must reproduce.
    """

    forward: float
    backward: float
    predicted_backward: float


class PathWeights:
    """Batch evaluator for path densities and per-record entropies.

    Precomputes the decay eigenbasis and the endpoint spectral
    decompositions of the Hamiltonian-free evolution once, then prices
    individual records in O(K) small matrix products.
    """

    def __init__(self, model: LindbladModel, rho0: np.ndarray, tau: float):
        self.model = model
        self.tau = float(tau)
        gamma = model.total_decay()
        g, w = np.linalg.eigh(gamma)
        self._decay_rates = np.clip(g, 0.0, None)
        self._basis = w
        self._jump_ops = [dagger(w) @ c.L @ w for c in model.channels]

        start = spectral_decompose(np.asarray(rho0, complex))
        gen0 = build_generator(model, coherent=False)
        final = spectral_decompose(propagate(gen0, rho0, tau)) if tau > 0 else start
        self.q0 = start.probabilities
        self.qtau = final.probabilities
        self._states0 = dagger(w) @ start.vectors
        self._states_tau = dagger(w) @ final.vectors

        eps, e = np.linalg.eigh(model.H)
        c = dagger(w) @ e
        self._h_eigs = eps
        self._h_transform = c

    def _damp(self, phi: np.ndarray, dt: float) -> np.ndarray:
        return np.exp(-self._decay_rates * dt / 2.0) * phi

    def _rotate(self, phi: np.ndarray, dt: float) -> np.ndarray:
        c = self._h_transform
        return (c * np.exp(-1j * self._h_eigs * dt)) @ (dagger(c) @ phi)

    def _thread(self, intervals, channels, start_vec, with_rotation: bool) -> np.ndarray:
        phi = start_vec.copy()
        for dt, m in zip(intervals[:-1], channels):
            phi = self._damp(phi, dt)
            if with_rotation:
                phi = self._rotate(phi, dt)
            phi = self._jump_ops[m] @ phi
        phi = self._damp(phi, intervals[-1])
        if with_rotation:
            phi = self._rotate(phi, intervals[-1])
        return phi

    @staticmethod
    def _forward_sequence(record: TrajectoryRecord):
        times = [t for t, _ in record.jumps]
        channels = [m for _, m in record.jumps]
        bounds = [0.0] + times + [record.horizon]
        intervals = [b - a for a, b in zip(bounds[:-1], bounds[1:])]
        return intervals, channels

    def _backward_sequence(self, record: TrajectoryRecord):
        times = [record.horizon - t for t, _ in reversed(record.jumps)]
        channels = []
        for _, m in reversed(record.jumps):
            partner = self.model.channels[m].partner
            if partner is None:
                raise ModelValidationError(f"channel {m} is unpaired; no reverse path exists")
            channels.append(partner)
        bounds = [0.0] + times + [record.horizon]
        intervals = [b - a for a, b in zip(bounds[:-1], bounds[1:])]
        return intervals, channels

    def forward_density(self, record: TrajectoryRecord) -> float:
        intervals, channels = self._forward_sequence(record)
        phi = self._thread(intervals, channels, self._states0[:, record.initial_label], False)
        amp = self._states_tau[:, record.final_label].conj() @ phi
        return float(self.q0[record.initial_label] * np.abs(amp) ** 2)

    def backward_density(self, record: TrajectoryRecord) -> float:
        intervals, channels = self._backward_sequence(record)
        phi = self._thread(intervals, channels, self._states_tau[:, record.final_label], False)
        amp = self._states0[:, record.initial_label].conj() @ phi
        return float(self.qtau[record.final_label] * np.abs(amp) ** 2)

    def densities(self, record: TrajectoryRecord) -> PathDensityPair:
        p = self.forward_density(record)
        q = self.backward_density(record)
        ds = self.model.entropy_weights()
        total_ds = sum(ds[m] for _, m in record.jumps)
        q0 = self.q0[record.initial_label]
        qt = self.qtau[record.final_label]
        if q0 <= EIGENVALUE_CLIP:
            raise ZeroProbabilityLabelError("initial label has zero weight")
        predicted = float(np.exp(-total_ds) * (qt / q0) * p)
        return PathDensityPair(forward=p, backward=q, predicted_backward=predicted)

    def entropy(self, record: TrajectoryRecord) -> float:
        return record_entropy(self.model, record, self.q0, self.qtau)

    def path_norms(self, record: TrajectoryRecord) -> tuple[float, float]:
        """Squared path norms without final projection.

        First entry threads the Hamiltonian-free contraction, second the
        full no-jump propagator; unitarity makes them equal whenever the
        eigenoperator condition holds.
        """
        intervals, channels = self._forward_sequence(record)
        start = self._states0[:, record.initial_label]
        damped = self._thread(intervals, channels, start, False)
        full = self._thread(intervals, channels, start, True)
        return float(np.vdot(damped, damped).real), float(np.vdot(full, full).real)


def forward_backward_densities(
    model: LindbladModel, rho0: np.ndarray, record: TrajectoryRecord
) -> PathDensityPair:
    """Forward/backward densities plus the closed-form backward value."""
    return PathWeights(model, rho0, record.horizon).densities(record)


def record_entropy(
    model: LindbladModel, record: TrajectoryRecord, q0: np.ndarray, qtau: np.ndarray
) -> float:
    """Per-record entropy: ln q_i(0) - ln q_i'(tau) + sum_j ds_{m_j}."""
    ds = model.entropy_weights()
    p_start = q0[record.initial_label]
    p_end = qtau[record.final_label]
    if p_start <= EIGENVALUE_CLIP or p_end <= EIGENVALUE_CLIP:
        raise ZeroProbabilityLabelError(
            f"labels ({record.initial_label}, {record.final_label}) hit clipped weights"
        )
    return float(np.log(p_start) - np.log(p_end) + sum(ds[m] for _, m in record.jumps))


def ensemble_entropies(pw: PathWeights, records) -> tuple[np.ndarray, int]:
    """Per-record entropies; records with clipped labels are dropped and counted."""
    values, discarded = [], 0
    for rec in records:
        try:
            values.append(pw.entropy(rec))
        except ZeroProbabilityLabelError:
            discarded += 1
    return np.asarray(values, dtype=float), discarded


@dataclass(frozen=True)
class EnsembleEstimate:
    """Sample statistics of an observable across records.

    Absolute moments E|N|^r are reported for each requested order; the
    entropy fields appear when per-record entropies were attached.
    """

    n: int
    mean: float
    variance: float
    stderr_mean: float
    stderr_variance: float
    abs_moments: dict
    abs_moment_stderr: dict
    entropy_mean: float | None = None
    entropy_stderr: float | None = None
    n_discarded: int = 0

    def as_moment_result(self) -> MomentResult:
        """The first two moments in the shape the bound evaluators take."""
        return MomentResult(
            mean=self.mean,
            second_moment=self.variance + self.mean**2,
            variance=self.variance,
            method="monte_carlo",
            stderr_mean=self.stderr_mean,
            stderr_variance=self.stderr_variance,
            n_samples=self.n,
        )


def _mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    n = len(values)
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(n))


def estimate(
    records,
    obs: CountingObservable,
    r_list=(),
    entropies: np.ndarray | None = None,
    n_discarded: int = 0,
) -> EnsembleEstimate:
    """Ensemble mean/variance (with standard errors) and |N|^r moments."""
    n = len(records)
    if n < 2:
        raise ValueError("need at least two records")
    values = np.array([record_observable(rec, obs) for rec in records])
    mean, stderr_mean = _mean_and_stderr(values)
    var = float(values.var(ddof=1))
    centered = values - mean
    m4 = float(np.mean(centered**4))
    var_of_var = max(m4 - var * var * (n - 3) / (n - 1), 0.0) / n
    abs_moments, abs_stderr = {}, {}
    for r in r_list:
        if r <= 0:
            raise ValueError("absolute moment orders must be positive")
        powered = np.abs(values) ** r
        abs_moments[r], abs_stderr[r] = _mean_and_stderr(powered)
    entropy_mean = entropy_stderr = None
    if entropies is not None and len(entropies) >= 2:
        entropy_mean, entropy_stderr = _mean_and_stderr(np.asarray(entropies, float))
    return EnsembleEstimate(
        n=n,
        mean=mean,
        variance=var,
        stderr_mean=stderr_mean,
        stderr_variance=float(np.sqrt(var_of_var)),
        abs_moments=abs_moments,
        abs_moment_stderr=abs_stderr,
        entropy_mean=entropy_mean,
        entropy_stderr=entropy_stderr,
        n_discarded=n_discarded,
    )
