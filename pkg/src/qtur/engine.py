"""Deterministic propagation: Liouvillian, steady state, no-jump family.

Density matrices are column-vectorized (Fortran order), so a superoperator
rho -> A rho B maps to the matrix kron(B.T, A). Generators here are time
homogeneous and tiny, which makes the dense matrix exponential (scaling and
squaring) both exact enough and cheaper to trust than ODE stepping.

The no-jump propagator family exposes the three operators

    U(t) = exp(-i H t),   D(t) = exp(-Gamma t / 2),   V(t) = exp(-i H_eff t)

with Gamma = sum_m L_m^dag L_m and H_eff = H - (i/2) Gamma. Under the
eigenoperator condition V(t) factorizes as U(t) D(t) = D(t) U(t); the
residual of that factorization is checked and reported, since a violation
means a channel slipped past the structural validation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eig, expm, lstsq

from .operators import (
    LindbladModel,
    ModelValidationError,
    assert_density,
    dagger,
    frobenius,
    validate_density,
)

TRACE_PRESERVATION_TOL = 1e-10
STEADY_STATE_RESIDUAL_TOL = 1e-10
DEGENERACY_TOL = 1e-8
DECOMPOSITION_TOL = 1e-9


class SteadyStateError(RuntimeError):
    """No numerically trustworthy steady state was found."""


class DegenerateSteadyStateError(SteadyStateError):
    """The generator has more than one stationary direction."""


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def unvec(x: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(x.size)))
    return np.asarray(x, dtype=complex).reshape((d, d), order="F")


def left_multiply(a: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(a.shape[0]), a)


def right_multiply(a: np.ndarray) -> np.ndarray:
    return np.kron(a.T, np.eye(a.shape[0]))


def sandwich(a: np.ndarray) -> np.ndarray:
    """Superoperator for rho -> a rho a^dag."""
    return np.kron(a.conj(), a)


@dataclass(frozen=True)
class Liouvillian:
    """Vectorized generator of the master equation.

    ``coherent`` records whether the Hamiltonian commutator is included;
    the incoherent twin drops it but keeps every channel.
    """

    matrix: np.ndarray
    dim: int
    coherent: bool

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def build_generator(model: LindbladModel, coherent: bool = True) -> Liouvillian:
    """Assemble the (possibly Hamiltonian-free) Lindblad generator.

    Trace preservation — the vectorized identity annihilates the generator
    from the left — is asserted at build time.
    """
    d = model.dim
    gen = np.zeros((d * d, d * d), dtype=complex)
    if coherent:
        gen += -1j * (left_multiply(model.H) - right_multiply(model.H))
    for c in model.channels:
        if c.L.shape != (d, d):
            raise ModelValidationError("channel dimension does not match the Hamiltonian")
        ldl = dagger(c.L) @ c.L
        gen += sandwich(c.L) - 0.5 * (left_multiply(ldl) + right_multiply(ldl))
    residual = np.linalg.norm(vec(np.eye(d)).conj() @ gen)
    if residual > TRACE_PRESERVATION_TOL * max(1.0, np.linalg.norm(gen)):
        raise ModelValidationError(f"generator is not trace preserving: {residual:.3e}")
    return Liouvillian(matrix=gen, dim=d, coherent=coherent)


def propagate(gen: Liouvillian, rho0: np.ndarray, t: float) -> np.ndarray:
    """Return exp(L t) rho0, validated as a density matrix at 1e-8."""
    if t < 0:
        raise ValueError(f"propagation time must be nonnegative, got {t}")
    rho0 = np.asarray(rho0, dtype=complex)
    out = unvec(expm(gen.matrix * t) @ vec(rho0))
    out = (out + dagger(out)) / 2.0
    check = validate_density(out, 1e-8)
    if not check.ok:
        raise ModelValidationError(f"propagated state invalid: {check.message}")
    return out


def step_propagator(gen: Liouvillian, dt: float) -> np.ndarray:
    """exp(L dt) for repeated application along a uniform grid."""
    if dt < 0:
        raise ValueError("step must be nonnegative")
    return expm(gen.matrix * dt)


def steady_state(gen: Liouvillian) -> np.ndarray:
    """Unique trace-one null state of the generator.

    The null direction comes from the full eigendecomposition (which also
    powers the uniqueness check: exactly one eigenvalue within 1e-8 of
    zero), then a least-squares solve of [L; trace row] x = [0; 1]
    polishes away eigensolver rounding before Hermitization.
    """
    mat = gen.matrix
    w = eig(mat, right=False)
    moduli = np.sort(np.abs(w))
    if moduli[0] > DEGENERACY_TOL:
        raise SteadyStateError(f"no steady state found: smallest |eigenvalue| {moduli[0]:.3e}")
    if mat.shape[0] > 1 and moduli[1] < DEGENERACY_TOL:
        raise DegenerateSteadyStateError(
            f"degenerate steady state: second eigenvalue modulus {moduli[1]:.3e}"
        )

    d = gen.dim
    a = np.vstack([mat, vec(np.eye(d)).conj()[None, :]])
    b = np.zeros(d * d + 1, dtype=complex)
    b[-1] = 1.0
    x, *_ = lstsq(a, b, lapack_driver="gelsd")
    rho = unvec(x)
    rho = (rho + dagger(rho)) / 2.0
    rho /= rho.trace().real

    residual = np.linalg.norm(mat @ vec(rho))
    if residual > STEADY_STATE_RESIDUAL_TOL:
        raise SteadyStateError(f"steady-state residual {residual:.3e} too large")
    assert_density(rho)
    return rho


@dataclass(frozen=True)
class NoJumpFamily:
    """The commuting no-jump factor pair and their product.

    ``unitary`` is U(t), ``damping`` the Hermitian contraction D(t), and
    ``full`` the non-Hermitian V(t); ``residual`` is ||V - U D||_F.
    """

    unitary: np.ndarray
    damping: np.ndarray
    full: np.ndarray
    t: float
    residual: float


def _exp_hermitian(h: np.ndarray, scale: complex) -> np.ndarray:
    """exp(scale * h) for Hermitian h via its eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(scale * w)) @ dagger(v)


def no_jump_family(model: LindbladModel, t: float) -> NoJumpFamily:
    if t < 0:
        raise ValueError("time must be nonnegative")
    gamma = model.total_decay()
    u = _exp_hermitian(model.H, -1j * t)
    damping = _exp_hermitian(gamma, -0.5 * t)
    h_eff = model.H - 0.5j * gamma
    full = expm(-1j * h_eff * t)
    residual = frobenius(full - u @ damping)
    if residual > DECOMPOSITION_TOL * max(1.0, frobenius(full)):
        raise ModelValidationError(
            f"no-jump decomposition residual {residual:.3e}: a channel violates "
            "the eigenoperator condition"
        )
    return NoJumpFamily(unitary=u, damping=damping, full=full, t=t, residual=residual)


def survival_probability(model: LindbladModel, rho0: np.ndarray, tau: float) -> float:
    """Probability of observing no jump in [0, tau].

    Computed as Tr[V rho0 V^dag] and cross-checked against the
    Hamiltonian-free route Tr[D rho0 D]; the two must agree to 1e-10.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    rho0 = np.asarray(rho0, dtype=complex)
    fam = no_jump_family(model, tau)
    p_full = float(np.real(np.trace(fam.full @ rho0 @ dagger(fam.full))))
    p_damp = float(np.real(np.trace(fam.damping @ rho0 @ fam.damping)))
    if abs(p_full - p_damp) > 1e-10:
        raise ModelValidationError(
            f"survival probability differs between routes: {p_full!r} vs {p_damp!r}"
        )
    return min(max(p_damp, 0.0), 1.0)
