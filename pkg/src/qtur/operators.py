"""Dense operator algebra, model containers and structural validation.

Everything operates on small dense complex matrices (dimension <= ~64).
Operators and density matrices are plain ``numpy`` arrays; the model layer
below adds the structure a monitored open system needs:

* a Hermitian Hamiltonian ``H``,
* jump channels ``L_m`` that each satisfy the eigenoperator condition
  ``[L_m, H] = omega_m * L_m`` for a real transition frequency ``omega_m``
  (extracted, never user supplied),
* optional reverse-channel pairing with an environment entropy change
  ``ds`` per jump, obeying ``L_m = exp(ds_m / 2) * L_partner^dagger`` and
  ``ds_partner = -ds_m``.

All containers are frozen dataclasses holding read-only arrays, so they can
be shared freely across worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Default tolerances. The eigenoperator residual tolerance is a policy knob
# (no physical scale fixes it); the density tolerances separate rounding
# noise from modeling bugs.
EIGENOPERATOR_TOL = 1e-8
DENSITY_TOL = 1e-10
EIGENVALUE_CLIP = 1e-14


class ModelValidationError(ValueError):
    """A model or state violates a structural assumption."""


class EigenoperatorError(ModelValidationError):
    """``[L, H]`` is not proportional to ``L`` within tolerance."""


class DetailedBalanceError(ModelValidationError):
    """A channel pair violates the local detailed balance relation."""


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def frobenius(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=complex)
    out.setflags(write=False)
    return out


def hermiticity_error(a: np.ndarray) -> float:
    """Frobenius distance to the Hermitian part, relative to nothing."""
    return frobenius(a - dagger(a))


@dataclass(frozen=True)
class DensityCheck:
    """Result of validating a density matrix.

    ``ok`` is True iff Hermiticity, unit trace and positivity all hold
    within ``tol``; ``worst`` is the largest violation found and
    ``message`` names the failing invariant.
    """

    ok: bool
    hermiticity: float
    trace_error: float
    min_eigenvalue: float
    tol: float
    worst: float
    message: str


def validate_density(rho: np.ndarray, tol: float = DENSITY_TOL) -> DensityCheck:
    """Check Hermiticity, unit trace and positive semidefiniteness of rho."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 1:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if not np.all(np.isfinite(rho.view(float))):
        raise ValueError("density matrix contains NaN/Inf entries")

    herm = hermiticity_error(rho)
    trace_err = abs(rho.trace() - 1.0)
    # eigvalsh on the Hermitian part: rounding asymmetry must not poison
    # the positivity check.
    min_eig = float(np.linalg.eigvalsh((rho + dagger(rho)) / 2.0).min())

    failures = []
    if herm > tol:
        failures.append(f"non-Hermitian by {herm:.3e}")
    if trace_err > tol:
        failures.append(f"trace off by {trace_err:.3e}")
    if min_eig < -tol:
        failures.append(f"negative eigenvalue {min_eig:.3e}")
    worst = max(herm, trace_err, max(0.0, -min_eig))
    return DensityCheck(
        ok=not failures,
        hermiticity=herm,
        trace_error=float(trace_err),
        min_eigenvalue=min_eig,
        tol=tol,
        worst=worst,
        message="; ".join(failures) if failures else "ok",
    )


def assert_density(rho: np.ndarray, tol: float = DENSITY_TOL) -> None:
    check = validate_density(rho, tol)
    if not check.ok:
        raise ModelValidationError(f"invalid density matrix: {check.message}")


def extract_bohr_frequency(
    H: np.ndarray, L: np.ndarray, tol: float = EIGENOPERATOR_TOL
) -> float:
    """Return the real omega with ``[L, H] = omega * L``.

    omega is the least-squares projection Re(Tr[L^dag [L, H]]) / Tr[L^dag L];
    the channel conforms iff the residual ||[L,H] - omega L||_F stays below
    ``tol * ||L||_F``. Scaling L by any nonzero constant leaves omega
    unchanged.
    """
    H = np.asarray(H, dtype=complex)
    L = np.asarray(L, dtype=complex)
    if hermiticity_error(H) > tol * max(1.0, frobenius(H)):
        raise ModelValidationError("Hamiltonian is not Hermitian")
    norm_l = frobenius(L)
    if norm_l == 0.0:
        raise ModelValidationError("jump operator is zero")
    comm = L @ H - H @ L
    omega = float(np.real(np.trace(dagger(L) @ comm)) / np.real(np.trace(dagger(L) @ L)))
    residual = frobenius(comm - omega * L)
    if residual > tol * norm_l:
        raise EigenoperatorError(
            f"eigenoperator condition violated: residual {residual:.3e} "
            f"> {tol:.1e} * ||L||_F = {tol * norm_l:.3e}"
        )
    return omega


@dataclass(frozen=True)
class JumpChannel:
    """One monitored decay channel.

    ``omega`` is the derived transition frequency, ``ds`` the entropy
    handed to the environment per jump (None when thermodynamically
    unstructured) and ``partner`` the index of the reverse channel.
    """

    L: np.ndarray
    omega: float
    ds: float | None = None
    partner: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "L", _readonly(self.L))


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian plus jump channels, validated at construction.

    Use :meth:`build` to derive transition frequencies and run the
    structural checks; the raw constructor trusts its inputs.
    """

    H: np.ndarray
    channels: tuple[JumpChannel, ...]
    tol: float = EIGENOPERATOR_TOL

    def __post_init__(self):
        object.__setattr__(self, "H", _readonly(self.H))
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def has_entropy_weights(self) -> bool:
        return self.n_channels > 0 and all(c.ds is not None for c in self.channels)

    def jump_ops(self) -> list[np.ndarray]:
        return [c.L for c in self.channels]

    def entropy_weights(self) -> np.ndarray:
        if not self.has_entropy_weights:
            raise ModelValidationError("channel entropy changes (ds) are not set")
        return np.array([c.ds for c in self.channels], dtype=float)

    def total_decay(self) -> np.ndarray:
        """Sum of L^dag L over channels (the no-jump decay generator)."""
        gamma = np.zeros((self.dim, self.dim), dtype=complex)
        for c in self.channels:
            gamma += dagger(c.L) @ c.L
        return gamma

    @classmethod
    def build(
        cls,
        H: np.ndarray,
        jump_ops,
        *,
        ds=None,
        partners=None,
        tol: float = EIGENOPERATOR_TOL,
    ) -> "LindbladModel":
        """Assemble and validate a model.

        ``ds`` and ``partners`` are parallel sequences (entries may be
        None). Every jump operator must satisfy the eigenoperator
        condition; partner pairs must be involutive with opposite ds and
        satisfy local detailed balance.
        """
        H = np.asarray(H, dtype=complex)
        n = len(jump_ops)
        ds = list(ds) if ds is not None else [None] * n
        partners = list(partners) if partners is not None else [None] * n
        if len(ds) != n or len(partners) != n:
            raise ValueError("ds/partners length must match the channel count")

        channels = []
        for m, L in enumerate(jump_ops):
            L = np.asarray(L, dtype=complex)
            if L.shape != H.shape:
                raise ModelValidationError(
                    f"channel {m} has shape {L.shape}, Hamiltonian {H.shape}"
                )
            omega = extract_bohr_frequency(H, L, tol)
            channels.append(JumpChannel(L=L, omega=omega, ds=ds[m], partner=partners[m]))

        model = cls(H=H, channels=tuple(channels), tol=tol)
        for m, c in enumerate(model.channels):
            if c.partner is None:
                continue
            p = c.partner
            if not (0 <= p < n) or model.channels[p].partner != m:
                raise ModelValidationError(f"partner map is not an involution at channel {m}")
            if c.ds is not None:
                check = check_local_detailed_balance(model, m, tol)
                if not check.ok:
                    raise DetailedBalanceError(f"channel {m}: {check.message}")
        return model


@dataclass(frozen=True)
class BalanceCheck:
    ok: bool
    residual: float
    message: str


def check_local_detailed_balance(
    model: LindbladModel, m: int, tol: float = EIGENOPERATOR_TOL
) -> BalanceCheck:
    """Verify ``L_m = exp(ds_m/2) L_partner^dag`` and ``ds_partner = -ds_m``."""
    c = model.channels[m]
    if c.partner is None:
        raise ModelValidationError(f"channel {m} has no reverse partner")
    if c.ds is None:
        raise ModelValidationError(f"channel {m} has no entropy change set")
    rev = model.channels[c.partner]
    if rev.ds is None or abs(rev.ds + c.ds) > tol * max(1.0, abs(c.ds)):
        return BalanceCheck(False, float("inf"), "partner entropy change is not the negative")
    residual = frobenius(c.L - np.exp(c.ds / 2.0) * dagger(rev.L))
    scale = tol * frobenius(c.L)
    if residual > scale:
        return BalanceCheck(
            False, residual, f"operator mismatch: residual {residual:.3e} > {scale:.3e}"
        )
    return BalanceCheck(True, residual, "ok")


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (descending, clipped to [0,1], renormalized) and
    orthonormal eigenvectors of a density matrix; column k of ``vectors``
    belongs to ``probabilities[k]``."""

    probabilities: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "vectors", _readonly(self.vectors))


def spectral_decompose(rho: np.ndarray, tol: float = DENSITY_TOL) -> SpectralDecomposition:
    """Spectrally decompose a valid density matrix.

    Eigenvalues below zero by more than ``tol`` are hard errors; smaller
    negatives are rounding and get clipped to 0 before renormalizing.
    """
    assert_density(rho, tol)
    w, v = np.linalg.eigh((np.asarray(rho, complex) + dagger(rho)) / 2.0)
    if w.min() < -tol:
        raise ModelValidationError(f"eigenvalue {w.min():.3e} below -{tol:.1e}")
    w = np.clip(w, 0.0, 1.0)
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    return SpectralDecomposition(probabilities=w / w.sum(), vectors=v)


def split_diagonal_offdiagonal(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split rho into its diagonal part and the zero-diagonal remainder
    in the computational basis; the two parts always sum back exactly."""
    rho = np.asarray(rho, dtype=complex)
    diag = np.diag(np.diag(rho))
    return diag, rho - diag


def von_neumann_trace_term(rho: np.ndarray, clip: float = EIGENVALUE_CLIP) -> float:
    """Tr[rho ln rho] with the 0 ln 0 = 0 convention.

    Eigenvalues are floored at ``clip`` inside the logarithm only, so
    exact zeros contribute nothing while tiny positive rounding noise
    cannot produce huge spurious logs.
    """
    w = np.linalg.eigvalsh((np.asarray(rho, complex) + dagger(rho)) / 2.0)
    if w.min() < -DENSITY_TOL:
        raise ModelValidationError(f"eigenvalue {w.min():.3e} below tolerance in entropy term")
    w = np.clip(w, 0.0, 1.0)
    return float(np.sum(w * np.log(np.maximum(w, clip))))
