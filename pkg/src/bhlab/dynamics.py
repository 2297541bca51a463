"""Time evolution and Heisenberg-picture expectation machinery.

Evolved observables are always computed by evolving states; operator
exponentials are never materialized.  Small problems use a dense
eigendecomposition, larger ones a Lanczos propagator with adaptive
substepping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .couplings import CouplingMatrix
from .fock import (
    FockBasis,
    QuantumState,
    SparseOperator,
    restrict_hamiltonian,
    site_number_operator,
)
from .lattice import Region, fatten, region_distance

__all__ = [
    "Propagator",
    "Trajectory",
    "evolve",
    "heisenberg_expectation",
    "localized_heisenberg",
    "remainder_pairings",
    "one_body_density_oracle",
    "operator_support_violation",
]

DEFAULT_KRYLOV_DIM = 30
DEFAULT_SUBSTEP_TOL = 1e-10
DEFAULT_DENSE_THRESHOLD = 400


class KrylovConvergenceError(RuntimeError):
    """Lanczos propagation failed to reach the requested tolerance."""

    def __init__(self, residual: float, step: float):
        super().__init__(
            f"Lanczos step did not converge (residual {residual:.3e} at step {step:.3e})"
        )
        self.residual = residual


@dataclass
class Propagator:
    """Unitary propagator exp(-i H t) for a Hermitian sparse Hamiltonian."""

    hamiltonian: SparseOperator
    method: str = "auto"  # dense_eigen | krylov | auto
    krylov_dim: int = DEFAULT_KRYLOV_DIM
    substep_tolerance: float = DEFAULT_SUBSTEP_TOL
    dense_threshold: int = DEFAULT_DENSE_THRESHOLD
    _eig: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.hamiltonian.hermitian:
            raise ValueError("propagator needs a Hermitian Hamiltonian")
        if self.method == "auto":
            dim = self.hamiltonian.basis.dim
            self.method = "dense_eigen" if dim <= self.dense_threshold else "krylov"

    @property
    def basis(self) -> FockBasis:
        return self.hamiltonian.basis

    def _dense_factors(self):
        if self._eig is None:
            h = self.hamiltonian.matrix.toarray()
            w, u = la.eigh(h)
            self._eig = (w, u)
        return self._eig

    def propagate(self, vec: np.ndarray, t: float) -> np.ndarray:
        if t == 0.0:
            return vec.copy()
        if self.method == "dense_eigen":
            w, u = self._dense_factors()
            return u @ (np.exp(-1j * w * t) * (u.conj().T @ vec))
        if self.method == "krylov":
            return _lanczos_propagate(
                self.hamiltonian.matrix,
                vec,
                t,
                self.krylov_dim,
                self.substep_tolerance,
            )
        raise ValueError(f"unknown method {self.method!r}")


def _lanczos_step(hmat, vec: np.ndarray, dt: float, m: int):
    """One Lanczos approximation of exp(-i H dt) vec.

    Returns (result, error_estimate).  Full reorthogonalization; cheap at
    the Krylov dimensions used here.
    """
    beta0 = np.linalg.norm(vec)
    if beta0 == 0.0:
        return vec.copy(), 0.0
    n = vec.shape[0]
    m = min(m, n)
    V = np.zeros((n, m), dtype=complex)
    alphas = np.zeros(m)
    betas = np.zeros(m)  # betas[j] couples vector j and j+1
    V[:, 0] = vec / beta0
    k_used = m
    happy = False
    w = None
    for j in range(m):
        w = hmat @ V[:, j]
        a = np.vdot(V[:, j], w).real
        alphas[j] = a
        w = w - a * V[:, j]
        if j > 0:
            w = w - betas[j - 1] * V[:, j - 1]
        # full reorthogonalization
        w = w - V[:, : j + 1] @ (V[:, : j + 1].conj().T @ w)
        b = np.linalg.norm(w)
        if j < m - 1:
            betas[j] = b
            if b < 1e-14 * max(1.0, abs(a)):
                k_used = j + 1
                happy = True
                break
            V[:, j + 1] = w / b
    else:
        k_used = m
    T_a = alphas[:k_used]
    T_b = betas[: k_used - 1]
    ew, ev = la.eigh_tridiagonal(T_a, T_b) if k_used > 1 else (T_a.copy(), np.ones((1, 1)))
    small = ev @ (np.exp(-1j * ew * dt) * ev[0, :].conj())
    result = beta0 * (V[:, :k_used] @ small)
    if happy:
        err = 0.0
    else:
        beta_next = np.linalg.norm(w) if w is not None else 0.0
        err = beta0 * beta_next * abs(small[-1]) * abs(dt)
    return result, err


def _lanczos_propagate(hmat, vec, t, krylov_dim, tol):
    remaining = float(t)
    sign = 1.0 if remaining >= 0 else -1.0
    remaining = abs(remaining)
    dt = remaining
    cur = vec.copy()
    min_step = remaining * 1e-12 + 1e-300
    while remaining > 0:
        step = min(dt, remaining)
        res, err = _lanczos_step(hmat, cur, sign * step, krylov_dim)
        if err > tol * max(1.0, np.linalg.norm(cur)):
            dt = step / 2.0
            if dt < min_step:
                raise KrylovConvergenceError(err, dt)
            continue
        cur = res
        remaining -= step
        if err < tol / 16.0:
            dt = step * 2.0
    return cur


def evolve(prop: Propagator, psi0: QuantumState, t: float) -> QuantumState:
    """psi_t = exp(-i H t) psi0."""
    if psi0.basis.index != prop.basis.index:
        raise ValueError("state and propagator bases differ")
    if not np.isfinite(t):
        raise ValueError("time must be finite")
    return QuantumState(prop.basis, prop.propagate(psi0.amplitudes, t))


@dataclass(frozen=True)
class Trajectory:
    """Recorded expectation values on a strictly increasing time grid."""

    times: np.ndarray
    values: dict  # observable id -> complex array over times
    provenance: str = ""

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) == 0:
            raise ValueError("times must be a nonempty 1D array")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)

    def real(self, key) -> np.ndarray:
        return np.asarray(self.values[key]).real


def heisenberg_expectation(
    prop: Propagator,
    observables: dict | SparseOperator,
    psi0: QuantumState,
    times,
    provenance: str = "",
) -> Trajectory:
    """Record <psi_t, A psi_t> for each observable along the time grid.

    Evolution proceeds incrementally from one grid time to the next.
    """
    if isinstance(observables, SparseOperator):
        observables = {"A": observables}
    times = np.asarray(times, dtype=float)
    values = {k: np.zeros(len(times), dtype=complex) for k in observables}
    cur = psi0
    prev_t = 0.0
    for i, t in enumerate(times):
        cur = evolve(prop, cur, t - prev_t)
        prev_t = t
        for k, A in observables.items():
            values[k][i] = A.expectation(cur)
    return Trajectory(times, values, provenance)


def operator_support_violation(
    A: SparseOperator, allowed: Region, sample_limit: int | None = None
) -> float:
    """Largest sampled commutator norm of A with n_x outside `allowed`.

    A number-conserving operator supported in `allowed` commutes with
    every n_x outside; a nonzero return flags a support violation.
    """
    basis = A.basis
    outside = sorted(set(range(basis.n_sites)) - set(int(i) for i in allowed.members))
    if sample_limit is not None:
        outside = outside[:sample_limit]
    worst = 0.0
    for x in outside:
        nx = site_number_operator(basis, x)
        comm = A.matrix @ nx.matrix - nx.matrix @ A.matrix
        if comm.nnz:
            worst = max(worst, float(abs(comm).max()))
    # the commutator test is blind to diagonal leaks: also require the
    # diagonal to depend only on occupations inside the allowed region
    inside = sorted(int(i) for i in allowed.members)
    diag = A.matrix.diagonal()
    reference: dict = {}
    for k in range(basis.dim):
        key = tuple(int(v) for v in basis.states[k, inside])
        ref = reference.setdefault(key, diag[k])
        worst = max(worst, float(abs(diag[k] - ref)))
    return worst


def localized_heisenberg(
    propS: Propagator,
    A: SparseOperator,
    psi: QuantumState,
    s: float,
    support: Region | None = None,
    support_tol: float = 1e-12,
) -> complex:
    """<psi, alpha_s^S(A) psi> for the localized evolution generated by H_S.

    Computed from the evolved state phi = exp(-i s H_S) psi; no operator
    exponential is formed.  If `support` is given, A is checked to commute
    with every n_x outside it.
    """
    if support is not None:
        dev = operator_support_violation(A, support)
        if dev > support_tol:
            raise ValueError(f"observable leaks outside claimed support ({dev:.3e})")
    phi = evolve(propS, psi, s)
    return A.expectation(phi)


def remainder_pairings(
    basis: FockBasis,
    J: CouplingMatrix | None,
    V: CouplingMatrix | None,
    A: SparseOperator,
    X: Region,
    B: SparseOperator,
    Y: Region,
    xi: float,
    t: float,
    psi0: QuantumState,
    support_tol: float = 1e-12,
    identity_tol: float = 1e-12,
    propagator_kwargs: dict | None = None,
) -> dict:
    """Pairings of B with the remainder Rem_t(A) = alpha_t(A) - alpha_t^{X_xi}(A).

    Returns {"bRem", "remB", "commutator"} where commutator is
    <[alpha_t(A), B]>_0.  The identity
    <[alpha_t(A), B]>_0 = <[Rem_t(A), B]>_0, which holds because the
    localized evolution stays inside X_xi and B sits outside X_{2 xi},
    is verified internally.
    """
    from .fock import hamiltonian as _hamiltonian

    S = fatten(X, xi)
    saturated = len(S) == basis.n_sites  # X_xi = whole lattice -> Rem = 0
    if not saturated and region_distance(X, Y) < 2.0 * xi - 1e-12:
        raise ValueError("need dist(X, Y) >= 2 xi")
    for op, reg, name in ((A, X, "A"), (B, Y, "B")):
        dev = operator_support_violation(op, reg)
        if dev > support_tol:
            raise ValueError(f"{name} leaks outside its claimed support ({dev:.3e})")

    kwargs = propagator_kwargs or {}
    H = _hamiltonian(basis, J, V)
    HS = restrict_hamiltonian(J, V, S, basis)
    prop = Propagator(H, **kwargs)
    propS = Propagator(HS, **kwargs)

    def alpha_apply(p: Propagator, vec: QuantumState) -> QuantumState:
        # alpha_t(A) vec = e^{itH} A e^{-itH} vec
        fwd = evolve(p, vec, t)
        return evolve(p, A.apply(fwd), -t)

    a_full_psi = alpha_apply(prop, psi0)
    a_loc_psi = alpha_apply(propS, psi0)
    rem_psi = QuantumState(basis, a_full_psi.amplitudes - a_loc_psi.amplitudes)

    b_psi = B.apply(psi0)
    a_full_bpsi = alpha_apply(prop, b_psi)
    a_loc_bpsi = alpha_apply(propS, b_psi)
    rem_bpsi = QuantumState(basis, a_full_bpsi.amplitudes - a_loc_bpsi.amplitudes)

    bdag_psi = B.dagger().apply(psi0)
    bRem = bdag_psi.inner(rem_psi)  # <B Rem_t(A)>_0
    remB = psi0.inner(rem_bpsi)  # <Rem_t(A) B>_0
    commutator = psi0.inner(a_full_bpsi) - bdag_psi.inner(a_full_psi)
    rem_commutator = remB - bRem

    # with X_xi = Lambda the localized evolution is the full one, Rem = 0,
    # and the cancellation behind the identity no longer applies
    if not saturated and abs(commutator - rem_commutator) > identity_tol:
        raise AssertionError(
            "commutator identity violated: "
            f"{commutator} vs {rem_commutator} "
            f"(delta {abs(commutator - rem_commutator):.3e})"
        )
    return {"bRem": bRem, "remB": remB, "commutator": commutator}


def one_body_density_oracle(
    J: CouplingMatrix, initial_occupations, t: float
) -> np.ndarray:
    """Free-field densities <n_x>_t = sum_y |U_xy(t)|^2 n_y(0), U = exp(-iJt).

    Valid for V = 0 and product Fock initial states.
    """
    occ = np.asarray(initial_occupations, dtype=float)
    U = la.expm(-1j * np.asarray(J.entries, dtype=complex) * t)
    return (np.abs(U) ** 2) @ occ
