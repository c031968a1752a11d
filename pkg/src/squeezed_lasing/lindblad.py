"""Lindblad master equations: propagation, Liouvillians, steady states.

The dissipator convention carries the rate outside,

    L_{O, rate}[rho] = rate (2 O rho O^dag - O^dag O rho - rho O^dag O),

so a qubit decay term L_{sigma, gamma} relaxes <sigma_z> at 4 gamma.
Density matrices are represented in the Fock basis of the squeezed mode
A throughout; the bare-mode decay channel enters through the Bogoliubov
relation a = A cosh r - A^dag sinh r.

Vectorization is column-major: vec(A rho B) = (B^T kron A) vec(rho).
Liouvillians are kept as scipy sparse matrices, which stay cheap well
past the dimensions where dense storage stops fitting in memory.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.integrate import RK45
from scipy.sparse.linalg import splu

from .dressing import DressedCoupling
from .fock import (
    DensityMatrix,
    HilbertSpace,
    InvalidStateError,
    Operator,
    annihilation,
    qubit_ops,
)

HamiltonianLike = Union[Operator, Callable[[float], Operator]]

# Dense SVD screening for nonunique steady states is affordable only on
# small systems; larger models in scope are known to be ergodic.
UNIQUENESS_SCREEN_MAX_DIM = 20


class DegenerateSteadyStateError(RuntimeError):
    """The generator has more than one stationary state."""


class SteadyStateConvergenceError(RuntimeError):
    """Long-time integration failed to reach a stationary point."""


@dataclass(frozen=True)
class LindbladTerm:
    """One dissipation channel: jump operator O and rate."""

    jump: Operator
    rate: float

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate >= 0):
            raise ValueError(f"rate must be finite and >= 0, got {self.rate}")


@dataclass(frozen=True)
class MasterEquation:
    """Hamiltonian plus Lindblad terms on a shared Hilbert space.

    ``hamiltonian`` is either a (Hermitian) Operator or a callable
    t -> Operator for time-dependent problems.
    """

    hamiltonian: HamiltonianLike
    terms: tuple[LindbladTerm, ...]
    space: HilbertSpace

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for term in self.terms:
            if term.jump.space != self.space:
                raise ValueError("jump operator lives on a different space")
        if isinstance(self.hamiltonian, Operator):
            self._check_hermitian(self.hamiltonian)

    @staticmethod
    def _check_hermitian(h: Operator):
        scale = max(1.0, float(np.max(np.abs(h.matrix))))
        if not h.is_hermitian(tol=1e-10 * scale):
            raise ValueError("Hamiltonian is not Hermitian")

    @property
    def is_time_dependent(self) -> bool:
        return not isinstance(self.hamiltonian, Operator)

    def hamiltonian_at(self, t: float) -> Operator:
        if isinstance(self.hamiltonian, Operator):
            return self.hamiltonian
        h = self.hamiltonian(t)
        if h.space != self.space:
            raise ValueError("time-dependent Hamiltonian changed space")
        self._check_hermitian(h)
        return h


@dataclass(frozen=True)
class Liouvillian:
    """Sparse matrix generator acting on column-vectorized states."""

    matrix: sp.spmatrix
    space: HilbertSpace

    def __post_init__(self):
        d = self.space.dim
        if self.matrix.shape != (d * d, d * d):
            raise ValueError("Liouvillian shape does not match space")
        trace_vec = np.zeros(d * d)
        trace_vec[np.arange(d) * (d + 1)] = 1.0
        residual = np.max(np.abs(self.matrix.T @ trace_vec))
        scale = max(1.0, abs(self.matrix).max())
        if residual > 1e-10 * scale:
            raise ValueError(f"trace functional is not a left null vector "
                             f"(residual {residual:.2e})")


@dataclass(frozen=True)
class Trajectory:
    """States stored at sample times along one integration."""

    times: np.ndarray
    states: tuple[DensityMatrix, ...]

    @property
    def final(self) -> DensityMatrix:
        return self.states[-1]


def _as_matrix(rho, space: HilbertSpace) -> np.ndarray:
    if isinstance(rho, Operator):
        if rho.space != space:
            raise ValueError("state lives on a different space")
        return rho.matrix
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (space.dim, space.dim):
        raise ValueError(f"state shape {rho.shape} does not match space "
                         f"dimension {space.dim}")
    return rho


def dissipator(term: LindbladTerm, rho) -> np.ndarray:
    """rate (2 O rho O^dag - O^dag O rho - rho O^dag O)."""
    o = term.jump.matrix
    rho = _as_matrix(rho, term.jump.space)
    o_rho = o @ rho
    odo = o.conj().T @ o
    return term.rate * (2.0 * (o_rho @ o.conj().T) - odo @ rho - rho @ odo)


def rhs(me: MasterEquation, rho, t: float = 0.0) -> np.ndarray:
    """-i[H(t), rho] plus all dissipators; the full generator output."""
    rho = _as_matrix(rho, me.space)
    h = me.hamiltonian_at(t).matrix
    out = -1j * (h @ rho - rho @ h)
    for term in me.terms:
        out += dissipator(term, rho)
    if not np.all(np.isfinite(out.view(float))):
        raise FloatingPointError("generator produced non-finite entries")
    return out


def _vec(rho: np.ndarray) -> np.ndarray:
    return rho.reshape(-1, order="F")


def _unvec(y: np.ndarray, d: int) -> np.ndarray:
    return y.reshape((d, d), order="F")


def liouvillian_matrix(me: MasterEquation) -> Liouvillian:
    """Sparse matrix L with vec(rhs(rho)) = L vec(rho)."""
    if me.is_time_dependent:
        raise TypeError("Liouvillian matrix requires a time-independent "
                        "Hamiltonian")
    d = me.space.dim
    eye = sp.identity(d, format="csr")
    h = sp.csr_matrix(me.hamiltonian.matrix)
    mat = -1j * (sp.kron(eye, h) - sp.kron(h.T, eye))
    for term in me.terms:
        o = sp.csr_matrix(term.jump.matrix)
        odo = (o.conj().T @ o).tocsr()
        mat = mat + term.rate * (2.0 * sp.kron(o.conj(), o)
                                 - sp.kron(eye, odo) - sp.kron(odo.T, eye))
    return Liouvillian(matrix=mat.tocsc(), space=me.space)


def _step_invariants(y: np.ndarray, d: int, diag_idx: np.ndarray, where: str):
    trace = y[diag_idx].sum()
    if abs(trace - 1.0) > 1e-8:
        raise FloatingPointError(f"trace drifted to {trace} during {where}")
    m = _unvec(y, d)
    herm_dev = np.max(np.abs(m - m.conj().T))
    if herm_dev > 1e-8 * max(1.0, np.max(np.abs(m))):
        raise FloatingPointError(f"hermiticity lost ({herm_dev:.2e}) "
                                 f"during {where}")


def _state_from_vec(y: np.ndarray, space: HilbertSpace) -> DensityMatrix:
    m = _unvec(y, space.dim)
    m = 0.5 * (m + m.conj().T)
    return DensityMatrix(space, m / np.trace(m).real)


def evolve(me: MasterEquation, rho0: DensityMatrix, t_final: float,
           tol: float = 1e-8, *, n_store: int = 25) -> Trajectory:
    """Integrate the master equation with an embedded RK45 stepper.

    ``tol`` is the relative local error bound per step; the absolute
    bound is tol/100.  Trace and Hermiticity are checked after every
    accepted step, and each of the ``n_store`` uniformly spaced stored
    states must pass the full density-matrix validation.
    """
    if not isinstance(rho0, DensityMatrix):
        raise TypeError("rho0 must be a DensityMatrix")
    if rho0.space != me.space:
        raise ValueError("initial state lives on a different space")
    if t_final < 0:
        raise ValueError("t_final must be non-negative")
    d = me.space.dim
    diag_idx = np.arange(d) * (d + 1)
    sample_times = np.linspace(0.0, t_final, max(2, n_store))
    if t_final == 0.0:
        return Trajectory(times=np.array([0.0]), states=(rho0,))

    if me.is_time_dependent:
        def fun(t, y):
            return _vec(rhs(me, _unvec(y, d), t))
    else:
        lmat = liouvillian_matrix(me).matrix.tocsr()

        def fun(t, y):
            return lmat @ y

    stepper = RK45(fun, 0.0, _vec(rho0.matrix).astype(complex), t_final,
                   rtol=tol, atol=tol * 1e-2)
    states: list[DensityMatrix] = [rho0]
    times = [0.0]
    next_sample = 1
    while stepper.status == "running":
        message = stepper.step()
        if stepper.status == "failed":
            raise SteadyStateConvergenceError(f"integrator failed: {message}")
        _step_invariants(stepper.y, d, diag_idx, f"step to t={stepper.t:.4g}")
        while (next_sample < len(sample_times)
               and sample_times[next_sample] <= stepper.t + 1e-15):
            ts = sample_times[next_sample]
            y = stepper.dense_output()(ts) if ts < stepper.t else stepper.y
            states.append(_state_from_vec(y, me.space))
            times.append(ts)
            next_sample += 1
    return Trajectory(times=np.asarray(times), states=tuple(states))


def schrodinger_evolve(hamiltonian: Callable[[float], Operator],
                       psi0: np.ndarray, t_final: float, *,
                       rtol: float = 1e-8, atol: float = 1e-10,
                       n_store: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Pure-state propagation under a time-dependent Hamiltonian.

    Returns (times, psis) with psis[k] the state at times[k].  Norm is
    asserted after every accepted step but states are not renormalized.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    norm0 = np.linalg.norm(psi0)
    if abs(norm0 - 1.0) > 1e-10:
        raise ValueError("psi0 must be normalized")

    def fun(t, psi):
        return -1j * (hamiltonian(t).matrix @ psi)

    sample_times = np.linspace(0.0, t_final, max(2, n_store))
    stepper = RK45(fun, 0.0, psi0, t_final, rtol=rtol, atol=atol)
    psis = [psi0]
    times = [0.0]
    next_sample = 1
    while stepper.status == "running":
        message = stepper.step()
        if stepper.status == "failed":
            raise SteadyStateConvergenceError(f"integrator failed: {message}")
        norm = np.linalg.norm(stepper.y)
        if abs(norm - 1.0) > 1e-7:
            raise FloatingPointError(f"norm drifted to {norm}")
        while (next_sample < len(sample_times)
               and sample_times[next_sample] <= stepper.t + 1e-15):
            ts = sample_times[next_sample]
            y = stepper.dense_output()(ts) if ts < stepper.t else stepper.y
            psis.append(y)
            times.append(ts)
            next_sample += 1
    return np.asarray(times), np.asarray(psis)


def _screen_uniqueness(lmat: sp.spmatrix):
    if lmat.shape[0] < 2:
        return
    dense = lmat.toarray()
    svals = np.linalg.svd(dense, compute_uv=False)
    scale = svals[0] if svals[0] > 0 else 1.0
    if svals[-2] < 1e-8 * scale:
        raise DegenerateSteadyStateError(
            f"two singular values vanish (sigma_2/sigma_1 = "
            f"{svals[-2] / scale:.2e}); stationary state is not unique")


def _steady_direct(me: MasterEquation, lmat: sp.csc_matrix,
                   check_uniqueness) -> DensityMatrix:
    d = me.space.dim
    if check_uniqueness is None:
        check_uniqueness = d <= UNIQUENESS_SCREEN_MAX_DIM
    if check_uniqueness:
        _screen_uniqueness(lmat)
    # Row 0 carries d(rho_00)/dt.  Trace preservation makes the diagonal
    # rows sum to zero, so replacing this one row keeps full rank and
    # pinning tr(rho) = 1 there makes the bordered system square.
    coo = lmat.tocoo()
    keep = coo.row != 0
    trace_cols = np.arange(d) * (d + 1)
    rows = np.concatenate([coo.row[keep], np.zeros(d, dtype=coo.row.dtype)])
    cols = np.concatenate([coo.col[keep], trace_cols])
    data = np.concatenate([coo.data[keep], np.ones(d, dtype=coo.data.dtype)])
    bordered = sp.csc_matrix((data, (rows, cols)), shape=lmat.shape)
    b = np.zeros(d * d, dtype=complex)
    b[0] = 1.0
    y = splu(bordered).solve(b)
    residual = np.max(np.abs(lmat @ y))
    scale = max(1.0, abs(lmat).max())
    if residual > 1e-8 * scale:
        raise DegenerateSteadyStateError(
            f"bordered solve left a generator residual of {residual:.2e}; "
            "the stationary state is not unique or the solve is "
            "ill-conditioned")
    try:
        return _state_from_vec(y, me.space)
    except InvalidStateError as exc:
        raise DegenerateSteadyStateError(
            f"bordered solve returned an invalid state: {exc}") from exc


def _steady_evolve(me: MasterEquation, lmat: sp.csc_matrix) -> DensityMatrix:
    d = me.space.dim
    lcsr = lmat.tocsr()
    diag_idx = np.arange(d) * (d + 1)
    y0 = _vec(np.eye(d, dtype=complex) / d)
    # The stepper tolerances must sit well below the 1e-10 stopping
    # threshold: near the fixed point the controller rides the stability
    # boundary and the generator norm plateaus at the local-error level.
    stepper = RK45(lambda t, v: lcsr @ v, 0.0, y0, np.inf,
                   rtol=1e-12, atol=1e-14)
    max_steps = 500_000
    for n in range(1, max_steps + 1):
        message = stepper.step()
        if stepper.status == "failed":
            raise SteadyStateConvergenceError(f"integrator failed: {message}")
        _step_invariants(stepper.y, d, diag_idx, "steady-state relaxation")
        if n % 50 == 0 and np.linalg.norm(lcsr @ stepper.y) <= 1e-10:
            return _state_from_vec(stepper.y, me.space)
    raise SteadyStateConvergenceError(
        f"generator norm still above 1e-10 after {max_steps} steps "
        f"(t = {stepper.t:.3g})")


def steady_state(me: MasterEquation, method: str = "direct", *,
                 check_uniqueness: bool | None = None) -> DensityMatrix:
    """Stationary state of a time-independent master equation.

    method="direct" solves L vec(rho) = 0 with the trace pinned through
    a bordered sparse LU; method="evolve" relaxes from the maximally
    mixed state until the generator norm falls below 1e-10.  On systems
    small enough for a dense SVD the direct branch also screens for a
    degenerate stationary subspace (override with ``check_uniqueness``).
    """
    if me.is_time_dependent:
        raise TypeError("steady states are defined for time-independent "
                        "generators only")
    lmat = liouvillian_matrix(me).matrix
    if method == "direct":
        return _steady_direct(me, lmat, check_uniqueness)
    if method == "evolve":
        return _steady_evolve(me, lmat)
    raise ValueError(f"unknown method {method!r}")


def model_single_qubit_laser(g: float, gamma: float, kappa: float,
                             space: HilbertSpace) -> MasterEquation:
    """Inverted-coupling laser: H = -g(a^dag sigma^dag + a sigma)."""
    if space.n_qubits != 1:
        raise ValueError("model needs exactly one qubit")
    a = annihilation(space)
    sigma, _, _ = qubit_ops(space, 0)
    h = -g * (a.dag() @ sigma.dag() + a @ sigma)
    terms = (LindbladTerm(sigma, gamma), LindbladTerm(a, kappa))
    return MasterEquation(hamiltonian=h, terms=terms, space=space)


def model_squeezed_laser_effective(dressed: DressedCoupling, gamma: float,
                                   kappa: float, c_prime: float,
                                   space: HilbertSpace) -> MasterEquation:
    """Dressed laser with engineered mode-A dissipation, in the A basis.

    H = -g_tilde (A^dag sigma^dag + A sigma) with qubit decay gamma,
    bare-mode decay kappa acting through a = A cosh r - A^dag sinh r,
    and the engineered channel L_{A, kappa * c_prime}.
    """
    if space.n_qubits != 1:
        raise ValueError("model needs exactly one qubit")
    if c_prime < 0:
        raise ValueError("c_prime must be non-negative")
    if dressed.signature < 0:
        raise ValueError("dressed mode is creation-like (eta1 > eta2); "
                         "swap the drive depths")
    sigma, _, _ = qubit_ops(space, 0)
    mode = annihilation(space)  # the A ladder in its own Fock basis
    h = -dressed.g_tilde * (mode.dag() @ sigma.dag() + mode @ sigma)
    terms = (LindbladTerm(sigma, gamma),
             LindbladTerm(dressed.bare_from_mode(space), kappa),
             LindbladTerm(mode, kappa * c_prime))
    return MasterEquation(hamiltonian=h, terms=terms, space=space)


def model_two_qubit_full(dressed: DressedCoupling,
                         dressed_aux: DressedCoupling, gamma: float,
                         gamma_prime: float, kappa: float,
                         space: HilbertSpace) -> MasterEquation:
    """Lasing qubit plus dissipation-engineering qubit, shared mode.

    Both couplings act on the same cavity; the auxiliary qubit is driven
    with swapped depths, so its natural mode operator is the adjoint of
    the lasing one and its dressed coupling comes out rotating.  States
    are still represented in the Fock basis of the lasing mode A.
    """
    if space.n_qubits != 2:
        raise ValueError("model needs exactly two qubits")
    if dressed.signature < 0:
        raise ValueError("lasing mode is creation-like (eta1 > eta2); "
                         "swap the drive depths")
    sigma, _, _ = qubit_ops(space, 0)
    sigma_aux, _, _ = qubit_ops(space, 1)
    mode = annihilation(space)  # the lasing-mode ladder is the basis
    bare = dressed.bare_from_mode(space)
    # the auxiliary mode is defined through the bare ladder, so compose
    # its Bogoliubov weights with a = u A - v A^dag; with exactly swapped
    # drive depths this collapses to A^dag and the coupling is rotating
    aux_mode = dressed_aux.u * bare + dressed_aux.v * bare.dag()
    h = (-dressed.g_tilde * (mode.dag() @ sigma.dag() + mode @ sigma)
         - dressed_aux.g_tilde * (aux_mode.dag() @ sigma_aux.dag()
                                  + aux_mode @ sigma_aux))
    terms = (LindbladTerm(sigma, gamma), LindbladTerm(sigma_aux, gamma_prime),
             LindbladTerm(bare, kappa))
    return MasterEquation(hamiltonian=h, terms=terms, space=space)


def adiabatic_elimination_ok(gamma_prime: float, g_tilde_prime: float,
                             n_bare: float) -> bool:
    """Whether the auxiliary qubit is fast enough to eliminate.

    The threshold gamma' >= 10 g~' sqrt(<a^dag a>) is a diagnostic used
    for logging, not an enforced precondition.
    """
    return gamma_prime >= 10.0 * g_tilde_prime * math.sqrt(max(n_bare, 0.0))


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Reduced state over the kept tensor factors.

    Factors are numbered qubits first, field last.  ``keep`` must be
    strictly increasing; factor order is never permuted.
    """
    space = rho.space
    nf = len(space.factor_dims)
    keep = list(keep)
    if not keep or keep != sorted(set(keep)):
        raise ValueError("keep must be a non-empty strictly increasing "
                         "sequence of factor indices")
    if keep[0] < 0 or keep[-1] >= nf:
        raise ValueError(f"factor indices must be in [0, {nf})")
    tensor = rho.matrix.reshape(space.factor_dims * 2)
    for k in reversed(range(nf)):
        if k not in keep:
            n_axes = tensor.ndim // 2
            tensor = np.trace(tensor, axis1=k, axis2=k + n_axes)
    kept_dims = [space.factor_dims[k] for k in keep]
    d_red = int(np.prod(kept_dims))
    field_kept = (nf - 1) in keep
    reduced_space = HilbertSpace(
        n_qubits=len(keep) - (1 if field_kept else 0),
        field_dim=space.field_dim if field_kept else 1)
    return DensityMatrix(reduced_space, tensor.reshape(d_red, d_red),
                         check_truncation=False)


def _clip_spectrum(vals: np.ndarray, what: str) -> np.ndarray:
    if vals.min() < -1e-8:
        raise InvalidStateError(f"{what} has eigenvalue {vals.min():.2e} "
                                "below the -1e-8 floor")
    return np.clip(vals, 0.0, None)


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    r = _as_matrix(rho, rho.space)
    s = _as_matrix(sigma, rho.space)
    for name, m in (("rho", r), ("sigma", s)):
        if np.max(np.abs(m - m.conj().T)) > 1e-8 * max(1.0, np.max(np.abs(m))):
            raise ValueError(f"{name} is not Hermitian")
    vals, vecs = np.linalg.eigh(r)
    vals = _clip_spectrum(vals, "rho")
    sqrt_r = (vecs * np.sqrt(vals)) @ vecs.conj().T
    inner = sqrt_r @ s @ sqrt_r
    ivals = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    ivals = _clip_spectrum(ivals, "sqrt(rho) sigma sqrt(rho)")
    # sqrt amplifies roundoff-scale eigenvalues of near-singular inputs
    # (each stray 1e-17 contributes 3e-9), so zero them before the sum
    ivals[ivals < ivals.max() * 1e-14] = 0.0
    return float(np.sqrt(ivals).sum() ** 2)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """(1/2) tr |rho - sigma|."""
    diff = _as_matrix(rho, rho.space) - _as_matrix(sigma, rho.space)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))
