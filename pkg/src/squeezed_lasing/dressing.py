"""Bichromatic drive dressing of a transversal qubit-cavity coupling.

A qubit with splitting ``epsilon`` couples to a cavity of frequency
``omega`` through g sigma_x (a + a^dag).  Two longitudinal drives with
dimensionless depths ``eta_j`` at the sideband frequencies
Omega_1 = epsilon - omega and Omega_2 = epsilon + omega phase-modulate
the qubit.  In the co-moving frame the modulation expands into Bessel
sidebands; the static terms form

    H = -g_tilde (A^dag sigma^dag + A sigma),   A = u a + v a^dag,

a coupling to a Bogoliubov mode.  The weights come from zeroth/first
order Bessel factors of the two drive depths,

    p_u = J_0(2 eta_1) J_1(2 eta_2),   p_v = J_0(2 eta_2) J_1(2 eta_1),

normalized by N = sqrt(|p_u^2 - p_v^2|) so that |u^2 - v^2| = 1 and
g_tilde = g N.  Swapping eta_1 <-> eta_2 swaps u <-> v, which turns the
counter-rotating coupling above into a rotating one; this is how the
auxiliary qubit used for engineered dissipation is driven.

The module also audits the discarded sidebands for near-resonances and
builds the lab-frame, interaction-picture, and effective Hamiltonians
used to validate the rotating-wave step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.special

from .fock import HilbertSpace, Operator, annihilation, qubit_ops

# Bessel orders beyond this are outside the wrapper's contract.
MAX_BESSEL_ORDER = 64

# |p_u^2 - p_v^2| at or below this is treated as a degenerate dressing.
DEGENERACY_TOL = 1e-12


class DegenerateDressingError(ValueError):
    """The two Bessel weights balance, so no normalizable mode exists."""


def bessel_J(order: int, x: float) -> float:
    """Bessel function of the first kind J_order(x) for integer order."""
    if abs(order) > MAX_BESSEL_ORDER:
        raise ValueError(f"|order| = {abs(order)} exceeds supported {MAX_BESSEL_ORDER}")
    return float(scipy.special.jv(order, x))


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the driven qubit-cavity model.

    All frequencies and rates are angular.  ``eta1``/``eta2`` are the
    dimensionless drive depths (drive amplitude over drive frequency).
    ``g_prime``/``gamma_prime`` describe the optional auxiliary qubit.
    """

    epsilon: float
    omega: float
    g: float
    eta1: float
    eta2: float
    Omega1: float
    Omega2: float
    gamma: float = 0.0
    kappa: float = 0.0
    g_prime: float = 0.0
    gamma_prime: float = 0.0

    def __post_init__(self):
        for name in ("epsilon", "omega", "g", "eta1", "eta2", "Omega1", "Omega2",
                     "gamma", "kappa", "g_prime", "gamma_prime"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.epsilon > self.omega:
            raise ValueError("epsilon must exceed omega (the difference sideband "
                             "epsilon - omega must be a positive drive frequency)")

    @classmethod
    def at_sidebands(cls, epsilon: float, omega: float, g: float,
                     eta1: float, eta2: float, **rates) -> "SystemParams":
        """Parameters with the drives placed exactly on the two sidebands."""
        return cls(epsilon=epsilon, omega=omega, g=g, eta1=eta1, eta2=eta2,
                   Omega1=epsilon - omega, Omega2=epsilon + omega, **rates)

    @property
    def on_sidebands(self) -> bool:
        tol = 1e-9 * self.epsilon
        return (abs(self.Omega1 - (self.epsilon - self.omega)) <= tol
                and abs(self.Omega2 - (self.epsilon + self.omega)) <= tol)


@dataclass(frozen=True)
class DressedCoupling:
    """Bogoliubov weights and strength of the dressed interaction.

    A = u a + v a^dag with |u^2 - v^2| = 1 and g_tilde = g * norm_N.
    The usual branch has |u| > |v| (then u = cosh r, v = sinh r with
    u > 0); drive depths with eta1 > eta2 produce the swapped branch
    u^2 - v^2 = -1, where the mode operator is the adjoint of a
    normalizable Bogoliubov mode and r = artanh(u/v).
    """

    u: float
    v: float
    r: float
    g_tilde: float
    norm_N: float

    def __post_init__(self):
        s = self.u**2 - self.v**2
        # the squares lose ~u^2 ulps, so scale the tolerance with magnitude
        tol = 1e-12 * max(1.0, self.u**2 + self.v**2)
        if abs(abs(s) - 1.0) > tol:
            raise ValueError(f"|u^2 - v^2| = {abs(s)} is not 1")
        if abs(self.u) > abs(self.v) and self.u <= 0:
            raise ValueError("sign convention requires u > 0 when |u| > |v|")

    @property
    def signature(self) -> int:
        """+1 on the lasing branch (|u| > |v|), -1 on the swapped branch."""
        return 1 if abs(self.u) > abs(self.v) else -1

    @classmethod
    def from_r(cls, r: float, g_tilde: float = 1.0,
               norm_N: float = 1.0) -> "DressedCoupling":
        """Synthetic coupling with a prescribed squeezing parameter."""
        return cls(u=math.cosh(r), v=math.sinh(r), r=r,
                   g_tilde=g_tilde, norm_N=norm_N)

    def mode_operator(self, space: HilbertSpace) -> Operator:
        """A = u a + v a^dag on the given space."""
        a = annihilation(space)
        return self.u * a + self.v * a.dag()

    def bare_from_mode(self, space: HilbertSpace) -> Operator:
        """The bare operator a written in terms of the mode operator.

        On the usual branch a = u A - v A^dag; the swapped branch picks
        up an overall sign from u^2 - v^2 = -1.
        """
        a = annihilation(space)
        return float(self.signature) * (self.u * a - self.v * a.dag())


def dress(eta1: float, eta2: float, g: float = 1.0) -> DressedCoupling:
    """Dressed Bogoliubov coupling for drive depths (eta1, eta2).

    Raises :class:`DegenerateDressingError` when the two Bessel weights
    balance and the normalization N vanishes.
    """
    p_u = bessel_J(0, 2 * eta1) * bessel_J(1, 2 * eta2)
    p_v = bessel_J(0, 2 * eta2) * bessel_J(1, 2 * eta1)
    if abs(p_u - p_v) * abs(p_u + p_v) <= DEGENERACY_TOL:
        raise DegenerateDressingError(
            f"|p_u| = |p_v| = {abs(p_u):.3e} at eta1={eta1}, eta2={eta2}; "
            "the Bogoliubov normalization vanishes")
    # Work with the ratio q = smaller/larger: q = 0 gives exactly (1, 0),
    # and 1 - q^2 avoids the cancellation in p_u^2 - p_v^2.
    if abs(p_u) >= abs(p_v):
        q = p_v / p_u
        big = math.copysign(1.0, p_u) / math.sqrt(1.0 - q * q)
        u, v = big, big * q
        norm = abs(p_u) * math.sqrt(1.0 - q * q)
        if u < 0:
            u, v = -u, -v
        r = math.atanh(v / u)
    else:
        q = p_u / p_v
        big = math.copysign(1.0, p_v) / math.sqrt(1.0 - q * q)
        u, v = big * q, big
        norm = abs(p_v) * math.sqrt(1.0 - q * q)
        if v < 0:
            u, v = -u, -v
        r = math.atanh(u / v)
    return DressedCoupling(u=u, v=v, r=r, g_tilde=g * norm, norm_N=norm)


def small_amplitude_estimates(eta1: float, eta2: float,
                              g: float = 1.0) -> tuple[float, float]:
    """Leading-order (r, g_tilde) for small drive depths.

    tanh r = v/u is approximately eta1/eta2 and g_tilde is approximately
    g sqrt(eta2^2 - eta1^2); useful for parameter planning only.
    """
    if not (eta1 <= 0.3 and eta2 <= 0.3):
        raise ValueError("small-amplitude estimates assume eta <= 0.3")
    if eta1 >= eta2:
        raise ValueError("small-amplitude branch requires eta1 < eta2")
    r_approx = math.atanh(eta1 / eta2)
    g_tilde_approx = g * math.sqrt(eta2**2 - eta1**2)
    return r_approx, g_tilde_approx


@dataclass(frozen=True)
class SidebandTerm:
    """One Bessel sideband of the expanded interaction.

    ``kind`` is "rotating" for a sigma^dag a process and "counter" for
    sigma^dag a^dag.  ``indices`` are the Bessel orders of the two
    drives, ``detuning`` the residual oscillation frequency, and
    ``weight`` the magnitude |J_{m1}(2 eta1) J_{m2}(2 eta2)|.
    """

    kind: str
    indices: tuple[int, int]
    detuning: float
    weight: float


@dataclass(frozen=True)
class ResonanceReport:
    kept_terms: list[SidebandTerm]
    spurious_terms: list[SidebandTerm]
    threshold: float


def resonance_audit(params: SystemParams, max_index: int = 30,
                    g_threshold: float | None = None) -> ResonanceReport:
    """Scan the sideband expansion for terms oscillating slower than a threshold.

    With the drives on the sidebands, the (m1, m2) rotating term detunes by
    (1 + m1 + m2) omega - (1 + m1 - m2) epsilon and the (q1, q2) counter-rotating
    one by (1 - q1 + q2) omega + (1 + q1 + q2) epsilon.  The kept pair, rotating
    (-1, 0) and counter-rotating (0, -1), sits at exactly zero.  All terms with
    |detuning| < g_threshold are reported; spurious ones are sorted by
    |detuning|, then by descending Bessel weight.

    ``g_threshold`` defaults to the bare coupling g, below which a sideband
    can no longer be adiabatically neglected.
    """
    if max_index < 1:
        raise ValueError("max_index must be at least 1")
    if not params.on_sidebands:
        raise ValueError("audit assumes drives exactly on the two sidebands")
    if g_threshold is None:
        g_threshold = params.g
    eps, om = params.epsilon, params.omega
    kept: list[SidebandTerm] = []
    spurious: list[SidebandTerm] = []
    orders = range(-max_index, max_index + 1)
    weights1 = {m: abs(bessel_J(m, 2 * params.eta1)) for m in orders}
    weights2 = {m: abs(bessel_J(m, 2 * params.eta2)) for m in orders}
    for m1 in orders:
        for m2 in orders:
            weight = weights1[m1] * weights2[m2]
            det_rot = (1 + m1 + m2) * om - (1 + m1 - m2) * eps
            det_cnt = (1 - m1 + m2) * om + (1 + m1 + m2) * eps
            for kind, det in (("rotating", det_rot), ("counter", det_cnt)):
                is_kept = (m1, m2) == ((-1, 0) if kind == "rotating" else (0, -1))
                if is_kept:
                    kept.append(SidebandTerm(kind, (m1, m2), det, weight))
                elif abs(det) < g_threshold:
                    spurious.append(SidebandTerm(kind, (m1, m2), det, weight))
    spurious.sort(key=lambda t: (abs(t.detuning), -t.weight, t.indices))
    return ResonanceReport(kept_terms=kept, spurious_terms=spurious,
                           threshold=g_threshold)


def lab_frame_H(params: SystemParams, space: HilbertSpace, t: float) -> Operator:
    """Full lab-frame Hamiltonian at time t.

    H(t) = omega a^dag a + [epsilon/2 + sum_j eta_j Omega_j cos(Omega_j t)] sigma_z
           + g sigma_x (a + a^dag)
    """
    static, drive = lab_frame_parts(params, space)
    return static + drive(t) * _sigma_z(params, space)


def lab_frame_parts(params: SystemParams, space: HilbertSpace):
    """(static Operator, drive coefficient t -> real) with H(t) = static + drive(t) sigma_z."""
    if space.n_qubits < 1:
        raise ValueError("lab-frame model needs at least one qubit")
    a = annihilation(space)
    sigma, sigma_z, sigma_x = qubit_ops(space, 0)
    static = (params.omega * (a.dag() @ a)
              + (params.epsilon / 2) * sigma_z
              + params.g * (sigma_x @ (a + a.dag())))

    def drive(t: float) -> float:
        return (params.eta1 * params.Omega1 * math.cos(params.Omega1 * t)
                + params.eta2 * params.Omega2 * math.cos(params.Omega2 * t))

    return static, drive


def _sigma_z(params: SystemParams, space: HilbertSpace) -> Operator:
    _, sigma_z, _ = qubit_ops(space, 0)
    return sigma_z


def frame_unitary(params: SystemParams, space: HilbertSpace, t: float) -> Operator:
    """The co-moving frame U_c(t) in which the dressing expansion is made.

    U_c = exp[-i omega t a^dag a - i (epsilon t / 2
              + sum_j eta_j sin(Omega_j t)) sigma_z];
    both exponents are diagonal, so the matrix is assembled directly.
    Conjugating the bare coupling, U_c^dag [g sigma_x (a+a^dag)] U_c,
    gives the exact interaction-picture Hamiltonian.
    """
    a = annihilation(space)
    _, sigma_z, _ = qubit_ops(space, 0)
    phase_q = (params.epsilon * t / 2
               + params.eta1 * math.sin(params.Omega1 * t)
               + params.eta2 * math.sin(params.Omega2 * t))
    exponent = params.omega * t * np.diag((a.dag() @ a).matrix).real \
        + phase_q * np.diag(sigma_z.matrix).real
    return Operator(space, np.diag(np.exp(-1j * exponent)))


def interaction_picture_H(params: SystemParams, space: HilbertSpace, t: float,
                          bessel_cutoff: int = 8) -> Operator:
    """Interaction-picture Hamiltonian with all Bessel sidebands retained.

    H_I(t) = g [alpha(t) a sigma^dag + beta(t) a sigma] + h.c., where the
    phase factors carry the full drive modulation,

        alpha(t) = e^{-i (omega - epsilon) t} f_1(t) f_2(t),
        beta(t)  = e^{-i (omega + epsilon) t} conj(f_1 f_2),
        f_j(t)   = sum_{|n| <= cutoff} J_n(2 eta_j) e^{i n Omega_j t}.

    The product f_1 f_2 is the double Bessel sum truncated at
    |n_1|, |n_2| <= bessel_cutoff.
    """
    return interaction_picture_hamiltonian(params, space, bessel_cutoff)(t)


def interaction_picture_hamiltonian(params: SystemParams, space: HilbertSpace,
                                    bessel_cutoff: int = 8):
    """Factory form of :func:`interaction_picture_H`: returns t -> Operator."""
    if bessel_cutoff < 1:
        raise ValueError("bessel_cutoff must be at least 1")
    a = annihilation(space)
    sigma, _, _ = qubit_ops(space, 0)
    raising = (a @ sigma.dag()).matrix
    lowering = (a @ sigma).matrix
    orders = np.arange(-bessel_cutoff, bessel_cutoff + 1)
    j1 = scipy.special.jv(orders, 2 * params.eta1)
    j2 = scipy.special.jv(orders, 2 * params.eta2)

    def hamiltonian(t: float) -> Operator:
        f1 = np.sum(j1 * np.exp(1j * orders * params.Omega1 * t))
        f2 = np.sum(j2 * np.exp(1j * orders * params.Omega2 * t))
        alpha = np.exp(-1j * (params.omega - params.epsilon) * t) * f1 * f2
        beta = np.exp(-1j * (params.omega + params.epsilon) * t) * np.conj(f1 * f2)
        half = params.g * (alpha * raising + beta * lowering)
        return Operator(space, half + half.conj().T)

    return hamiltonian


def effective_H(dressed: DressedCoupling, space: HilbertSpace,
                which_qubit: int = 0) -> Operator:
    """Static dressed Hamiltonian -g_tilde (A^dag sigma^dag + A sigma)."""
    sigma, _, _ = qubit_ops(space, which_qubit)
    mode = dressed.mode_operator(space)
    return -dressed.g_tilde * (mode.dag() @ sigma.dag() + mode @ sigma)
