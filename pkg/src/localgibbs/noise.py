"""Depolarizing gate noise and noisy compiled-circuit trajectory simulation.

Every k-qubit gate of a compiled gadget is followed by a k-qubit depolarizing
channel with rates p_1 = 0.1 p (single-qubit gates) and p_2 = p (CZ gates);
ancilla reset is noiseless.  The gadget circuit with its interleaved noise is
pre-composed into a system-side superoperator (ancilla prepared in |0> and
traced out at the end), so a trajectory run only applies one small dense
superoperator per site and step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compiler import template_gates, u_gate
from .dissipator import DensityMatrix, TruncatedLindbladian
from .errors import ConfigError
from .evolution import TrotterPlan, TrajectoryKey
from .hamiltonian import PAULIS, pauli_expectation_rho
from .lattice import displacement_ordered_ball
from .superop import (
    apply_superop_local,
    embed_operator,
    kraus_to_superop,
    kron_superop,
    partial_trace,
    reorder_qubits,
)

__all__ = [
    "DepolarizingModel",
    "depolarize",
    "depolarize_twirl_sv",
    "noisy_gadget_superop",
    "noisy_trajectory_run",
    "NoisyRunResult",
    "gadget_targets",
]


@dataclass(frozen=True)
class DepolarizingModel:
    """Global noise rate p; per-gate rates p_1 = 0.1 p and p_2 = p."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"noise rate must lie in [0, 1], got {self.p}")

    @property
    def p1(self):
        return 0.1 * self.p

    @property
    def p2(self):
        return self.p

    def rate(self, k):
        if k == 1:
            return self.p1
        if k == 2:
            return self.p2
        raise ConfigError("only 1- and 2-qubit gates carry noise")


def depolarize(rho, sites, p_k, n=None):
    """(1 - p) rho + p / (4^k - 1) sum over non-identity Paulis P rho P.

    Uses the twirl identity sum_all P rho P = 2^k tr_s(rho) (x) I_s, so no
    Pauli enumeration is needed.
    """
    rho = rho.matrix if isinstance(rho, DensityMatrix) else rho
    if n is None:
        n = int(round(np.log2(rho.shape[0])))
    sites = list(sites)
    k = len(sites)
    if not 0.0 <= p_k <= 1.0:
        raise ConfigError(f"invalid depolarizing rate {p_k}")
    if k not in (1, 2):
        raise ConfigError("depolarizing supports 1- and 2-site regions")
    keep = [s for s in range(n) if s not in sites]
    reduced = partial_trace(rho, keep, n) if keep else np.array([[np.trace(rho)]])
    # Rebuild tr_s(rho) (x) I_s / 2^k in canonical site order.
    eye_s = np.eye(2 ** k, dtype=complex) / 2 ** k
    full = np.kron(reduced, eye_s)
    order = keep + sites
    t = full.reshape((2,) * (2 * n))
    src = list(range(2 * n))
    dst = [order[i] for i in range(n)] + [n + order[i] for i in range(n)]
    mixed = np.ascontiguousarray(np.moveaxis(t, src, dst)).reshape(rho.shape)
    # sum over all 4^k Paulis of P rho P equals 4^k * (tr_s rho (x) I_s / 2^k)
    w = p_k / (4 ** k - 1)
    return (1.0 - p_k) * rho + w * ((4 ** k) * mixed - rho)


def depolarize_twirl_sv(psi, sites, p_k, rng, n=None):
    """Statevector unraveling: apply a uniformly random non-identity Pauli on
    `sites` with probability p_k * 4^k / (4^k - 1) ... equivalently, sample
    one of the 4^k Paulis uniformly with probability q and identity otherwise,
    with q chosen so the channel average matches `depolarize`."""
    from .hamiltonian import apply_pauli_psi

    if n is None:
        n = int(round(np.log2(psi.shape[0])))
    sites = list(sites)
    k = len(sites)
    # (1-p) rho + p/(4^k-1) sum_nonid = (1 - q) rho + q/4^k sum_all,
    # with q = p 4^k / (4^k - 1).
    q = p_k * 4 ** k / (4 ** k - 1)
    if rng.random() >= q:
        return psi
    labels = ("I", "X", "Y", "Z")
    choice = [labels[rng.integers(0, 4)] for _ in sites]
    chosen = [(s, ax) for s, ax in zip(sites, choice) if ax != "I"]
    if not chosen:
        return psi
    return apply_pauli_psi(psi, [s for s, _ in chosen], [ax for _, ax in chosen], n)


def _depol_superop(sites, k_total, p_k):
    """Dense superoperator of the depolarizing channel on a gadget register."""
    dim = 2 ** k_total
    eye = np.eye(dim, dtype=complex)
    s = (1.0 - p_k) * kron_superop(eye, eye)
    w = p_k / (4 ** len(sites) - 1)
    labels = ("I", "X", "Y", "Z")
    import itertools

    for combo in itertools.product(labels, repeat=len(sites)):
        if all(ax == "I" for ax in combo):
            continue
        op = np.array([[1.0]], dtype=complex)
        mats = {q: PAULIS[ax] for q, ax in zip(sites, combo)}
        full = np.array([[1.0]], dtype=complex)
        for q in range(k_total):
            full = np.kron(full, mats.get(q, PAULIS["I"]))
        s += w * kron_superop(full, full)
    return s


def noisy_gadget_superop(gates, model: DepolarizingModel, k_total):
    """System-side superoperator of one compiled gadget under gate noise.

    gates act on the k_total-qubit register (ancilla = qubit 0); the returned
    superoperator maps the (k_total - 1)-qubit system block: ancilla prepared
    in |0>, gates applied each followed by its depolarizing channel, ancilla
    traced out (reset is noiseless).
    """
    dim = 2 ** k_total
    d_sys = dim // 2
    prep = np.zeros((dim, d_sys), dtype=complex)
    prep[:d_sys, :] = np.eye(d_sys)  # |0>_anc (x) I, ancilla most significant
    s = kraus_to_superop([prep])
    for gate in gates:
        if gate[0] == "u":
            _, q, (th, ph, lm) = gate
            full = embed_operator(u_gate(th, ph, lm), [q], k_total)
            s = kron_superop(full, full.conj().T) @ s
            if model.p1 > 0:
                s = _depol_superop([q], k_total, model.p1) @ s
        elif gate[0] == "cz":
            _, edge = gate
            idx = np.arange(dim)
            b1 = (idx >> (k_total - 1 - edge[0])) & 1
            b2 = (idx >> (k_total - 1 - edge[1])) & 1
            diag = np.where((b1 & b2) == 1, -1.0, 1.0).astype(complex)
            full = np.diag(diag)
            s = kron_superop(full, full.conj().T) @ s
            if model.p2 > 0:
                s = _depol_superop(list(edge), k_total, model.p2) @ s
        else:
            raise ConfigError(f"unknown gate kind {gate[0]!r}")
    bra0 = np.zeros((d_sys, dim), dtype=complex)
    bra0[:, :d_sys] = np.eye(d_sys)
    bra1 = np.zeros((d_sys, dim), dtype=complex)
    bra1[:, d_sys:] = np.eye(d_sys)
    return kraus_to_superop([bra0, bra1]) @ s


def gadget_targets(lind: TruncatedLindbladian, tau, site=0):
    """Per-alpha gadget unitaries in displacement-ordered support convention.

    On a uniform periodic lattice every site shares these matrices, so one
    compilation per alpha serves the whole register.  Returns
    alpha -> (U_target, qubit count including the ancilla).
    """
    from .gadget import gadget_unitary

    lat = lind.lattice
    disp = displacement_ordered_ball(lat, site, lind.r)
    out = {}
    for g in lind.site_generators(site):
        asc = g.support.sites
        perm = [asc.index(s) for s in disp]
        lmat = reorder_qubits(g.lmat, perm)
        gmat = reorder_qubits(g.gmat, perm)
        u = gadget_unitary(lmat, gmat, tau).matrix
        out[g.alpha] = (u, 1 + len(asc))
    return out


@dataclass
class NoisyRunResult:
    energy_density: float
    stderr: float
    per_circuit: np.ndarray
    shots: int
    n_circuits: int


def noisy_trajectory_run(
    lind: TruncatedLindbladian,
    plan: TrotterPlan,
    compiled,
    model: DepolarizingModel,
    n_circuits,
    shots,
    seed,
):
    """Noisy randomized-trajectory estimate of the energy density.

    compiled: dict alpha -> (TemplateCircuit, theta); the same compiled gadget
    is reused at every site (translation invariance).  Each circuit is one
    alpha-trajectory simulated as a density matrix with pre-composed noisy
    gadget superoperators; `shots` per-circuit measurement shots are sampled
    per Pauli term of the Hamiltonian.  shots=0 disables shot noise.
    """
    n = lind.n_sites
    h = lind.hamiltonian
    gadget_ops = {}
    for alpha, (tpl, theta) in compiled.items():
        gates = template_gates(tpl, np.asarray(theta))
        gadget_ops[alpha] = noisy_gadget_superop(gates, model, tpl.qubits)

    # Displacement-ordered supports so one compiled gadget serves every site.
    supports = {
        a: displacement_ordered_ball(lind.lattice, a, lind.r)
        for a in lind.lattice.sites()
    }
    order = plan.order(n)
    dim = 2 ** n
    energies = np.empty(n_circuits)
    for c in range(n_circuits):
        key = TrajectoryKey.generate(seed, plan, n, index=c)
        shot_rng = key.measurement_rng()
        rho = np.eye(dim, dtype=complex) / dim
        for step in range(plan.steps):
            for a in order:
                alpha = key.alpha(step, a)
                rho = apply_superop_local(gadget_ops[alpha], rho, supports[a], n)
        rho = 0.5 * (rho + rho.conj().T)
        rho /= np.trace(rho).real
        e = 0.0
        for term in h.terms:
            sites = [s for s, _ in term.factors]
            axes = [ax for _, ax in term.factors]
            mean = pauli_expectation_rho(rho, sites, axes, n).real
            mean = min(1.0, max(-1.0, mean))
            if shots:
                hits = shot_rng.binomial(shots, 0.5 * (1.0 + mean))
                mean = 2.0 * hits / shots - 1.0
            e += term.coefficient * mean
        energies[c] = e / n
    mean = float(energies.mean())
    se = float(energies.std(ddof=1) / np.sqrt(n_circuits)) if n_circuits > 1 else np.inf
    return NoisyRunResult(mean, se, energies, shots, n_circuits)
