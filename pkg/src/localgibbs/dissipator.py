"""Detailed-balance Lindbladians from truncated Hamiltonian patches.

For every lattice site a and every alpha in {X, Y, Z} the construction
diagonalizes the patch Hamiltonian H_{a,r}, weights the Bohr-frequency
components of the single-site generator by q(nu) * exp(-beta nu / 4), and adds
the coherent term G = -(i/2) sum_nu tanh(-beta nu / 4) (L^+ L)_nu.  Each such
pair (L, G) satisfies KMS detailed balance with respect to the Gibbs state of
its own patch; the full generator is the sum over all sites and alphas.

Normalization: the bare generators are spin operators sigma/2, so at beta = 0
the Lindbladian is exactly the unit-rate depolarizing generator
sum_a (tr_a(rho) (x) I_a / 2 - rho).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg

from .errors import ConvergenceError, ResourceCapError
from .hamiltonian import PAULIS, LocalHamiltonian, to_dense, truncate_hamiltonian
from .lattice import Region
from .spectral import (
    SpectralDecomposition,
    default_gap_tol,
    eig_hermitian,
    snapped_gap_matrix,
)
from .superop import (
    apply_left_local,
    apply_right_local,
    embed_operator,
    heisenberg_superop,
    kron_superop,
    lindblad_superop,
)

__all__ = [
    "Envelope",
    "envelope_eval",
    "DensityMatrix",
    "LocalGenerator",
    "TruncatedLindbladian",
    "build_jump_operator",
    "build_coherent_term",
    "build_lindbladian",
    "apply_generator",
    "apply_generator_support",
    "gibbs_state",
    "kms_residual",
    "local_kms_residuals",
    "depolarizing_superop",
    "steady_state",
    "renormalize_envelope",
    "filter_f",
    "kernel_g1",
    "kernel_g2",
    "consistency_check",
]

ENVELOPE_KINDS = ("gaussian", "flat", "smoothed_mh", "fixed_gaussian")

ALPHA_AXES = {1: "X", 2: "Y", 3: "Z"}


@dataclass(frozen=True)
class Envelope:
    """Frequency-domain filter q(nu); real and symmetric for all kinds here."""

    kind: str
    beta: float

    def __post_init__(self):
        if self.kind not in ENVELOPE_KINDS:
            raise ValueError(f"unknown envelope {self.kind!r}; choose from {ENVELOPE_KINDS}")

    def __call__(self, nu):
        return envelope_eval(self, nu)


def envelope_eval(env: Envelope, nu):
    """q(nu) for the supported envelope families."""
    nu = np.asarray(nu, dtype=float)
    b = env.beta
    if env.kind == "gaussian":
        out = np.exp(-((b * nu) ** 2) / 8.0)
    elif env.kind == "flat":
        out = np.ones_like(nu)
    elif env.kind == "smoothed_mh":
        out = np.exp(-np.sqrt(1.0 + (b * nu) ** 2) / 4.0)
    elif env.kind == "fixed_gaussian":
        out = np.exp(-(nu ** 2) / 2.0)
    else:  # pragma: no cover - guarded in __post_init__
        raise ValueError(env.kind)
    return out if out.ndim else float(out)


@dataclass
class DensityMatrix:
    """A density matrix together with the region it lives on (None = full)."""

    matrix: np.ndarray
    region: Region = None

    @classmethod
    def maximally_mixed(cls, n, region=None):
        d = 2 ** n
        return cls(np.eye(d, dtype=complex) / d, region)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def validate(self, atol=1e-9):
        m = self.matrix
        if np.abs(m - m.conj().T).max() > atol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > atol or abs(np.trace(m).imag) > atol:
            raise ValueError("density matrix trace differs from 1")
        wmin = np.linalg.eigvalsh(m)[0]
        if wmin < -atol:
            raise ValueError(f"density matrix has negative eigenvalue {wmin}")
        return self


@dataclass(frozen=True)
class LocalGenerator:
    """One (L, G) pair: site a, alpha in {1: X, 2: Y, 3: Z}, support = B_a(r)."""

    site: int
    alpha: int
    support: Region
    lmat: np.ndarray
    gmat: np.ndarray


@dataclass
class TruncatedLindbladian:
    """The strictly local generator: 3 jump/coherent pairs per lattice site."""

    beta: float
    r: int
    envelope: Envelope
    generators: tuple
    hamiltonian: LocalHamiltonian
    _site_cache: dict = field(default_factory=dict, repr=False)

    @property
    def lattice(self):
        return self.hamiltonian.lattice

    @property
    def n_sites(self):
        return self.lattice.n_sites

    def site_generators(self, a):
        return tuple(g for g in self.generators if g.site == a)

    def site_block(self, a):
        """Cached per-site combination: (sites, [L_alpha], G_sum, LdL_sum)."""
        if a not in self._site_cache:
            gens = self.site_generators(a)
            sites = gens[0].support.sites
            ls = [g.lmat for g in gens]
            gsum = sum(g.gmat for g in gens)
            ldl = sum(l.conj().T @ l for l in ls)
            self._site_cache[a] = (sites, ls, gsum, ldl)
        return self._site_cache[a]


def _weights(nu, beta, env: Envelope):
    return envelope_eval(env, nu) * np.exp(-beta * nu / 4.0)


def build_jump_operator(h_loc, a_op, beta, envelope, dec=None, tol=None):
    """L = sum_{nu in Omega(H_loc)} q(nu) exp(-beta nu / 4) A_nu.

    The Boltzmann factor exp(-beta nu / 4) is always part of the weight; it is
    what makes the per-patch KMS condition hold, which the kms tests enforce.
    """
    if isinstance(envelope, str):
        envelope = Envelope(envelope, beta)
    if dec is None:
        dec = eig_hermitian(h_loc)
    if tol is None:
        tol = default_gap_tol(dec)
    nu = snapped_gap_matrix(dec, tol)
    at = dec.to_eigenbasis(np.asarray(a_op, dtype=complex))
    return dec.from_eigenbasis(_weights(nu, beta, envelope) * at)


def build_coherent_term(lmat, dec: SpectralDecomposition, beta, tol=None):
    """G = -(i/2) sum_nu tanh(-beta nu / 4) (L^+ L)_nu; zero at beta = 0."""
    if tol is None:
        tol = default_gap_tol(dec)
    if beta == 0.0:
        return np.zeros_like(lmat)
    nu = snapped_gap_matrix(dec, tol)
    lt = dec.to_eigenbasis(lmat)
    mt = lt.conj().T @ lt
    gt = -0.5j * np.tanh(-beta * nu / 4.0) * mt
    return dec.from_eigenbasis(gt)


def _embedded_half_pauli(axis, pos, k):
    """sigma_axis / 2 acting at tensor slot `pos` of a k-site support."""
    op = np.array([[0.5]], dtype=complex)
    for i in range(k):
        op = np.kron(op, PAULIS[axis] if i == pos else PAULIS["I"])
    return op


def build_lindbladian(h: LocalHamiltonian, beta, r, envelope="gaussian"):
    """Assemble the truncated Lindbladian of a Hamiltonian at radius r.

    r at or above the lattice diameter reproduces the untruncated generator.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if r < 0:
        raise ValueError("truncation radius must be nonnegative")
    if isinstance(envelope, str):
        envelope = Envelope(envelope, float(beta))
    lat = h.lattice
    gens = []
    for a in lat.sites():
        h_ar = truncate_hamiltonian(h, a, r)
        support = h_ar.support
        dec = eig_hermitian(to_dense(h_ar, support))
        tol = default_gap_tol(dec)
        nu = snapped_gap_matrix(dec, tol)
        w = _weights(nu, beta, envelope)
        pos = support.index(a)
        for alpha, axis in ALPHA_AXES.items():
            a_op = _embedded_half_pauli(axis, pos, len(support))
            lt = w * dec.to_eigenbasis(a_op)
            lmat = dec.from_eigenbasis(lt)
            if beta == 0.0:
                gmat = np.zeros_like(lmat)
            else:
                mt = lt.conj().T @ lt
                gmat = dec.from_eigenbasis(-0.5j * np.tanh(-beta * nu / 4.0) * mt)
            gens.append(LocalGenerator(a, alpha, support, lmat, gmat))
    return TruncatedLindbladian(float(beta), int(r), envelope, tuple(gens), h)


def apply_generator_support(gen: LocalGenerator, rho):
    """-i[G, rho] + L rho L^+ - 1/2 {L^+L, rho} on the generator's own support."""
    l, g = gen.lmat, gen.gmat
    ldl = l.conj().T @ l
    out = l @ rho @ l.conj().T - 0.5 * (ldl @ rho + rho @ ldl)
    out += -1.0j * (g @ rho - rho @ g)
    return out


def apply_generator(lind: TruncatedLindbladian, rho):
    """d rho / dt for the full lattice; trace- and Hermiticity-preserving."""
    rho = rho.matrix if isinstance(rho, DensityMatrix) else rho
    n = lind.n_sites
    if rho.shape[0] != 2 ** n:
        raise ValueError("state dimension does not match the lattice")
    out = np.zeros_like(rho, dtype=complex)
    for a in lind.lattice.sites():
        sites, ls, gsum, ldl = lind.site_block(a)
        heff = gsum - 0.5j * ldl  # -i Heff rho + i rho Heff^+ collects G and anticommutator
        out += -1.0j * apply_left_local(heff, rho, sites, n)
        out += 1.0j * apply_right_local(heff.conj().T, rho, sites, n)
        for l in ls:
            out += apply_right_local(
                l.conj().T, apply_left_local(l, rho, sites, n), sites, n
            )
    return out


def gibbs_state(h, beta, region=None):
    """exp(-beta H) / tr exp(-beta H) via max-shifted exponentiation."""
    if isinstance(h, LocalHamiltonian):
        region = h.support if region is None else region
        h = to_dense(h, region)
    dec = eig_hermitian(h)
    w = np.exp(-beta * (dec.eigenvalues - dec.eigenvalues.min()))
    w /= w.sum()
    v = dec.eigenvectors
    return DensityMatrix((v * w[None, :]) @ v.conj().T, region)


def _gibbs_roots(h_dense, beta):
    """(rho^{1/2}, rho^{-1/2}) of the Gibbs state, with a conditioning guard."""
    dec = eig_hermitian(h_dense)
    lam = dec.eigenvalues
    spread = beta * float(np.max(np.abs(lam)))
    if spread > 50.0:
        raise ValueError(
            f"beta * ||H|| = {spread:.1f} > 50: rho^(-1/2) too ill-conditioned"
        )
    w = np.exp(-beta * (lam - lam.min()))
    w /= w.sum()
    v = dec.eigenvectors
    half = (v * np.sqrt(w)[None, :]) @ v.conj().T
    neg = (v * (1.0 / np.sqrt(w))[None, :]) @ v.conj().T
    return half, neg


def _embedded_pairs(generators, region: Region):
    """Embed (L, G) pairs of the given generators into a common region."""
    k = len(region)
    pairs = []
    for g in generators:
        slots = [region.index(s) for s in g.support.sites]
        lf = embed_operator(g.lmat, slots, k)
        gf = embed_operator(g.gmat, slots, k)
        pairs.append((lf, gf))
    return pairs


def _kms_residual_from_superops(s_fwd, s_adj, h_dense, beta):
    half, neg = _gibbs_roots(h_dense, beta)
    w_half = kron_superop(half, half)
    w_neg = kron_superop(neg, neg)
    rhs = w_neg @ s_fwd @ w_half
    diff = s_adj - rhs
    # Max over the matrix-unit basis of input operators, relative scale.
    num = np.max(np.linalg.norm(diff, axis=0))
    den = np.max(np.linalg.norm(s_adj, axis=0))
    return float(num / max(den, 1e-300))


def kms_residual(lind: TruncatedLindbladian, h_ref=None, beta=None):
    """Relative violation of KMS detailed balance of the full generator
    against the Gibbs state of h_ref (default: the source Hamiltonian).

    Builds dense superoperators, so this is for small lattices (n <= 6).
    """
    if beta is None:
        beta = lind.beta
    lat = lind.lattice
    region = Region(lat.sites())
    if h_ref is None:
        h_ref = to_dense(lind.hamiltonian, region)
    if len(region) > 6:
        raise ResourceCapError("full-lattice KMS check is capped at n = 6")
    pairs = _embedded_pairs(lind.generators, region)
    dim = 2 ** len(region)
    s_fwd = lindblad_superop(pairs, dim)
    s_adj = heisenberg_superop(pairs, dim)
    return _kms_residual_from_superops(s_fwd, s_adj, h_ref, beta)


def local_kms_residuals(lind: TruncatedLindbladian):
    """Per-generator detailed-balance residual against Gibbs(H_{a,r}).

    Returns an array aligned with lind.generators.
    """
    out = []
    h = lind.hamiltonian
    for g in lind.generators:
        h_loc = to_dense(truncate_hamiltonian(h, g.site, lind.r), g.support)
        dim = g.lmat.shape[0]
        pairs = [(g.lmat, g.gmat)]
        s_fwd = lindblad_superop(pairs, dim)
        s_adj = heisenberg_superop(pairs, dim)
        out.append(_kms_residual_from_superops(s_fwd, s_adj, h_loc, lind.beta))
    return np.array(out)


def depolarizing_superop(n):
    """Dense superoperator of sum_a (tr_a(rho) (x) I_a / 2 - rho)."""
    dim = 2 ** n
    s = np.zeros((dim * dim, dim * dim), dtype=complex)
    eye_full = np.eye(dim, dtype=complex)
    for a in range(n):
        for axis in ("I", "X", "Y", "Z"):
            p = embed_operator(PAULIS[axis], [a], n)
            s += 0.25 * kron_superop(p, p)
        s -= kron_superop(eye_full, eye_full)
    return s


def lindbladian_superop(lind: TruncatedLindbladian):
    """Dense superoperator of the full generator (testing-scale, n <= 7)."""
    n = lind.n_sites
    if n > 7:
        raise ResourceCapError("dense superoperator capped at n = 7")
    region = Region(lind.lattice.sites())
    pairs = _embedded_pairs(lind.generators, region)
    return lindblad_superop(pairs, 2 ** n)


def apply_generator_heisenberg(lind: TruncatedLindbladian, x):
    """Adjoint action i[G, X] + L^+ X L - 1/2 {L^+L, X}, summed over generators."""
    n = lind.n_sites
    out = np.zeros_like(x, dtype=complex)
    for a in lind.lattice.sites():
        sites, ls, gsum, ldl = lind.site_block(a)
        heff = gsum - 0.5j * ldl
        out += 1.0j * apply_left_local(heff.conj().T, x, sites, n)
        out += -1.0j * apply_right_local(heff, x, sites, n)
        for l in ls:
            out += apply_right_local(
                l, apply_left_local(l.conj().T, x, sites, n), sites, n
            )
    return out


def _matvec_operator(lind: TruncatedLindbladian):
    n = lind.n_sites
    dim = 2 ** n

    def mv(vec):
        rho = vec.reshape(dim, dim)
        return apply_generator(lind, rho).reshape(-1)

    def rmv(vec):
        # Matrix adjoint of the vectorized superoperator = Heisenberg action.
        x = vec.reshape(dim, dim)
        return apply_generator_heisenberg(lind, x).reshape(-1)

    op = scipy.sparse.linalg.LinearOperator(
        (dim * dim, dim * dim), matvec=mv, rmatvec=rmv, dtype=complex
    )
    # trace of the superoperator, used by expm_multiply's shifting
    tr = 0.0
    for g in lind.generators:
        ds = g.lmat.shape[0]
        d_env = dim // ds
        tr += d_env ** 2 * (
            abs(np.trace(g.lmat)) ** 2
            - ds * np.trace(g.lmat.conj().T @ g.lmat).real
        )
    return op, tr


def _trace_norm(m):
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def steady_state(
    lind: TruncatedLindbladian,
    residual_target=1e-8,
    max_time=2000.0,
    rho0=None,
    method=None,
):
    """Fixed point of the truncated Lindbladian.

    n <= 7 solves the dense superoperator null vector (one row replaced by the
    trace constraint, which is exact because trace preservation makes the
    diagonal rows linearly dependent).  Larger systems integrate from the
    maximally mixed state with exponentially growing steps until the residual
    ||L(rho)||_1 meets the target.
    """
    n = lind.n_sites
    dim = 2 ** n
    if method is None:
        method = "nullvector" if n <= 7 else "integrate"

    if method == "nullvector":
        s = lindbladian_superop(lind)
        # Trace preservation makes the diagonal rows of the superoperator sum
        # to zero, so replacing one diagonal row with the trace constraint
        # loses nothing and pins the normalization.
        row = 0  # vec index of the (0, 0) entry
        s_mod = s.copy()
        trace_row = np.zeros(dim * dim, dtype=complex)
        trace_row[:: dim + 1] = 1.0
        s_mod[row, :] = trace_row
        b = np.zeros(dim * dim, dtype=complex)
        b[row] = 1.0
        try:
            vec = np.linalg.solve(s_mod, b)
        except np.linalg.LinAlgError:
            vec = np.linalg.lstsq(np.vstack([s, trace_row]),
                                  np.append(np.zeros(dim * dim), 1.0), rcond=None)[0]
        rho = vec.reshape(dim, dim)
        rho = 0.5 * (rho + rho.conj().T)
        rho /= np.trace(rho).real
        res = _trace_norm(apply_generator(lind, rho))
        if res > residual_target:
            raise ConvergenceError(
                f"null-vector steady state residual {res:.2e} exceeds {residual_target:.0e}"
            )
        return DensityMatrix(rho)

    rho = (rho0.matrix if isinstance(rho0, DensityMatrix) else rho0) if rho0 is not None else None
    if rho is None:
        rho = np.eye(dim, dtype=complex) / dim
    rho = rho.astype(complex)
    # Superoperator-norm bound that sizes each Taylor step; dt * ||L|| stays
    # around 10 so the series converges in ~40 terms without losing more than
    # a few digits to cancellation.
    norm_bound = sum(
        2.0 * np.linalg.norm(g.lmat, 2) ** 2 + 2.0 * np.linalg.norm(g.gmat, 2)
        for g in lind.generators
    )
    dt = 2.0 / norm_bound
    dt_max = 10.0 / norm_bound
    t = 0.0
    res = np.inf
    while t < max_time:
        term = rho.copy()
        acc = rho.copy()
        for k in range(1, 200):
            term = (dt / k) * apply_generator(lind, term)
            acc += term
            if np.abs(term).max() <= 1e-15 * max(1.0, np.abs(acc).max()):
                break
        rho = 0.5 * (acc + acc.conj().T)
        rho /= np.trace(rho).real
        t += dt
        dt = min(dt * 1.4, dt_max)
        res = _trace_norm(apply_generator(lind, rho))
        if res <= residual_target:
            return DensityMatrix(rho)
    raise ConvergenceError(
        f"steady state not converged by t = {max_time} (residual {res:.2e})"
    )


def renormalize_envelope(lind: TruncatedLindbladian):
    """Rescale (L, G) so the mean jump Frobenius norm per site matches the
    Gaussian-envelope reference at the same (beta, r); G gets the square of
    the jump factor so per-patch detailed balance survives the rescaling."""
    if lind.envelope.kind == "gaussian":
        return lind
    ref = build_lindbladian(lind.hamiltonian, lind.beta, lind.r, "gaussian")
    phi_ref, phi_q = {}, {}
    for g_ref, g in zip(ref.generators, lind.generators):
        phi_ref.setdefault(g.site, []).append(np.linalg.norm(g_ref.lmat))
        phi_q.setdefault(g.site, []).append(np.linalg.norm(g.lmat))
    gens = []
    for g in lind.generators:
        denom = np.mean(phi_q[g.site])
        if denom < 1e-300:
            raise ValueError(f"zero-norm jump operators at site {g.site}")
        c = np.mean(phi_ref[g.site]) / denom
        gens.append(LocalGenerator(g.site, g.alpha, g.support, c * g.lmat, c * c * g.gmat))
    return TruncatedLindbladian(
        lind.beta, lind.r, lind.envelope, tuple(gens), lind.hamiltonian
    )


# -- time-domain cross-checks -------------------------------------------------


def filter_f(beta, t):
    """Gaussian-envelope filter in the time domain."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    t = np.asarray(t, dtype=complex)
    out = np.sqrt(2.0 / (np.pi * beta ** 2)) * np.exp((beta - 4.0j * t) ** 2 / (8.0 * beta ** 2))
    return out if out.ndim else complex(out)


def kernel_g2(beta, t):
    if beta <= 0:
        raise ValueError("beta must be positive")
    t = np.asarray(t, dtype=complex)
    out = (2.0 * np.sqrt(2.0) / beta) * np.exp((beta - 4.0j * t) ** 2 / (4.0 * beta ** 2))
    return out if out.ndim else complex(out)


def kernel_g1(beta, t, half_width=12.0, num=4001):
    """First coherent-term kernel, evaluated by numerical convolution of
    -1/(pi beta cosh(2 pi s / beta)) with (sqrt2/beta) e^{1/4 - 4u^2/beta^2} sin(2u/beta)."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    scalar = np.ndim(t) == 0
    s = np.linspace(-half_width * beta, half_width * beta, num)
    h1 = -1.0 / (np.pi * beta * np.cosh(2.0 * np.pi * s / beta))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    u = t[:, None] - s[None, :]
    h2 = (np.sqrt(2.0) / beta) * np.exp(0.25 - 4.0 * u ** 2 / beta ** 2) * np.sin(2.0 * u / beta)
    vals = np.trapezoid(h1[None, :] * h2, s, axis=1)
    return float(vals[0]) if scalar else vals


def consistency_check(beta, nu_grid=None, half_width=6.0, num=4001):
    """max_nu | int f(t) e^{-i nu t} dt  -  q(nu) e^{-beta nu / 4} | by quadrature.

    The trapezoid rule on a Gaussian-decaying integrand converges spectrally,
    so the default grid is far inside 1e-6 territory.
    """
    if nu_grid is None:
        nu_grid = np.linspace(-8.0, 8.0, 81)
    t = np.linspace(-half_width * beta, half_width * beta, num)
    f = filter_f(beta, t)
    target = np.exp(-((beta * nu_grid) ** 2) / 8.0 - beta * nu_grid / 4.0)
    worst = 0.0
    for nu, want in zip(nu_grid, target):
        got = np.trapezoid(f * np.exp(-1.0j * nu * t), t)
        worst = max(worst, abs(got - want))
    return float(worst)
