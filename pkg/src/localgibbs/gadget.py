"""Single-ancilla dilation gadgets for the local channels.

The Hermitian dilation of a jump/coherent pair (L, G) is the block matrix

    O = [[sqrt(tau) G,  L^+       ],
         [L,            sqrt(tau) G]]

with the ancilla as the block index (most significant qubit).  Evolving for a
time sqrt(tau), preparing the ancilla in |0> and discarding it afterwards
implements exp(tau * L_{a,alpha}) up to O(tau^2).  The module also carries the
Choi-matrix representation and the efficiently computable lower/upper bounds
on the diamond distance used as compilation-error proxies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import Region
from .spectral import eig_hermitian, hermitian_function
from .superop import channel_expm, kraus_to_superop, superop_to_choi

__all__ = [
    "GadgetUnitary",
    "LocalChannel",
    "ChoiMatrix",
    "dilation_operator",
    "gadget_unitary",
    "gadget_channel",
    "channel_distance_lemma1",
    "choi_matrix",
    "diamond_bounds",
]


@dataclass(frozen=True)
class GadgetUnitary:
    """Dilated unitary exp(-i O sqrt(tau)); ancilla = most significant qubit."""

    matrix: np.ndarray
    support: Region = None

    @property
    def dim(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class LocalChannel:
    """Kraus pair of an ancilla gadget: K_b = <b| U |0>_anc."""

    kraus: tuple

    @property
    def dim(self):
        return self.kraus[0].shape[0]

    def superop(self):
        return kraus_to_superop(list(self.kraus))

    def apply(self, rho):
        return sum(k @ rho @ k.conj().T for k in self.kraus)

    def completeness_defect(self):
        dim = self.dim
        s = sum(k.conj().T @ k for k in self.kraus)
        return float(np.abs(s - np.eye(dim)).max())


@dataclass(frozen=True)
class ChoiMatrix:
    """J = (1/d_in) sum_ij |i><j| (x) C(|i><j|), trace one, PSD for channels."""

    matrix: np.ndarray
    d_in: int

    @property
    def d_out(self):
        return self.matrix.shape[0] // self.d_in


def dilation_operator(lmat, gmat, tau):
    """The Hermitian block dilation of (L, G) at step size tau."""
    lmat = np.asarray(lmat, dtype=complex)
    gmat = np.asarray(gmat, dtype=complex)
    if lmat.shape != gmat.shape or lmat.shape[0] != lmat.shape[1]:
        raise ValueError("L and G must be square matrices of equal dimension")
    d = lmat.shape[0]
    o = np.zeros((2 * d, 2 * d), dtype=complex)
    sg = np.sqrt(tau) * gmat
    o[:d, :d] = sg
    o[d:, d:] = sg
    o[:d, d:] = lmat.conj().T
    o[d:, :d] = lmat
    return o


def gadget_unitary(lmat, gmat, tau, support=None):
    """U = exp(-i O sqrt(tau)) via the Hermitian eigendecomposition of O."""
    o = dilation_operator(lmat, gmat, tau)
    dec = eig_hermitian(o)
    u = hermitian_function(dec, lambda lam: np.exp(-1.0j * lam * np.sqrt(tau)))
    return GadgetUnitary(u, support)


def gadget_channel(lmat, gmat, tau, support=None):
    """The channel Tr_anc(U (rho (x) |0><0|) U^+) as a two-operator Kraus pair."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    u = gadget_unitary(lmat, gmat, tau, support).matrix
    d = lmat.shape[0]
    k0 = u[:d, :d]
    k1 = u[d:, :d]
    return LocalChannel((k0, k1))


def channel_distance_lemma1(lmat, gmat, tau):
    """Diamond-distance upper bound between the ancilla gadget and the exact
    channel exp(tau L_{a,alpha}); the quantity whose tau^2 scaling the gadget
    construction guarantees."""
    if tau == 0:
        return 0.0
    d = lmat.shape[0]
    gadget = gadget_channel(lmat, gmat, tau).superop()
    exact = channel_expm([(lmat, gmat)], d, tau)
    _, upper = diamond_bounds(gadget, exact, d_in=d)
    return upper


def choi_matrix(channel, d_in=None):
    """Choi matrix of a LocalChannel or a dense superoperator."""
    if isinstance(channel, LocalChannel):
        superop = channel.superop()
        d_in = channel.dim
    else:
        superop = np.asarray(channel)
        if d_in is None:
            d_in = int(round(np.sqrt(superop.shape[1])))
    return ChoiMatrix(superop_to_choi(superop, d_in), d_in)


def diamond_bounds(ch1, ch2, d_in=None):
    """(lower, upper) bounds on the diamond distance between two channels.

    lower = ||J(delta)||_1 for the 1/d_in-normalized Choi difference;
    upper = 2^{d_in} * ||Tr_2 |J(delta)||_inf with Tr_2 over the output
    register.  The upper bound is loose by construction (it dominates
    d_in^2 * ||Tr_2 |J||_inf >= ||J_unnormalized||_1 >= diamond) but is cheap,
    differentiable, and tracks the true distance well enough to serve as the
    default reported error proxy.
    """
    j1 = ch1 if isinstance(ch1, ChoiMatrix) else choi_matrix(ch1, d_in)
    j2 = ch2 if isinstance(ch2, ChoiMatrix) else choi_matrix(ch2, d_in)
    if j1.matrix.shape != j2.matrix.shape or j1.d_in != j2.d_in:
        raise ValueError("channels act on different spaces")
    d_in = j1.d_in
    d_out = j1.d_out
    delta = j1.matrix - j2.matrix
    w, v = np.linalg.eigh(delta)
    lower = float(np.sum(np.abs(w)))
    absj = (v * np.abs(w)[None, :]) @ v.conj().T
    t = absj.reshape(d_in, d_out, d_in, d_out)
    reduced = np.trace(t, axis1=1, axis2=3)
    upper = float(2.0 ** d_in * np.linalg.norm(np.linalg.eigvalsh(reduced), np.inf))
    return lower, upper
