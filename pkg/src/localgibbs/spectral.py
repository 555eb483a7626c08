"""Dense Hermitian spectral machinery.

Eigendecomposition is delegated to LAPACK's Householder-tridiagonalization +
implicit-shift solver (numpy.linalg.eigh).  On top of it this module supplies
the Bohr-frequency structure: the clustered multiset of eigenvalue gaps
Omega(H), operator frequency components A_nu, and analytic functions of
Hermitian matrices.

The dense dimension is capped at 4096 (12 qubits); larger requests are
refused rather than silently degraded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ResourceCapError

__all__ = [
    "DIM_CAP",
    "SpectralDecomposition",
    "BohrSpectrum",
    "eig_hermitian",
    "default_gap_tol",
    "bohr_spectrum",
    "snapped_gap_matrix",
    "frequency_component",
    "hermitian_function",
]

DIM_CAP = 4096


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenvalues and the unitary of eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self):
        return self.eigenvalues.shape[0]

    def to_eigenbasis(self, a):
        v = self.eigenvectors
        return v.conj().T @ a @ v

    def from_eigenbasis(self, a):
        v = self.eigenvectors
        return v @ a @ v.conj().T


@dataclass(frozen=True)
class BohrSpectrum:
    """Clustered gaps of a spectrum.

    frequencies: sorted cluster representatives (means), symmetric about 0.
    pairs: for each frequency, an (m, 2) index array of (i, j) with
           lambda_i - lambda_j in that cluster.  The pair lists partition all
           dim^2 ordered pairs.
    """

    frequencies: np.ndarray
    pairs: tuple
    tol: float

    def index_of(self, nu):
        """Cluster index matching nu within tol, or None."""
        k = int(np.argmin(np.abs(self.frequencies - nu)))
        if abs(self.frequencies[k] - nu) <= self.tol:
            return k
        return None


def eig_hermitian(m):
    """Eigendecomposition of a Hermitian matrix, validated.

    Raises ResourceCapError beyond the 4096 dimension cap and ValueError if
    the input is not Hermitian within 1e-10 * ||m||_inf_entrywise.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("square matrix required")
    if m.shape[0] > DIM_CAP:
        raise ResourceCapError(
            f"dense eigensolver capped at dimension {DIM_CAP}, got {m.shape[0]}"
        )
    scale = max(1.0, np.abs(m).max())
    if np.abs(m - m.conj().T).max() > 1e-10 * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh(m)
    return SpectralDecomposition(w, v)


def default_gap_tol(dec: SpectralDecomposition):
    """Default Bohr clustering tolerance, 1e-9 * max(1, ||H||_inf)."""
    norm = float(np.max(np.abs(dec.eigenvalues))) if dec.dim else 0.0
    return 1e-9 * max(1.0, norm)


def _cluster_sorted(values, tol):
    """Single-linkage clustering of a sorted 1D array: break where the gap
    between consecutive values exceeds tol.  Returns (break_starts, means)."""
    if values.size == 0:
        return np.array([0]), np.array([])
    breaks = np.flatnonzero(np.diff(values) > tol) + 1
    starts = np.concatenate(([0], breaks))
    ends = np.concatenate((breaks, [values.size]))
    sums = np.add.reduceat(values, starts)
    means = sums / (ends - starts)
    return starts, means


def bohr_spectrum(dec: SpectralDecomposition, tol=None):
    """Cluster all pairwise gaps lambda_i - lambda_j into Bohr frequencies."""
    if tol is None:
        tol = default_gap_tol(dec)
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    lam = dec.eigenvalues
    d = lam.shape[0]
    gaps = (lam[:, None] - lam[None, :]).ravel()
    order = np.argsort(gaps, kind="stable")
    svals = gaps[order]
    starts, means = _cluster_sorted(svals, tol)
    ends = np.concatenate((starts[1:], [svals.size]))
    ii, jj = np.divmod(np.arange(d * d), d)
    pairs = []
    for s, e in zip(starts, ends):
        sel = order[s:e]
        pairs.append(np.stack((ii[sel], jj[sel]), axis=1))
    return BohrSpectrum(means, tuple(pairs), float(tol))


def snapped_gap_matrix(dec: SpectralDecomposition, tol=None):
    """The matrix nu[i, j] = lambda_i - lambda_j with every entry snapped to
    its Bohr-cluster mean, so that numerically degenerate gaps are exactly
    equal.  This is the workhorse behind jump-operator construction."""
    if tol is None:
        tol = default_gap_tol(dec)
    lam = dec.eigenvalues
    d = lam.shape[0]
    gaps = (lam[:, None] - lam[None, :]).ravel()
    order = np.argsort(gaps, kind="stable")
    svals = gaps[order]
    starts, means = _cluster_sorted(svals, tol)
    reps = np.repeat(means, np.diff(np.concatenate((starts, [svals.size]))))
    snapped = np.empty_like(gaps)
    snapped[order] = reps
    return snapped.reshape(d, d)


def frequency_component(a, dec: SpectralDecomposition, nu, tol=None):
    """A_nu = sum over pairs with lambda_i - lambda_j = nu of P_i A P_j.

    Equality is clustered: gaps within tol of each other count as one
    frequency.  A nu outside the Bohr spectrum yields the zero matrix.
    """
    if tol is None:
        tol = default_gap_tol(dec)
    a = np.asarray(a)
    if a.shape != (dec.dim, dec.dim):
        raise ValueError("operator dimension does not match the decomposition")
    snapped = snapped_gap_matrix(dec, tol)
    reps = np.unique(snapped)
    k = int(np.argmin(np.abs(reps - nu)))
    if abs(reps[k] - nu) > tol:
        return np.zeros_like(a, dtype=complex)
    mask = snapped == reps[k]
    at = dec.to_eigenbasis(a)
    return dec.from_eigenbasis(np.where(mask, at, 0.0))


def hermitian_function(dec: SpectralDecomposition, f):
    """V f(Lambda) V^dagger for a scalar function f of the eigenvalues."""
    fvals = np.asarray(f(dec.eigenvalues), dtype=complex)
    if fvals.shape != dec.eigenvalues.shape:
        fvals = np.array([f(x) for x in dec.eigenvalues], dtype=complex)
    if not np.all(np.isfinite(fvals)):
        raise FloatingPointError("function of eigenvalues overflowed; shift the spectrum first")
    v = dec.eigenvectors
    return (v * fvals[None, :]) @ v.conj().T
