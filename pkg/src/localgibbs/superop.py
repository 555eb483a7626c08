"""Superoperator plumbing: vectorization, local embedding, channel exponentials.

Vectorization is row-major (C order): vec(rho) = rho.reshape(-1), and
vec(A rho B) = (A kron B^T) vec(rho).  Local operators and superoperators act
on a tuple of support sites; embedding into the full register is done by axis
permutation of the state viewed as a (2,)*2n tensor, so no full-space dense
operators are ever formed on the hot paths.
"""

from __future__ import annotations

import hashlib

import numpy as np
import scipy.linalg

__all__ = [
    "kron_superop",
    "lindblad_superop",
    "heisenberg_superop",
    "channel_expm",
    "apply_superop_local",
    "apply_left_local",
    "apply_right_local",
    "apply_unitary_sv",
    "embed_operator",
    "partial_trace",
    "trace_out_sites",
    "one_one_upper_bound",
    "superop_to_choi",
    "kraus_to_superop",
]


def kron_superop(a, b):
    """Superoperator of rho -> A rho B in row-major vectorization."""
    return np.kron(a, b.T)


def lindblad_superop(pairs, dim):
    """Dense superoperator of sum_k (-i[G_k, .] + L_k . L_k^+ - 1/2 {L_k^+ L_k, .}).

    pairs: iterable of (L, G) on a common dim; either entry may be None.
    """
    eye = np.eye(dim, dtype=complex)
    s = np.zeros((dim * dim, dim * dim), dtype=complex)
    for lmat, gmat in pairs:
        if lmat is not None:
            ldl = lmat.conj().T @ lmat
            s += kron_superop(lmat, lmat.conj().T)
            s -= 0.5 * (kron_superop(ldl, eye) + kron_superop(eye, ldl))
        if gmat is not None:
            s += -1.0j * (kron_superop(gmat, eye) - kron_superop(eye, gmat))
    return s


def heisenberg_superop(pairs, dim):
    """Adjoint (Heisenberg) superoperator, sum_k (i[G_k, .] + L^+ . L - 1/2 {L^+L, .}).

    This is the adjoint with respect to <A, B> = tr(A^+ B) / dim (the
    normalization drops out of the adjoint relation).
    """
    eye = np.eye(dim, dtype=complex)
    s = np.zeros((dim * dim, dim * dim), dtype=complex)
    for lmat, gmat in pairs:
        if lmat is not None:
            ldl = lmat.conj().T @ lmat
            s += kron_superop(lmat.conj().T, lmat)
            s -= 0.5 * (kron_superop(ldl, eye) + kron_superop(eye, ldl))
        if gmat is not None:
            s += 1.0j * (kron_superop(gmat, eye) - kron_superop(eye, gmat))
    return s


_EXPM_DENSE_DIM = 64  # superoperator expm is dense up to 64^2 = 4096


def _apply_pairs_batched(pairs, x):
    """Lindblad generator applied to a batch x of matrices, shape (..., d, d)."""
    out = np.zeros_like(x)
    for lmat, gmat in pairs:
        if lmat is not None:
            ldl = lmat.conj().T @ lmat
            out += np.matmul(np.matmul(lmat, x), lmat.conj().T)
            half = np.matmul(ldl, x)
            out -= 0.5 * (half + np.matmul(x, ldl))
        if gmat is not None:
            out += -1.0j * (np.matmul(gmat, x) - np.matmul(x, gmat))
    return out


def channel_expm(pairs, dim, tau):
    """Dense superoperator of exp(tau * L) for the Lindbladian built from pairs.

    Small supports go through scipy.linalg.expm on the dense superoperator;
    larger ones use a Taylor series applied column-batched in factored form,
    which avoids any matmul at the squared dimension.  The factored route
    requires tau * ||L|| to stay moderate, which holds for the step sizes this
    package uses; it verifies convergence and raises otherwise.
    """
    if dim <= _EXPM_DENSE_DIM:
        return scipy.linalg.expm(tau * lindblad_superop(pairs, dim))
    # Batched Taylor on the matrix units, chunked so the working set stays a
    # few hundred MB even for 7-site supports.
    out = np.empty((dim * dim, dim * dim), dtype=complex)
    chunk = max(1, (1 << 21) // dim)
    max_terms = 120
    for start in range(0, dim * dim, chunk):
        stop = min(start + chunk, dim * dim)
        cols = np.arange(start, stop)
        basis = np.zeros((stop - start, dim, dim), dtype=complex)
        basis[np.arange(stop - start), cols // dim, cols % dim] = 1.0
        term = basis
        acc = basis.copy()
        for k in range(1, max_terms + 1):
            term = (tau / k) * _apply_pairs_batched(pairs, term)
            acc += term
            if np.abs(term).max() <= 1e-16 * max(1.0, np.abs(acc).max()):
                break
        else:
            raise RuntimeError(
                "channel Taylor series did not converge; reduce the step size"
            )
        # acc[(i,j), a, b] = [exp(tau L)(E_ij)]_{ab}; superop rows are (a, b).
        out[:, start:stop] = acc.transpose(1, 2, 0).reshape(dim * dim, stop - start)
    return out


def superop_cache_key(mat, tau):
    """Content hash used to share channel exponentials between lattice sites."""
    h = hashlib.sha1()
    h.update(np.ascontiguousarray(mat).tobytes())
    h.update(repr(float(tau)).encode())
    return h.hexdigest()


def _move_sites_front(tensor, sites, n, ket_too=True):
    src = list(sites) + ([n + s for s in sites] if ket_too else [])
    return np.moveaxis(tensor, src, range(len(src))), src


def apply_superop_local(superop, rho, sites, n):
    """Apply a superoperator defined on `sites` to an n-qubit density matrix.

    The superoperator must be given in row-major vectorization over the
    support, with tensor factors ordered exactly as `sites`.
    """
    k = len(sites)
    ds = 2 ** k
    t = rho.reshape((2,) * (2 * n))
    t, src = _move_sites_front(t, sites, n)
    shape = t.shape
    y = superop @ t.reshape(ds * ds, -1)
    t = np.moveaxis(y.reshape(shape), range(2 * k), src)
    return np.ascontiguousarray(t).reshape(rho.shape)


def apply_left_local(op, rho, sites, n):
    """(op embedded on sites) @ rho."""
    k = len(sites)
    ds = 2 ** k
    t = rho.reshape((2,) * (2 * n))
    t, src = _move_sites_front(t, sites, n, ket_too=False)
    shape = t.shape
    y = op @ t.reshape(ds, -1)
    t = np.moveaxis(y.reshape(shape), range(k), src)
    return np.ascontiguousarray(t).reshape(rho.shape)


def apply_right_local(op, rho, sites, n):
    """rho @ (op embedded on sites)."""
    k = len(sites)
    ds = 2 ** k
    t = rho.reshape((2,) * (2 * n))
    src = [n + s for s in sites]
    t = np.moveaxis(t, src, range(k))
    shape = t.shape
    y = op.T @ t.reshape(ds, -1)
    t = np.moveaxis(y.reshape(shape), range(k), src)
    return np.ascontiguousarray(t).reshape(rho.shape)


def apply_unitary_sv(u, psi, sites, n):
    """Apply a unitary on `sites` to an n-qubit statevector."""
    k = len(sites)
    ds = 2 ** k
    t = psi.reshape((2,) * n)
    t = np.moveaxis(t, sites, range(k))
    shape = t.shape
    y = u @ t.reshape(ds, -1)
    t = np.moveaxis(y.reshape(shape), range(k), sites)
    return np.ascontiguousarray(t).reshape(psi.shape)


def reorder_qubits(mat, perm):
    """Rewrite an operator on k qubits under a relabeling of tensor factors.

    perm[i] = old tensor slot that becomes new slot i.
    """
    k = len(perm)
    t = mat.reshape((2,) * (2 * k))
    src = list(perm) + [k + p for p in perm]
    t = np.moveaxis(t, src, range(2 * k))
    return np.ascontiguousarray(t).reshape(mat.shape)


def embed_operator(op, sites, n):
    """Dense 2^n matrix of an operator given on `sites` (testing-scale only)."""
    k = len(sites)
    rest = n - k
    full = np.kron(op, np.eye(2 ** rest, dtype=complex))
    t = full.reshape((2,) * (2 * n))
    # Current axis order: sites..., others...; move to canonical positions.
    others = [s for s in range(n) if s not in sites]
    cur = list(sites) + others
    src_bra = list(range(n))
    dst_bra = [cur[i] for i in range(n)]
    perm = src_bra + [n + i for i in src_bra]
    dest = dst_bra + [n + d for d in dst_bra]
    t = np.moveaxis(t, perm, dest)
    return np.ascontiguousarray(t).reshape(full.shape)


def partial_trace(rho, keep, n):
    """Reduced density matrix on the (ascending) site tuple `keep`."""
    keep = list(keep)
    k = len(keep)
    t = rho.reshape((2,) * (2 * n))
    t, _ = _move_sites_front(t, keep, n)
    ds = 2 ** k
    t = t.reshape(ds, ds, 2 ** (n - k), 2 ** (n - k))
    return np.trace(t, axis1=2, axis2=3)


def trace_out_sites(rho, drop, n):
    """Trace out the sites in `drop`, keeping the rest (in ascending order)."""
    keep = [s for s in range(n) if s not in set(drop)]
    return partial_trace(rho, keep, n)


def one_one_upper_bound(superop, dim):
    """Rigorous upper bound on the induced 1->1 norm of a superoperator.

    For any X with trace norm 1, X = sum_ij c_ij E_ij with sum |c_ij| <= dim,
    so ||S||_{1->1} <= dim * max_ij ||S(E_ij)||_1.
    """
    worst = 0.0
    for col in range(dim * dim):
        m = superop[:, col].reshape(dim, dim)
        worst = max(worst, np.linalg.norm(np.linalg.svd(m, compute_uv=False), 1))
    return dim * worst


def kraus_to_superop(kraus_ops):
    """Superoperator sum_k K . K^+ of a Kraus family (K may be rectangular)."""
    d_out, d_in = kraus_ops[0].shape
    s = np.zeros((d_out * d_out, d_in * d_in), dtype=complex)
    for k in kraus_ops:
        s += kron_superop(k, k.conj().T)
    return s


def superop_to_choi(superop, d_in):
    """Choi matrix J = (1/d_in) sum_ij |i><j| (x) C(|i><j|) from a superoperator."""
    d_out2 = superop.shape[0]
    d_out = int(round(np.sqrt(d_out2)))
    # superop[(a,b), (i,j)] -> J[(i,a), (j,b)]
    t = superop.reshape(d_out, d_out, d_in, d_in)
    j = t.transpose(2, 0, 3, 1).reshape(d_in * d_out, d_in * d_out)
    return j / d_in
