"""Pauli-string Hamiltonians, the four benchmark spin models, and spatial truncation.

Conventions fixed here and used everywhere else in the package:

* Spin operators are half-Paulis, S = sigma/2, so model coefficients carry
  explicit 1/4 and 1/2 factors.
* Dense matrices are written in the tensor basis ordered by the canonical
  (ascending) site order of the declared support, first site = most
  significant bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import Lattice, Region, ball

__all__ = [
    "PAULIS",
    "PauliString",
    "LocalHamiltonian",
    "build_model",
    "truncate_hamiltonian",
    "to_dense",
    "pauli_string_matrix",
    "pauli_expectation_rho",
    "pauli_expectation_psi",
    "apply_pauli_psi",
]

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

PAULIS = {"I": _I2, "X": _X, "Y": _Y, "Z": _Z}


@dataclass(frozen=True)
class PauliString:
    """A real multiple of a tensor product of Pauli factors.

    factors maps site -> axis label in {X, Y, Z}; identity factors are
    implicit.  The coefficient is real so the string is Hermitian.
    """

    coefficient: float
    factors: tuple  # sorted tuple of (site, axis)

    def __init__(self, coefficient, factors):
        coefficient = float(coefficient)
        if isinstance(factors, dict):
            factors = factors.items()
        factors = tuple(sorted((int(s), str(ax).upper()) for s, ax in factors))
        sites = [s for s, _ in factors]
        if len(sites) != len(set(sites)):
            raise ValueError("duplicate site in Pauli string")
        if any(ax not in ("X", "Y", "Z") for _, ax in factors):
            raise ValueError("factors must be X, Y or Z")
        if not factors:
            raise ValueError("identity strings are not representable; fold them into scalars")
        object.__setattr__(self, "coefficient", coefficient)
        object.__setattr__(self, "factors", factors)

    @property
    def support(self):
        return Region(s for s, _ in self.factors)

    def axes(self):
        return dict(self.factors)


@dataclass(frozen=True)
class LocalHamiltonian:
    """A sum of Pauli strings on a lattice, with a declared support region."""

    lattice: Lattice
    terms: tuple
    support: Region = None

    def __init__(self, lattice, terms, support=None):
        terms = tuple(terms)
        if support is None:
            support = Region(lattice.sites())
        for t in terms:
            if not t.support.issubset(support):
                raise ValueError(f"term {t} leaves the declared support {support.sites}")
        object.__setattr__(self, "lattice", lattice)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "support", support)

    @property
    def n_sites(self):
        return self.lattice.n_sites

    def locality(self):
        """Maximum term support size (the k of (k,l)-locality)."""
        return max((len(t.support) for t in self.terms), default=0)


def _nearest_neighbor_edges(lat: Lattice):
    """Unordered nearest-neighbor pairs; the wrap edge on a 2-site periodic
    axis coincides with the open edge and is counted once."""
    edges = set()
    for a in lat.sites():
        ca = lat.coords(a)
        for axis, (e, p) in enumerate(zip(lat.extents, lat.periodic)):
            if e == 1:
                continue
            c = list(ca)
            c[axis] += 1
            if c[axis] >= e:
                if not p:
                    continue
                c[axis] -= e
            b = lat.site(tuple(c))
            if a != b:
                edges.add((min(a, b), max(a, b)))
    return sorted(edges)


_MODEL_DEFAULTS = {
    "mfi": {"g": (np.sqrt(5.0) + 5.0) / 8.0, "h": (np.sqrt(5.0) + 1.0) / 4.0},
    "tfi1d": {"g": 0.6},
    "xxz": {"delta": 0.6},
    "tfim2d": {"g": 0.2},
}


def build_model(name, lat: Lattice, params=None):
    """Build one of the benchmark models with spin-1/2 operators S = sigma/2.

    mfi:    sum_<ij> Sz Sz + g sum Sx + h sum Sz          (1D)
    tfi1d:  sum_<ij> Sz Sz + g sum Sx                     (1D)
    xxz:    sum_<ij> (Sx Sx + Sy Sy) + delta sum_<ij> Sz Sz  (1D)
    tfim2d: sum_<ij> Sz Sz + g sum Sx                     (2D)

    Unknown keys in params are rejected.
    """
    name = str(name).lower()
    if name not in _MODEL_DEFAULTS:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(_MODEL_DEFAULTS)}")
    if name == "tfim2d":
        if lat.dimension != 2:
            raise ValueError("tfim2d requires a 2-dimensional lattice")
    elif lat.dimension != 1:
        raise ValueError(f"{name} is a spin-chain model and requires a 1D lattice")
    p = dict(_MODEL_DEFAULTS[name])
    for key, val in (params or {}).items():
        if key not in p:
            raise ValueError(f"unknown parameter {key!r} for model {name}")
        p[key] = float(val)

    edges = _nearest_neighbor_edges(lat)
    terms = []
    if name in ("mfi", "tfi1d", "tfim2d"):
        for a, b in edges:
            terms.append(PauliString(0.25, {a: "Z", b: "Z"}))
        for a in lat.sites():
            terms.append(PauliString(0.5 * p["g"], {a: "X"}))
        if name == "mfi":
            for a in lat.sites():
                terms.append(PauliString(0.5 * p["h"], {a: "Z"}))
    elif name == "xxz":
        for a, b in edges:
            terms.append(PauliString(0.25, {a: "X", b: "X"}))
            terms.append(PauliString(0.25, {a: "Y", b: "Y"}))
            terms.append(PauliString(0.25 * p["delta"], {a: "Z", b: "Z"}))
    return LocalHamiltonian(lat, terms)


def truncate_hamiltonian(h: LocalHamiltonian, a, r):
    """H_{a,r}: the sum of all terms supported inside the ball B_a(r).

    The declared support of the result is the full ball, so sites that only
    carry field terms (or none at all) still count as part of the patch.
    """
    patch = ball(h.lattice, a, r)
    kept = [t for t in h.terms if t.support.issubset(patch)]
    return LocalHamiltonian(h.lattice, kept, support=patch)


def pauli_string_matrix(ps: PauliString, region: Region):
    """Dense matrix of a Pauli string on the given region (msb = first site)."""
    if not ps.support.issubset(region):
        raise ValueError("string support not contained in the target region")
    axes = ps.axes()
    mat = np.array([[ps.coefficient]], dtype=complex)
    for s in region:
        mat = np.kron(mat, PAULIS[axes.get(s, "I")])
    return mat


def to_dense(h: LocalHamiltonian, region: Region = None):
    """Dense Hermitian matrix of the Hamiltonian on `region` (default: its
    declared support), in the canonical tensor ordering."""
    if region is None:
        region = h.support
    dim = 2 ** len(region)
    out = np.zeros((dim, dim), dtype=complex)
    for t in h.terms:
        out += pauli_string_matrix(t, region)
    return out


def _pauli_masks(n, sites, axes):
    """Flip mask and per-basis-state phases of a bare Pauli string on n qubits.

    Site 0 is the most significant bit.  Returns (flip, phase) with
    P|i> = phase[i] |i ^ flip>.
    """
    flip = 0
    idx = np.arange(2 ** n)
    phase = np.ones(2 ** n, dtype=complex)
    for s, ax in zip(sites, axes):
        bit = 1 << (n - 1 - s)
        b = (idx & bit) != 0
        if ax == "X":
            flip ^= bit
        elif ax == "Y":
            flip ^= bit
            phase = phase * np.where(b, -1.0j, 1.0j)
        elif ax == "Z":
            phase = phase * np.where(b, -1.0, 1.0)
        else:
            raise ValueError(f"bad axis {ax}")
    return flip, phase


def pauli_expectation_rho(rho, sites, axes, n=None):
    """tr(rho P) for a bare (coefficient-free) Pauli string P."""
    if n is None:
        n = int(round(np.log2(rho.shape[0])))
    flip, phase = _pauli_masks(n, sites, axes)
    idx = np.arange(2 ** n)
    return complex(np.sum(rho[idx, idx ^ flip] * phase))


def apply_pauli_psi(psi, sites, axes, n=None):
    """P |psi> for a bare Pauli string."""
    if n is None:
        n = int(round(np.log2(psi.shape[0])))
    flip, phase = _pauli_masks(n, sites, axes)
    out = np.empty_like(psi)
    idx = np.arange(2 ** n)
    out[idx ^ flip] = phase * psi
    return out


def pauli_expectation_psi(psi, sites, axes, n=None):
    """<psi| P |psi> for a bare Pauli string."""
    return complex(np.vdot(psi, apply_pauli_psi(psi, sites, axes, n)))
