"""Square-lattice geometry: graph distance, balls, and boundary distances.

Sites of a D-dimensional lattice with extents (n_1, ..., n_D) are indexed
0 .. n-1 in row-major order (last axis fastest).  The graph distance is the
Manhattan distance, with per-axis wraparound on periodic axes.  All objects
are immutable and all functions are pure.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

__all__ = [
    "Lattice",
    "Region",
    "graph_distance",
    "ball",
    "boundary_distance",
    "displacement_ordered_ball",
]


@dataclass(frozen=True)
class Lattice:
    """A finite D-dimensional square lattice of qubits.

    extents: per-axis site counts, product equals the qubit number n.
    periodic: per-axis wraparound flags (a single bool applies to all axes).
    """

    extents: tuple
    periodic: tuple

    def __init__(self, extents, periodic=True):
        extents = tuple(int(e) for e in extents)
        if not extents or any(e < 1 for e in extents):
            raise ValueError(f"extents must be positive integers, got {extents}")
        if isinstance(periodic, bool):
            periodic = (periodic,) * len(extents)
        periodic = tuple(bool(p) for p in periodic)
        if len(periodic) != len(extents):
            raise ValueError("one periodic flag per axis required")
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "periodic", periodic)

    @property
    def dimension(self):
        return len(self.extents)

    @property
    def n_sites(self):
        return math.prod(self.extents)

    def coords(self, site):
        """Row-major coordinates of a site index."""
        self._check_site(site)
        out = []
        for e in reversed(self.extents):
            out.append(site % e)
            site //= e
        return tuple(reversed(out))

    def site(self, coords):
        """Inverse of coords()."""
        if len(coords) != self.dimension:
            raise ValueError("coordinate arity mismatch")
        idx = 0
        for c, e in zip(coords, self.extents):
            if not 0 <= c < e:
                raise ValueError(f"coordinate {coords} outside extents {self.extents}")
            idx = idx * e + c
        return idx

    def sites(self):
        return range(self.n_sites)

    @property
    def diameter(self):
        """Largest graph distance between any two sites."""
        return sum((e // 2) if p else (e - 1) for e, p in zip(self.extents, self.periodic))

    def _check_site(self, a):
        if not 0 <= a < self.n_sites:
            raise ValueError(f"site index {a} out of range 0..{self.n_sites - 1}")


@dataclass(frozen=True)
class Region:
    """An ordered set of site indices, canonically ascending and deduplicated."""

    sites: tuple

    def __init__(self, sites):
        sites = tuple(sorted(set(int(s) for s in sites)))
        if any(s < 0 for s in sites):
            raise ValueError("negative site index")
        object.__setattr__(self, "sites", sites)

    def __len__(self):
        return len(self.sites)

    def __iter__(self):
        return iter(self.sites)

    def __contains__(self, s):
        return s in self.sites

    def issubset(self, other):
        return set(self.sites) <= set(other.sites)

    def index(self, site):
        """Position of a site in the canonical order (tensor-factor slot)."""
        return self.sites.index(site)


def _axis_distance(da, extent, periodic):
    da = abs(da)
    return min(da, extent - da) if periodic else da


def graph_distance(lat: Lattice, a, b):
    """Manhattan distance between sites a and b, wrapping periodic axes."""
    ca, cb = lat.coords(a), lat.coords(b)
    return sum(
        _axis_distance(x - y, e, p)
        for x, y, e, p in zip(ca, cb, lat.extents, lat.periodic)
    )


def ball(lat: Lattice, a, r):
    """The set B_a(r) of sites within graph distance r of a, as a Region."""
    lat._check_site(a)
    if r < 0:
        raise ValueError("radius must be nonnegative")
    ca = lat.coords(a)
    # Per-axis admissible offsets, then prune by total distance.
    per_axis = []
    for x, e, p in zip(ca, lat.extents, lat.periodic):
        offs = set()
        for d in range(-min(r, e - 1), min(r, e - 1) + 1):
            y = x + d
            if p:
                y %= e
            elif not 0 <= y < e:
                continue
            offs.add(y)
        per_axis.append(sorted(offs))
    members = []
    for coords in itertools.product(*per_axis):
        d = sum(
            _axis_distance(x - y, e, p)
            for x, y, e, p in zip(ca, coords, lat.extents, lat.periodic)
        )
        if d <= r:
            members.append(lat.site(coords))
    return Region(members)


def displacement_ordered_ball(lat: Lattice, a, r):
    """Sites of B_a(r) ordered by displacement from a (lex order, wrapped
    into the symmetric window on periodic axes).

    Unlike the canonical ascending order of Region, this ordering is
    translation covariant: on a uniform periodic lattice the same local
    operator matrix serves every center site.  Used by the gadget/compilation
    pipeline; plain Regions everywhere else.
    """
    ca = lat.coords(a)
    members = []
    for b in ball(lat, a, r):
        cb = lat.coords(b)
        disp = []
        for x, y, e, p in zip(ca, cb, lat.extents, lat.periodic):
            d = y - x
            if p:
                d = (d + e // 2) % e - e // 2
            disp.append(d)
        members.append((tuple(disp), b))
    members.sort()
    return tuple(b for _, b in members)


def boundary_distance(lat: Lattice, region: Region):
    """Minimal graph distance from the region to any site outside the lattice.

    Only open axes have an exterior; a fully periodic lattice has none and the
    sentinel math.inf is returned.
    """
    if len(region) == 0:
        raise ValueError("boundary distance of an empty region")
    if all(lat.periodic):
        return math.inf
    best = math.inf
    for a in region:
        ca = lat.coords(a)
        for x, e, p in zip(ca, lat.extents, lat.periodic):
            if p:
                continue
            best = min(best, x + 1, e - x)
    return best
