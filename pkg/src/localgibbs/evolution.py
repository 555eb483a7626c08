"""Trotterized channel semigroup on density-matrix and statevector backends.

The deterministic product applies, in a fixed site order, the exact channel
exp(tau * sum_alpha L_{a,alpha}) of every site; the randomized variant draws
one alpha per site (once per trajectory or freshly each step) and applies
exp(rescale * tau * L_{a,alpha}), rescale = 3 by default so the trajectory
mean reproduces the full generator to first order in tau.

Randomness comes from the counter-based Philox4x64 generator keyed by
(seed, trajectory index), so trajectories are reproducible across platforms
and independent of execution order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg

from .dissipator import (
    DensityMatrix,
    TruncatedLindbladian,
    lindbladian_superop,
    _matvec_operator,
)
from .errors import ResourceCapError
from .superop import apply_superop_local, apply_unitary_sv, channel_expm, superop_cache_key

__all__ = [
    "TrotterPlan",
    "TrajectoryKey",
    "deterministic_trotter_evolve",
    "sample_trajectory",
    "mean_channel_estimate",
    "MeanChannelResult",
    "enumerate_mean_channel",
    "mean_channel_superop",
    "mixing_rate_estimate",
    "MixingEstimate",
]


@dataclass(frozen=True)
class TrotterPlan:
    """Discretization of exp(L t): t = steps * tau, fixed site order."""

    tau: float
    steps: int
    site_order: tuple = None
    draw_mode: str = "per_step"  # or "per_trajectory"
    rescale_factor: float = 3.0

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.steps < 0:
            raise ValueError("step count must be nonnegative")
        if self.draw_mode not in ("per_step", "per_trajectory"):
            raise ValueError("draw_mode must be per_step or per_trajectory")

    @property
    def time(self):
        return self.tau * self.steps

    def order(self, n):
        return tuple(self.site_order) if self.site_order is not None else tuple(range(n))


@dataclass(frozen=True)
class TrajectoryKey:
    """Seed plus the alpha draws it determines (same seed => same draws).

    Streams are Philox4x64 keyed by (seed, 2 * index) for the draws and
    (seed, 2 * index + 1) for measurement sampling, where index labels the
    trajectory within a batch.
    """

    seed: int
    alphas: np.ndarray  # (steps, n) in per_step mode, (n,) in per_trajectory
    index: int = 0

    @classmethod
    def generate(cls, seed, plan: TrotterPlan, n, index=0):
        seed = int(seed) & (2 ** 64 - 1)
        rng = np.random.Generator(np.random.Philox(key=[seed, 2 * index]))
        shape = (plan.steps, n) if plan.draw_mode == "per_step" else (n,)
        return cls(seed, rng.integers(1, 4, size=shape), index)

    def measurement_rng(self):
        """Independent stream for ancilla-collapse sampling."""
        return np.random.Generator(
            np.random.Philox(key=[self.seed & (2 ** 64 - 1), 2 * self.index + 1])
        )

    def alpha(self, step, site):
        if self.alphas.ndim == 2:
            return int(self.alphas[step, site])
        return int(self.alphas[site])


def _site_channel(lind: TruncatedLindbladian, a, tau, alphas=(1, 2, 3)):
    """Dense channel superoperator exp(tau sum_{alpha in alphas} L_{a,alpha}),
    cached by content so translation-equivalent sites share one exponential.

    The jump/coherent pairs are rewritten in displacement-ordered support
    convention before hashing: on a uniform periodic lattice every site then
    hits the same cache entry, so one expm serves the whole register.
    """
    from .lattice import displacement_ordered_ball
    from .superop import reorder_qubits

    cache = getattr(lind, "_chan_cache", None)
    if cache is None:
        cache = {}
        lind._chan_cache = cache
    gens = [g for g in lind.site_generators(a) if g.alpha in alphas]
    disp = displacement_ordered_ball(lind.lattice, a, lind.r)
    key = (_patch_key(lind, a, disp), tuple(alphas), float(tau))
    if key not in cache:
        asc = gens[0].support.sites
        perm = [asc.index(s) for s in disp]
        pairs = [
            (reorder_qubits(g.lmat, perm), reorder_qubits(g.gmat, perm)) for g in gens
        ]
        cache[key] = channel_expm(pairs, pairs[0][0].shape[0], tau)
    return cache[key], disp


def _patch_key(lind: TruncatedLindbladian, a, disp):
    """Exact structural fingerprint of the site's generator family.

    Terms of the truncated patch in displacement coordinates determine the
    generators mathematically (given beta, r and envelope, which are constant
    across the object), so translation-equivalent sites collide on purpose.
    Generator norms are included to catch out-of-band modifications such as
    envelope renormalization applied after construction.
    """
    from .hamiltonian import truncate_hamiltonian

    slot = {s: i for i, s in enumerate(disp)}
    patch = truncate_hamiltonian(lind.hamiltonian, a, lind.r)
    terms = tuple(
        sorted(
            (tuple(sorted((slot[s], ax) for s, ax in t.factors)), t.coefficient)
            for t in patch.terms
        )
    )
    norms = tuple(
        round(float(np.linalg.norm(g.lmat)) + float(np.linalg.norm(g.gmat)), 9)
        for g in lind.site_generators(a)
    )
    return terms, slot[a], norms


def deterministic_trotter_evolve(lind, rho0, plan: TrotterPlan, callback=None):
    """[prod_a exp(tau sum_alpha L_{a,alpha})]^steps applied to rho0.

    callback(step_index, rho) is invoked after every full sweep, for time
    series collection.  Returns a valid DensityMatrix.
    """
    n = lind.n_sites
    rho = (rho0.matrix if isinstance(rho0, DensityMatrix) else rho0).astype(complex)
    order = plan.order(n)
    for step in range(plan.steps):
        for a in order:
            chan, sites = _site_channel(lind, a, plan.tau)
            rho = apply_superop_local(chan, rho, sites, n)
        if callback is not None:
            callback(step, rho)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    return DensityMatrix(rho)


def _gadget_unitary_cached(lind, a, alpha, tau_eff):
    from .gadget import gadget_unitary  # local import to avoid a cycle

    cache = getattr(lind, "_gadget_cache", None)
    if cache is None:
        cache = {}
        lind._gadget_cache = cache
    gen = next(g for g in lind.site_generators(a) if g.alpha == alpha)
    key = superop_cache_key(np.stack((gen.lmat, gen.gmat)), tau_eff)
    if key not in cache:
        cache[key] = gadget_unitary(gen.lmat, gen.gmat, tau_eff).matrix
    return cache[key], gen.support.sites


def sample_trajectory(lind, state0, plan: TrotterPlan, key: TrajectoryKey, callback=None):
    """One randomized trajectory.

    Density-matrix input evolves by the exact sampled channels
    exp(rescale * tau * L_{a,alpha}).  Statevector input realizes each sampled
    channel by its single-ancilla gadget unitary followed by an explicit
    ancilla measurement, discard and reset, which reproduces the channel in
    expectation.
    """
    n = lind.n_sites
    order = plan.order(n)
    tau_eff = plan.rescale_factor * plan.tau
    vec_backend = np.asarray(state0).ndim == 1 and not isinstance(state0, DensityMatrix)

    if vec_backend:
        psi = np.asarray(state0, dtype=complex).copy()
        rng = key.measurement_rng()
        for step in range(plan.steps):
            for a in order:
                alpha = key.alpha(step, a)
                u, sites = _gadget_unitary_cached(lind, a, alpha, tau_eff)
                ext = np.zeros((2,) + psi.shape, dtype=complex)
                ext[0] = psi
                ext = apply_unitary_sv(u, ext.reshape(-1), [0] + [1 + s for s in sites], n + 1)
                ext = ext.reshape(2, -1)
                p0 = float(np.vdot(ext[0], ext[0]).real)
                outcome = 0 if rng.random() < p0 else 1
                p = p0 if outcome == 0 else 1.0 - p0
                psi = ext[outcome] / np.sqrt(max(p, 1e-300))
            if callback is not None:
                callback(step, psi)
        return psi

    rho = (state0.matrix if isinstance(state0, DensityMatrix) else state0).astype(complex)
    for step in range(plan.steps):
        for a in order:
            alpha = key.alpha(step, a)
            chan, sites = _site_channel(lind, a, tau_eff, alphas=(alpha,))
            rho = apply_superop_local(chan, rho, sites, n)
        if callback is not None:
            callback(step, rho)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    return DensityMatrix(rho)


@dataclass
class MeanChannelResult:
    rho: DensityMatrix
    observables: dict
    n_traj: int


def mean_channel_estimate(lind, rho0, plan, n_traj, seed, observables=None):
    """Monte-Carlo mean over randomized trajectories (density-matrix backend).

    observables maps name -> dense matrix; each gets a (mean, standard error)
    pair estimated from the trajectory sample.  The reduction is performed in
    trajectory-index order, so results are deterministic in (seed, n_traj).
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    n = lind.n_sites
    observables = observables or {}
    acc = np.zeros((2 ** n, 2 ** n), dtype=complex)
    vals = {name: np.empty(n_traj) for name in observables}
    for i in range(n_traj):
        key = TrajectoryKey.generate(seed, plan, n, index=i)
        out = sample_trajectory(lind, rho0, plan, key).matrix
        acc += out
        for name, op in observables.items():
            vals[name][i] = np.trace(out @ op).real
    rho = acc / n_traj
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    stats = {}
    for name, v in vals.items():
        se = v.std(ddof=1) / np.sqrt(n_traj) if n_traj > 1 else np.inf
        stats[name] = (float(v.mean()), float(se))
    return MeanChannelResult(DensityMatrix(rho), stats, n_traj)


def enumerate_mean_channel(lind, rho0, plan):
    """Exact expectation over all 3^n per-trajectory alpha assignments.

    Brute-force oracle for small n; complements mean_channel_estimate.
    """
    if plan.draw_mode != "per_trajectory":
        raise ValueError("exhaustive enumeration applies to per_trajectory draws")
    n = lind.n_sites
    rho0 = rho0.matrix if isinstance(rho0, DensityMatrix) else rho0
    acc = np.zeros_like(rho0, dtype=complex)
    count = 0
    for assignment in itertools.product((1, 2, 3), repeat=n):
        key = TrajectoryKey(0, np.array(assignment))
        acc += sample_trajectory(lind, rho0, plan, key).matrix
        count += 1
    return DensityMatrix(acc / count)


def mean_channel_superop(lind, plan):
    """Dense superoperator of the expected randomized step, composed over all
    steps: [prod_a (1/3) sum_alpha exp(rescale tau L_{a,alpha})]^steps.

    Exact description of the per_step average; testing-scale only (n <= 3).
    """
    n = lind.n_sites
    if n > 3:
        raise ResourceCapError("mean channel superoperator capped at n = 3")
    from .lattice import Region
    from .dissipator import _embedded_pairs
    import scipy.linalg

    dim = 2 ** n
    region = Region(range(n))
    step = np.eye(dim * dim, dtype=complex)
    tau_eff = plan.rescale_factor * plan.tau
    for a in plan.order(n):
        site_mean = np.zeros((dim * dim, dim * dim), dtype=complex)
        for g in lind.site_generators(a):
            pairs = _embedded_pairs([g], region)
            from .superop import lindblad_superop

            site_mean += scipy.linalg.expm(tau_eff * lindblad_superop(pairs, dim))
        step = (site_mean / 3.0) @ step
    return np.linalg.matrix_power(step, plan.steps)


@dataclass
class MixingEstimate:
    rate: float
    t_mix: float
    gap: float
    fit_residual: float
    flagged: bool
    curves: list = field(default_factory=list)


def _trace_norm(m):
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def mixing_rate_estimate(lind, rho_pairs=None, t_grid=None, compute_gap=False):
    """Decay of ||e^{tL}(rho - rho')||_1 over a time grid.

    Fits a single exponential to the worst pair, reports the first-halving
    time t_mix, and flags clearly non-exponential decay.  Dense-superoperator
    quantities (the spectral gap) are only computed on request.
    """
    n = lind.n_sites
    if n > 7:
        raise ResourceCapError("mixing estimation uses the dense path, capped at n = 7")
    dim = 2 ** n
    if rho_pairs is None:
        lo = np.zeros((dim, dim), dtype=complex)
        lo[0, 0] = 1.0
        hi = np.zeros((dim, dim), dtype=complex)
        hi[-1, -1] = 1.0
        rng = np.random.Generator(np.random.Philox(key=[0xA11CE, 2]))
        v1 = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        v2 = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        v1 /= np.linalg.norm(v1)
        v2 /= np.linalg.norm(v2)
        rho_pairs = [(lo, hi), (np.outer(v1, v1.conj()), np.outer(v2, v2.conj()))]
    if t_grid is None:
        t_grid = np.linspace(0.0, 6.0, 25)
    t_grid = np.asarray(t_grid, dtype=float)
    op, tr = _matvec_operator(lind)

    curves = []
    for rho_a, rho_b in rho_pairs:
        delta = (rho_a - rho_b).astype(complex)
        if t_grid[0] != 0.0:
            raise ValueError("t_grid must start at 0")
        segs = scipy.sparse.linalg.expm_multiply(
            op, delta.reshape(-1), start=t_grid[0], stop=t_grid[-1],
            num=len(t_grid), endpoint=True, traceA=tr,
        )
        norms = np.array([_trace_norm(v.reshape(dim, dim)) for v in segs])
        curves.append(norms)

    # Worst-case (slowest) pair sets the mixing estimates.
    t_mix = 0.0
    rate, fit_residual = np.inf, 0.0
    for norms in curves:
        ok = norms > 1e-12 * norms[0]
        logs = np.log(norms[ok])
        ts = t_grid[ok]
        slope, intercept = np.polyfit(ts, logs, 1)
        resid = float(np.abs(logs - (slope * ts + intercept)).max())
        rate = min(rate, -slope)
        fit_residual = max(fit_residual, resid)
        # first halving, log-linear interpolation
        half = np.log(norms[0] / 2.0)
        below = np.flatnonzero(logs <= half)
        if below.size == 0:
            t_half = np.inf
        elif below[0] == 0:
            t_half = 0.0
        else:
            i = below[0]
            frac = (half - logs[i - 1]) / (logs[i] - logs[i - 1])
            t_half = ts[i - 1] + frac * (ts[i] - ts[i - 1])
        t_mix = max(t_mix, t_half)

    gap = np.nan
    if compute_gap:
        s = lindbladian_superop(lind)
        ev = np.linalg.eigvals(s)
        nonzero = ev[np.abs(ev) > 1e-9]
        gap = float(-np.max(nonzero.real)) if nonzero.size else np.nan

    return MixingEstimate(
        rate=float(rate),
        t_mix=float(t_mix),
        gap=gap,
        fit_residual=fit_residual,
        flagged=bool(fit_residual > 0.2),
        curves=curves,
    )
