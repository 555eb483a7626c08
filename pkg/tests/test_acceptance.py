"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Every tolerance is pinned here, straight from the criteria list.  Status of
the non-green entries:

* criterion 4 runs its stated n = 8 size by default; the n = 12 variant of the
  same check is executed when LOCALGIBBS_FULL_SCALE=1 is set;
* criterion 7 pins n = 12 with a radius-3 patch (7-qubit channels), which is
  far beyond a desk-scale single-core budget; by default it SKIPS with an
  explicit explanation and runs faithfully under LOCALGIBBS_FULL_SCALE=1.
  A scaled-down variant of the same pipeline runs unconditionally;
* criterion 9's deep-vs-shallow clause is asserted faithfully and FAILS
  honestly: the m = 2 template cannot express the cooling gadgets, so its
  compile-error floor pins it near saturation at every noise rate (full
  analysis in the decisions ledger); test 9b demonstrates the underlying
  physics on depths the template does express.
"""

import os

import numpy as np
import pytest
import scipy.linalg

from localgibbs.compiler import AdamConfig, compile_gadget, ladder_template
from localgibbs.dissipator import (
    DensityMatrix,
    build_lindbladian,
    depolarizing_superop,
    gibbs_state,
    kms_residual,
    lindbladian_superop,
    local_kms_residuals,
    steady_state,
)
from localgibbs.evolution import (
    TrotterPlan,
    deterministic_trotter_evolve,
    mean_channel_superop,
    mixing_rate_estimate,
)
from localgibbs.gadget import channel_distance_lemma1
from localgibbs.hamiltonian import build_model, to_dense
from localgibbs.lattice import Lattice
from localgibbs.noise import DepolarizingModel, gadget_targets, noisy_trajectory_run
from localgibbs.observables import (
    energy_expectation,
    heat_capacity,
    two_point_correlator,
)
from localgibbs.superop import one_one_upper_bound

FULL_SCALE = os.environ.get("LOCALGIBBS_FULL_SCALE", "") == "1"


def _report(criterion, ok, detail):
    print(f"\nACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def trace_norm(m):
    return float(np.sum(np.abs(np.linalg.eigvalsh(m))))


def test_01_kms_detailed_balance():
    h = build_model("mfi", Lattice([3]))
    worst_full = 0.0
    for beta in (0.2, 0.5, 1.0):
        lind = build_lindbladian(h, beta, 1)  # r = diameter: untruncated
        worst_full = max(worst_full, kms_residual(lind))
    h5 = build_model("mfi", Lattice([5]))
    worst_local = 0.0
    for beta in (0.2, 0.5, 1.0):
        lind5 = build_lindbladian(h5, beta, 1)
        worst_local = max(worst_local, float(local_kms_residuals(lind5).max()))
    ok = worst_full <= 1e-8 and worst_local <= 1e-8
    _report(1, ok, f"untruncated residual {worst_full:.2e}, per-term {worst_local:.2e} (<= 1e-8)")


def test_02_beta0_depolarizing_limit():
    h = build_model("mfi", Lattice([2]))
    lind = build_lindbladian(h, 0.0, 1)
    dist = one_one_upper_bound(lindbladian_superop(lind) - depolarizing_superop(2), 4)
    _report(2, dist <= 1e-10, f"1->1 distance to depolarizing generator {dist:.2e} (<= 1e-10)")


def test_03_fixed_point_correctness():
    # (a) r >= diameter reproduces the Gibbs state on n <= 6
    worst = 0.0
    for n in (4, 6):
        lat = Lattice([n])
        h = build_model("mfi", lat)
        lind = build_lindbladian(h, 1.0, lat.diameter)
        d = trace_norm(steady_state(lind).matrix - gibbs_state(h, 1.0).matrix)
        worst = max(worst, d)
    ok_a = worst <= 1e-6
    # (b) truncation distance nonincreasing in r on n = 8 for beta in {1, 3}
    h8 = build_model("mfi", Lattice([8]))
    ok_b = True
    details = []
    for beta in (1.0, 3.0):
        rb = gibbs_state(h8, beta)
        dists = []
        for r in (1, 2, 3):
            lind = build_lindbladian(h8, beta, r)
            ss = steady_state(lind, residual_target=1e-7, max_time=4000.0, rho0=rb)
            dists.append(trace_norm(ss.matrix - rb.matrix))
        details.append(f"beta={beta}: " + " >= ".join(f"{d:.2e}" for d in dists))
        ok_b = ok_b and dists[0] >= dists[1] >= dists[2]
    _report(3, ok_a and ok_b, f"r>=diam dist {worst:.2e} (<= 1e-6); " + "; ".join(details))


def test_04_energy_convergence_figure2a():
    sizes = [8, 12] if FULL_SCALE else [8]
    details = []
    ok = True
    for n in sizes:
        h = build_model("mfi", Lattice([n]))
        lind = build_lindbladian(h, 1.0, 1)
        plan = TrotterPlan(tau=0.1, steps=500)  # t = 50
        rho = deterministic_trotter_evolve(lind, DensityMatrix.maximally_mixed(n), plan)
        e = energy_expectation(rho, h) / n
        e_ref = energy_expectation(gibbs_state(h, 1.0), h) / n
        rel = abs(e - e_ref) / abs(e_ref)
        details.append(f"n={n}: dE/|E| = {rel:.2e}")
        ok = ok and rel <= 2e-2
    _report(4, ok, "; ".join(details) + " (<= 2e-2)")


def test_05_randomized_trotter_scaling():
    h = build_model("mfi", Lattice([2]))
    lind = build_lindbladian(h, 0.5, 1)
    s_exact = scipy.linalg.expm(2.0 * lindbladian_superop(lind))
    ms = np.array([4, 8, 16, 32])
    errs = []
    for m in ms:
        s_mean = mean_channel_superop(lind, TrotterPlan(tau=2.0 / m, steps=int(m)))
        errs.append(np.linalg.norm(s_mean - s_exact, 2))
    slope = np.polyfit(np.log(ms), np.log(errs), 1)[0]
    _report(5, abs(slope + 1.0) <= 0.3, f"log error vs log M slope {slope:.3f} (-1 +- 0.3)")


def test_06_gadget_error_scaling():
    h = build_model("mfi", Lattice([8]))
    lind = build_lindbladian(h, 1.0, 1)
    gen = next(g for g in lind.site_generators(3) if g.alpha == 1)
    taus = np.geomspace(0.02, 0.5, 6)
    errs = [channel_distance_lemma1(gen.lmat, gen.gmat, t) for t in taus]
    slope = np.polyfit(np.log(taus), np.log(errs), 1)[0]
    _report(6, abs(slope - 2.0) <= 0.3, f"log error vs log tau slope {slope:.3f} (2 +- 0.3)")


def _correlator_comparison(n, beta, radii, ells, tau=0.1, t=10.0):
    h = build_model("mfi", Lattice([n]))
    rb = gibbs_state(h, beta)
    mid = n // 2
    exact = {ell: two_point_correlator(rb, mid, (mid + ell) % n) for ell in ells}
    devs = {}
    for r in radii:
        lind = build_lindbladian(h, beta, r)
        plan = TrotterPlan(tau=tau, steps=int(round(t / tau)))
        rho = deterministic_trotter_evolve(lind, DensityMatrix.maximally_mixed(n), plan)
        devs[r] = max(
            abs(two_point_correlator(rho, mid, (mid + ell) % n) - exact[ell])
            for ell in ells
        )
    return devs


def test_07_correlator_profile_figure4():
    if not FULL_SCALE:
        pytest.skip(
            "criterion 7 pins n=12 with radius-3 patches (7-qubit channels, "
            "~1e15 flops); infeasible on this single-core host in its 30 min "
            "budget - set LOCALGIBBS_FULL_SCALE=1 to run it faithfully; the "
            "scaled-down variant below exercises the same pipeline"
        )
    devs = _correlator_comparison(12, 3.0, (1, 3), range(1, 6))
    ok = devs[3] <= 5e-3 and devs[1] > devs[3]
    _report(7, ok, f"max|corr dev| r=3: {devs[3]:.2e} (<= 5e-3), r=1: {devs[1]:.2e} (larger)")


def test_07b_correlator_profile_scaled():
    """Desk-scale stand-in for criterion 7: same pipeline at n=8, beta=1.5."""
    devs = _correlator_comparison(8, 1.5, (1, 2), (1, 2, 3))
    ok = devs[2] <= 5e-3 and devs[1] > devs[2]
    _report("7b", ok, f"max|corr dev| r=2: {devs[2]:.2e} (<= 5e-3), r=1: {devs[1]:.2e} (larger)")


def test_08_compilation_depth_trend():
    h = build_model("mfi", Lattice([8]))
    lind = build_lindbladian(h, 1.0, 1)
    u, k = gadget_targets(lind, 0.5)[1]  # alpha = 1 gadget at tau = 0.5
    budget = AdamConfig(iterations=8000, restarts=50) if FULL_SCALE else AdamConfig(
        iterations=2000, restarts=10
    )
    losses = []
    for m in (2, 4, 6, 8):
        res = compile_gadget(u, ladder_template(k, m), budget, seed=0)
        losses.append(res.best_loss)
    ok = all(losses[i] > losses[i + 1] for i in range(3))
    _report(8, ok, "best loss per m in (2,4,6,8): " + ", ".join(f"{l:.3e}" for l in losses))


def _noisy_depth_stats(depth_budgets, p_values, beta=1.0, tau=0.1, n=6, seed=7):
    h = build_model("mfi", Lattice([n]))
    lind = build_lindbladian(h, beta, 1)
    plan = TrotterPlan(tau=tau, steps=int(round(10.0 / tau)))  # t = 10
    e_ref = energy_expectation(gibbs_state(h, beta), h) / n
    targets = gadget_targets(lind, 3.0 * tau)
    stats = {}
    for m, budget in depth_budgets.items():
        compiled = {
            alpha: (ladder_template(k, m),
                    compile_gadget(u, ladder_template(k, m), budget, seed=0).best_theta)
            for alpha, (u, k) in sorted(targets.items())
        }
        for p in p_values:
            res = noisy_trajectory_run(
                lind, plan, compiled, DepolarizingModel(p),
                n_circuits=160, shots=1024, seed=seed,
            )
            stats[(m, p)] = (abs(res.energy_density - e_ref), res.stderr)
    return stats


def test_09_noise_monotonicity():
    """Criterion 9 exactly as stated, m = 8 vs m = 2.

    The second clause (m = 8 errs more than m = 2 at p = 1e-2) is blocked by
    template expressivity: a depth-6 (m = 2) template cannot represent the
    cooling gadgets (best loss ~1e-2 across initializations and budgets), so
    the m = 2 run sits at a compile floor of ~85-97% of the saturation error
    at every p and the deep circuit, which still cools, stays below it.  The
    decisions ledger carries the parameter scan; the criterion is asserted
    faithfully and reports an honest FAIL on that clause.
    """
    p_values = (1e-4, 1e-3, 1e-2)
    stats = _noisy_depth_stats(
        {2: AdamConfig(iterations=4000, restarts=16),
         8: AdamConfig(iterations=2000, restarts=10)},
        p_values,
    )
    ok_mono = True
    for m in (2, 8):
        errs = [stats[(m, p)] for p in p_values]
        for (e1, s1), (e2, s2) in zip(errs, errs[1:]):
            ok_mono = ok_mono and (e2 - e1) >= -3.0 * np.hypot(s1, s2)
    ok_deep = stats[(8, 1e-2)][0] > stats[(2, 1e-2)][0]
    detail = (
        "dE(m=2): " + ", ".join(f"{stats[(2, p)][0]:.3e}" for p in p_values)
        + "; dE(m=8): " + ", ".join(f"{stats[(8, p)][0]:.3e}" for p in p_values)
        + f"; monotone(3sigma)={ok_mono}, deep-worse-at-1e-2={ok_deep}"
    )
    _report(9, ok_mono and ok_deep, detail)


def test_09b_noise_depth_ordering_well_compiled():
    """The physics behind criterion 9's second clause, on depths the template
    actually compiles: at p = 1e-2 the m = 8 circuit errs more than m = 4
    (3 sigma), while at p = 1e-4 it does not."""
    budget = AdamConfig(iterations=2000, restarts=10)
    stats = _noisy_depth_stats({4: budget, 8: budget}, (1e-4, 1e-2))
    (e4h, s4h), (e8h, s8h) = stats[(4, 1e-2)], stats[(8, 1e-2)]
    (e4l, _), (e8l, _) = stats[(4, 1e-4)], stats[(8, 1e-4)]
    ok = (e8h - e4h) > 3.0 * np.hypot(s4h, s8h) and e8l < 2.0 * e4l
    _report(
        "9b",
        ok,
        f"p=1e-2: dE(m=8) {e8h:.3e} > dE(m=4) {e4h:.3e} (3 sigma); "
        f"p=1e-4: dE(m=8) {e8l:.3e} vs dE(m=4) {e4l:.3e}",
    )


def test_10_mixing_contraction():
    from localgibbs.hamiltonian import LocalHamiltonian, PauliString

    h1 = LocalHamiltonian(Lattice([1]), [PauliString(0.5, {0: "Z"})])
    lind1 = build_lindbladian(h1, 0.0, 0)
    est = mixing_rate_estimate(lind1, t_grid=np.linspace(0, 3, 16))
    ok_rate = abs(est.rate - 1.0) <= 0.01
    tmix = {}
    for n in (3, 4, 5, 6):
        h = build_model("mfi", Lattice([n]))
        lind = build_lindbladian(h, 0.2, 1)
        tmix[n] = mixing_rate_estimate(lind, t_grid=np.linspace(0, 4, 21)).t_mix
    ratio = tmix[6] / tmix[3]
    ok_sub = ratio < 2.0
    _report(
        10,
        ok_rate and ok_sub,
        f"beta=0 rate {est.rate:.4f} (1.00 +- 0.01); t_mix(6)/t_mix(3) = {ratio:.3f} (< 2)",
    )


def test_11_heat_capacity_peak():
    lat = Lattice([3, 3])
    h = build_model("tfim2d", lat)
    hd = to_dense(h)
    ev = np.linalg.eigvalsh(hd)
    betas = np.arange(0.5, 4.01, 0.5)
    oracle, measured = [], []
    for beta in betas:
        w = np.exp(-beta * (ev - ev.min()))
        w /= w.sum()
        e1, e2 = float(np.sum(w * ev)), float(np.sum(w * ev ** 2))
        oracle.append(beta ** 2 * (e2 - e1 ** 2))
        lind = build_lindbladian(h, beta, 1, "fixed_gaussian")
        plan = TrotterPlan(tau=0.1, steps=200)  # t = 20
        rho = deterministic_trotter_evolve(lind, DensityMatrix.maximally_mixed(9), plan)
        measured.append(heat_capacity(rho, h, beta))
    oracle = np.array(oracle)
    measured = np.array(measured)
    k_meas = int(np.argmax(measured))
    interior = 0 < k_meas < len(betas) - 1
    k_peak = int(np.argmax(oracle))
    rel = abs(measured[k_peak] - oracle[k_peak]) / oracle[k_peak]
    ok = interior and rel <= 0.15
    _report(
        11,
        ok,
        f"measured peak at beta={betas[k_meas]} (interior={interior}); "
        f"peak mismatch {rel:.3f} (<= 0.15)",
    )
