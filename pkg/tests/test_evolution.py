import numpy as np
import pytest
import scipy.linalg

from localgibbs import dissipator as dis
from localgibbs.dissipator import DensityMatrix, build_lindbladian, gibbs_state
from localgibbs.evolution import (
    TrajectoryKey,
    TrotterPlan,
    deterministic_trotter_evolve,
    enumerate_mean_channel,
    mean_channel_estimate,
    mean_channel_superop,
    mixing_rate_estimate,
    sample_trajectory,
)
from localgibbs.hamiltonian import LocalHamiltonian, PauliString, build_model
from localgibbs.lattice import Lattice, Region
from localgibbs.observables import energy_expectation
from localgibbs.superop import lindblad_superop

Z = np.array([[1, 0], [0, -1]], dtype=complex)


def toy_single_site(beta=1.0):
    h = LocalHamiltonian(Lattice([1]), [PauliString(0.5, {0: "Z"})])
    return build_lindbladian(h, beta, 0)


def full_superop(lind):
    from localgibbs.dissipator import _embedded_pairs

    n = lind.n_sites
    region = Region(range(n))
    return lindblad_superop(_embedded_pairs(lind.generators, region), 2 ** n)


def test_plan_validation():
    with pytest.raises(ValueError):
        TrotterPlan(tau=0.0, steps=1)
    with pytest.raises(ValueError):
        TrotterPlan(tau=0.1, steps=1, draw_mode="bogus")
    assert TrotterPlan(tau=0.5, steps=4).time == 2.0


def test_zero_steps_identity():
    lind = toy_single_site()
    rho0 = np.array([[0.7, 0.1], [0.1, 0.3]], dtype=complex)
    out = deterministic_trotter_evolve(lind, rho0, TrotterPlan(tau=0.1, steps=0))
    assert np.abs(out.matrix - rho0).max() < 1e-15


def test_single_site_step_matches_superop_oracle():
    lind = toy_single_site()
    rho0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    tau = 0.3
    out = deterministic_trotter_evolve(lind, rho0, TrotterPlan(tau=tau, steps=1)).matrix
    s = full_superop(lind)
    want = (scipy.linalg.expm(tau * s) @ rho0.reshape(-1)).reshape(2, 2)
    assert np.abs(out - want).max() <= 1e-10


def test_every_step_is_a_channel():
    h = build_model("mfi", Lattice([3]))
    lind = build_lindbladian(h, 1.0, 1)

    def check(step, rho):
        assert abs(np.trace(rho).real - 1.0) < 1e-8
        assert np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] >= -1e-8

    deterministic_trotter_evolve(
        lind, DensityMatrix.maximally_mixed(3), TrotterPlan(tau=0.2, steps=10),
        callback=check,
    )


def test_deterministic_trotter_error_scaling():
    """Global error ~ tau (first order), single-step local error ~ tau^2."""
    h = build_model("mfi", Lattice([2]))
    lind = build_lindbladian(h, 0.7, 1)
    s = full_superop(lind)
    rho0 = DensityMatrix.maximally_mixed(2).matrix
    taus = np.array([0.2, 0.1, 0.05])
    glob, loc = [], []
    for tau in taus:
        m = int(round(1.0 / tau))
        out = deterministic_trotter_evolve(lind, rho0, TrotterPlan(tau=tau, steps=m)).matrix
        want = (scipy.linalg.expm(1.0 * s) @ rho0.reshape(-1)).reshape(4, 4)
        glob.append(np.abs(out - want).max())
        out1 = deterministic_trotter_evolve(lind, rho0, TrotterPlan(tau=tau, steps=1)).matrix
        want1 = (scipy.linalg.expm(tau * s) @ rho0.reshape(-1)).reshape(4, 4)
        loc.append(np.abs(out1 - want1).max())
    slope_g = np.polyfit(np.log(taus), np.log(glob), 1)[0]
    slope_l = np.polyfit(np.log(taus), np.log(loc), 1)[0]
    assert abs(slope_g - 1.0) <= 0.2
    assert abs(slope_l - 2.0) <= 0.3


def test_trajectory_reproducible():
    h = build_model("mfi", Lattice([3]))
    lind = build_lindbladian(h, 0.5, 1)
    plan = TrotterPlan(tau=0.1, steps=4)
    key = TrajectoryKey.generate(42, plan, 3)
    rho0 = DensityMatrix.maximally_mixed(3)
    a = sample_trajectory(lind, rho0, plan, key).matrix
    b = sample_trajectory(lind, rho0, plan, key).matrix
    assert np.array_equal(a, b)
    psi0 = np.zeros(8, dtype=complex)
    psi0[0] = 1.0
    pa = sample_trajectory(lind, psi0, plan, key)
    pb = sample_trajectory(lind, psi0, plan, key)
    assert np.array_equal(pa, pb)


def test_per_trajectory_vs_per_step_draw_shapes():
    plan_s = TrotterPlan(tau=0.1, steps=5, draw_mode="per_step")
    plan_t = TrotterPlan(tau=0.1, steps=5, draw_mode="per_trajectory")
    ks = TrajectoryKey.generate(1, plan_s, 4)
    kt = TrajectoryKey.generate(1, plan_t, 4)
    assert ks.alphas.shape == (5, 4)
    assert kt.alphas.shape == (4,)
    assert set(np.unique(ks.alphas)) <= {1, 2, 3}


def test_sampled_channel_mean_second_order():
    """Average over all 3 draws (rescale 3) minus exp(tau sum L) is O(tau^2)."""
    lind = toy_single_site()
    s_total = full_superop(lind)
    errs = []
    for tau in (0.1, 0.05):
        mean = np.zeros((4, 4), dtype=complex)
        for g in lind.generators:
            s_a = lindblad_superop([(g.lmat, g.gmat)], 2)
            mean += scipy.linalg.expm(3.0 * tau * s_a) / 3.0
        errs.append(np.linalg.norm(mean - scipy.linalg.expm(tau * s_total), 2))
    ratio = errs[0] / errs[1]
    assert 3.5 <= ratio <= 4.5


def test_depolarizing_trajectories_relax_z():
    h = build_model("mfi", Lattice([2]))
    lind = build_lindbladian(h, 0.0, 1)
    psi0 = np.zeros(4, dtype=complex)
    psi0[0] = 1.0  # |00>
    z_op = np.kron(Z, np.eye(2))
    means = []
    for steps in (1, 4, 12):
        plan = TrotterPlan(tau=0.25, steps=steps)
        vals = []
        for i in range(60):
            key = TrajectoryKey.generate(9, plan, 2, index=i)
            psi = sample_trajectory(lind, psi0, plan, key)
            vals.append(np.vdot(psi, z_op @ psi).real)
        means.append(abs(np.mean(vals)))
    assert means[0] > means[-1]
    assert means[-1] < 0.15


def test_exhaustive_enumeration_matches_mean_superop():
    h = build_model("mfi", Lattice([2]))
    lind = build_lindbladian(h, 0.5, 1)
    plan = TrotterPlan(tau=0.1, steps=1, draw_mode="per_trajectory")
    rho0 = DensityMatrix.maximally_mixed(2)
    exact = enumerate_mean_channel(lind, rho0, plan).matrix
    s_mean = mean_channel_superop(lind, plan)
    want = (s_mean @ rho0.matrix.reshape(-1)).reshape(4, 4)
    assert np.abs(exact - want).max() < 1e-12


def test_mean_channel_estimate_deterministic_and_consistent():
    h = build_model("mfi", Lattice([2]))
    lind = build_lindbladian(h, 0.5, 1)
    plan = TrotterPlan(tau=0.1, steps=3)
    rho0 = DensityMatrix.maximally_mixed(2)
    hd = np.zeros((4, 4), dtype=complex)
    from localgibbs.hamiltonian import to_dense

    hd = to_dense(h)
    r1 = mean_channel_estimate(lind, rho0, plan, 16, seed=3, observables={"E": hd})
    r2 = mean_channel_estimate(lind, rho0, plan, 16, seed=3, observables={"E": hd})
    assert np.array_equal(r1.rho.matrix, r2.rho.matrix)
    assert r1.observables["E"] == r2.observables["E"]
    r1.rho.validate(atol=1e-8)


def test_randomized_mean_agrees_with_deterministic():
    """The Monte-Carlo mean is an unbiased sampler of the exact average
    channel (3 sigma), and the average channel agrees with the deterministic
    product to first order in tau, so the residual gap shrinks ~ tau."""
    h = build_model("mfi", Lattice([2]))
    lind = build_lindbladian(h, 1.0, 1)
    from localgibbs.hamiltonian import to_dense

    hd = to_dense(h)
    plan = TrotterPlan(tau=0.05, steps=20)
    rho0 = DensityMatrix.maximally_mixed(2)
    s_mean = mean_channel_superop(lind, plan)
    rho_mean = (s_mean @ rho0.matrix.reshape(-1)).reshape(4, 4)
    e_mean = float(np.trace(rho_mean @ hd).real)
    est = mean_channel_estimate(lind, rho0, plan, 800, seed=11, observables={"E": hd})
    mean, se = est.observables["E"]
    assert abs(mean - e_mean) <= 3.0 * se

    # exact-mean vs deterministic-product gap halves with tau (first order)
    gaps = []
    for tau, steps in ((0.05, 20), (0.025, 40)):
        p = TrotterPlan(tau=tau, steps=steps)
        s = mean_channel_superop(lind, p)
        rm = (s @ rho0.matrix.reshape(-1)).reshape(4, 4)
        det = deterministic_trotter_evolve(lind, rho0, p)
        gaps.append(
            abs(np.trace(rm @ hd).real - np.trace(det.matrix @ hd).real)
        )
    assert 1.5 <= gaps[0] / gaps[1] <= 2.6


def test_statevector_matches_density_matrix_in_expectation():
    h = build_model("mfi", Lattice([4]))
    lind = build_lindbladian(h, 1.0, 1)
    plan = TrotterPlan(tau=0.2, steps=5)
    rho0 = DensityMatrix.maximally_mixed(4)
    dm = mean_channel_estimate(lind, rho0, plan, 40, seed=5).rho
    e_dm = energy_expectation(dm, h)
    vals = []
    for i in range(150):
        key = TrajectoryKey.generate(5, plan, 4, index=i)
        rng = key.measurement_rng()
        start = int(rng.integers(0, 16))
        psi0 = np.zeros(16, dtype=complex)
        psi0[start] = 1.0
        psi = sample_trajectory(lind, psi0, plan, key)
        vals.append(energy_expectation(psi, h))
    se = np.std(vals, ddof=1) / np.sqrt(len(vals))
    # the DM estimate has its own (smaller) trajectory error; allow both
    assert abs(np.mean(vals) - e_dm) <= 3.0 * se + 0.02


def test_mixing_single_qubit_depolarizing():
    lind = toy_single_site(beta=0.0)
    est = mixing_rate_estimate(lind, t_grid=np.linspace(0, 3, 16))
    assert abs(est.rate - 1.0) <= 0.01
    assert abs(est.t_mix - np.log(2)) <= 0.02
    assert not est.flagged


def test_mixing_gap_reported():
    lind = toy_single_site(beta=0.0)
    est = mixing_rate_estimate(lind, t_grid=np.linspace(0, 2, 9), compute_gap=True)
    assert abs(est.gap - 1.0) < 1e-8


def test_energy_settles_near_paper_floor():
    """mfi n=8, beta=1, r=1, tau=0.1: the energy-density error settles at the
    truncation+Trotter floor, at or below the reported 1e-2 scale."""
    h = build_model("mfi", Lattice([8]))
    lind = build_lindbladian(h, 1.0, 1)
    plan = TrotterPlan(tau=0.1, steps=100)
    rho = deterministic_trotter_evolve(lind, DensityMatrix.maximally_mixed(8), plan)
    e = energy_expectation(rho, h) / 8
    e_ref = energy_expectation(gibbs_state(h, 1.0), h) / 8
    rel = abs(e - e_ref) / abs(e_ref)
    assert rel <= 2e-2
    assert rel > 1e-5  # a genuine floor, not exact agreement


def test_channel_expm_taylor_matches_dense(monkeypatch):
    """The chunked factored Taylor route equals scipy expm on a small case."""
    import localgibbs.superop as so

    h = build_model("mfi", Lattice([3]))
    lind = build_lindbladian(h, 0.8, 1)
    gens = lind.site_generators(0)
    pairs = [(g.lmat, g.gmat) for g in gens]
    dense = so.channel_expm(pairs, 8, 0.3)
    monkeypatch.setattr(so, "_EXPM_DENSE_DIM", 1)
    taylor = so.channel_expm(pairs, 8, 0.3)
    assert np.abs(dense - taylor).max() < 1e-12
