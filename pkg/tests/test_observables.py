import numpy as np
import pytest

from localgibbs.dissipator import DensityMatrix, gibbs_state
from localgibbs.hamiltonian import build_model, to_dense
from localgibbs.lattice import Lattice
from localgibbs.observables import (
    correlation_length_fit,
    energy_expectation,
    energy_metrics,
    heat_capacity,
    heat_capacity_trajectories,
    jackknife,
    two_point_correlator,
)
from localgibbs.spectral import eig_hermitian


def test_maximally_mixed_energy_zero():
    h = build_model("mfi", Lattice([4]))
    e, de = energy_metrics(DensityMatrix.maximally_mixed(4), h, 0.0)
    assert abs(e) < 1e-14  # all strings traceless


def test_delta_e_zero_on_reference():
    h = build_model("mfi", Lattice([4]))
    rb = gibbs_state(h, 1.3)
    _, de = energy_metrics(rb, h, rb)
    assert de < 1e-12


def test_energy_against_dense_oracle():
    """Gibbs energy from eigenvalue weights vs Pauli-gather expectation."""
    h = build_model("mfi", Lattice([8]))
    beta = 1.0
    dec = eig_hermitian(to_dense(h))
    w = np.exp(-beta * (dec.eigenvalues - dec.eigenvalues.min()))
    w /= w.sum()
    e_oracle = float(np.sum(w * dec.eigenvalues))
    rb = gibbs_state(h, beta)
    assert abs(energy_expectation(rb, h) - e_oracle) < 1e-8


def test_energy_statevector_path():
    h = build_model("mfi", Lattice([3]))
    hd = to_dense(h)
    rng = np.random.default_rng(0)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi /= np.linalg.norm(psi)
    assert abs(energy_expectation(psi, h) - np.vdot(psi, hd @ psi).real) < 1e-12


def test_correlator_product_state_zero():
    rho = np.diag([1.0, 0, 0, 0]).astype(complex)  # |00>
    assert abs(two_point_correlator(rho, 0, 1)) < 1e-14


def test_correlator_bell_pair():
    psi = np.zeros(4)
    psi[0] = psi[3] = 1 / np.sqrt(2)
    rho = np.outer(psi, psi)
    assert np.isclose(two_point_correlator(rho, 0, 1), 0.25)


def test_correlator_requires_distinct_sites():
    with pytest.raises(ValueError):
        two_point_correlator(np.eye(4) / 4, 1, 1)


def test_correlator_decays_on_gibbs_chain():
    h = build_model("mfi", Lattice([8]))
    rb = gibbs_state(h, 3.0)
    vals = [abs(two_point_correlator(rb, 4, (4 + ell) % 8)) for ell in (1, 2, 3)]
    assert vals[0] > vals[1] > vals[2]


def test_heat_capacity_trivial_cases():
    h = build_model("mfi", Lattice([3]))
    assert heat_capacity(DensityMatrix.maximally_mixed(3), h, 0.0) == 0.0
    dec = eig_hermitian(to_dense(h))
    ground = np.outer(dec.eigenvectors[:, 0], dec.eigenvectors[:, 0].conj())
    assert abs(heat_capacity(ground, h, 2.0)) < 1e-9  # eigenstate: zero variance


def test_heat_capacity_two_methods_agree():
    h = build_model("mfi", Lattice([6]))
    rb = gibbs_state(h, 1.2)
    c1 = heat_capacity(rb, h, 1.2, method="dense")
    c2 = heat_capacity(rb, h, 1.2, method="moments")
    assert abs(c1 - c2) <= 1e-8


def test_expectations_real_for_hermitian():
    h = build_model("xxz", Lattice([4]))
    rb = gibbs_state(h, 0.7)
    e = energy_expectation(rb, h)
    assert isinstance(e, float)
    c = two_point_correlator(rb, 0, 2)
    assert abs(np.imag(c)) < 1e-12 if np.iscomplexobj(c) else True


def test_correlation_length_planted_exponential():
    ells = np.arange(1, 7)
    fit = correlation_length_fit(ells, np.exp(-ells / 2.0))
    assert abs(fit.length - 2.0) <= 1e-6
    assert not fit.flagged


def test_correlation_length_flags_flat_profile():
    fit = correlation_length_fit([1, 2, 3, 4], [0.3, 0.3, 0.3, 0.3])
    assert fit.flagged
    assert fit.length == np.inf


def test_correlation_length_needs_enough_points():
    with pytest.raises(ValueError):
        correlation_length_fit([1, 2, 3], [1e-15, 1e-16, 1e-18])


def test_jackknife_linear_statistic_matches_classic_se():
    rng = np.random.default_rng(1)
    x = rng.normal(size=200)
    est, se = jackknife(x, np.mean)
    assert np.isclose(est, x.mean(), atol=1e-12)
    assert np.isclose(se, x.std(ddof=1) / np.sqrt(len(x)), rtol=1e-6)


def test_heat_capacity_trajectories_consistent():
    rng = np.random.default_rng(2)
    e = rng.normal(loc=-1.0, scale=0.05, size=300)
    e2 = e ** 2 + np.abs(rng.normal(scale=0.01, size=300)) + 0.04
    beta = 1.5
    est, se = heat_capacity_trajectories(e, e2, beta)
    plug = beta ** 2 * (e2.mean() - e.mean() ** 2)
    assert abs(est - plug) <= 3 * se + 0.02
    assert se > 0
