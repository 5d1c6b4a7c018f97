import math

import numpy as np
import pytest
from sklearn.base import clone

from csb.circuits import basis_state, build_target, lift_degeneracy, random_ising_params
from csb.exceptions import DegeneracyError, ValidationError
from csb.noise import NoiseModel, oracle_fidelities
from csb.pencil import Mode, ModeSet
from csb.protocol import (
    ChannelSpectrumBenchmark,
    SubspaceDims,
    acquire_signal,
    eigensystem,
    estimate_fidelities,
    generate_benchmark_suite,
    hoeffding_sample_size,
    match_modes,
    run_repeated,
    sample_eigenpairs,
    signal_groups,
)


def modes(*zs):
    return ModeSet(tuple(Mode(complex(z), 1.0) for z in zs), 0.0)


def test_subspace_dims():
    assert eigensystem(build_target("rz")).subspace_dims() == SubspaceDims(2, 2)
    assert eigensystem(build_target("toffoli")).subspace_dims().d_ts == 50
    assert eigensystem(lift_degeneracy(build_target("toffoli"))).subspace_dims().d_ts == 8


def test_tgate_design_has_pair_and_eigenstate():
    es = eigensystem(build_target("rz", theta=np.pi / 4))
    specs = sample_eigenpairs(es, 2, np.random.default_rng(0))
    assert [(s.a, s.b) for s in specs] == [(0, 1), (1, 1)]
    assert signal_groups(specs) == [[0, 1]]


def test_fsim_design_uses_all_pairs():
    es = eigensystem(build_target("fsim"))
    specs = sample_eigenpairs(es, 6, np.random.default_rng(0))
    assert len(specs) == 6 and all(s.is_superposition for s in specs)
    assert all(abs(s.delta) > 1e-6 for s in specs)


def test_degenerate_target_raises():
    es = eigensystem(build_target("rz", theta=0.0))
    with pytest.raises(DegeneracyError):
        sample_eigenpairs(es, 2, np.random.default_rng(0))


def test_match_modes_assigns_subspaces():
    d = 0.8
    m = match_modes(modes(0.99 * np.exp(0.81j), 0.99 * np.exp(-0.79j), 0.98, 0.95 * np.exp(0.55j)), d)
    kinds = [mt.subspace for mt in m]
    assert kinds.count("non-trivial") == 2 and kinds.count("trivial") == 1 and kinds.count("excess") == 1
    nt = [mt for mt in m if mt.subspace == "non-trivial"]
    assert sorted(round(mt.phase_error, 6) for mt in nt) == [0.01, 0.01]


def test_match_modes_near_pi_uses_one_real_mode():
    m = match_modes(modes(-0.97, 0.99), 3.1)
    nt = [mt for mt in m if mt.subspace == "non-trivial"]
    assert len(nt) == 2 and nt[0].z == nt[1].z
    assert [mt.subspace for mt in m].count("trivial") == 1


def test_ambiguous_match_flag():
    m = match_modes(modes(np.exp(0.25j), np.exp(-0.25j)), 0.6)
    assert all(mt.ambiguous for mt in m if mt.subspace == "non-trivial")


def test_estimate_fidelities_on_exact_entries():
    dims = SubspaceDims(2, 2)
    m = [match_modes(modes(0.9 * np.exp(0.5j), 0.9 * np.exp(-0.5j), 0.95), 0.5)]
    est = estimate_fidelities(m, dims)
    assert est.process_fidelity == pytest.approx((2 * 0.95 + 2 * 0.9) / 4)
    assert est.stochastic_fidelity == pytest.approx(math.sqrt((2 * 0.95**2 + 2 * 0.81) / 4))


def test_fixed_point_policies_differ():
    # with d_ts = 2 "include" and "replace" coincide, so use a larger trivial subspace
    dims = SubspaceDims(4, 12)
    m = [match_modes(modes(0.9 * np.exp(0.5j), 0.9 * np.exp(-0.5j), 0.95, 0.999), 0.5)]
    vals = {p: estimate_fidelities(m, dims, p).process_fidelity for p in ("none", "include", "replace")}
    assert len(set(np.round(list(vals.values()), 12))) == 3


@pytest.mark.parametrize(
    "eps,delta,expected",
    [(0.05, 0.05, 738), (0.1, 0.05, 185), (0.01, 0.01, 26492)],
)
def test_hoeffding_frozen(eps, delta, expected):
    assert hoeffding_sample_size(eps, delta) == expected


def test_exact_signals_recover_oracle():
    target = build_target("fsim")
    model = NoiseModel.uniform(0.003, theta2=-0.01, phi2=-0.02)
    est = ChannelSpectrumBenchmark(n_pairs=6, L_max=50, shots=None, random_state=0)
    rep = est.run(target, model)
    gt = oracle_fidelities(target, model)
    assert abs((1 - rep.process_fidelity) / gt.process_infidelity - 1) < 0.1
    assert rep.unitary_params["delta_theta"] == pytest.approx(-0.01, abs=1e-3)
    assert rep.unitary_params["delta_phi"] == pytest.approx(-0.02, abs=1e-3)


def test_shot_budget_and_signal_shape():
    target = build_target("rz", theta=np.pi / 4)
    es = eigensystem(target)
    specs = sample_eigenpairs(es, 2, np.random.default_rng(0))
    sig = acquire_signal(specs, target, NoiseModel.uniform(0.01), 20, 1000, np.random.default_rng(1))
    assert sig.n_circuits == 2 and sig.components.shape == (2, 21)
    assert np.all(sig.values <= 2)


def test_benchmark_suite_counts():
    target = build_target("rz", theta=np.pi / 4)
    specs = sample_eigenpairs(eigensystem(target), 2, np.random.default_rng(0))
    assert len(generate_benchmark_suite(specs, target, 2)) == 6
    fs = build_target("fsim")
    fs_specs = sample_eigenpairs(eigensystem(fs), 6, np.random.default_rng(0))
    assert len(generate_benchmark_suite(fs_specs, fs, 9, n_r=3, seed=0)) == 3 * 6 * 10


def test_estimator_params_and_clone():
    est = ChannelSpectrumBenchmark(n_pairs=3, L_max=20)
    assert clone(est).get_params()["n_pairs"] == 3
    with pytest.raises(ValidationError):
        ChannelSpectrumBenchmark(L_max=4).run(build_target("rz"), None)
    with pytest.raises(ValidationError):
        ChannelSpectrumBenchmark().fit([], design=None)


def test_fit_on_stored_signals_is_reproducible():
    target = build_target("rz", theta=np.pi / 4)
    model = NoiseModel.uniform(0.003, rotation_overshoot=-0.01)
    est = ChannelSpectrumBenchmark(n_pairs=2, L_max=40, random_state=3)
    rep = est.run(target, model)
    again = ChannelSpectrumBenchmark(n_pairs=2, L_max=40).fit(est.signals_, design=est.design_).report_
    assert again.process_fidelity == rep.process_fidelity


def test_run_repeated_is_seeded_and_worker_independent():
    target = build_target("rz", theta=np.pi / 4)
    model = NoiseModel.uniform(0.003, rotation_overshoot=-0.01)
    a = run_repeated(target, model, 3, seed=4, n_pairs=2, L_max=30)
    b = run_repeated(target, model, 3, seed=4, workers=2, n_pairs=2, L_max=30)
    assert [r.process_fidelity for r in a.reports] == [r.process_fidelity for r in b.reports]
    assert a.process_fidelity_std == pytest.approx(np.std([r.process_fidelity for r in a.reports], ddof=1))


def test_degenerate_toffoli_is_flagged():
    est = ChannelSpectrumBenchmark(n_pairs=10, L_max=30, shots=None, random_state=0)
    rep = est.run(build_target("toffoli"), NoiseModel.uniform(0.001, theta2=0.01, phi2=0.01))
    assert "degenerate_spectrum" in rep.flags


def test_ising_large_uses_product_oracle():
    target = build_target("ising", dt=1.0, **random_ising_params(4, np.random.default_rng(0)))
    res = run_repeated(target, NoiseModel.uniform(0.001), 1, seed=0, n_pairs=3, L_max=20)
    assert res.oracle.method == "product-of-components"
    assert res.reports[0].dims.d_ts >= 16


def test_rz_angle_from_exact_signal():
    target = build_target("rz", theta=np.pi / 4)
    for dt in (-0.005, 0.002):
        rep = ChannelSpectrumBenchmark(n_pairs=2, L_max=60, shots=None, random_state=0).run(
            target, NoiseModel.uniform(0.001, rotation_overshoot=dt)
        )
        assert rep.unitary_params["delta_theta"] == pytest.approx(dt, abs=2e-4)
        assert basis_state("0")[0] == 1
