"""Ensemble machinery: plans, norms, determinism, CSV layout."""

import re

import numpy as np
import pytest

from savac import build_torus_mesh
from savac.errors import ConfigError, EnsembleError
from savac.fem import (
    assemble_lumped_mass,
    assemble_stiffness,
    h1_norm_sq,
    lumped_norm_sq,
)
from savac.linalg import SolverOptions
from savac.mc import (
    ExperimentPlan,
    LadderRung,
    Problem,
    TrackingPlan,
    _squared_error_series,
    _verify_checksum,
    compute_eoc,
    r_tracking_study,
    run_ensemble,
    write_eoc_csv,
    write_tracking_csv,
)
from savac.noise import default_modes
from savac.potential import PotentialParams
from savac.profiles import cosine_profile


def small_problem(noise=True, amplitude=0.5, max_iterations=None):
    return Problem(
        params=PotentialParams(gamma=1e-5, epsilon=1.0),
        modes=default_modes(1),
        initial=cosine_profile(amplitude),
        solver=SolverOptions(rel_tolerance=1e-12,
                             max_iterations=max_iterations),
        noise_enabled=noise,
    )


def small_plan(samples=3, seed=42):
    return ExperimentPlan(
        dim=1, final_time=0.01, n_fine=8, ref_level=4,
        rungs=(LadderRung(3, 2), LadderRung(2, 4)),
        samples=samples, master_seed=seed,
    )


def test_compute_eoc_examples():
    got = compute_eoc([0.08, 0.17])
    assert got.shape == (1,)
    assert got[0] == pytest.approx(np.log2(17.0 / 8.0), rel=1e-14)
    np.testing.assert_allclose(compute_eoc([0.1, 0.1]), [0.0], atol=0)
    np.testing.assert_allclose(compute_eoc([0.05, 0.1, 0.2]), [1.0, 1.0],
                               rtol=1e-14)
    with pytest.raises(ValueError):
        compute_eoc([0.1])


def test_plan_validations():
    with pytest.raises(ConfigError, match="strictly coarser"):
        ExperimentPlan(dim=1, final_time=0.01, n_fine=8, ref_level=3,
                       rungs=(LadderRung(3, 2),), samples=1, master_seed=0)
    with pytest.raises(ConfigError, match="at least 2"):
        ExperimentPlan(dim=1, final_time=0.01, n_fine=8, ref_level=4,
                       rungs=(LadderRung(3, 1),), samples=1, master_seed=0)
    with pytest.raises(ConfigError, match="does not divide"):
        ExperimentPlan(dim=1, final_time=0.01, n_fine=8, ref_level=4,
                       rungs=(LadderRung(3, 3),), samples=1, master_seed=0)
    with pytest.raises(ConfigError, match="finest first"):
        ExperimentPlan(dim=1, final_time=0.01, n_fine=8, ref_level=4,
                       rungs=(LadderRung(2, 4), LadderRung(3, 2)),
                       samples=1, master_seed=0)
    with pytest.raises(ConfigError, match="divide the coarsest"):
        ExperimentPlan(dim=1, final_time=0.01, n_fine=24, ref_level=4,
                       rungs=(LadderRung(3, 2), LadderRung(2, 3)),
                       samples=1, master_seed=0)
    # unrelated violations are all collected in one error
    with pytest.raises(ConfigError) as err:
        ExperimentPlan(dim=3, final_time=-1.0, n_fine=8, ref_level=4,
                       rungs=(LadderRung(3, 2),), samples=0, master_seed=-1)
    assert len(err.value.violations) == 4


def test_rung_validation():
    with pytest.raises(ConfigError):
        LadderRung(0, 2)
    with pytest.raises(ConfigError):
        LadderRung(3, 0)


def test_squared_error_series_zero_is_exact():
    mesh = build_torus_mesh(1, 3)
    diag = assemble_lumped_mass(mesh).diag
    stiff = assemble_stiffness(mesh)
    out = _squared_error_series(np.zeros((3, mesh.node_count)), diag, stiff)
    assert out.shape == (2, 3)
    assert np.all(out == 0.0)


def test_squared_error_series_matches_norms():
    mesh = build_torus_mesh(1, 4)
    mass = assemble_lumped_mass(mesh)
    stiff = assemble_stiffness(mesh)
    rng = np.random.default_rng(12)
    diff = rng.normal(size=(3, mesh.node_count))
    out = _squared_error_series(diff, mass.diag, stiff)
    for t in range(3):
        assert out[0, t] == pytest.approx(lumped_norm_sq(diff[t], mass),
                                          rel=1e-12)
        assert out[1, t] == pytest.approx(h1_norm_sq(diff[t], mass, stiff),
                                          rel=1e-12)


def test_checksum_guard():
    disp = np.array([0.3, -0.2, 0.05])
    _verify_checksum(disp.copy(), disp, 0)
    with pytest.raises(EnsembleError, match="sample 3"):
        _verify_checksum(disp + 1e-6, disp, 3)


def test_small_run_report_layout():
    report = run_ensemble(small_plan(), small_problem())
    assert report.levels == (3, 2)
    np.testing.assert_allclose(report.spacings, [0.125, 0.25])
    np.testing.assert_allclose(report.taus, [0.01 / 4, 0.01 / 2], rtol=1e-15)
    assert np.all(report.err_l2 > 0)
    assert np.all(report.err_h1 > 0)
    np.testing.assert_allclose(
        report.err_tot, np.sqrt(report.err_l2**2 + report.err_h1**2),
        rtol=1e-15,
    )
    assert np.isnan(report.eoc_l2[0]) and np.isnan(report.eoc_tot[0])
    want = np.log2(report.err_l2[1] / report.err_l2[0]) / np.log2(2.0)
    assert report.eoc_l2[1] == pytest.approx(want, rel=1e-12)
    assert report.samples == 3


def test_ensemble_byte_determinism(tmp_path):
    paths = [tmp_path / name for name in
             ("a.csv", "b.csv", "c.csv")]
    write_eoc_csv(run_ensemble(small_plan(samples=4), small_problem()),
                  paths[0])
    write_eoc_csv(run_ensemble(small_plan(samples=4), small_problem()),
                  paths[1])
    write_eoc_csv(run_ensemble(small_plan(samples=4), small_problem(),
                               workers=2), paths[2])
    blobs = [p.read_bytes() for p in paths]
    assert blobs[0] == blobs[1]
    assert blobs[0] == blobs[2]


def test_seed_changes_result():
    a = run_ensemble(small_plan(seed=42), small_problem())
    b = run_ensemble(small_plan(seed=43), small_problem())
    assert not np.allclose(a.err_l2, b.err_l2, rtol=1e-6)


def test_deterministic_runs_ignore_sample_count():
    a = run_ensemble(small_plan(samples=1), small_problem(noise=False))
    b = run_ensemble(small_plan(samples=3), small_problem(noise=False))
    np.testing.assert_allclose(a.err_l2, b.err_l2, rtol=1e-15)
    np.testing.assert_allclose(a.err_h1, b.err_h1, rtol=1e-15)
    assert np.all(a.err_l2 > 0)


def test_eoc_csv_layout(tmp_path):
    out = tmp_path / "eoc.csv"
    write_eoc_csv(run_ensemble(small_plan(), small_problem()), out)
    lines = out.read_text().splitlines()
    assert lines[0] == "level,h,tau,E_L2,EOC_L2,E_H1,EOC_H1,E_tot,EOC_tot,samples"
    assert len(lines) == 3
    first = lines[1].split(",")
    assert first[0] == "3"
    assert first[4] == "" and first[6] == "" and first[8] == ""
    assert re.fullmatch(r"-?\d\.\d{12}e[+-]\d{2,3}", first[3])
    second = lines[2].split(",")
    assert second[4] != ""
    assert first[9] == "3" and second[9] == "3"


def test_worker_failure_carries_sample_id():
    bad = small_problem(max_iterations=1)
    strangled = Problem(
        params=bad.params, modes=bad.modes, initial=bad.initial,
        solver=SolverOptions(rel_tolerance=1e-15, max_iterations=1),
        noise_enabled=True,
    )
    with pytest.raises(EnsembleError, match="sample 0"):
        run_ensemble(small_plan(), strangled)


def test_workers_validation():
    with pytest.raises(ConfigError):
        run_ensemble(small_plan(), small_problem(), workers=0)


def tracking_plan(samples=2, factors=(4, 2, 1)):
    return TrackingPlan(dim=1, level=4, final_time=0.01, n_fine=8,
                        factors=factors, samples=samples, master_seed=7)


def test_tracking_plan_validations():
    with pytest.raises(ConfigError, match="does not divide"):
        tracking_plan(factors=(3, 1))
    with pytest.raises(ConfigError, match="strictly decrease"):
        tracking_plan(factors=(2, 4))
    with pytest.raises(ConfigError, match="at least one"):
        tracking_plan(factors=())


def test_tracking_study_layout(tmp_path):
    report = r_tracking_study(tracking_plan(), small_problem())
    np.testing.assert_allclose(report.taus,
                               [4 * 0.01 / 8, 2 * 0.01 / 8, 0.01 / 8],
                               rtol=1e-15)
    assert np.all(report.mean_errors > 0)
    assert np.isnan(report.orders[0])
    assert np.all(np.isfinite(report.orders[1:]))
    out1, out2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
    write_tracking_csv(report, out1)
    write_tracking_csv(r_tracking_study(tracking_plan(), small_problem(),
                                        workers=2), out2)
    assert out1.read_bytes() == out2.read_bytes()
    lines = out1.read_text().splitlines()
    assert lines[0] == "tau,mean_max_tracking_error,observed_order"
    assert len(lines) == 4
    assert lines[1].split(",")[2] == ""


def test_tracking_zero_noise_is_tiny():
    report = r_tracking_study(
        TrackingPlan(dim=1, level=4, final_time=1e-3, n_fine=8,
                     factors=(2, 1), samples=1, master_seed=0),
        small_problem(noise=False, amplitude=0.1),
    )
    assert np.all(report.mean_errors <= 1e-6)
