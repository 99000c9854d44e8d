import warnings

import numpy as np
import pytest

from bayeshield.core import (
    LabeledDataset,
    PerturbationConstraint,
    PgaConfig,
    SimilarityKernel,
)
from bayeshield.estimator import estimate_bayes_error
from bayeshield.perturb import (
    StepSizeWarning,
    default_step_size,
    objective_and_gradient,
    pga_maximize,
    project,
)
from bayeshield.synth import finite_difference_gradient

K1 = SimilarityKernel(bandwidth=1.0)


def three_point_dataset():
    return LabeledDataset([[0.0], [1.0], [2.0]], [0, 1, 1], 2)


def random_dataset(seed, n=10, d=2, k=2):
    rng = np.random.default_rng(seed)
    return LabeledDataset(rng.normal(size=(n, d)), rng.integers(0, k, n), k)


def test_default_step_size():
    assert default_step_size(200, 0.25) == pytest.approx(0.0036 * 200 * 0.25)
    with pytest.raises(ValueError, match="at least 2"):
        default_step_size(0, 0.25)
    with pytest.raises(ValueError, match="positive"):
        default_step_size(10, 0.0)


def test_gradient_single_class_is_zero():
    ds = LabeledDataset([[0.0, 1.0], [2.0, 3.0], [4.0, 0.5]], [0, 0, 0], 1)
    report = objective_and_gradient(ds, K1)
    assert report.objective == 0.0
    np.testing.assert_array_equal(report.gradients, np.zeros((3, 2)))


def test_gradient_objective_equals_estimate():
    ds = random_dataset(3, n=15, d=3, k=3)
    report = objective_and_gradient(ds, K1)
    assert report.objective == estimate_bayes_error(ds, K1).value


def test_gradient_matches_finite_differences_three_point():
    ds = three_point_dataset()
    report = objective_and_gradient(ds, K1)
    fd = finite_difference_gradient(ds, K1)
    scale = max(np.abs(fd).max(), 1e-12)
    assert np.abs(report.gradients - fd).max() / scale <= 1e-5


def test_gradient_matches_finite_differences_random():
    for seed in range(4):
        ds = random_dataset(seed, n=10, d=2)
        report = objective_and_gradient(ds, K1)
        if report.tied_rows:
            continue
        fd = finite_difference_gradient(ds, K1)
        scale = max(np.abs(fd).max(), 1e-12)
        assert np.abs(report.gradients - fd).max() / scale <= 1e-5


def test_gradient_reports_exact_ties():
    ds = LabeledDataset([[0.0], [0.0], [5.0]], [0, 1, 0], 2)
    report = objective_and_gradient(ds, K1)
    assert 2 in report.tied_rows


def test_gradient_threads_bitwise_identical():
    ds = random_dataset(6, n=120, d=3, k=3)
    single = objective_and_gradient(ds, K1, threads=1)
    multi = objective_and_gradient(ds, K1, threads=4)
    assert single.objective == multi.objective
    np.testing.assert_array_equal(single.gradients, multi.gradients)


def test_project_linf_inside_unchanged():
    c = PerturbationConstraint(norm_order="linf", radius=0.1)
    row = np.array([0.05, -0.03])
    np.testing.assert_array_equal(project(row, c), row)


def test_project_linf_clamps():
    c = PerturbationConstraint(norm_order="linf", radius=0.1)
    out = project(np.array([0.3, -0.01]), c)
    np.testing.assert_allclose(out, [0.1, -0.01], atol=1e-15)


def test_project_l2_rescales():
    c = PerturbationConstraint(norm_order="l2", radius=1.0)
    out = project(np.array([3.0, 4.0]), c)
    np.testing.assert_allclose(out, [0.6, 0.8], atol=1e-12)


def test_project_rejects_non_finite():
    c = PerturbationConstraint(norm_order="l2", radius=1.0)
    with pytest.raises(ValueError, match="finite"):
        project(np.array([np.nan, 0.0]), c)


def test_project_idempotent_and_feasible():
    rng = np.random.default_rng(13)
    deltas = rng.normal(size=(200, 4)) * 3.0
    for order in ("l2", "linf"):
        c = PerturbationConstraint(norm_order=order, radius=0.7)
        for row in deltas:
            once = project(row, c)
            twice = project(once, c)
            np.testing.assert_array_equal(once, twice)
            if order == "l2":
                norm = float(np.sqrt((once**2).sum()))
            else:
                norm = float(np.abs(once).max())
            assert norm <= 0.7 + 1e-12


def test_pga_zero_iterations():
    ds = three_point_dataset()
    c = PerturbationConstraint(norm_order="l2", radius=0.5)
    config = PgaConfig(step_size=0.1, max_iterations=0)
    result = pga_maximize(ds, K1, c, config)
    np.testing.assert_array_equal(result.perturbed.points, ds.points)
    np.testing.assert_array_equal(result.deltas, np.zeros((3, 1)))
    assert len(result.trace) == 1
    assert result.trace[0] == estimate_bayes_error(ds, K1).value


def test_pga_trace_endpoints_and_length():
    ds = random_dataset(1, n=12, d=2)
    c = PerturbationConstraint(norm_order="l2", radius=0.3)
    config = PgaConfig(step_size=0.02, max_iterations=8)
    result = pga_maximize(ds, K1, c, config)
    assert len(result.trace) == 9
    assert result.trace[0] == estimate_bayes_error(ds, K1).value
    assert result.trace[-1] == estimate_bayes_error(result.perturbed, K1).value


def test_pga_small_step_monotone():
    ds = random_dataset(2, n=12, d=2)
    c = PerturbationConstraint(norm_order="l2", radius=0.3)
    config = PgaConfig(step_size=0.005, max_iterations=15)
    result = pga_maximize(ds, K1, c, config)
    diffs = np.diff(np.asarray(result.trace))
    assert diffs.min() >= -1e-9
    assert result.trace[-1] >= result.trace[0]
    assert result.warnings == ()


def test_pga_frozen_rows_untouched():
    ds = random_dataset(4, n=6, d=2)
    frozen = (0, 2, 4)
    c = PerturbationConstraint(norm_order="l2", radius=0.4, frozen=frozen)
    config = PgaConfig(step_size=0.01, max_iterations=10)
    result = pga_maximize(ds, K1, c, config)
    for i in frozen:
        np.testing.assert_array_equal(result.perturbed.points[i], ds.points[i])
        np.testing.assert_array_equal(result.deltas[i], np.zeros(2))
    moved = [i for i in range(6) if i not in frozen]
    assert np.abs(result.deltas[moved]).max() > 0.0
    np.testing.assert_array_equal(result.perturbed.labels, ds.labels)


def test_pga_iterates_stay_feasible():
    ds = random_dataset(5, n=10, d=3)
    c = PerturbationConstraint(norm_order="linf", radius=0.2)
    config = PgaConfig(step_size=0.5, max_iterations=6)
    seen = []

    def hook(iteration, deltas, value):
        seen.append((iteration, np.abs(deltas).max()))

    result = pga_maximize(ds, K1, c, config, iteration_hook=hook)
    assert len(seen) == 6
    assert max(m for _, m in seen) <= 0.2 + 1e-12
    assert np.abs(result.deltas).max() <= 0.2 + 1e-12


def test_pga_huge_step_warns():
    ds = random_dataset(7, n=14, d=2)
    c = PerturbationConstraint(norm_order="l2", radius=0.5)
    config = PgaConfig(step_size=50.0, max_iterations=12)
    with pytest.warns(StepSizeWarning, match="2/kappa"):
        result = pga_maximize(ds, K1, c, config)
    assert result.warnings
    assert "step" in result.warnings[0]


def test_pga_record_trace_off():
    ds = random_dataset(8, n=10, d=2)
    c = PerturbationConstraint(norm_order="l2", radius=0.3)
    full = pga_maximize(ds, K1, c, PgaConfig(step_size=0.02, max_iterations=7))
    short = pga_maximize(
        ds, K1, c, PgaConfig(step_size=0.02, max_iterations=7, record_trace=False)
    )
    assert len(short.trace) == 2
    assert short.trace[0] == full.trace[0]
    assert short.trace[-1] == full.trace[-1]
    np.testing.assert_array_equal(short.perturbed.points, full.perturbed.points)


def test_pga_deterministic_rerun():
    ds = random_dataset(9, n=16, d=3, k=3)
    c = PerturbationConstraint(norm_order="linf", radius=0.25)
    config = PgaConfig(step_size=0.03, max_iterations=10)
    a = pga_maximize(ds, K1, c, config)
    b = pga_maximize(ds, K1, c, config)
    np.testing.assert_array_equal(a.perturbed.points, b.perturbed.points)
    np.testing.assert_array_equal(a.trace, b.trace)


def test_pga_threads_bitwise_identical():
    ds = random_dataset(10, n=80, d=2)
    c = PerturbationConstraint(norm_order="l2", radius=0.3)
    config = PgaConfig(step_size=0.05, max_iterations=5)
    a = pga_maximize(ds, K1, c, config, threads=1)
    b = pga_maximize(ds, K1, c, config, threads=4)
    np.testing.assert_array_equal(a.perturbed.points, b.perturbed.points)
    np.testing.assert_array_equal(a.trace, b.trace)


def test_pga_rejects_all_frozen():
    ds = three_point_dataset()
    c = PerturbationConstraint(norm_order="l2", radius=0.5, frozen=(0, 1, 2))
    with pytest.raises(ValueError, match="frozen"):
        pga_maximize(ds, K1, c, PgaConfig(step_size=0.1, max_iterations=3))


def test_pga_rejects_out_of_range_frozen():
    ds = three_point_dataset()
    c = PerturbationConstraint(norm_order="l2", radius=0.5, frozen=(5,))
    with pytest.raises(ValueError, match="frozen"):
        pga_maximize(ds, K1, c, PgaConfig(step_size=0.1, max_iterations=3))


def test_pga_single_class_is_a_fixed_point():
    ds = LabeledDataset([[0.0], [1.0], [2.0]], [0, 0, 0], 1)
    c = PerturbationConstraint(norm_order="l2", radius=0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        result = pga_maximize(ds, K1, c, PgaConfig(step_size=0.1, max_iterations=5))
    np.testing.assert_array_equal(result.perturbed.points, ds.points)
    assert result.trace[0] == 0.0
    assert result.trace[-1] == 0.0
