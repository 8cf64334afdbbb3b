import math

import numpy as np
import pytest

from helpers import poisson_crlb_sigma_center
from nvscan.config import (AnalysisOptions, ExperimentConfig, FrequencyPlan,
                           MaterialParams, RegionSpec, ScanGrid, SensorConfig,
                           SpectrumModelParams, Vortex, VortexConfiguration)
from nvscan.constants import GYROMAGNETIC_RATIO
from nvscan.errors import ModelDomainError, ReferenceFitError
from nvscan.fieldmodel import total_field
from nvscan.scan import (FieldMap, ScanDataset, count_vortices,
                         estimate_sensitivity, reconstruct_field_map,
                         reference_position, run_scan)
from nvscan.sensor import project_field


def make_config(n=6, dwell=2.0, temperature=3.0, vortices=(), bias=1e-3,
                pixel=208e-9, seed=7, plan=None, **scene_kwargs):
    scene = VortexConfiguration(
        temperature_k=temperature, bias_bz_t=bias,
        vortices=[Vortex(x_m=x, y_m=y) for x, y in vortices], **scene_kwargs)
    sensor = SensorConfig(frequency_plan=plan or FrequencyPlan())
    origin = -(n - 1) * pixel / 2
    grid = ScanGrid(origin_xy_m=(origin, origin), pixel_size_m=pixel,
                    n_x=n, n_y=n, dwell_time_s=dwell)
    return ExperimentConfig(scene=scene, sensor=sensor, grid=grid, seed=seed)


def grid_region(n):
    return RegionSpec(x0=0, y0=0, n_x=n, n_y=n)


def test_normal_state_scan_is_featureless():
    config = make_config(n=6, temperature=3.0)
    fieldmap = reconstruct_field_map(run_scan(config))
    values = fieldmap.delta_b_t[~fieldmap.mask]
    assert values.size == 36
    sigma = values.std(ddof=1)
    assert np.abs(values).max() < 6 * sigma
    # the reference fit error is common to all pixels, so the map mean
    # scatters at the single-pixel scale, not sigma/sqrt(N)
    assert abs(values.mean()) < 5 * sigma
    count, _ = count_vortices(fieldmap, 10 * sigma + 1e-6)
    assert count == 0


def test_scan_seed_determinism():
    config = make_config(seed=42)
    a, b = run_scan(config), run_scan(config)
    assert np.array_equal(a.counts, b.counts)
    assert np.array_equal(a.reference.counts, b.reference.counts)
    c = run_scan(make_config(seed=43))
    assert not np.array_equal(a.counts, c.counts)


def test_scan_thread_invariance():
    config = make_config(seed=11)
    a, b = run_scan(config, threads=1), run_scan(config, threads=4)
    assert np.array_equal(a.counts, b.counts)
    map_a = reconstruct_field_map(a, threads=1)
    map_b = reconstruct_field_map(b, threads=3)
    assert np.array_equal(map_a.delta_b_t, map_b.delta_b_t, equal_nan=True)


def test_zero_dwell_yields_no_repetitions():
    with pytest.raises(ModelDomainError):
        run_scan(make_config(dwell=1e-6))


def test_subrectangle_reconstruction_matches_full():
    config = make_config(n=6, temperature=0.35, vortices=[(0.0, 0.0)], bias=0.4e-3,
                         plan=FrequencyPlan(n_points=41, half_span_hz=12e6))
    dataset = run_scan(config)
    full = reconstruct_field_map(dataset)
    sub = reconstruct_field_map(dataset.subset(1, 2, 3, 3))
    np.testing.assert_array_equal(sub.delta_b_t, full.delta_b_t[2:5, 1:4])
    np.testing.assert_array_equal(sub.mask, full.mask[2:5, 1:4])


def test_flagged_pixels_propagate_to_mask():
    config = make_config(n=5)
    dataset = run_scan(config)
    dataset.flagged[2, 3] = True
    fieldmap = reconstruct_field_map(dataset)
    assert fieldmap.mask[2, 3]
    assert np.isnan(fieldmap.delta_b_t[2, 3])
    assert fieldmap.mask.sum() == 1


def test_out_of_span_resonance_is_flagged_and_scan_continues():
    # narrow plan + strong vortex: the vortex core leaves the span
    config = make_config(n=5, temperature=0.35, bias=0.4e-3, vortices=[(0.0, 0.0)],
                         pixel=133e-9, plan=FrequencyPlan(n_points=41, half_span_hz=7.05e6),
                         monopole_depth_m=0.35e-6)
    dataset = run_scan(config)
    assert dataset.flagged.any()
    assert not dataset.flagged.all()
    fieldmap = reconstruct_field_map(dataset)
    assert np.isnan(fieldmap.delta_b_t[dataset.flagged]).all()


def test_reference_fit_failure_is_hard_error():
    config = make_config(n=5)
    dataset = run_scan(config)
    flat = np.full_like(dataset.reference.counts,
                        int(dataset.reference.counts.mean()))
    dataset.reference.counts = flat
    with pytest.raises(ReferenceFitError):
        reconstruct_field_map(dataset)


def test_reconstruction_matches_ground_truth_within_crlb():
    config = make_config(n=6, temperature=0.35, bias=0.4e-3, vortices=[(0.0, 0.0)],
                         dwell=8.0, pixel=300e-9,
                         plan=FrequencyPlan(n_points=41, half_span_hz=12e6))
    dataset = run_scan(config)
    fieldmap = reconstruct_field_map(dataset)
    assert not fieldmap.mask.any()

    orientation = config.sensor.orientation
    ref_xy = reference_position(config)
    ref_b = project_field(total_field((ref_xy[0], ref_xy[1],
                                       config.grid.standoff_m), config.scene).b,
                          orientation)
    xs, ys = config.grid.positions()
    truth = np.zeros_like(fieldmap.delta_b_t)
    for iy, y in enumerate(ys):
        for ix, x in enumerate(xs):
            b = total_field((x, y, config.grid.standoff_m), config.scene).b
            truth[iy, ix] = project_field(b, orientation) - ref_b

    sigma_center = poisson_crlb_sigma_center(
        dataset.frequencies_hz, config.sensor.spectrum, config.sensor.pulse,
        float(dataset.frequencies_hz.mean()), dataset.repetitions_per_point)
    sigma_b = sigma_center / GYROMAGNETIC_RATIO
    rms = float(np.sqrt(np.mean((fieldmap.delta_b_t - truth) ** 2)))
    assert rms < 3 * sigma_b


def test_estimate_sensitivity_reference_values():
    rng = np.random.default_rng(4)
    grid = ScanGrid(pixel_size_m=185e-9, n_x=32, n_y=32, dwell_time_s=60.0)
    shape = (32, 32)
    nan = np.full(shape, np.nan)
    fieldmap = FieldMap(grid=grid, delta_b_t=rng.normal(0.0, 1.807e-6, shape),
                        center_hz=nan.copy(), mask=np.zeros(shape, dtype=bool),
                        contrast=nan.copy(), linewidth_fwhm_hz=nan.copy(),
                        chi_square=nan.copy(), reference_center_hz=2.87e9,
                        dwell_time_s=60.0)
    eta = estimate_sensitivity(fieldmap, grid_region(32))
    assert eta == pytest.approx(14e-6, abs=1e-6)

    fieldmap.delta_b_t = np.zeros(shape)
    assert estimate_sensitivity(fieldmap) == 0.0

    with pytest.raises(ModelDomainError):
        estimate_sensitivity(fieldmap, RegionSpec(x0=0, y0=0, n_x=4, n_y=4))


def make_projected_map(vortices, n=40, pixel=208e-9):
    """Noiseless vortex-only map built directly from the field projections
    (edge screening off so only vortex blobs cross the threshold)."""
    scene = VortexConfiguration(
        temperature_k=0.35, bias_bz_t=0.4e-3,
        material=MaterialParams(edge_slope_t_per_k=0.0, lambda0_m=140e-9),
        vortices=[Vortex(x_m=x, y_m=y) for x, y in vortices])
    from nvscan.config import NvOrientation
    orientation = NvOrientation()
    origin = -(n - 1) * pixel / 2
    grid = ScanGrid(origin_xy_m=(origin, origin), pixel_size_m=pixel,
                    n_x=n, n_y=n, dwell_time_s=30.0)
    ref = project_field([0.0, 0.0, scene.bias_bz_t], orientation)
    values = np.zeros((n, n))
    xs, ys = grid.positions()
    for iy, y in enumerate(ys):
        for ix, x in enumerate(xs):
            b = total_field((x, y, 110e-9), scene).b
            values[iy, ix] = project_field(b, orientation) - ref
    nan = np.full((n, n), np.nan)
    return FieldMap(grid=grid, delta_b_t=values, center_hz=nan.copy(),
                    mask=np.zeros((n, n), dtype=bool), contrast=nan.copy(),
                    linewidth_fwhm_hz=nan.copy(), chi_square=nan.copy(),
                    reference_center_hz=2.87e9, dwell_time_s=30.0)


def test_count_vortices_two_separated():
    fieldmap = make_projected_map([(0.0, -2.4e-6), (0.0, 2.4e-6)])
    count, centroids = count_vortices(fieldmap, 50e-6)
    assert count == 2
    ys = sorted(c[1] for c in centroids)
    assert ys[0] < 0 < ys[1]


def test_count_vortices_uniform_map_is_zero():
    fieldmap = make_projected_map([])
    assert count_vortices(fieldmap, 50e-6)[0] == 0


def test_count_vortices_merges_close_pair():
    # closer than two pixels: a single merged blob (threshold above the
    # negative projection lobe of the tilted NV axis)
    fieldmap = make_projected_map([(0.0, -0.15e-6), (0.0, 0.15e-6)])
    assert count_vortices(fieldmap, 150e-6)[0] == 1


def test_count_vortices_respects_mask_and_threshold_sign():
    fieldmap = make_projected_map([(0.0, -2.2e-6), (0.0, 2.2e-6)])
    with pytest.raises(ModelDomainError):
        count_vortices(fieldmap, 0.0)
    fieldmap.mask[:] = True
    assert count_vortices(fieldmap, 50e-6)[0] == 0


def test_sensitivity_is_dwell_invariant():
    etas = []
    for dwell in (2.0, 8.0):
        config = make_config(n=10, dwell=dwell, temperature=3.0, seed=5)
        fieldmap = reconstruct_field_map(run_scan(config))
        etas.append(estimate_sensitivity(fieldmap, grid_region(10)))
    assert abs(etas[0] - etas[1]) / etas[0] < 0.2


def test_vortex_width_at_least_standoff():
    fieldmap = make_projected_map([(0.0, 0.0)], n=60, pixel=133e-9)
    profile = np.abs(fieldmap.delta_b_t[30])
    half = profile.max() / 2
    width = np.count_nonzero(profile > half) * 133e-9
    assert width >= fieldmap.grid.standoff_m
