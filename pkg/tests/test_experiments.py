import json
import math
import statistics
from dataclasses import replace

import pytest
import torch

from cvrc.errors import InvalidInputError
from cvrc.experiments.aspect import (AspectHyper, classify_aspect, decide, evaluate_map,
                                     generalize, neighbor_difference_classify, phase_threshold,
                                     run_aspect, train_aspect)
from cvrc.experiments.file_writer import FileWriter
from cvrc.experiments.metrics import accuracy, rmse, salt_and_pepper_count
from cvrc.experiments.slope import (SlopeHyper, estimate_slope, neighbor_difference_slope,
                                    slope_rows, train_slope)
from cvrc.experiments.sweep import sweep_frames, sweep_neurons
from cvrc.experiments.trace import parse_line_spec, trace_reservoir
from cvrc.rc.reservoir import ReservoirConfig, ValueDomain
from cvrc.scene.raster import ComplexRaster, LabelMap, Rect, rotate_phase
from cvrc.scene.synthscene import Cone, SceneSpec, build_scene
from cvrc.scene.utils import FLAT, MASKED, MISSING, NORTH, Direction


def _labels(rows):
    return LabelMap(torch.tensor(rows, dtype=torch.uint8))


def _ramp(height, width, rise, h_amb=250.0):
    """East-west difference raster of a plane rising `rise` metres per column."""
    phase = torch.full((height, width), 2 * math.pi * rise / h_amb, dtype=torch.float64)
    return ComplexRaster(torch.polar(torch.ones_like(phase), phase))


# metrics

def test_accuracy_counts_agreement():
    truth = _labels([[0, 1], [2, 3]])
    assert accuracy(truth, truth)[0] == 100.0
    half, confusion = accuracy(_labels([[0, 1], [3, 2]]), truth)
    assert half == 50.0
    assert int(confusion[2, 3]) == 1 and int(confusion[3, 2]) == 1
    assert int(confusion.sum()) == 4


def test_accuracy_skips_masked_and_missing():
    truth = _labels([[0, MASKED], [4, 4]])
    pred = _labels([[0, 1], [MISSING, 4]])
    value, confusion = accuracy(pred, truth)
    assert value == 100.0 and int(confusion.sum()) == 2
    assert accuracy(pred, truth, Rect(1, 1, 1, 1))[0] == 100.0
    with pytest.raises(InvalidInputError):
        accuracy(pred, truth, Rect(0, 1, 1, 1))


def test_accuracy_rejects_shape_mismatch():
    with pytest.raises(InvalidInputError):
        accuracy(_labels([[0, 1]]), _labels([[0], [1]]))


def test_rmse_examples():
    per_sample, mean = rmse(torch.tensor([[1.0, -1.0], [1.0, 1.0]]),
                            torch.tensor([[1.0, 1.0], [1.0, 1.0]]))
    assert per_sample.tolist() == pytest.approx([math.sqrt(2.0), 0.0])
    assert mean == pytest.approx(math.sqrt(2.0) / 2)
    with pytest.raises(InvalidInputError):
        rmse(torch.zeros(2, 0), torch.zeros(2, 0))


def test_rmse_ignores_component_order(rng):
    y = torch.from_numpy(rng.standard_normal((4, 5)) + 1j * rng.standard_normal((4, 5)))
    d = torch.from_numpy(rng.standard_normal((4, 5)) + 1j * rng.standard_normal((4, 5)))
    perm = torch.tensor([3, 0, 4, 1, 2])
    a, _ = rmse(y, d)
    b, _ = rmse(y[:, perm], d[:, perm])
    assert torch.allclose(a, b, atol=1e-14)


def test_salt_and_pepper_count():
    assert salt_and_pepper_count(_labels([[0, 0, 0], [0, 1, 0], [0, 0, 0]])) == 1
    assert salt_and_pepper_count(_labels([[2] * 4] * 4)) == 0
    assert salt_and_pepper_count(_labels([[0, 1], [1, 0]])) == 4
    assert salt_and_pepper_count(_labels([[0, MASKED], [MASKED, 0]])) == 0


# aspect

def test_decide_picks_output_closest_to_one():
    assert int(decide(torch.tensor([0.9, -1, 0.2, -1, -1], dtype=torch.complex128))) == 0
    ew = torch.tensor([1, -1, -1, -1, -1], dtype=torch.complex128)
    ns = torch.tensor([-1, -1, 0.8, -1, -1], dtype=torch.complex128)
    assert int(decide(0.5 * (ew + ns))) == 0
    assert int(decide(torch.tensor([-1, 1j, -1, -1, 0.5], dtype=torch.complex128))) == 4


def test_neighbor_difference_on_zero_phase():
    ones = ComplexRaster(torch.ones(6, 6))
    labels = neighbor_difference_classify(ones, ones, tau=0.1).labels
    assert bool((labels == FLAT).all())
    mask = torch.zeros(6, 6, dtype=torch.bool)
    mask[2, 3] = True
    masked = neighbor_difference_classify(ones, ones, 0.1, mask).labels
    assert int(masked[2, 3]) == MASKED and int(masked[0, 0]) == FLAT


def test_neighbor_difference_tracks_clean_truth(clean_scene):
    tau = phase_threshold(clean_scene.truth.tau, clean_scene.spec.height_ambiguity)
    labels = neighbor_difference_classify(clean_scene.diff_ew, clean_scene.diff_ns, tau)
    value, _ = accuracy(labels, clean_scene.truth.aspect)
    assert value > 97.0


def test_neighbor_difference_degrades_with_noise(small_spec):
    clean, _, _ = run_aspect(build_scene(small_spec), baseline='neighbor')
    noisy, _, run = run_aspect(build_scene(replace(small_spec, coherence=0.3)),
                               baseline='neighbor')
    assert run is None
    assert noisy.accuracy_overall < clean.accuracy_overall


def test_train_aspect_fits_teacher_frames(trained_run, small_hyper):
    assert trained_run.hyper == small_hyper
    assert trained_run.config_ew.n_in == small_hyper.n_w
    assert trained_run.config_ew.seed != trained_run.config_ns.seed
    for direction in Direction:
        assert trained_run.train_rmse[direction] < 1.0
    assert trained_run.readout_ew.w_out.shape == (5, trained_run.config_ew.n_res)


def test_train_aspect_is_deterministic(clean_scene, small_hyper, trained_run):
    again = train_aspect(clean_scene.diff_ew, clean_scene.diff_ns, clean_scene.teacher_areas,
                         small_hyper, ReservoirConfig(), seed=3)
    assert torch.equal(again.readout_ew.w_out, trained_run.readout_ew.w_out)
    assert torch.equal(again.readout_ns.b_out, trained_run.readout_ns.b_out)


def test_classify_clean_scene(clean_scene, trained_run):
    result = classify_aspect(trained_run, clean_scene.diff_ew, clean_scene.diff_ns,
                             clean_scene.truth.water_mask)
    labels = result.labels.labels
    assert labels.shape == (120, 120)
    # the east-west scan cannot centre a window on the two outermost rows
    assert bool((labels[0] == MISSING).all()) and bool((labels[-1] == MISSING).all())
    assert int(result.labels_ew.labels[0, 5]) == MISSING
    assert int(result.labels_ns.labels[0, 5]) != MISSING

    truth = clean_scene.truth.aspect
    overall, confusion = accuracy(result.labels, truth)
    assert overall > 80.0
    # every class is recovered, not only the plain
    recall = confusion.diagonal().double() / confusion.sum(dim=1).double()
    assert bool((recall > 0.4).all()), recall.tolist()
    regions = evaluate_map(result.labels, truth, clean_scene.regions).accuracy_regions
    assert regions['flat'] >= 95.0
    hits = total = 0
    for area in clean_scene.teacher_areas:
        rows, cols = area.rect.slices()
        block = labels[rows, cols]
        hits += int((block == area.label).sum())
        total += block.numel()
    assert hits / total > 0.7


def test_classification_ignores_a_global_phase_offset(clean_scene, small_hyper, trained_run):
    theta = 1.1
    ew = rotate_phase(clean_scene.diff_ew, theta)
    ns = rotate_phase(clean_scene.diff_ns, theta)
    rotated = train_aspect(ew, ns, clean_scene.teacher_areas, small_hyper, ReservoirConfig(),
                           seed=3)
    a = classify_aspect(trained_run, clean_scene.diff_ew, clean_scene.diff_ns).labels.labels
    b = classify_aspect(rotated, ew, ns).labels.labels
    assert float((a == b).double().mean()) > 0.999


def test_generalize_scores_an_unseen_scene(trained_run):
    other = build_scene(SceneSpec(width=100, height=100, cone=Cone(50, 50, 40, 400.0),
                                  coherence=1.0, scree_radius=0.0, seed=2))
    metrics, result = generalize(trained_run, other)
    assert 0.0 <= metrics.accuracy_overall <= 100.0
    assert set(metrics.accuracy_regions) == {'flat', 'cone'}
    assert metrics.learn_time == 0.0
    assert result.labels.labels.shape == (100, 100)


def test_evaluate_map_marks_empty_regions_nan():
    truth = _labels([[0, MASKED], [1, 2]])
    metrics = evaluate_map(truth, truth, {'lake': Rect(0, 1, 1, 1), 'all': Rect(0, 0, 2, 2)})
    assert math.isnan(metrics.accuracy_regions['lake'])
    assert metrics.accuracy_regions['all'] == 100.0


def test_run_aspect_rejects_unknown_method(clean_scene):
    with pytest.raises(InvalidInputError):
        run_aspect(clean_scene, baseline='svm')


def test_real_valued_baseline_runs(clean_scene, small_hyper):
    metrics, result, run = run_aspect(clean_scene, small_hyper, seed=3, baseline='rvrc')
    assert run.config_ew.value_domain is ValueDomain.REAL_PAIR
    assert run.readout_ns.w_out.dtype == torch.float64
    assert metrics.rmse == sum(run.train_rmse.values()) / 2
    assert 0.0 <= metrics.accuracy_overall <= 100.0
    assert result.labels.labels.shape == (120, 120)


def test_training_rmse_is_reported(clean_scene, small_hyper):
    metrics, _, run = run_aspect(clean_scene, small_hyper, seed=3)
    assert metrics.rmse == sum(run.train_rmse.values()) / 2 < 1.0
    neighbor, _, _ = run_aspect(clean_scene, baseline='neighbor')
    assert math.isnan(neighbor.rmse)


def test_aspect_hyper_validation():
    with pytest.raises(InvalidInputError):
        AspectHyper(n_w=0)
    with pytest.raises(InvalidInputError):
        AspectHyper(lam=-1.0)


# slope

def test_slope_learns_a_constant_ramp():
    diff = _ramp(20, 40, rise=3.0)
    truth = torch.full((20, 40), math.degrees(math.atan(0.1)), dtype=torch.float64)
    hyper = SlopeHyper(n_w=3, n_res=20, lam=1e-8, delay=0, train_rows=(5, 10),
                       eval_rows=(15,), cols=(2, 38))
    run = train_slope(diff, truth, hyper, seed=4)
    assert run.train_rmse < 0.5
    estimate = estimate_slope(run, diff, 15, truth)
    assert estimate.cols.tolist() == list(range(2, 38))
    assert estimate.mean_abs_error < 0.5


def test_slope_columns_follow_the_delay():
    diff = _ramp(20, 40, rise=3.0)
    truth = torch.full((20, 40), math.degrees(math.atan(0.1)), dtype=torch.float64)
    hyper = SlopeHyper(n_w=3, n_res=10, lam=1e-6, delay=5, train_rows=(5,), eval_rows=(8,),
                       cols=(2, 38))
    run = train_slope(diff, truth, hyper, seed=1)
    assert run.delay == 5
    estimate = estimate_slope(run, diff, 8, truth)
    assert estimate.cols.tolist() == list(range(2, 33))
    assert estimate.degrees.shape == (31,) and estimate.errors.shape == (31,)
    table = slope_rows(estimate, neighbor_difference_slope(diff, 250.0, 30.0))
    assert len(table) == 31
    assert list(table[0]) == ['row', 'col', 'truth_deg', 'cvrc_deg', 'neighbor_deg',
                              'err_cvrc', 'err_neighbor']
    assert table[0]['col'] == 2 and table[0]['row'] == 8


def test_neighbor_slope_is_exact_on_a_ramp():
    angle = neighbor_difference_slope(_ramp(4, 6, rise=3.0), 250.0, 30.0)
    assert torch.allclose(angle, torch.full((4, 6), math.degrees(math.atan(0.1)),
                                            dtype=torch.float64), atol=1e-9)


def test_slope_rejects_rows_outside_the_raster():
    diff = _ramp(20, 40, rise=1.0)
    truth = torch.zeros(20, 40, dtype=torch.float64)
    with pytest.raises(InvalidInputError):
        train_slope(diff, truth, SlopeHyper(n_w=5, n_res=4, train_rows=(19,), cols=(0, 40)))
    with pytest.raises(InvalidInputError):
        train_slope(diff, truth, SlopeHyper(n_w=5, n_res=4, train_rows=(5,), cols=(0, 50)))
    with pytest.raises(InvalidInputError):
        SlopeHyper(delay=400, cols=(0, 100))


# trace

def test_parse_line_spec():
    assert parse_line_spec('i=210') == (Direction.EAST_WEST, 210, None)
    assert parse_line_spec('i=210,j=70-471') == (Direction.EAST_WEST, 210, (70, 471))
    assert parse_line_spec(' j=270, i=10-411 ') == (Direction.NORTH_SOUTH, 270, (10, 411))
    for bad in ('', 'k=3', 'i=3,i=1-2', 'i=-1'):
        with pytest.raises(InvalidInputError):
            parse_line_spec(bad)


def test_trace_covers_the_line(clean_scene, trained_run):
    rows = trace_reservoir(trained_run, clean_scene.diff_ew, 'i=60', clean_scene.truth.aspect)
    assert len(rows) == 120
    n_res = trained_run.config_ew.n_res
    assert len(rows[0]) == 3 + 2 * n_res + 1
    assert rows[7]['row'] == 60 and rows[7]['col'] == 7 and rows[7]['step'] == 7
    assert all(not math.isnan(r['rmse']) for r in rows)

    part = trace_reservoir(trained_run, clean_scene.diff_ns, 'j=30,i=10-20')
    assert [r['row'] for r in part] == list(range(10, 20))
    assert all(math.isnan(r['rmse']) for r in part)


def test_trace_of_a_zero_raster_stays_at_rest(trained_run):
    zero = ComplexRaster(torch.zeros(10, 10))
    rows = trace_reservoir(trained_run, zero, 'i=5')
    assert all(r['abs_x0'] == 0.0 for r in rows)


def test_trace_rmse_prefers_the_true_class(clean_scene, trained_run):
    # row 5 and the row below it lie entirely on the plain
    truth = clean_scene.truth.aspect
    assert bool((truth.labels[5] == FLAT).all())
    wrong = LabelMap(torch.full_like(truth.labels, NORTH))
    right_rows = trace_reservoir(trained_run, clean_scene.diff_ew, 'i=5', truth)[10:]
    wrong_rows = trace_reservoir(trained_run, clean_scene.diff_ew, 'i=5', wrong)[10:]
    right = sum(r['rmse'] for r in right_rows) / len(right_rows)
    wrong = sum(r['rmse'] for r in wrong_rows) / len(wrong_rows)
    assert right < wrong


# sweeps

def test_sweep_neurons_in_process(clean_scene, small_hyper):
    rows = sweep_neurons(clean_scene, (2, 3), small_hyper, seed=0, workers=1)
    assert [r['n_res'] for r in rows] == [2, 3]
    for r in rows:
        assert {'n_w', 'n_t', 'accuracy', 'accuracy_flat', 'accuracy_cone', 'salt_and_pepper',
                'learn_time', 'classify_time'} <= set(r)
        assert 0.0 <= r['accuracy'] <= 100.0


def test_sweep_frames_in_process(clean_scene, small_hyper):
    rows = sweep_frames(clean_scene, ((3, 2),), small_hyper, seed=0, workers=1)
    assert len(rows) == 1 and (rows[0]['n_w'], rows[0]['n_t']) == (3, 2)


def test_sweep_workers_match_the_in_process_run(clean_scene, small_hyper):
    local = sweep_neurons(clean_scene, (2, 3, 4), small_hyper, seed=0, workers=1)
    spread = sweep_neurons(clean_scene, (2, 3, 4), small_hyper, seed=0, workers=2)
    assert [r['n_res'] for r in spread] == [2, 3, 4]
    for a, b in zip(local, spread):
        assert a['accuracy'] == b['accuracy']
        assert a['salt_and_pepper'] == b['salt_and_pepper']


def test_sweep_grids_are_checked(clean_scene):
    with pytest.raises(InvalidInputError):
        sweep_neurons(clean_scene, ())
    with pytest.raises(InvalidInputError):
        sweep_frames(clean_scene, ())
    with pytest.raises(InvalidInputError, match='does not fit'):
        sweep_frames(clean_scene, ((50, 1),))


# file writer

def test_file_writer_records_a_run(tmp_path):
    base = str(tmp_path / 'run')
    with FileWriter(base, {'seed': 1, 'method': 'cvrc'}) as writer:
        writer.write_table('t.csv', [{'a': 1, 'b': 2}, {'a': 3, 'c': 4}])
        writer.write_text('report.txt', 'done\n')
    with open(writer.path('t.csv')) as f:
        assert f.readline().strip() == 'a,b,c'
    with open(writer.path('meta.json')) as f:
        meta = json.load(f)
    assert meta['args'] == {'seed': 1, 'method': 'cvrc'}
    assert meta['successful'] is True and meta['date_end'] is not None
    with open(writer.path('out.log')) as f:
        assert 'Wrote 2 rows' in f.read()
    assert not (tmp_path / 'run' / 't.csv.part').exists()


def test_file_writer_marks_failed_runs(tmp_path):
    base = str(tmp_path / 'run')
    with pytest.raises(RuntimeError):
        with FileWriter(base) as writer:
            raise RuntimeError('boom')
    with open(writer.path('meta.json')) as f:
        assert json.load(f)['successful'] is False


# full-size comparisons

@pytest.fixture(scope='module')
def reference_scene():
    return build_scene(SceneSpec.reference())


@pytest.mark.slow
def test_method_ordering_on_the_reference_scene(reference_scene):
    cvrc, rvrc, flat = [], [], []
    for seed in range(5):
        metrics, _, _ = run_aspect(reference_scene, seed=seed)
        cvrc.append(metrics.accuracy_overall)
        flat.append(metrics.accuracy_regions['flat'])
        metrics, _, _ = run_aspect(reference_scene, seed=seed, baseline='rvrc')
        rvrc.append(metrics.accuracy_overall)
    neighbor, _, _ = run_aspect(reference_scene, baseline='neighbor')
    assert statistics.median(cvrc) > statistics.median(rvrc)
    assert statistics.median(cvrc) > neighbor.accuracy_overall
    assert statistics.median(flat) >= 90.0


@pytest.mark.slow
def test_slope_beats_neighbor_difference(reference_scene):
    hyper = SlopeHyper()
    run = train_slope(reference_scene.diff_ew, reference_scene.truth.slope_ew, hyper, seed=0)
    neighbor = neighbor_difference_slope(reference_scene.diff_ew,
                                         reference_scene.spec.height_ambiguity,
                                         reference_scene.dem.range_spacing)
    for row in hyper.eval_rows:
        estimate = estimate_slope(run, reference_scene.diff_ew, row,
                                  reference_scene.truth.slope_ew)
        table = slope_rows(estimate, neighbor)
        neighbor_mae = sum(r['err_neighbor'] for r in table) / len(table)
        assert estimate.mean_abs_error < 0.7 * neighbor_mae


@pytest.mark.slow
def test_learning_time_grows_with_the_reservoir(reference_scene):
    # per-step overhead hides the N_res^2 term below a few hundred neurons
    hyper = AspectHyper(per_area=200)
    times = []
    for n_res in (5, 150, 400):
        run = train_aspect(reference_scene.diff_ew, reference_scene.diff_ns,
                           reference_scene.teacher_areas, hyper, ReservoirConfig(n_res=n_res))
        times.append(run.learn_time)
    assert times[0] < times[1] < times[2]


@pytest.mark.slow
def test_frame_size_behavior(reference_scene):
    sizes = ((1, 1), (5, 5), (50, 50), (1, 50))
    rows = sweep_frames(reference_scene, sizes, seed=0, workers=2)
    by_size = {(r['n_w'], r['n_t']): r for r in rows}
    assert by_size[5, 5]['accuracy'] > by_size[1, 1]['accuracy']
    assert by_size[5, 5]['accuracy'] > by_size[50, 50]['accuracy']
    assert by_size[1, 50]['salt_and_pepper'] < by_size[1, 1]['salt_and_pepper']
