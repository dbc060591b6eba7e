"""
Aspect classification with two reservoirs, one per differencing direction.

Each network learns from teacher frames cut out of its own difference
raster and then scans the whole raster as one continuous sequence. The two
per-pixel output vectors are averaged and the class whose output lies
closest to 1 wins.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional

import torch

from cvrc.errors import InvalidInputError
from cvrc.experiments.metrics import Metrics, accuracy, rmse
from cvrc.rc.readout import TrainingBatch, build_teacher, forward, train
from cvrc.rc.reservoir import ReservoirConfig, ValueDomain, init_weights, run_collect
from cvrc.scene.raster import (LabelMap, frame_to_sequence, outputs_to_map, sample_frames,
                               scan_sequence)
from cvrc.scene.synthscene import label_from_differences
from cvrc.scene.utils import MASKED, MISSING, N_CLASSES, Direction
from cvrc.utils import log, make_generator, split_seed, timer


@dataclass(frozen=True)
class AspectHyper:
    n_w: int = 5
    n_t: int = 5
    per_area: int = 1000
    lam: float = 1e-12

    def __post_init__(self):
        if self.n_w < 1 or self.n_t < 1 or self.per_area < 1:
            raise InvalidInputError('experiments', 'n_w, n_t and per_area must be >= 1')
        if self.lam < 0:
            raise InvalidInputError('experiments', 'lambda must be >= 0')


@dataclass
class AspectRun:
    config_ew: ReservoirConfig
    config_ns: ReservoirConfig
    weights_ew: object
    weights_ns: object
    readout_ew: object
    readout_ns: object
    hyper: AspectHyper
    learn_time: float = 0.0
    train_rmse: Dict[Direction, float] = field(default_factory=dict)

    @property
    def value_domain(self):
        return self.config_ew.value_domain

    def network(self, direction):
        if direction is Direction.EAST_WEST:
            return self.config_ew, self.weights_ew, self.readout_ew
        return self.config_ns, self.weights_ns, self.readout_ns


@dataclass
class AspectResult:
    labels: LabelMap
    labels_ew: LabelMap
    labels_ns: LabelMap
    classify_time: float = 0.0


def network_configs(base, hyper, seed):
    """EW and NS configs sharing hyper parameters, seeded independently."""
    base = replace(base, n_in=hyper.n_w)
    return (base.with_seed(split_seed(seed, 'reservoir/ew')),
            base.with_seed(split_seed(seed, 'reservoir/ns')))


def _train_direction(diff, areas, hyper, config, direction, seed):
    frames = sample_frames(diff, areas, hyper.per_area, hyper.n_w, hyper.n_t, direction,
                           split_seed(seed, 'frames/' + direction.value))
    order = torch.randperm(len(frames), generator=make_generator(
        split_seed(seed, 'order/' + direction.value)))
    frames = [frames[i] for i in order.tolist()]

    sequence = torch.cat([frame_to_sequence(diff, f) for f, _ in frames], dim=0)
    labels = torch.tensor([label for _, label in frames], dtype=torch.long)
    last_steps = [(k + 1) * hyper.n_t - 1 for k in range(len(frames))]

    weights = init_weights(config)
    states, _ = run_collect(weights, config, sequence, last_steps)
    targets = build_teacher(labels, N_CLASSES, dtype=config.dtype)
    readout = train(TrainingBatch(states, targets, hyper.lam), config.value_domain)
    _, fit = rmse(forward(readout, states), targets)
    log.info('aspect: %s network trained on %d frames, N_res=%d, training rmse %.4f',
             direction.value, len(frames), config.n_res, fit)
    return weights, readout, fit


def train_aspect(diff_ew, diff_ns, teacher_areas, hyper=None, base=None, seed=0):
    """
    Sample per_area frames from every teacher area in both directions, drive
    each reservoir over its shuffled frame sequence and fit both readouts on
    the state at the last step of every frame.
    """
    hyper = hyper or AspectHyper()
    base = base or ReservoirConfig()
    if (diff_ew.height, diff_ew.width) != (diff_ns.height, diff_ns.width):
        raise InvalidInputError('experiments', 'difference rasters differ in size')
    config_ew, config_ns = network_configs(base, hyper, seed)

    start = timer()
    weights_ew, readout_ew, fit_ew = _train_direction(
        diff_ew, teacher_areas, hyper, config_ew, Direction.EAST_WEST, seed)
    weights_ns, readout_ns, fit_ns = _train_direction(
        diff_ns, teacher_areas, hyper, config_ns, Direction.NORTH_SOUTH, seed)
    learn_time = timer() - start

    return AspectRun(config_ew, config_ns, weights_ew, weights_ns, readout_ew, readout_ns,
                     hyper, learn_time,
                     {Direction.EAST_WEST: fit_ew, Direction.NORTH_SOUTH: fit_ns})


def scan_outputs(run, diff, direction):
    """Output vector of one network at every pixel its scan reaches."""
    config, weights, readout = run.network(direction)
    seq, coords = scan_sequence(diff, direction, run.hyper.n_w)
    states, _ = run_collect(weights, config, seq, full_trace=True)
    return outputs_to_map(forward(readout, states), coords, diff.width, diff.height)


def decide(values):
    """Index of the output closest to 1 + 0j along the last axis."""
    return torch.argmin((values - 1).abs(), dim=-1).to(torch.uint8)


def _label_grid(grid):
    labels = decide(grid.values)
    return torch.where(grid.present, labels, torch.full_like(labels, MISSING))


def classify_aspect(run, diff_ew, diff_ns, mask=None):
    if (diff_ew.height, diff_ew.width) != (diff_ns.height, diff_ns.width):
        raise InvalidInputError(
            'experiments', 'difference rasters differ in size: {}x{} vs {}x{}'.format(
                diff_ew.height, diff_ew.width, diff_ns.height, diff_ns.width))
    start = timer()
    grid_ew = scan_outputs(run, diff_ew, Direction.EAST_WEST)
    grid_ns = scan_outputs(run, diff_ns, Direction.NORTH_SOUTH)

    both = grid_ew.present & grid_ns.present
    labels = decide(0.5 * (grid_ew.values + grid_ns.values))
    labels = torch.where(both, labels, torch.full_like(labels, MISSING))
    labels_ew, labels_ns = _label_grid(grid_ew), _label_grid(grid_ns)
    if mask is not None:
        masked = torch.full_like(labels, MASKED)
        labels = torch.where(mask, masked, labels)
        labels_ew = torch.where(mask, masked, labels_ew)
        labels_ns = torch.where(mask, masked, labels_ns)
    elapsed = timer() - start
    log.info('aspect: classified %dx%d pixels in %.2f s', diff_ew.height, diff_ew.width, elapsed)
    return AspectResult(LabelMap(labels), LabelMap(labels_ew), LabelMap(labels_ns), elapsed)


def phase_threshold(tau, height_ambiguity):
    """Elevation threshold in metres to the matching phase threshold in radians."""
    return 2 * math.pi * tau / height_ambiguity


def neighbor_difference_classify(diff_ew, diff_ns, tau, mask=None):
    """Label each pixel straight from its two phase differences; tau in radians."""
    if (diff_ew.height, diff_ew.width) != (diff_ns.height, diff_ns.width):
        raise InvalidInputError('experiments', 'difference rasters differ in size')
    labels = label_from_differences(diff_ew.phase, diff_ns.phase, tau)
    if mask is not None:
        labels = torch.where(mask, torch.full_like(labels, MASKED), labels)
    return LabelMap(labels)


def evaluate_map(pred, truth, regions=None):
    overall, confusion = accuracy(pred, truth)
    metrics = Metrics(accuracy_overall=overall, confusion=confusion)
    for name, rect in (regions or {}).items():
        try:
            metrics.accuracy_regions[name], _ = accuracy(pred, truth, rect)
        except InvalidInputError as e:
            log.warning('aspect: region %s not evaluated (%s)', name, e)
            metrics.accuracy_regions[name] = float('nan')
    return metrics


def run_aspect(scene, hyper=None, base=None, seed=0, baseline='cvrc'):
    """
    Train and classify on `scene` with one of the three methods and score the
    result against its ground truth. Returns (metrics, result, run); run is
    None for the neighbor difference baseline.
    """
    truth = scene.truth
    if baseline == 'neighbor':
        start = timer()
        labels = neighbor_difference_classify(
            scene.diff_ew, scene.diff_ns,
            phase_threshold(truth.tau, scene.spec.height_ambiguity), truth.water_mask)
        elapsed = timer() - start
        result = AspectResult(labels, labels, labels, elapsed)
        metrics = evaluate_map(labels, truth.aspect, scene.regions)
        metrics.learn_time, metrics.classify_time = 0.0, elapsed
        return metrics, result, None

    base = base or ReservoirConfig()
    if baseline == 'rvrc':
        base = replace(base, value_domain=ValueDomain.REAL_PAIR)
    elif baseline != 'cvrc':
        raise InvalidInputError('experiments', 'unknown method {!r}'.format(baseline))
    run = train_aspect(scene.diff_ew, scene.diff_ns, scene.teacher_areas, hyper, base, seed)
    result = classify_aspect(run, scene.diff_ew, scene.diff_ns, truth.water_mask)
    metrics = evaluate_map(result.labels, truth.aspect, scene.regions)
    metrics.learn_time, metrics.classify_time = run.learn_time, result.classify_time
    metrics.rmse = sum(run.train_rmse.values()) / len(run.train_rmse)
    log.info('aspect: %s accuracy %.2f%% (learn %.2f s, classify %.2f s)', baseline,
             metrics.accuracy_overall, metrics.learn_time, metrics.classify_time)
    return metrics, result, run


def generalize(run, scene):
    """Classify another scene with networks trained elsewhere and score it."""
    result = classify_aspect(run, scene.diff_ew, scene.diff_ns, scene.truth.water_mask)
    metrics = evaluate_map(result.labels, scene.truth.aspect, scene.regions)
    metrics.learn_time, metrics.classify_time = 0.0, result.classify_time
    log.info('aspect: accuracy %.2f%% on an unseen scene', metrics.accuracy_overall)
    return metrics, result


def metrics_row(metrics, method: Optional[str] = None, scene: str = 'train'):
    row = {'method': method, 'scene': scene, 'accuracy': metrics.accuracy_overall}
    for name, value in metrics.accuracy_regions.items():
        row['accuracy_' + name] = value
    row['train_rmse'] = metrics.rmse
    row['learn_time'] = metrics.learn_time
    row['classify_time'] = metrics.classify_time
    return row
