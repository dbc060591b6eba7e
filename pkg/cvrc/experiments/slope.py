"""
Slope angle estimation along east-west scan lines with a delayed teacher:
the output at column j is trained to reproduce the true angle at column
j - delay, so the network has seen the pixels right after the one it
reports on.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import torch

from cvrc.errors import InvalidInputError
from cvrc.experiments.metrics import rmse
from cvrc.rc.readout import ReadoutModel, TrainingBatch, forward, train
from cvrc.rc.reservoir import ReservoirConfig, ReservoirWeights, init_weights, run_collect
from cvrc.scene.raster import scan_line
from cvrc.scene.utils import Direction
from cvrc.utils import log, split_seed, timer


@dataclass(frozen=True)
class SlopeHyper:
    n_w: int = 5
    n_res: int = 300
    spectral_radius: float = 0.90
    leak_rate: float = 0.80
    lam: float = 1e-12
    delay: int = 5
    train_rows: Tuple[int, ...] = (50, 100, 150, 200, 300, 350)
    eval_rows: Tuple[int, ...] = (150, 250)
    cols: Tuple[int, int] = (25, 375)

    def __post_init__(self):
        if self.delay < 0:
            raise InvalidInputError('experiments', 'delay must be >= 0')
        if not self.train_rows:
            raise InvalidInputError('experiments', 'no training rows given')
        if len(self.cols) != 2 or self.cols[0] >= self.cols[1]:
            raise InvalidInputError('experiments', 'column range {} is empty'.format(self.cols))
        if self.delay >= self.cols[1] - self.cols[0]:
            raise InvalidInputError(
                'experiments', 'delay {} leaves no usable steps in columns {}'.format(
                    self.delay, self.cols))

    def reservoir_config(self, base=None, seed=0):
        base = base or ReservoirConfig()
        return ReservoirConfig(
            n_in=self.n_w,
            n_res=self.n_res,
            init_spectral_radius=base.init_spectral_radius,
            desired_spectral_radius=self.spectral_radius,
            leak_rate=self.leak_rate,
            dynamics_mode=base.dynamics_mode,
            delta=base.delta,
            time_const=base.time_const,
            input_scale=base.input_scale,
            seed=split_seed(seed, 'reservoir/slope'),
        )


@dataclass
class SlopeRun:
    config: ReservoirConfig
    weights: ReservoirWeights
    readout: ReadoutModel
    hyper: SlopeHyper
    learn_time: float = 0.0
    train_rmse: float = float('nan')

    @property
    def delay(self):
        return self.hyper.delay


@dataclass
class SlopeEstimate:
    row: int
    cols: torch.Tensor
    degrees: torch.Tensor
    truth: Optional[torch.Tensor] = None
    errors: Optional[torch.Tensor] = field(default=None)

    @property
    def rmse(self):
        if self.errors is None:
            return float('nan')
        return float(torch.sqrt((self.errors ** 2).mean()))

    @property
    def mean_abs_error(self):
        if self.errors is None:
            return float('nan')
        return float(self.errors.abs().mean())


def check_rows(rows, diff, hyper):
    half = hyper.n_w // 2
    for r in rows:
        if r - half < 0 or r - half + hyper.n_w > diff.height:
            raise InvalidInputError(
                'experiments', 'row {} does not fit a {}-pixel window in {} rows'.format(
                    r, hyper.n_w, diff.height))
    if hyper.cols[1] > diff.width or hyper.cols[0] < 0:
        raise InvalidInputError(
            'experiments', 'column range {} outside a raster {} wide'.format(
                hyper.cols, diff.width))


def _line_states(run_config, weights, diff, row, hyper):
    seq, _ = scan_line(diff, Direction.EAST_WEST, hyper.n_w, row, hyper.cols)
    states, _ = run_collect(weights, run_config, seq, full_trace=True)
    return states


def train_slope(diff_ew, truth, hyper=None, base=None, seed=0):
    """
    Each training row starts from a zero state. Step t is paired with the
    true angle at column cols[0] + t - delay; the first `delay` steps have no
    teacher and stay out of the batch.
    """
    hyper = hyper or SlopeHyper()
    truth = torch.as_tensor(truth)
    if tuple(truth.shape) != (diff_ew.height, diff_ew.width):
        raise InvalidInputError('experiments', 'slope truth does not match the raster size')
    check_rows(hyper.train_rows, diff_ew, hyper)
    config = hyper.reservoir_config(base, seed)
    c0, c1 = hyper.cols
    d = hyper.delay

    start = timer()
    weights = init_weights(config)
    states, targets = [], []
    for row in hyper.train_rows:
        x = _line_states(config, weights, diff_ew, row, hyper)
        states.append(x[d:])
        targets.append(truth[row, c0:c1 - d])
    states = torch.cat(states, dim=0)
    targets = torch.cat(targets).to(config.dtype).unsqueeze(1)
    readout = train(TrainingBatch(states, targets, hyper.lam), config.value_domain)
    learn_time = timer() - start

    _, fit = rmse(forward(readout, states).real, targets.real)
    log.info('slope: trained on %d rows (%d samples), N_res=%d, training rmse %.3f deg',
             len(hyper.train_rows), states.shape[0], config.n_res, fit)
    return SlopeRun(config, weights, readout, hyper, learn_time, fit)


def estimate_slope(run, diff_ew, row, truth=None):
    """Angle in degrees for columns cols[0] .. cols[1] - delay - 1 of `row`."""
    hyper = run.hyper
    check_rows([row], diff_ew, hyper)
    c0, c1 = hyper.cols
    d = hyper.delay
    x = _line_states(run.config, run.weights, diff_ew, row, hyper)
    degrees = forward(run.readout, x[d:])[:, 0].real.contiguous()
    cols = torch.arange(c0, c1 - d)
    estimate = SlopeEstimate(row, cols, degrees)
    if truth is not None:
        estimate.truth = torch.as_tensor(truth)[row, c0:c1 - d]
        estimate.errors = degrees - estimate.truth
    return estimate


def neighbor_difference_slope(diff_ew, height_ambiguity, range_spacing):
    """Angle in degrees from the raw east-west phase difference of each pixel."""
    rise = diff_ew.phase * height_ambiguity / (2 * math.pi)
    return torch.rad2deg(torch.atan(rise / range_spacing))


def slope_rows(estimate, neighbor):
    """Per-column table of one evaluated row: truth, both estimates, both errors."""
    rows = []
    baseline = neighbor[estimate.row, estimate.cols]
    for k, col in enumerate(estimate.cols.tolist()):
        truth = float(estimate.truth[k]) if estimate.truth is not None else float('nan')
        cvrc = float(estimate.degrees[k])
        nb = float(baseline[k])
        rows.append({
            'row': estimate.row,
            'col': col,
            'truth_deg': truth,
            'cvrc_deg': cvrc,
            'neighbor_deg': nb,
            'err_cvrc': abs(cvrc - truth),
            'err_neighbor': abs(nb - truth),
        })
    return rows
