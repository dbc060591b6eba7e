import math
import re

import torch

from cvrc.errors import InvalidInputError
from cvrc.experiments.metrics import rmse
from cvrc.rc.readout import build_teacher, forward
from cvrc.rc.reservoir import run_collect
from cvrc.scene.raster import scan_line
from cvrc.scene.utils import N_CLASSES, Direction

_LINE_SPEC = re.compile(r'^\s*([ij])\s*=\s*(\d+)\s*(?:,\s*([ij])\s*=\s*(\d+)\s*-\s*(\d+)\s*)?$')


def parse_line_spec(text):
    """
    'i=210' or 'i=210,j=70-471' selects the east-west scan centred on row
    210; 'j=270[,i=10-411]' the north-south scan centred on column 270.
    Spans are half-open.
    """
    m = _LINE_SPEC.match(text or '')
    if not m:
        raise InvalidInputError('experiments', 'cannot parse line spec {!r}'.format(text))
    axis, index, span_axis, start, stop = m.groups()
    if span_axis is not None and span_axis == axis:
        raise InvalidInputError('experiments', 'span must run along the other axis in {!r}'.format(text))
    direction = Direction.EAST_WEST if axis == 'i' else Direction.NORTH_SOUTH
    span = None if span_axis is None else (int(start), int(stop))
    return direction, int(index), span


def trace_reservoir(run, diff, line_spec, truth=None):
    """
    Full state trace of one network along a scan line. Each row holds the
    pixel, the magnitude and phase of every neuron and, with a truth map,
    the output rmse against the +/-1 encoding of the true class (NaN where
    the truth is not a class).
    """
    direction, index, span = parse_line_spec(line_spec) if isinstance(line_spec, str) \
        else line_spec
    config, weights, readout = run.network(direction)
    seq, coords = scan_line(diff, direction, run.hyper.n_w, index, span)
    states, _ = run_collect(weights, config, seq, full_trace=True)

    errors = torch.full((states.shape[0],), math.nan, dtype=torch.float64)
    if truth is not None:
        labels = truth.labels[coords[:, 0], coords[:, 1]].long()
        valid = labels < N_CLASSES
        if bool(valid.any()):
            targets = build_teacher(labels[valid], N_CLASSES, dtype=config.dtype)
            per_step, _ = rmse(forward(readout, states[valid]), targets)
            errors[valid] = per_step.to(torch.float64)

    magnitude = states.abs()
    phase = torch.angle(states)
    rows = []
    for t in range(states.shape[0]):
        row = {'step': t, 'row': int(coords[t, 0]), 'col': int(coords[t, 1])}
        for i in range(config.n_res):
            row['abs_x{}'.format(i)] = float(magnitude[t, i])
        for i in range(config.n_res):
            row['arg_x{}'.format(i)] = float(phase[t, i])
        row['rmse'] = float(errors[t])
        rows.append(row)
    return rows
