import os
from dataclasses import replace

import torch

from cvrc.cli.arguments import parser
from cvrc.cli.config import RunConfig
from cvrc.errors import EXIT_IO, EXIT_OK, ConfigError, CVRCError, InvalidInputError
from cvrc.experiments.aspect import generalize, metrics_row, run_aspect, train_aspect
from cvrc.experiments.file_writer import FileWriter
from cvrc.experiments.metrics import flat_phase_variance, salt_and_pepper_count
from cvrc.experiments.slope import (check_rows, estimate_slope, neighbor_difference_slope,
                                    slope_rows, train_slope)
from cvrc.experiments.sweep import sweep_frames, sweep_neurons
from cvrc.experiments.trace import parse_line_spec, trace_reservoir
from cvrc.rc.readout import save_model
from cvrc.rc.reservoir import ValueDomain
from cvrc.scene.raster import read_pgm, read_raster, write_pgm, write_raster
from cvrc.scene.synthscene import (Scene, build_scene, ground_truth_aspect, read_dem, read_slope,
                                   water_mask, write_dem, write_slope)
from cvrc.scene.utils import CLASS_NAMES, Direction
from cvrc.utils import log

SCENE_FILES = dict(
    dem='dem.dem1',
    interferogram='interferogram.cxr',
    diff_ew='diff_ew.cxr',
    diff_ns='diff_ns.cxr',
    truth_aspect='truth_aspect.pgm',
    truth_slope='truth_slope.slp',
)


def _typed(build, *args):
    """Bad values in the configuration are usage errors, not numeric ones."""
    try:
        return build(*args)
    except ConfigError:
        raise
    except InvalidInputError as e:
        raise ConfigError('cli', str(e)) from e


def _ensure_writable(path):
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError('output directory {} is not writable'.format(path))


def load_scene(config, second=False):
    spec = _typed(config.scene_spec, second)
    if second:
        # area and region keys describe the primary scene only
        return build_scene(spec)
    areas = _typed(config.teacher_areas, spec)
    regions = config.regions(spec)
    scene_dir = config.get('scene_dir')
    if not scene_dir:
        return build_scene(spec, areas, regions)

    paths = {k: os.path.join(scene_dir, v) for k, v in SCENE_FILES.items()}
    missing = [p for p in paths.values() if not os.path.isfile(p)]
    if missing:
        raise ConfigError('cli', 'scene directory {} lacks {}'.format(scene_dir, missing[0]))
    dem = read_dem(paths['dem'])
    if (dem.height, dem.width) != (spec.height, spec.width):
        raise ConfigError('cli', '{} holds a {}x{} scene, the configuration describes {}x{}'.format(
            scene_dir, dem.height, dem.width, spec.height, spec.width))
    truth = ground_truth_aspect(dem, areas, water_mask(spec))
    truth = replace(truth, aspect=read_pgm(paths['truth_aspect']),
                    slope_ew=read_slope(paths['truth_slope']))
    log.info('Loaded scene from %s', scene_dir)
    return Scene(
        spec=spec,
        dem=dem,
        interferogram=read_raster(paths['interferogram']),
        diff_ew=read_raster(paths['diff_ew']),
        diff_ns=read_raster(paths['diff_ns']),
        truth=truth,
        teacher_areas=areas,
        regions=regions,
    )


def cmd_synth(config, args=None):
    spec = _typed(config.scene_spec)
    scene = build_scene(spec, _typed(config.teacher_areas, spec), config.regions(spec))
    _ensure_writable(config.out)
    with FileWriter(config.out, config.as_dict()) as fw:
        write_dem(fw.path(SCENE_FILES['dem']), scene.dem)
        write_raster(fw.path(SCENE_FILES['interferogram']), scene.interferogram)
        write_raster(fw.path(SCENE_FILES['diff_ew']), scene.diff_ew)
        write_raster(fw.path(SCENE_FILES['diff_ns']), scene.diff_ns)
        write_pgm(fw.path(SCENE_FILES['truth_aspect']), scene.truth.aspect)
        write_slope(fw.path(SCENE_FILES['truth_slope']), scene.truth.slope_ew, scene.dem)
        log.info('synth: wrote %d scene files to %s', len(SCENE_FILES), fw.basepath)


def _report(title, rows):
    lines = [title, '']
    for row in rows:
        lines.append('{method} on {scene} scene'.format(**row))
        for k, v in row.items():
            if k in ('method', 'scene'):
                continue
            lines.append('  {:<28} {}'.format(k, '{:.4f}'.format(v) if isinstance(v, float) else v))
    return '\n'.join(lines) + '\n'


def _confusion_rows(confusion):
    rows = []
    for i, name in enumerate(CLASS_NAMES):
        row = {'truth': name}
        for j, pred in enumerate(CLASS_NAMES):
            row[pred] = int(confusion[i, j])
        rows.append(row)
    return rows


def cmd_aspect(config, args=None):
    baseline = config.get('baseline', 'cvrc')
    line = config.get('trace')
    if line is not None:
        if baseline == 'neighbor':
            raise ConfigError('cli', 'a reservoir trace needs --baseline cvrc or rvrc')
        _typed(parse_line_spec, line)
    hyper = _typed(config.aspect_hyper)
    base = _typed(config.reservoir_config)
    scene = load_scene(config)
    _ensure_writable(config.out)

    with FileWriter(config.out, config.as_dict()) as fw:
        metrics, result, run = run_aspect(scene, hyper, base, config.seed, baseline)
        write_pgm(fw.path('labels.pgm'), result.labels)
        rows = [metrics_row(metrics, baseline, 'train')]
        rows[0]['salt_and_pepper'] = salt_and_pepper_count(result.labels)
        if 'flat' in scene.regions:
            rows[0]['flat_phase_variance'] = flat_phase_variance(
                scene.diff_ew, scene.regions['flat'])
        if run is not None:
            write_pgm(fw.path('labels_ew.pgm'), result.labels_ew)
            write_pgm(fw.path('labels_ns.pgm'), result.labels_ns)
            save_model(run.readout_ew, fw.path('model_ew.cvm'))
            save_model(run.readout_ns, fw.path('model_ns.cvm'))
        fw.write_table('confusion.csv', _confusion_rows(metrics.confusion))

        if config.get('second_scene'):
            other = load_scene(config, second=True)
            if run is None:
                m2, r2, _ = run_aspect(other, hyper, base, config.seed, baseline)
            else:
                m2, r2 = generalize(run, other)
            write_pgm(fw.path('labels_second.pgm'), r2.labels)
            rows.append(metrics_row(m2, baseline, 'second'))

        if line is not None:
            direction, _, _ = parse_line_spec(line)
            diff = scene.diff_ew if direction is Direction.EAST_WEST else scene.diff_ns
            fw.write_table('trace.csv', trace_reservoir(run, diff, line, scene.truth.aspect))

        fw.write_table('metrics.csv', rows)
        fw.write_text('report.txt', _report('aspect classification', rows))


def cmd_slope(config, args=None):
    hyper = _typed(config.slope_hyper)
    base = _typed(config.reservoir_config)
    scene = load_scene(config)
    _ensure_writable(config.out)
    _typed(check_rows, tuple(hyper.train_rows) + tuple(hyper.eval_rows), scene.diff_ew, hyper)

    with FileWriter(config.out, config.as_dict()) as fw:
        run = train_slope(scene.diff_ew, scene.truth.slope_ew, hyper, base, config.seed)
        save_model(run.readout, fw.path('model_slope.cvm'))
        neighbor = neighbor_difference_slope(scene.diff_ew, scene.spec.height_ambiguity,
                                             scene.dem.range_spacing)
        columns, summary = [], []
        for row in hyper.eval_rows:
            estimate = estimate_slope(run, scene.diff_ew, row, scene.truth.slope_ew)
            per_col = slope_rows(estimate, neighbor)
            columns.extend(per_col)
            summary.append({
                'method': 'cvrc',
                'scene': 'row {} ({})'.format(row, 'seen' if row in hyper.train_rows
                                               else 'unseen'),
                'rmse_cvrc': estimate.rmse,
                'mae_cvrc': estimate.mean_abs_error,
                'mae_neighbor': float(torch.tensor([r['err_neighbor'] for r in per_col]).mean()),
                'learn_time': run.learn_time,
            })
        fw.write_table('slope.csv', columns)
        fw.write_table('slope_summary.csv', summary)
        fw.write_text('report.txt', _report('slope estimation', summary))


def cmd_sweep(config, args=None):
    grid = getattr(args, 'grid', 'all')
    baseline = config.get('baseline', 'cvrc')
    if baseline == 'neighbor':
        raise ConfigError('cli', 'sweeps vary reservoir settings; use cvrc or rvrc')
    neurons, frames = config.neuron_grid(), config.frame_grid()
    if grid in ('neurons', 'all') and not neurons:
        raise ConfigError('cli', 'sweep.neurons is empty')
    if grid in ('frames', 'all') and not frames:
        raise ConfigError('cli', 'sweep.frame_sizes is empty')
    hyper = _typed(config.aspect_hyper)
    base = _typed(config.reservoir_config)
    workers = config.get('workers', 1)
    scene = load_scene(config)
    _ensure_writable(config.out)

    with FileWriter(config.out, config.as_dict()) as fw:
        if grid in ('neurons', 'all'):
            fw.write_table('sweep_neurons.csv', sweep_neurons(
                scene, neurons, hyper, base, config.seed, baseline, workers))
        if grid in ('frames', 'all'):
            fw.write_table('sweep_frames.csv', sweep_frames(
                scene, frames, hyper, base, config.seed, baseline, workers))


def cmd_trace(config, args=None):
    line = config.get('trace')
    if line is None:
        raise ConfigError('cli', 'trace needs a line spec (--trace i=ROW)')
    direction, _, _ = _typed(parse_line_spec, line)
    baseline = config.get('baseline', 'cvrc')
    if baseline == 'neighbor':
        raise ConfigError('cli', 'a reservoir trace needs --baseline cvrc or rvrc')
    hyper = _typed(config.aspect_hyper)
    base = _typed(config.reservoir_config)
    if baseline == 'rvrc':
        base = replace(base, value_domain=ValueDomain.REAL_PAIR)
    scene = load_scene(config)
    _ensure_writable(config.out)

    with FileWriter(config.out, config.as_dict()) as fw:
        run = train_aspect(scene.diff_ew, scene.diff_ns, scene.teacher_areas, hyper, base,
                           config.seed)
        diff = scene.diff_ew if direction is Direction.EAST_WEST else scene.diff_ns
        fw.write_table('trace.csv', trace_reservoir(run, diff, line, scene.truth.aspect))


COMMANDS = dict(
    synth=cmd_synth,
    aspect=cmd_aspect,
    slope=cmd_slope,
    sweep=cmd_sweep,
    trace=cmd_trace,
)


def _overrides(args):
    overrides = {}
    for item in args.overrides:
        if '=' not in item:
            raise ConfigError('cli', '--set expects KEY=VALUE, got {!r}'.format(item))
        key, value = item.split('=', 1)
        overrides[key.strip()] = value
    # explicit flags win over --set and the config file
    for key, attr in (('out', 'out'), ('seed', 'seed'), ('baseline', 'baseline'),
                      ('trace', 'trace'), ('second_scene', 'second_scene'),
                      ('workers', 'workers'), ('reservoir.dynamics', 'dynamics')):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    return overrides


def main(argv=None):
    args = parser.parse_args(argv)
    try:
        config = RunConfig.load(args.config, _overrides(args))
        COMMANDS[args.command](config, args)
    except CVRCError as e:
        log.error('%s', e)
        return e.exit_code
    except OSError as e:
        log.error('io: %s', e)
        return EXIT_IO
    return EXIT_OK
