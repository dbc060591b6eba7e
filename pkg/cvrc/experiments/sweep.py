"""
Parameter sweeps over the aspect experiment. Grid points are independent,
so with workers > 1 they are spread over spawned processes the same way
evaluation episodes are spread over simulation workers.
"""

import multiprocessing as mp
from dataclasses import replace

from cvrc.errors import CVRCError, InvalidInputError
from cvrc.experiments.aspect import AspectHyper, run_aspect
from cvrc.experiments.metrics import salt_and_pepper_count
from cvrc.rc.reservoir import ReservoirConfig
from cvrc.utils import log

NEURON_GRID = (1, 5, 15, 30, 40, 50)
FRAME_GRID = tuple((n_w, n_t) for n_w in (1, 5, 50) for n_t in (1, 5, 50))


def _point_row(scene, hyper, base, seed, baseline):
    metrics, result, _ = run_aspect(scene, hyper, base, seed, baseline)
    row = {
        'n_res': base.n_res,
        'n_w': hyper.n_w,
        'n_t': hyper.n_t,
        'accuracy': metrics.accuracy_overall,
    }
    for name, value in metrics.accuracy_regions.items():
        row['accuracy_' + name] = value
    row['salt_and_pepper'] = salt_and_pepper_count(result.labels)
    row['learn_time'] = metrics.learn_time
    row['classify_time'] = metrics.classify_time
    return row


def mp_sweep(scene, points, seed, baseline, q):
    for idx, hyper, base in points:
        try:
            q.put((idx, _point_row(scene, hyper, base, seed, baseline), None))
        except Exception as e:
            q.put((idx, None, str(e)))


def data_allocation_per_worker(points, num_workers):
    points_each_worker = [[] for _ in range(num_workers)]
    for idx, point in enumerate(points):
        points_each_worker[idx % num_workers].append(point)
    return points_each_worker


def _run_points(scene, points, seed, baseline, workers):
    if workers <= 1 or len(points) == 1:
        return [_point_row(scene, hyper, base, seed, baseline) for _, hyper, base in points]

    ctx = mp.get_context('spawn')
    q = ctx.SimpleQueue()
    processes = []
    for chunk in data_allocation_per_worker(points, min(workers, len(points))):
        p = ctx.Process(target=mp_sweep, args=(scene, chunk, seed, baseline, q))
        p.start()
        processes.append(p)

    # drain before join so no worker blocks on a full pipe
    results, errors = {}, []
    for _ in range(len(points)):
        idx, row, err = q.get()
        results[idx] = row
        if err is not None:
            errors.append(err)
    for p in processes:
        p.join()
    if errors:
        raise CVRCError('experiments', 'sweep point failed: {}'.format(errors[0]))
    return [results[idx] for idx, _, _ in points]


def sweep_neurons(scene, n_res_list=NEURON_GRID, hyper=None, base=None, seed=0,
                  baseline='cvrc', workers=1):
    if not n_res_list:
        raise InvalidInputError('experiments', 'neuron grid is empty')
    hyper = hyper or AspectHyper()
    base = base or ReservoirConfig()
    points = [(i, hyper, replace(base, n_res=int(n))) for i, n in enumerate(n_res_list)]
    log.info('sweep: %d neuron counts %s', len(points), list(n_res_list))
    return _run_points(scene, points, seed, baseline, workers)


def sweep_frames(scene, sizes=FRAME_GRID, hyper=None, base=None, seed=0,
                 baseline='cvrc', workers=1):
    """One aspect run per (n_w, n_t); the scan window follows n_w."""
    if not sizes:
        raise InvalidInputError('experiments', 'frame grid is empty')
    hyper = hyper or AspectHyper()
    base = base or ReservoirConfig()
    smallest = min(min(a.rect.rows, a.rect.cols) for a in scene.teacher_areas)
    for n_w, n_t in sizes:
        if max(n_w, n_t) > smallest:
            raise InvalidInputError(
                'experiments', 'frame {}x{} does not fit teacher areas of {} pixels'.format(
                    n_w, n_t, smallest))
    points = [(i, replace(hyper, n_w=int(n_w), n_t=int(n_t)), base)
              for i, (n_w, n_t) in enumerate(sizes)]
    log.info('sweep: %d frame sizes %s', len(points), list(sizes))
    return _run_points(scene, points, seed, baseline, workers)
