from dataclasses import dataclass, field
from typing import Dict, Optional

import torch

from cvrc.errors import InvalidInputError
from cvrc.scene.utils import N_CLASSES


@dataclass
class Metrics:
    accuracy_overall: float = float('nan')
    accuracy_regions: Dict[str, float] = field(default_factory=dict)
    confusion: Optional[torch.Tensor] = None
    # mean training-frame rmse of the two readouts; nan for the neighbor method
    rmse: float = float('nan')
    learn_time: float = float('nan')
    classify_time: float = float('nan')


def accuracy(pred, truth, region=None):
    """
    Percent of evaluable pixels (neither MASKED nor MISSING in either map)
    where the classes agree, optionally inside `region`. Returns
    (percent, confusion) with confusion[truth, pred].
    """
    if pred.labels.shape != truth.labels.shape:
        raise InvalidInputError(
            'experiments', 'prediction {} and truth {} differ in shape'.format(
                tuple(pred.labels.shape), tuple(truth.labels.shape)))
    p, t = pred.labels.long(), truth.labels.long()
    if region is not None:
        rows, cols = region.slices()
        p, t = p[rows, cols], t[rows, cols]
    keep = (p < N_CLASSES) & (t < N_CLASSES)
    n = int(keep.sum())
    if n == 0:
        raise InvalidInputError('experiments', 'no evaluable pixels in {}'.format(
            region if region is not None else 'the map'))
    confusion = torch.bincount(t[keep] * N_CLASSES + p[keep], minlength=N_CLASSES * N_CLASSES)
    confusion = confusion.reshape(N_CLASSES, N_CLASSES)
    return 100.0 * float(torch.trace(confusion)) / n, confusion


def rmse(outputs, targets):
    """
    Per-sample sqrt(mean_k |y_k - d_k|^2) and the mean over samples.
    """
    y = torch.as_tensor(outputs)
    d = torch.as_tensor(targets)
    if y.dim() == 1:
        y, d = y.unsqueeze(0), d.unsqueeze(0)
    if y.shape != d.shape:
        raise InvalidInputError(
            'experiments', 'outputs {} and targets {} differ in shape'.format(
                tuple(y.shape), tuple(d.shape)))
    if y.shape[-1] == 0:
        raise InvalidInputError('experiments', 'rmse needs at least one component')
    per_sample = torch.sqrt(((y - d).abs() ** 2).mean(dim=-1))
    return per_sample, float(per_sample.mean()) if per_sample.numel() else float('nan')


def salt_and_pepper_count(label_map):
    """Pixels whose label differs from all of their valid 4-neighbours."""
    lab = label_map.labels.long()
    valid = lab < N_CLASSES
    h, w = lab.shape
    differs = torch.zeros(h, w, dtype=torch.long)
    neighbours = torch.zeros(h, w, dtype=torch.long)
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        src = (slice(max(0, -dr), h - max(0, dr)), slice(max(0, -dc), w - max(0, dc)))
        dst = (slice(max(0, dr), h - max(0, -dr)), slice(max(0, dc), w - max(0, -dc)))
        both = valid[dst] & valid[src]
        neighbours[dst] += both.long()
        differs[dst] += (both & (lab[dst] != lab[src])).long()
    isolated = valid & (neighbours > 0) & (differs == neighbours)
    return int(isolated.sum())


def flat_phase_variance(diff, rect):
    rows, cols = rect.slices()
    return float(torch.angle(diff.pixels[rows, cols]).var())
