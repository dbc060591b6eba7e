"""
Linear readout trained in closed form with Tikhonov regularization.
"""

import os
import struct
from dataclasses import dataclass

import numpy as np
import torch

from cvrc.errors import FormatError, InvalidInputError, SolverError
from cvrc.rc.cxnum import CDTYPE, RDTYPE, solve_regularized
from cvrc.rc.reservoir import ValueDomain

MODEL_MAGIC = b'CVM1'
_DOMAIN_BYTE = {ValueDomain.COMPLEX: 0, ValueDomain.REAL_PAIR: 1}
_BYTE_DOMAIN = {v: k for k, v in _DOMAIN_BYTE.items()}


@dataclass(frozen=True)
class ReadoutModel:
    w_out: torch.Tensor
    b_out: torch.Tensor
    value_domain: ValueDomain = ValueDomain.COMPLEX

    @property
    def n_out(self):
        return self.w_out.shape[0]

    @property
    def n_res(self):
        return self.w_out.shape[1]


@dataclass
class TrainingBatch:
    states: torch.Tensor
    targets: torch.Tensor
    lam: float = 1e-12

    def __post_init__(self):
        self.states = _as_rows(self.states, 'states')
        self.targets = _as_rows(self.targets, 'targets')
        if self.states.shape[0] != self.targets.shape[0]:
            raise InvalidInputError(
                'readout', '{} states but {} targets'.format(
                    self.states.shape[0], self.targets.shape[0]))
        if self.lam < 0:
            raise InvalidInputError('readout', 'lambda must be >= 0')


def _as_rows(rows, what):
    if isinstance(rows, (list, tuple)):
        if not rows:
            raise InvalidInputError('readout', 'no {} given'.format(what))
        widths = {torch.as_tensor(r).shape for r in rows}
        if len(widths) != 1:
            raise InvalidInputError('readout', 'ragged {}: lengths {}'.format(what, sorted(widths)))
        rows = torch.stack([torch.as_tensor(r) for r in rows])
    rows = torch.as_tensor(rows)
    if rows.dim() != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
        raise InvalidInputError('readout', '{} must form a nonempty matrix'.format(what))
    return rows


def assemble_design(states):
    """N x (N_res + 1) design matrix: one state per row with a trailing 1."""
    x = _as_rows(states, 'states')
    if not x.is_complex() and x.dtype != RDTYPE:
        x = x.to(RDTYPE)
    ones = torch.ones(x.shape[0], 1, dtype=x.dtype)
    return torch.cat([x, ones], dim=1)


def build_teacher(labels, n_classes, dtype=CDTYPE):
    """+1 at the label column, -1 elsewhere; one row per sample."""
    labels = torch.as_tensor(labels, dtype=torch.long).reshape(-1)
    if labels.numel() and (labels.min() < 0 or labels.max() >= n_classes):
        raise InvalidInputError(
            'readout', 'labels must lie in [0, {}), got range [{}, {}]'.format(
                n_classes, int(labels.min()), int(labels.max())))
    d = -torch.ones(labels.shape[0], n_classes, dtype=dtype)
    d[torch.arange(labels.shape[0]), labels] = 1
    return d


def train(batch, value_domain=ValueDomain.COMPLEX):
    x = assemble_design(batch.states)
    d = batch.targets
    if value_domain is ValueDomain.COMPLEX:
        x, d = x.to(CDTYPE), d.to(CDTYPE)
    else:
        if d.is_complex():
            d = d.real
        x, d = x.to(RDTYPE), d.to(RDTYPE)
    try:
        params = solve_regularized(x, d, batch.lam)
    except SolverError as e:
        cond = float(torch.linalg.cond(x))
        raise SolverError(
            'readout', '{} (design condition number {:.3e}, {} samples for {} unknowns)'.format(
                e, cond, x.shape[0], x.shape[1]), step=e.step) from e
    return ReadoutModel(params[:, :-1].contiguous(), params[:, -1].contiguous(), value_domain)


def forward(model, x):
    """y = W_out x + b_out; x may be one state or a (T, N_res) batch."""
    x = torch.as_tensor(x)
    if x.shape[-1] != model.n_res:
        raise InvalidInputError(
            'readout', 'state width {} does not match N_res {}'.format(x.shape[-1], model.n_res))
    x = x.to(model.w_out.dtype)
    return x @ model.w_out.transpose(0, 1) + model.b_out


def save_model(model, path):
    header = MODEL_MAGIC + struct.pack('<BII', _DOMAIN_BYTE[model.value_domain],
                                       model.n_out, model.n_res)
    w = model.w_out.to(CDTYPE).numpy().astype('<c16')
    b = model.b_out.to(CDTYPE).numpy().astype('<c16')
    tmp = path + '.part'
    with open(tmp, 'wb') as f:
        f.write(header)
        f.write(w.tobytes(order='C'))
        f.write(b.tobytes(order='C'))
    os.replace(tmp, path)


def load_model(path):
    with open(path, 'rb') as f:
        blob = f.read()
    if blob[:4] != MODEL_MAGIC or len(blob) < 13:
        raise FormatError('readout', '{} is not a CVM1 model file'.format(path))
    code, n_out, n_res = struct.unpack('<BII', blob[4:13])
    if code not in _BYTE_DOMAIN:
        raise FormatError('readout', 'unknown value domain byte {}'.format(code))
    expected = 13 + 16 * (n_out * n_res + n_out)
    if len(blob) != expected:
        raise FormatError('readout', '{} has {} bytes, expected {}'.format(path, len(blob), expected))
    values = np.frombuffer(blob[13:], dtype='<c16')
    w = torch.from_numpy(values[:n_out * n_res].reshape(n_out, n_res).astype(np.complex128))
    b = torch.from_numpy(values[n_out * n_res:].astype(np.complex128))
    domain = _BYTE_DOMAIN[code]
    if domain is ValueDomain.REAL_PAIR:
        w, b = w.real.contiguous(), b.real.contiguous()
    return ReadoutModel(w, b, domain)
