"""
Leaky echo-state reservoir with complex-valued neurons.

The complex neuron saturates the amplitude of its internal state with
tanh and keeps the phase unchanged, so the state path does not depend on
the phase reference of the input. The RealPair domain is the real-valued
baseline: complex inputs are split into real and imaginary channels and
every neuron is an ordinary real tanh unit.
"""

import enum
import math
from dataclasses import dataclass, replace
from typing import Tuple

import torch

from cvrc.errors import ConvergenceError, InvalidInputError
from cvrc.rc.cxnum import CDTYPE, RDTYPE, spectral_radius
from cvrc.utils import log, make_generator, split_seed

MAX_REDRAWS = 16


class DynamicsMode(enum.Enum):
    SIMPLIFIED = 'simplified'
    GENERAL = 'general'


class ValueDomain(enum.Enum):
    COMPLEX = 'complex'
    REAL_PAIR = 'realpair'


@dataclass(frozen=True)
class ReservoirConfig:
    n_in: int = 5
    n_res: int = 5
    init_spectral_radius: float = 0.16
    desired_spectral_radius: float = 0.10
    leak_rate: float = 0.30
    dynamics_mode: DynamicsMode = DynamicsMode.SIMPLIFIED
    delta: float = 1.0
    time_const: float = 1.0
    input_scale: float = 1.0
    seed: int = 0
    value_domain: ValueDomain = ValueDomain.COMPLEX

    def __post_init__(self):
        if self.n_in < 1 or self.n_res < 1:
            raise InvalidInputError('reservoir', 'n_in and n_res must be >= 1')
        if not 0.0 <= self.leak_rate <= 1.0:
            raise InvalidInputError(
                'reservoir', 'leak_rate must lie in [0, 1], got {}'.format(self.leak_rate))
        if self.init_spectral_radius <= 0 or self.desired_spectral_radius <= 0:
            raise InvalidInputError('reservoir', 'spectral radii must be > 0')
        if self.input_scale <= 0:
            raise InvalidInputError('reservoir', 'input_scale must be > 0')
        if self.delta <= 0 or self.time_const <= 0:
            raise InvalidInputError('reservoir', 'delta and time_const must be > 0')
        if self.dynamics_mode is DynamicsMode.GENERAL and self.delta / self.time_const > 1:
            raise InvalidInputError(
                'reservoir', 'general dynamics need delta/time_const <= 1, got {}'.format(
                    self.delta / self.time_const))

    @property
    def complex_valued(self):
        return self.value_domain is ValueDomain.COMPLEX

    @property
    def input_width(self):
        return self.n_in if self.complex_valued else 2 * self.n_in

    @property
    def dtype(self):
        return CDTYPE if self.complex_valued else RDTYPE

    def with_seed(self, seed):
        return replace(self, seed=seed)


@dataclass(frozen=True)
class ReservoirWeights:
    w_in: torch.Tensor
    w_res: torch.Tensor
    redraws: Tuple[int, ...] = ()


@dataclass
class ReservoirState:
    x: torch.Tensor
    t: int = 0

    def copy(self):
        return ReservoirState(self.x.clone(), self.t)


def zero_state(config):
    return ReservoirState(torch.zeros(config.n_res, dtype=config.dtype), 0)


def _draw(shape, gen, complex_valued):
    if complex_valued:
        # uniform over the unit disk: sqrt of a uniform radius, uniform angle
        r = torch.sqrt(torch.rand(shape, generator=gen, dtype=RDTYPE))
        theta = 2 * math.pi * torch.rand(shape, generator=gen, dtype=RDTYPE)
        return torch.polar(r, theta)
    return 2 * torch.rand(shape, generator=gen, dtype=RDTYPE) - 1


def init_weights(config):
    """
    Draw W_in and W_res from the config seed, scale W_res to the initial
    spectral radius and then normalize it to the desired one. A draw whose
    spectral radius is zero or cannot be measured is replaced with the next
    sub-seed and recorded in `redraws`.
    """
    redraws = []
    for sub in range(MAX_REDRAWS):
        gen = make_generator(split_seed(config.seed, 'weights/{}'.format(sub)))
        w_in = _draw((config.n_res, config.input_width), gen, config.complex_valued)
        w_res = _draw((config.n_res, config.n_res), gen, config.complex_valued)
        try:
            usable = bool(torch.count_nonzero(w_in)) and spectral_radius(w_res) > 0
            if usable:
                w_res = normalize_spectral(w_res, config.init_spectral_radius)
                w_res = normalize_spectral(w_res, config.desired_spectral_radius)
                return ReservoirWeights(w_in, w_res, tuple(redraws))
            reason = 'degenerate'
        except ConvergenceError as e:
            reason = 'unmeasurable ({})'.format(e)
        redraws.append(sub)
        log.warning('reservoir: %s weight draw for seed %d (sub-seed %d), redrawing',
                    reason, config.seed, sub)
    raise InvalidInputError(
        'reservoir', 'no usable weight draw after {} attempts'.format(MAX_REDRAWS))


def normalize_spectral(w, sigma_d):
    if sigma_d <= 0:
        raise InvalidInputError('reservoir', 'desired spectral radius must be > 0')
    sigma = spectral_radius(w)
    if sigma == 0:
        raise InvalidInputError('reservoir', 'cannot normalize a matrix with spectral radius 0')
    return w * (sigma_d / sigma)


def activate(z):
    """tanh(|z|) * exp(j arg z), applied elementwise; activate(0) == 0."""
    z = torch.as_tensor(z)
    if not z.is_complex():
        return torch.tanh(z)
    return torch.polar(torch.tanh(z.abs()), torch.angle(z))


def split_real_pair(u):
    """[re(u), im(u)] along the last axis, the RealPair input layout."""
    u = torch.as_tensor(u)
    if not u.is_complex():
        u = u.to(CDTYPE)
    return torch.cat([u.real, u.imag], dim=-1).to(RDTYPE)


def prepare_inputs(config, u):
    u = torch.as_tensor(u)
    if config.complex_valued:
        return u.to(CDTYPE)
    if u.shape[-1] == config.input_width and not u.is_complex():
        return u.to(RDTYPE)
    return split_real_pair(u)


def _leak(config, x_prev, a):
    if config.dynamics_mode is DynamicsMode.SIMPLIFIED:
        alpha = config.leak_rate
        if alpha == 0.0:
            return x_prev
        if alpha == 1.0:
            return a
        return (1 - alpha) * x_prev + alpha * a
    k = config.delta / config.time_const
    return (1 - config.leak_rate * k) * x_prev + k * a


def step(weights, state, u, config):
    u = prepare_inputs(config, u)
    if u.dim() != 1 or u.shape[0] != config.input_width:
        raise InvalidInputError(
            'reservoir', 'input of length {} does not match input width {}'.format(
                tuple(u.shape), config.input_width))
    if state.x.shape[0] != config.n_res:
        raise InvalidInputError('reservoir', 'state length does not match n_res')
    z = weights.w_in @ (config.input_scale * u) + weights.w_res @ state.x
    return ReservoirState(_leak(config, state.x, activate(z)), state.t + 1)


def run_collect(weights, config, sequence, collect_at=(), initial=None, full_trace=False):
    """
    Drive the reservoir through `sequence` in order.

    `sequence` is a list of input vectors or a (T, width) tensor. The state
    after each step listed in `collect_at` is recorded; with full_trace every
    step is recorded. Returns (records, final_state) where records is a
    (len(collect_at), n_res) tensor.
    """
    if isinstance(sequence, (list, tuple)):
        seq = torch.stack([prepare_inputs(config, u) for u in sequence]) if sequence \
            else torch.zeros(0, config.input_width, dtype=config.dtype)
    else:
        seq = prepare_inputs(config, sequence)
    if seq.dim() != 2 or seq.shape[1] != config.input_width:
        raise InvalidInputError(
            'reservoir', 'sequence of shape {} does not match input width {}'.format(
                tuple(seq.shape), config.input_width))
    n_steps = seq.shape[0]
    collect_at = list(range(n_steps)) if full_trace else [int(i) for i in collect_at]
    for prev, cur in zip(collect_at, collect_at[1:]):
        if cur <= prev:
            raise InvalidInputError('reservoir', 'collect indices must be strictly increasing')
    if collect_at and (collect_at[0] < 0 or collect_at[-1] >= n_steps):
        raise InvalidInputError(
            'reservoir', 'collect index out of range for a sequence of {} steps'.format(n_steps))

    state = zero_state(config) if initial is None else initial.copy()
    records = torch.zeros(len(collect_at), config.n_res, dtype=config.dtype)
    if n_steps == 0:
        return records, state

    # input drive of every step in one product
    drive = (config.input_scale * seq) @ weights.w_in.transpose(0, 1)
    w_res = weights.w_res
    x = state.x
    want = iter(collect_at)
    nxt = next(want, None)
    slot = 0
    for t in range(n_steps):
        z = drive[t] + w_res @ x
        x = _leak(config, x, activate(z))
        if t == nxt:
            records[slot] = x
            slot += 1
            nxt = next(want, None)
    return records, ReservoirState(x, state.t + n_steps)
