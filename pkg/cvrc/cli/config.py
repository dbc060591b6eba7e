"""
Plain-text run configuration: one `key = value` per line, `#` starts a
comment. Keys are dotted and map onto the scene, reservoir and pipeline
dataclasses; anything not listed in TEMPLATE is rejected.
"""

import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional

from cvrc.errors import ConfigError
from cvrc.experiments.aspect import AspectHyper
from cvrc.experiments.slope import SlopeHyper
from cvrc.experiments.sweep import FRAME_GRID, NEURON_GRID
from cvrc.rc.reservoir import DynamicsMode, ReservoirConfig
from cvrc.scene.raster import LabeledArea, Rect
from cvrc.scene.synthscene import (Cone, Lake, RoughMountain, SceneSpec, default_regions,
                                   default_teacher_areas)
from cvrc.scene.utils import CLASS_INDEX
from cvrc.utils import split_seed

TEMPLATE = """template:
## general
seed                           = 0           # top-level seed, split per consumer
out                            = cvrc_out    # output directory
scene_dir                      = auto        # directory written by `cvrc synth`; auto generates in memory
baseline                       = cvrc        # cvrc / rvrc / neighbor
workers                        = 1           # sweep worker processes
trace                          = auto        # line spec, e.g. i=210 or i=210,j=70-330
second_scene                   = no          # also classify the second scene with the trained networks
##---------scene
scene.preset                   = reference   # reference / second
scene.width                    = 400
scene.height                   = 400
scene.coherence                = 0.7
scene.height_ambiguity         = 250
scene.scree_radius             = 6
scene.amplitude_slope_scale    = 20
scene.flat_height              = 100
scene.cone                     = auto        # row,col,radius,peak or none; auto keeps the preset
scene.mountain                 = auto        # row,col,radius,height[,octaves,roughness] or none
scene.lake                     = auto        # row,col,radius or none
##---------aspect networks
aspect.n_w                     = 5
aspect.n_t                     = 5
aspect.per_area                = 1000
aspect.lambda                  = 1e-12
reservoir.n_res                = 5
reservoir.init_spectral_radius = 0.16
reservoir.spectral_radius      = 0.10
reservoir.leak_rate            = 0.30
reservoir.dynamics             = simplified  # simplified / general
reservoir.delta                = 1
reservoir.time_const           = 1
reservoir.input_scale          = 1
##---------teacher areas and evaluation regions: row,col,rows,cols
## area.north / area.east / area.south / area.west / area.flat = auto
## region.<name>                 = row,col,rows,cols
##---------slope network
slope.n_w                      = 5
slope.n_res                    = 300
slope.spectral_radius          = 0.90
slope.leak_rate                = 0.80
slope.lambda                   = 1e-12
slope.delay                    = 5
slope.train_rows               = 50,100,150,200,300,350
slope.eval_rows                = 150,250
slope.cols                     = 25-375
##---------sweeps
sweep.neurons                  = 1,5,15,30,40,50
sweep.frame_sizes              = 1x1,1x5,1x50,5x1,5x5,5x50,50x1,50x5,50x50
"""


def _int(text):
    return int(text)


def _float(text):
    return float(text)


def _bool(text):
    value = text.lower()
    if value in ('yes', 'true', 'on', '1'):
        return True
    if value in ('no', 'false', 'off', '0'):
        return False
    raise ValueError('expected yes or no')


def _int_list(text):
    return tuple(int(v) for v in text.replace(' ', '').split(',') if v)


def _col_range(text):
    parts = text.replace(' ', '').replace(',', '-').split('-')
    if len(parts) != 2:
        raise ValueError('expected start-stop')
    return int(parts[0]), int(parts[1])


def _frame_sizes(text):
    sizes = []
    for item in text.replace(' ', '').split(','):
        if not item:
            continue
        n_w, n_t = item.lower().split('x')
        sizes.append((int(n_w), int(n_t)))
    return tuple(sizes)


def _rect(text):
    values = [int(v) for v in text.replace(' ', '').split(',')]
    if len(values) != 4:
        raise ValueError('expected row,col,rows,cols')
    return Rect(*values)


def _feature(build, ints=()):
    def parse(text):
        if text.lower() == 'none':
            return None
        values = [float(v) for v in text.replace(' ', '').split(',')]
        values = [int(v) if i in ints else v for i, v in enumerate(values)]
        try:
            return build(*values)
        except TypeError as e:
            raise ValueError('wrong number of fields') from e
    return parse


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError('expected one of {}'.format(', '.join(options)))
        return text
    return parse


PARSERS = {
    'seed': _int,
    'out': str,
    'scene_dir': str,
    'baseline': _choice('cvrc', 'rvrc', 'neighbor'),
    'workers': _int,
    'trace': str,
    'second_scene': _bool,
    'scene.preset': _choice('reference', 'second'),
    'scene.width': _int,
    'scene.height': _int,
    'scene.coherence': _float,
    'scene.height_ambiguity': _float,
    'scene.scree_radius': _float,
    'scene.amplitude_slope_scale': _float,
    'scene.flat_height': _float,
    'scene.cone': _feature(Cone),
    'scene.mountain': _feature(RoughMountain, ints=(4,)),
    'scene.lake': _feature(Lake),
    'aspect.n_w': _int,
    'aspect.n_t': _int,
    'aspect.per_area': _int,
    'aspect.lambda': _float,
    'reservoir.n_res': _int,
    'reservoir.init_spectral_radius': _float,
    'reservoir.spectral_radius': _float,
    'reservoir.leak_rate': _float,
    'reservoir.dynamics': _choice('simplified', 'general'),
    'reservoir.delta': _float,
    'reservoir.time_const': _float,
    'reservoir.input_scale': _float,
    'slope.n_w': _int,
    'slope.n_res': _int,
    'slope.spectral_radius': _float,
    'slope.leak_rate': _float,
    'slope.lambda': _float,
    'slope.delay': _int,
    'slope.train_rows': _int_list,
    'slope.eval_rows': _int_list,
    'slope.cols': _col_range,
    'sweep.neurons': _int_list,
    'sweep.frame_sizes': _frame_sizes,
}
for _name in CLASS_INDEX:
    PARSERS['area.' + _name] = _rect


def _parser_for(key):
    if key in PARSERS:
        return PARSERS[key]
    if key.startswith('region.') and key[len('region.'):].isidentifier():
        return _rect
    return None


def parse_template(text, source='<config>'):
    """`key = value` lines to a dict of raw strings; `auto` leaves a key unset."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split('#', 1)[0].strip()
        if not line or line == 'template:':
            continue
        if '=' not in line:
            raise ConfigError('cli', '{}:{}: expected key = value'.format(source, lineno))
        key, value = (part.strip() for part in line.split('=', 1))
        if _parser_for(key) is None:
            raise ConfigError('cli', '{}:{}: unknown key {!r}'.format(source, lineno, key))
        if value != 'auto':
            raw[key] = value
    return raw


@dataclass
class RunConfig:
    values: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def load(cls, path=None, overrides=None):
        config = cls()
        if path is not None:
            if not os.path.isfile(path):
                raise ConfigError('cli', 'config file {} does not exist'.format(path))
            with open(path, 'r', encoding='utf8') as f:
                for key, value in parse_template(f.read(), path).items():
                    config.set(key, value)
        for key, value in (overrides or {}).items():
            if value is not None:
                config.set(key, value)
        return config

    def set(self, key, value):
        parse = _parser_for(key)
        if parse is None:
            raise ConfigError('cli', 'unknown key {!r}'.format(key))
        if isinstance(value, str):
            try:
                value = parse(value.strip())
            except ValueError as e:
                raise ConfigError('cli', 'bad value {!r} for {}: {}'.format(value, key, e)) from e
        self.values[key] = value

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def seed(self):
        return self.get('seed', 0)

    @property
    def out(self):
        return self.get('out', 'cvrc_out')

    def scene_spec(self, second=False):
        preset = 'second' if second else self.get('scene.preset', 'reference')
        build = SceneSpec.second_scene if preset == 'second' else SceneSpec.reference
        overrides = {name: self.values['scene.' + name]
                     for name in ('width', 'height', 'coherence', 'height_ambiguity',
                                  'scree_radius', 'amplitude_slope_scale', 'flat_height',
                                  'cone', 'mountain', 'lake')
                     if 'scene.' + name in self.values}
        overrides['seed'] = split_seed(self.seed, 'scene/second' if second else 'scene')
        return build(**overrides)

    def teacher_areas(self, spec):
        custom = {CLASS_INDEX[k[len('area.'):]]: v for k, v in self.values.items()
                  if k.startswith('area.')}
        if len(custom) == len(CLASS_INDEX):
            return [LabeledArea(label, custom[label]) for label in sorted(custom)]
        areas = default_teacher_areas(spec)
        return [LabeledArea(a.label, custom.get(a.label, a.rect)) for a in areas]

    def regions(self, spec):
        regions = default_regions(spec)
        for k, v in self.values.items():
            if k.startswith('region.'):
                regions[k[len('region.'):]] = v
        return regions

    def aspect_hyper(self):
        return AspectHyper(
            n_w=self.get('aspect.n_w', 5),
            n_t=self.get('aspect.n_t', 5),
            per_area=self.get('aspect.per_area', 1000),
            lam=self.get('aspect.lambda', 1e-12),
        )

    def reservoir_config(self):
        base = ReservoirConfig()
        return replace(
            base,
            n_res=self.get('reservoir.n_res', base.n_res),
            init_spectral_radius=self.get('reservoir.init_spectral_radius',
                                          base.init_spectral_radius),
            desired_spectral_radius=self.get('reservoir.spectral_radius',
                                             base.desired_spectral_radius),
            leak_rate=self.get('reservoir.leak_rate', base.leak_rate),
            dynamics_mode=DynamicsMode(self.get('reservoir.dynamics', base.dynamics_mode.value)),
            delta=self.get('reservoir.delta', base.delta),
            time_const=self.get('reservoir.time_const', base.time_const),
            input_scale=self.get('reservoir.input_scale', base.input_scale),
        )

    def slope_hyper(self):
        default = SlopeHyper()
        return SlopeHyper(
            n_w=self.get('slope.n_w', default.n_w),
            n_res=self.get('slope.n_res', default.n_res),
            spectral_radius=self.get('slope.spectral_radius', default.spectral_radius),
            leak_rate=self.get('slope.leak_rate', default.leak_rate),
            lam=self.get('slope.lambda', default.lam),
            delay=self.get('slope.delay', default.delay),
            train_rows=self.get('slope.train_rows', default.train_rows),
            eval_rows=self.get('slope.eval_rows', default.eval_rows),
            cols=self.get('slope.cols', default.cols),
        )

    def neuron_grid(self):
        return self.get('sweep.neurons', NEURON_GRID)

    def frame_grid(self):
        return self.get('sweep.frame_sizes', FRAME_GRID)

    def as_dict(self) -> Dict[str, Optional[Any]]:
        return {k: v if isinstance(v, (int, float, str, bool)) else str(v)
                for k, v in sorted(self.values.items())}
