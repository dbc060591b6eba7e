"""
Synthetic terrain standing in for a real InSAR acquisition: a DEM made
of a flat plain, a cone volcano, a rough fractal mountain and a lake, the
interferogram it produces, and the ground truth used to score methods.

Aspect labels follow the ascent direction: elevation increasing eastward
is class EAST, increasing southward (row index grows) is class SOUTH.
Ground truth, teacher areas and the neighbor-difference baseline all use
this one convention.
"""

import math
import os
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import torch
import torch.nn.functional as F

from cvrc.errors import FormatError, SceneError
from cvrc.rc.cxnum import CDTYPE, RDTYPE
from cvrc.scene.raster import (ComplexRaster, LabeledArea, LabelMap, Rect,
                               phase_difference)
from cvrc.scene.utils import (AZIMUTH_SPACING, EAST, FLAT, MASKED, N_CLASSES, NORTH,
                              RANGE_SPACING, SOUTH, WEST, Direction)
from cvrc.utils import log, make_generator, split_seed

DEM_MAGIC = b'DEM1'
SLOPE_MAGIC = b'SLP1'

SCREE_AMPLITUDE = 0.05
MAX_AREA_SIZE = 60


@dataclass(frozen=True)
class Cone:
    row: float
    col: float
    radius: float
    peak: float


@dataclass(frozen=True)
class RoughMountain:
    row: float
    col: float
    radius: float
    height: float
    octaves: int = 5
    roughness: float = 0.5


@dataclass(frozen=True)
class Lake:
    row: float
    col: float
    radius: float


@dataclass(frozen=True)
class SceneSpec:
    width: int = 400
    height: int = 400
    flat_height: float = 100.0
    cone: Optional[Cone] = None
    mountain: Optional[RoughMountain] = None
    lake: Optional[Lake] = None
    height_ambiguity: float = 250.0
    coherence: float = 0.7
    scree_radius: float = 6.0
    amplitude_slope_scale: float = 20.0
    range_spacing: float = RANGE_SPACING
    azimuth_spacing: float = AZIMUTH_SPACING
    seed: int = 0

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise SceneError('synthscene', 'scene must be at least 2x2 pixels')
        if not 0.0 <= self.coherence <= 1.0:
            raise SceneError('synthscene', 'coherence must lie in [0, 1]')
        if self.height_ambiguity <= 0:
            raise SceneError('synthscene', 'height ambiguity must be > 0')
        if self.range_spacing <= 0 or self.azimuth_spacing <= 0:
            raise SceneError('synthscene', 'pixel spacing must be > 0')

    @classmethod
    def reference(cls, **overrides):
        """Large cone, rough secondary mountain, plain and lake on 400x400 pixels."""
        values = dict(
            cone=Cone(200, 160, 140, 1400.0),
            mountain=RoughMountain(300, 320, 70, 500.0, octaves=5, roughness=0.5),
            lake=Lake(80, 330, 35),
        )
        values.update(overrides)
        return cls(**values)

    @classmethod
    def second_scene(cls, **overrides):
        """A different region: smaller cone, rougher mountain, same height ambiguity."""
        values = dict(
            cone=Cone(230, 230, 120, 900.0),
            mountain=RoughMountain(110, 110, 80, 700.0, octaves=6, roughness=0.8),
            lake=Lake(330, 80, 30),
            seed=7,
        )
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True)
class DEM:
    elevation: torch.Tensor
    range_spacing: float = RANGE_SPACING
    azimuth_spacing: float = AZIMUTH_SPACING

    @property
    def height(self):
        return self.elevation.shape[0]

    @property
    def width(self):
        return self.elevation.shape[1]


@dataclass(frozen=True)
class GroundTruth:
    aspect: LabelMap
    slope_ew: torch.Tensor
    water_mask: torch.Tensor
    tau: float


@dataclass
class Scene:
    spec: SceneSpec
    dem: DEM
    interferogram: ComplexRaster
    diff_ew: ComplexRaster
    diff_ns: ComplexRaster
    truth: GroundTruth
    teacher_areas: List[LabeledArea]
    regions: Dict[str, Rect] = field(default_factory=dict)


def _grid(spec):
    ii = torch.arange(spec.height, dtype=RDTYPE).unsqueeze(1).expand(spec.height, spec.width)
    jj = torch.arange(spec.width, dtype=RDTYPE).unsqueeze(0).expand(spec.height, spec.width)
    return ii, jj


def _distance(ii, jj, row, col):
    return torch.sqrt((ii - row) ** 2 + (jj - col) ** 2)


def fractal_noise(height, width, octaves, gen):
    """Value noise summed over octaves, each twice as fine and half as strong."""
    total = torch.zeros(height, width, dtype=RDTYPE)
    norm = 0.0
    for o in range(octaves):
        cells = 2 ** (o + 2) + 1
        lattice = 2 * torch.rand(1, 1, cells, cells, generator=gen, dtype=RDTYPE) - 1
        layer = F.interpolate(lattice, size=(height, width), mode='bicubic', align_corners=True)
        amp = 0.5 ** o
        total += amp * layer[0, 0]
        norm += amp
    return total / max(norm, 1e-12)


def water_mask(spec):
    if spec.lake is None:
        return torch.zeros(spec.height, spec.width, dtype=torch.bool)
    ii, jj = _grid(spec)
    return _distance(ii, jj, spec.lake.row, spec.lake.col) <= spec.lake.radius


def generate_dem(spec):
    if spec.lake is not None and spec.cone is not None:
        if math.hypot(spec.lake.row - spec.cone.row, spec.lake.col - spec.cone.col) \
                <= spec.lake.radius:
            raise SceneError('synthscene', 'lake covers the cone peak')

    ii, jj = _grid(spec)
    elev = torch.full((spec.height, spec.width), float(spec.flat_height), dtype=RDTYPE)
    if spec.cone is not None:
        c = spec.cone
        r = _distance(ii, jj, c.row, c.col)
        elev = elev + c.peak * torch.clamp(1 - r / c.radius, min=0)
    if spec.mountain is not None:
        m = spec.mountain
        gen = make_generator(split_seed(spec.seed, 'terrain'))
        noise = fractal_noise(spec.height, spec.width, m.octaves, gen)
        r = _distance(ii, jj, m.row, m.col)
        envelope = torch.where(r < m.radius, torch.cos(0.5 * math.pi * r / m.radius) ** 2,
                               torch.zeros_like(r))
        elev = elev + m.height * envelope * torch.clamp(1 + m.roughness * noise, min=0)
    if spec.lake is not None:
        elev = torch.where(water_mask(spec), torch.full_like(elev, spec.flat_height), elev)
    return DEM(elev, spec.range_spacing, spec.azimuth_spacing)


def differences(grid):
    """Forward differences east-west and north-south, last column/row replicated."""
    d_ew = grid[:, 1:] - grid[:, :-1]
    d_ew = torch.cat([d_ew, d_ew[:, -1:]], dim=1)
    d_ns = grid[1:, :] - grid[:-1, :]
    d_ns = torch.cat([d_ns, d_ns[-1:, :]], dim=0)
    return d_ew, d_ns


def slope_magnitude(dem):
    d_ew, d_ns = differences(dem.elevation)
    grad = torch.sqrt((d_ew / dem.range_spacing) ** 2 + (d_ns / dem.azimuth_spacing) ** 2)
    return torch.rad2deg(torch.atan(grad))


def dem_to_interferogram(dem, spec):
    if spec.height_ambiguity <= 0:
        raise SceneError('synthscene', 'height ambiguity must be > 0')
    phase = 2 * math.pi * dem.elevation / spec.height_ambiguity
    amplitude = 1.0 / (1.0 + slope_magnitude(dem) / spec.amplitude_slope_scale)

    if spec.cone is not None and spec.scree_radius > 0:
        gen = make_generator(split_seed(spec.seed, 'scree'))
        ii, jj = _grid(spec)
        scree = _distance(ii, jj, spec.cone.row, spec.cone.col) <= spec.scree_radius
        random_phase = math.pi * (2 * torch.rand(dem.elevation.shape, generator=gen,
                                                 dtype=RDTYPE) - 1)
        amplitude = torch.where(scree, torch.full_like(amplitude, SCREE_AMPLITUDE), amplitude)
        phase = torch.where(scree, random_phase, phase)

    signal = torch.polar(amplitude, phase)
    gen = make_generator(split_seed(spec.seed, 'noise'))
    noise = torch.complex(torch.randn(dem.elevation.shape, generator=gen, dtype=RDTYPE),
                          torch.randn(dem.elevation.shape, generator=gen, dtype=RDTYPE))
    noise = noise / math.sqrt(2.0)
    gamma = spec.coherence
    z = gamma * signal + math.sqrt(1.0 - gamma * gamma) * noise
    return ComplexRaster(z.to(CDTYPE))


def label_from_differences(d_ew, d_ns, tau):
    """Flat below tau in both directions, else the sign of the dominant one."""
    a_ew, a_ns = d_ew.abs(), d_ns.abs()
    ew_class = torch.where(d_ew > 0, torch.full_like(a_ew, EAST), torch.full_like(a_ew, WEST))
    ns_class = torch.where(d_ns > 0, torch.full_like(a_ns, SOUTH), torch.full_like(a_ns, NORTH))
    labels = torch.where(a_ew >= a_ns, ew_class, ns_class)
    labels = torch.where((a_ew < tau) & (a_ns < tau), torch.full_like(labels, FLAT), labels)
    return labels.to(torch.uint8)


def _area_mean(values, areas):
    chunks = [values[a.rect.slices()].reshape(-1) for a in areas]
    return float(torch.cat(chunks).mean())


def ground_truth_slope(dem):
    if dem.width < 2:
        raise SceneError('synthscene', 'slope needs width >= 2')
    d_ew, _ = differences(dem.elevation)
    return torch.rad2deg(torch.atan(d_ew / dem.range_spacing))


def ground_truth_aspect(dem, teacher_areas, mask=None):
    """
    Threshold tau is the midpoint between the mean dominant |difference| over
    the four slope teacher areas and over the flat teacher area.
    """
    present = {a.label for a in teacher_areas}
    if present != set(range(N_CLASSES)):
        raise SceneError(
            'synthscene', 'teacher areas cover classes {}, need all of 0..{}'.format(
                sorted(present), N_CLASSES - 1))
    for a in teacher_areas:
        if not a.rect.inside(dem.height, dem.width):
            raise SceneError('synthscene', 'teacher area {} lies outside the DEM'.format(a.rect))
    d_ew, d_ns = differences(dem.elevation)
    dominant = torch.maximum(d_ew.abs(), d_ns.abs())
    slope_mean = _area_mean(dominant, [a for a in teacher_areas if a.label != FLAT])
    flat_mean = _area_mean(dominant, [a for a in teacher_areas if a.label == FLAT])
    if slope_mean <= flat_mean:
        raise SceneError(
            'synthscene', 'degenerate threshold: slope-area mean {:.6g} <= flat-area mean '
            '{:.6g}'.format(slope_mean, flat_mean))
    tau = 0.5 * (slope_mean + flat_mean)
    labels = label_from_differences(d_ew, d_ns, tau)
    if mask is None:
        mask = torch.zeros(dem.height, dem.width, dtype=torch.bool)
    labels = torch.where(mask, torch.full_like(labels, MASKED), labels)
    return GroundTruth(LabelMap(labels), ground_truth_slope(dem), mask, tau)


def _disks(spec):
    disks = []
    if spec.cone is not None:
        disks.append((spec.cone.row, spec.cone.col, spec.cone.radius))
    if spec.mountain is not None:
        disks.append((spec.mountain.row, spec.mountain.col, spec.mountain.radius))
    if spec.lake is not None:
        disks.append((spec.lake.row, spec.lake.col, spec.lake.radius))
    return disks


def _clear_of(rect, disks, margin=2.0):
    for row, col, radius in disks:
        near_r = min(max(row, rect.row), rect.row + rect.rows - 1)
        near_c = min(max(col, rect.col), rect.col + rect.cols - 1)
        if math.hypot(near_r - row, near_c - col) <= radius + margin:
            return False
    return True


def _flat_corners(spec, size):
    corners = [Rect(0, 0, size, size),
               Rect(0, spec.width - size, size, size),
               Rect(spec.height - size, 0, size, size),
               Rect(spec.height - size, spec.width - size, size, size)]
    disks = _disks(spec)
    return [r for r in corners if r.inside(spec.height, spec.width) and _clear_of(r, disks)]


def area_size(spec):
    if spec.cone is None:
        raise SceneError('synthscene', 'default teacher areas need a cone in the scene')
    return max(1, min(MAX_AREA_SIZE, int(0.4 * spec.cone.radius)))


def default_teacher_areas(spec, size=None):
    """
    One square per class on the cone flanks plus a flat corner square. A
    flank square sits on the side whose ascent matches its class: the west
    flank rises eastward, so the EAST square is placed west of the apex.
    """
    size = size or area_size(spec)
    c = spec.cone
    off = 0.6 * c.radius
    half = size // 2
    centres = {
        NORTH: (c.row + off, c.col),
        SOUTH: (c.row - off, c.col),
        EAST: (c.row, c.col - off),
        WEST: (c.row, c.col + off),
    }
    areas = []
    for label in (NORTH, EAST, SOUTH, WEST):
        row, col = centres[label]
        rect = Rect(int(round(row)) - half, int(round(col)) - half, size, size)
        if not rect.inside(spec.height, spec.width):
            raise SceneError(
                'synthscene', 'teacher area for class {} ({}) falls outside the scene'.format(
                    label, rect))
        areas.append(LabeledArea(label, rect))
    flats = _flat_corners(spec, size)
    if not flats:
        raise SceneError('synthscene', 'no flat corner of {}x{} pixels clear of terrain'.format(
            size, size))
    areas.append(LabeledArea(FLAT, flats[0]))
    return areas


def _bbox(row, col, radius, spec):
    r0, c0 = max(0, int(row - radius)), max(0, int(col - radius))
    r1 = min(spec.height, int(math.ceil(row + radius)) + 1)
    c1 = min(spec.width, int(math.ceil(col + radius)) + 1)
    return Rect(r0, c0, r1 - r0, c1 - c0)


def default_regions(spec, size=None):
    """Evaluation regions: a flat corner, the cone, the rough mountain, the lake shore."""
    regions = {}
    size = size or (area_size(spec) if spec.cone is not None else MAX_AREA_SIZE)
    flats = _flat_corners(spec, size)
    if flats:
        regions['flat'] = flats[1] if len(flats) > 1 else flats[0]
    if spec.cone is not None:
        regions['cone'] = _bbox(spec.cone.row, spec.cone.col, spec.cone.radius, spec)
    if spec.mountain is not None:
        regions['mountain'] = _bbox(spec.mountain.row, spec.mountain.col,
                                    spec.mountain.radius, spec)
    if spec.lake is not None:
        regions['lake_periphery'] = _bbox(spec.lake.row, spec.lake.col, 2 * spec.lake.radius,
                                          spec)
    return regions


def build_scene(spec, teacher_areas=None, regions=None):
    dem = generate_dem(spec)
    ifg = dem_to_interferogram(dem, spec)
    areas = teacher_areas if teacher_areas is not None else default_teacher_areas(spec)
    truth = ground_truth_aspect(dem, areas, water_mask(spec))
    log.info('synthscene: %dx%d scene, tau=%.4g m, coherence %.2f',
             spec.height, spec.width, truth.tau, spec.coherence)
    return Scene(
        spec=spec,
        dem=dem,
        interferogram=ifg,
        diff_ew=phase_difference(ifg, Direction.EAST_WEST),
        diff_ns=phase_difference(ifg, Direction.NORTH_SOUTH),
        truth=truth,
        teacher_areas=list(areas),
        regions=dict(regions) if regions is not None else default_regions(spec),
    )


def _write_grid(path, magic, grid, spacing):
    data = grid.to(torch.float32).numpy().astype('<f4')
    h, w = grid.shape
    tmp = path + '.part'
    with open(tmp, 'wb') as f:
        f.write(magic + struct.pack('<IIff', w, h, spacing[0], spacing[1]))
        f.write(data.tobytes(order='C'))
    os.replace(tmp, path)


def _read_grid(path, magic):
    with open(path, 'rb') as f:
        blob = f.read()
    if blob[:4] != magic or len(blob) < 20:
        raise FormatError('synthscene', '{} is not a {} file'.format(path, magic.decode()))
    w, h, rs, az = struct.unpack('<IIff', blob[4:20])
    if len(blob) != 20 + 4 * w * h:
        raise FormatError('synthscene', '{} is truncated'.format(path))
    values = np.frombuffer(blob[20:], dtype='<f4').reshape(h, w).astype(np.float64)
    return torch.from_numpy(values), (float(rs), float(az))


def write_dem(path, dem):
    _write_grid(path, DEM_MAGIC, dem.elevation, (dem.range_spacing, dem.azimuth_spacing))


def read_dem(path):
    grid, (rs, az) = _read_grid(path, DEM_MAGIC)
    return DEM(grid, rs, az)


def write_slope(path, slope, dem):
    _write_grid(path, SLOPE_MAGIC, slope, (dem.range_spacing, dem.azimuth_spacing))


def read_slope(path):
    grid, _ = _read_grid(path, SLOPE_MAGIC)
    return grid
