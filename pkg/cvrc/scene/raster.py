"""
Complex rasters, directional phase differencing and the two ways a raster
is turned into a sequence: teacher frames for training and the sliding
window scan for classification.
"""

import math
import os
import struct
from dataclasses import dataclass

import numpy as np
import torch

from cvrc.errors import FormatError, InvalidInputError
from cvrc.rc.cxnum import CDTYPE
from cvrc.scene.utils import N_CLASSES, Direction
from cvrc.utils import make_generator

RASTER_MAGIC = b'CXR1'


@dataclass(frozen=True)
class ComplexRaster:
    pixels: torch.Tensor

    def __post_init__(self):
        p = torch.as_tensor(self.pixels)
        if p.dim() != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise InvalidInputError('raster', 'raster must be a nonempty 2-D grid')
        p = p.to(CDTYPE)
        if not bool(torch.isfinite(p.abs()).all()):
            raise InvalidInputError('raster', 'raster holds non-finite magnitudes')
        object.__setattr__(self, 'pixels', p)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def amplitude(self):
        return self.pixels.abs()

    @property
    def phase(self):
        return torch.angle(self.pixels)


@dataclass(frozen=True)
class Rect:
    row: int
    col: int
    rows: int
    cols: int

    def contains(self, row, col):
        return self.row <= row < self.row + self.rows and self.col <= col < self.col + self.cols

    def inside(self, height, width):
        return (self.row >= 0 and self.col >= 0 and self.rows >= 1 and self.cols >= 1
                and self.row + self.rows <= height and self.col + self.cols <= width)

    def slices(self):
        return slice(self.row, self.row + self.rows), slice(self.col, self.col + self.cols)


@dataclass(frozen=True)
class LabeledArea:
    label: int
    rect: Rect


@dataclass(frozen=True)
class Frame:
    row: int
    col: int
    rows: int
    cols: int
    direction: Direction

    @property
    def origin(self):
        return self.row, self.col


@dataclass(frozen=True)
class LabelMap:
    labels: torch.Tensor

    def __post_init__(self):
        lab = torch.as_tensor(self.labels)
        if lab.dim() != 2:
            raise InvalidInputError('raster', 'label map must be 2-D')
        object.__setattr__(self, 'labels', lab.to(torch.uint8))

    @property
    def height(self):
        return self.labels.shape[0]

    @property
    def width(self):
        return self.labels.shape[1]

    def valid(self):
        return self.labels < N_CLASSES


@dataclass(frozen=True)
class OutputGrid:
    """Per-pixel output vectors; `present` is False where no scan step landed."""
    values: torch.Tensor
    present: torch.Tensor


def frame_shape(direction, n_w, n_t):
    if direction is Direction.EAST_WEST:
        return n_w, n_t
    return n_t, n_w


def phase_difference(r, direction):
    p = r.pixels
    if direction is Direction.EAST_WEST:
        if r.width < 2:
            raise InvalidInputError('raster', 'east-west differencing needs width >= 2')
        dphi = torch.angle(p[:, 1:] * p[:, :-1].conj())
        dphi = torch.cat([dphi, dphi[:, -1:]], dim=1)
    else:
        if r.height < 2:
            raise InvalidInputError('raster', 'north-south differencing needs height >= 2')
        dphi = torch.angle(p[1:, :] * p[:-1, :].conj())
        dphi = torch.cat([dphi, dphi[-1:, :]], dim=0)
    return ComplexRaster(torch.polar(p.abs(), dphi))


def rotate_phase(r, theta):
    return ComplexRaster(r.pixels * complex(math.cos(theta), math.sin(theta)))


def transpose(r):
    return ComplexRaster(r.pixels.transpose(0, 1).contiguous())


def sample_frames(diff, areas, per_area, n_w, n_t, direction, seed):
    """
    Draw `per_area` frames uniformly, with replacement, from every labeled
    area. Frames are returned grouped by area in the order of `areas`.
    """
    rows, cols = frame_shape(direction, n_w, n_t)
    gen = make_generator(seed)
    frames = []
    for idx, area in enumerate(areas):
        rect = area.rect
        if not rect.inside(diff.height, diff.width):
            raise InvalidInputError(
                'raster', 'area {} ({}) lies outside the {}x{} raster'.format(
                    idx, rect, diff.height, diff.width))
        if rect.rows < rows or rect.cols < cols:
            raise InvalidInputError(
                'raster', 'area {} of {}x{} cannot hold a {}x{} frame'.format(
                    idx, rect.rows, rect.cols, rows, cols))
        r0 = torch.randint(rect.row, rect.row + rect.rows - rows + 1, (per_area,), generator=gen)
        c0 = torch.randint(rect.col, rect.col + rect.cols - cols + 1, (per_area,), generator=gen)
        for r, c in zip(r0.tolist(), c0.tolist()):
            frames.append((Frame(r, c, rows, cols, direction), area.label))
    return frames


def frame_to_sequence(diff, frame):
    """
    (N_T, N_W) tensor, one input vector per row. East-west frames are read
    column by column (each column top to bottom, columns left to right),
    north-south frames row by row.
    """
    if not Rect(frame.row, frame.col, frame.rows, frame.cols).inside(diff.height, diff.width):
        raise InvalidInputError('raster', 'frame {} lies outside the raster'.format(frame))
    block = diff.pixels[frame.row:frame.row + frame.rows, frame.col:frame.col + frame.cols]
    if frame.direction is Direction.EAST_WEST:
        return block.transpose(0, 1).contiguous()
    return block.contiguous()


def scan_sequence(diff, direction, n_w):
    """
    Sliding-window scan of the whole raster as one continuous sequence.

    East-west: an n_w x 1 window sweeps each row band left to right, then the
    band moves down one pixel. North-south: a 1 x n_w window sweeps each
    column band top to bottom, then moves right. Each step is assigned to the
    window centre. Returns (sequence (T, n_w), coords (T, 2) as row, col).
    """
    p = diff.pixels
    h, w = diff.height, diff.width
    half = n_w // 2
    if n_w < 1:
        raise InvalidInputError('raster', 'window size must be >= 1')
    if direction is Direction.EAST_WEST:
        if h < n_w:
            raise InvalidInputError(
                'raster', 'raster height {} is smaller than the window {}'.format(h, n_w))
        seq = p.unfold(0, n_w, 1).reshape(-1, n_w)
        bands = torch.arange(h - n_w + 1)
        rows = (bands + half).repeat_interleave(w)
        cols = torch.arange(w).repeat(h - n_w + 1)
    else:
        if w < n_w:
            raise InvalidInputError(
                'raster', 'raster width {} is smaller than the window {}'.format(w, n_w))
        seq = p.unfold(1, n_w, 1).permute(1, 0, 2).reshape(-1, n_w)
        bands = torch.arange(w - n_w + 1)
        cols = (bands + half).repeat_interleave(h)
        rows = torch.arange(h).repeat(w - n_w + 1)
    return seq.contiguous(), torch.stack([rows, cols], dim=1)


def scan_line(diff, direction, n_w, index, span=None):
    """
    One sweep of the scan centred on row `index` (east-west) or column
    `index` (north-south), restricted to `span` = (start, stop) along the
    sweep.
    """
    half = n_w // 2
    if direction is Direction.EAST_WEST:
        extent, length = diff.height, diff.width
    else:
        extent, length = diff.width, diff.height
    top = index - half
    if top < 0 or top + n_w > extent:
        raise InvalidInputError(
            'raster', 'line {} with window {} does not fit in {} pixels'.format(index, n_w, extent))
    start, stop = (0, length) if span is None else span
    if not 0 <= start < stop <= length:
        raise InvalidInputError('raster', 'span {} outside [0, {})'.format(span, length))
    p = diff.pixels
    if direction is Direction.EAST_WEST:
        seq = p[top:top + n_w, start:stop].transpose(0, 1)
        coords = torch.stack([torch.full((stop - start,), index), torch.arange(start, stop)], 1)
    else:
        seq = p[start:stop, top:top + n_w]
        coords = torch.stack([torch.arange(start, stop), torch.full((stop - start,), index)], 1)
    return seq.contiguous(), coords


def outputs_to_map(outputs, coords, width, height):
    outputs = torch.as_tensor(outputs)
    coords = torch.as_tensor(coords, dtype=torch.long)
    if outputs.dim() == 1:
        outputs = outputs.unsqueeze(1)
    if outputs.shape[0] != coords.shape[0]:
        raise InvalidInputError(
            'raster', '{} outputs for {} coordinates'.format(outputs.shape[0], coords.shape[0]))
    flat = coords[:, 0] * width + coords[:, 1]
    if flat.numel() and torch.unique(flat).numel() != flat.numel():
        raise InvalidInputError('raster', 'duplicate pixel coordinate in scan output')
    values = torch.zeros(height * width, outputs.shape[1], dtype=outputs.dtype)
    present = torch.zeros(height * width, dtype=torch.bool)
    values[flat] = outputs
    present[flat] = True
    return OutputGrid(values.reshape(height, width, -1), present.reshape(height, width))


def write_raster(path, r):
    data = r.pixels.to(torch.complex64).numpy().astype('<c8')
    tmp = path + '.part'
    with open(tmp, 'wb') as f:
        f.write(RASTER_MAGIC + struct.pack('<II', r.width, r.height))
        f.write(data.tobytes(order='C'))
    os.replace(tmp, path)


def read_raster(path):
    with open(path, 'rb') as f:
        blob = f.read()
    if blob[:4] != RASTER_MAGIC or len(blob) < 12:
        raise FormatError('raster', '{} is not a CXR1 raster'.format(path))
    width, height = struct.unpack('<II', blob[4:12])
    if len(blob) != 12 + 8 * width * height:
        raise FormatError('raster', '{} is truncated'.format(path))
    values = np.frombuffer(blob[12:], dtype='<c8').reshape(height, width)
    return ComplexRaster(torch.from_numpy(values.astype(np.complex128)))


def write_pgm(path, label_map):
    data = label_map.labels.numpy().astype(np.uint8)
    tmp = path + '.part'
    with open(tmp, 'wb') as f:
        f.write('P5\n{} {}\n255\n'.format(label_map.width, label_map.height).encode('ascii'))
        f.write(data.tobytes(order='C'))
    os.replace(tmp, path)


def read_pgm(path):
    with open(path, 'rb') as f:
        blob = f.read()
    parts = blob.split(maxsplit=4)
    if len(parts) < 5 or parts[0] != b'P5' or parts[3] != b'255':
        raise FormatError('raster', '{} is not an 8-bit P5 PGM'.format(path))
    width, height = int(parts[1]), int(parts[2])
    # exactly one whitespace byte separates the header from the pixels
    header_len = len(b'P5\n%d %d\n255\n' % (width, height))
    pixels = blob[header_len:]
    if len(pixels) != width * height:
        raise FormatError('raster', '{} holds {} pixels, expected {}'.format(
            path, len(pixels), width * height))
    values = np.frombuffer(pixels, dtype=np.uint8).reshape(height, width)
    return LabelMap(torch.from_numpy(values.copy()))

