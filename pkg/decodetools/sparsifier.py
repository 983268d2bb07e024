"""Syndrome sparsification applied after local decoding.

All functions take syndrome differences shaped (..., dm, num_stabilizers)
and work column by column (one column per stabilizer).
"""
import collections
import math

import numpy as np

DEFAULT_SHEET_SIZE = 6
DIRECTIONS = ('up', 'down')


class SheetPartition(collections.namedtuple(
    'SheetPartition', ['dm', 'sheet_size', 'boundaries'])):
  """Sheets of consecutive rounds; boundaries are [start, stop) pairs."""

  @property
  def sizes(self):
    return tuple(stop - start for start, stop in self.boundaries)

  def __len__(self):
    return len(self.boundaries)


def sheet_partition(dm, sheet_size):
  if sheet_size < 1:
    raise ValueError('sheet size must be >= 1, got %r' % sheet_size)
  count = int(math.ceil(dm / float(sheet_size)))
  bounds = tuple((s * sheet_size, min(dm, (s + 1) * sheet_size))
                 for s in range(count))
  return SheetPartition(dm, sheet_size, bounds)


def syndrome_collapse(diff, sheet_size=DEFAULT_SHEET_SIZE):
  """XORs syndrome differences over sheets of consecutive rounds.

  Args:
    diff: binary array (..., dm, num_stabilizers).
    sheet_size: rounds per sheet, >= 1.

  Returns:
    uint8 array (..., ceil(dm / sheet_size), num_stabilizers).
  """
  diff = np.asarray(diff, dtype=np.uint8)
  partition = sheet_partition(diff.shape[-2], sheet_size)
  starts = [start for start, _ in partition.boundaries]
  return (np.add.reduceat(diff, starts, axis=-2) % 2).astype(np.uint8)


def choose_cleanup_direction(diff, rng=None):
  """Picks the sweep direction per column from the highlight balance.

  Rounds after the mid-point ceil((dm+1)/2) count as above it, earlier
  rounds as below; the mid-point round itself is not counted. More
  highlights above sweeps up (from round 1), more below sweeps down (from
  round dm), ties are broken with `rng`.

  Args:
    diff: binary array (..., dm, num_stabilizers) or a single (dm,) column.
    rng: numpy Generator for ties; defaults to a generator seeded with 0.

  Returns:
    'up'/'down' for a single column, else a boolean array (..., num_stab)
    that is True where the sweep goes up.
  """
  diff = np.asarray(diff, dtype=np.int64)
  single = diff.ndim == 1
  if single:
    diff = diff[:, None]
  dm = diff.shape[-2]
  mid = int(math.ceil((dm + 1) / 2.0)) - 1
  below = diff[..., :mid, :].sum(axis=-2)
  above = diff[..., mid + 1:, :].sum(axis=-2)
  if rng is None:
    rng = np.random.default_rng(0)
  coin = rng.random(below.shape) < 0.5
  up = np.where(above > below, True, np.where(above < below, False, coin))
  if single:
    return 'up' if up[0] else 'down'
  return up


def vertical_cleanup(diff, direction='up', rng=None):
  """Removes adjacent vertical pairs of highlights in one sweep per column.

  The sweep compares consecutive rounds in the given direction; when both
  hold a 1 they are cleared and the comparison moves past the pair.

  Args:
    diff: binary array (..., dm, num_stabilizers).
    direction: 'up' (start at round 1), 'down' (start at round dm), 'auto'
      (choose_cleanup_direction per column) or a boolean array from
      choose_cleanup_direction.
    rng: tie-break generator for 'auto'.

  Returns:
    uint8 array of the same shape.
  """
  out = np.array(diff, dtype=np.uint8, copy=True)
  dm = out.shape[-2]
  if isinstance(direction, str):
    if direction == 'auto':
      up = choose_cleanup_direction(out, rng)
    elif direction in DIRECTIONS:
      up = np.full(out.shape[:-2] + out.shape[-1:], direction == 'up')
    else:
      raise ValueError('direction must be up, down or auto, got %r'
                       % (direction,))
  else:
    up = np.asarray(direction, dtype=bool)
  for step in range(dm - 1):
    lo, hi = step, step + 1
    pair = (out[..., lo, :] & out[..., hi, :]).astype(bool) & up
    out[..., lo, :][pair] = 0
    out[..., hi, :][pair] = 0
    lo, hi = dm - 2 - step, dm - 1 - step
    pair = (out[..., lo, :] & out[..., hi, :]).astype(bool) & ~up
    out[..., lo, :][pair] = 0
    out[..., hi, :][pair] = 0
  return out


def min_rounds_for_timelike(m):
  """Smallest dm with dm > 4m - 5, for a budget of m measurement errors."""
  if int(m) != m or m < 2:
    raise ValueError('m must be an integer >= 2, got %r' % (m,))
  return 4 * int(m) - 4
