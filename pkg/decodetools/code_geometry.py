"""Rotated surface-code layouts.

A layout with X distance dx and Z distance dz has a dx-by-dz grid of data
qubits addressed by (row, col). Plaquettes are addressed by the grid point
(i, j), 0 <= i <= dx, 0 <= j <= dz, sitting between data rows i-1, i and data
columns j-1, j. Its four corners are

  nw = (i-1, j-1)   ne = (i-1, j)
  sw = (i, j-1)     se = (i, j)

clipped to the grid. Plaquettes with i+j even are X-type, odd are Z-type.
X-type weight-2 plaquettes live on the top and bottom edges, Z-type weight-2
plaquettes on the left and right edges, so the logical X is a vertical string
and the logical Z a horizontal one.

Stabilizers of each type are numbered left to right, top to bottom.
"""
import collections
import json
import logging

import numpy as np

_LOG = logging.getLogger(__name__)

CORNERS = ('nw', 'ne', 'sw', 'se')

# CNOT order per stabilizer type. X-type runs a "Z" shape, Z-type an "N"
# shape, so hook errors from either ancilla lie across the matching logical.
SCHEDULE_ORDER = {
    'X': ('nw', 'ne', 'sw', 'se'),
    'Z': ('nw', 'sw', 'ne', 'se'),
}

NUM_STEPS = 4


class LayoutError(ValueError):
  pass


Stabilizer = collections.namedtuple(
    'Stabilizer', ['kind', 'index', 'anchor', 'corners', 'support', 'slots'])
Stabilizer.__doc__ = """One stabilizer generator.

  kind: 'X' or 'Z'.
  index: position in the row-major numbering of its type.
  anchor: plaquette grid point (i, j).
  corners: dict corner name -> data qubit (row, col) or None.
  support: data qubits acted upon, row-major.
  slots: 4-tuple, the data qubit touched at each CNOT step or None.
"""


def stabilizer_kind_for(basis):
  """Returns the stabilizer type that detects errors of the given Pauli basis."""
  if basis == 'X':
    return 'Z'
  if basis == 'Z':
    return 'X'
  raise LayoutError('basis must be X or Z, got %r' % (basis,))


class CodeLayout(object):
  """Immutable rotated surface-code geometry."""

  def __init__(self, dx, dz, x_stabilizers, z_stabilizers):
    self.dx = dx
    self.dz = dz
    self.data_qubits = tuple(
        (r, c) for r in range(dx) for c in range(dz))
    self.x_stabilizers = tuple(x_stabilizers)
    self.z_stabilizers = tuple(z_stabilizers)
    self.logical_x = tuple((r, 0) for r in range(dx))
    self.logical_z = tuple((0, c) for c in range(dz))
    self._checks = {
        'X': self._build_check_matrix(self.x_stabilizers),
        'Z': self._build_check_matrix(self.z_stabilizers),
    }
    self._by_anchor = dict(
        ((s.kind, s.anchor), s)
        for s in self.x_stabilizers + self.z_stabilizers)
    for matrix in self._checks.values():
      matrix.flags.writeable = False

  def __repr__(self):
    return 'CodeLayout(dx=%d, dz=%d)' % (self.dx, self.dz)

  @property
  def num_data(self):
    return self.dx * self.dz

  def qubit_index(self, qubit):
    row, col = qubit
    return row * self.dz + col

  def stabilizers(self, kind):
    if kind == 'X':
      return self.x_stabilizers
    if kind == 'Z':
      return self.z_stabilizers
    raise LayoutError('stabilizer kind must be X or Z, got %r' % (kind,))

  def stabilizer_at(self, kind, anchor):
    """Looks up a stabilizer by its plaquette grid point."""
    try:
      return self._by_anchor[(kind, tuple(anchor))]
    except KeyError:
      raise LayoutError('no %s-type plaquette at %r' % (kind, anchor))

  def check_matrix(self, kind):
    """Returns the (num_stabilizers, dx*dz) binary support matrix of a type."""
    return self._checks[kind]

  def syndrome(self, errors, basis):
    """Outcomes of the stabilizers detecting an error pattern.

    Args:
      errors: binary array (..., dx, dz) of Pauli `basis` errors.
      basis: 'X' or 'Z'.

    Returns:
      uint8 array (..., num_stabilizers) of the detecting type.
    """
    errors = np.asarray(errors, dtype=np.uint8)
    flat = errors.reshape(errors.shape[:-2] + (self.num_data,))
    checks = self._checks[stabilizer_kind_for(basis)]
    return (flat.astype(np.int64) @ checks.T.astype(np.int64) % 2).astype(
        np.uint8)

  def logical_mask(self, kind):
    """Returns a (dx, dz) uint8 mask of the logical representative of a type."""
    mask = np.zeros((self.dx, self.dz), dtype=np.uint8)
    for row, col in (self.logical_x if kind == 'X' else self.logical_z):
      mask[row, col] = 1
    return mask

  def _build_check_matrix(self, stabilizers):
    matrix = np.zeros((len(stabilizers), self.num_data), dtype=np.uint8)
    for stab in stabilizers:
      for qubit in stab.support:
        matrix[stab.index, self.qubit_index(qubit)] = 1
    return matrix


def _corners(i, j, dx, dz):
  candidates = {
      'nw': (i - 1, j - 1), 'ne': (i - 1, j),
      'sw': (i, j - 1), 'se': (i, j),
  }
  corners = {}
  for name, (row, col) in candidates.items():
    if 0 <= row < dx and 0 <= col < dz:
      corners[name] = (row, col)
    else:
      corners[name] = None
  return corners


def _is_plaquette(kind, i, j, dx, dz):
  bulk_i = 1 <= i <= dx - 1
  bulk_j = 1 <= j <= dz - 1
  if kind == 'X':
    if (i + j) % 2:
      return False
    return bulk_j and (bulk_i or i in (0, dx))
  if (i + j) % 2 == 0:
    return False
  return bulk_i and (bulk_j or j in (0, dz))


def build_layout(dx, dz):
  """Builds the rotated surface-code layout.

  Args:
    dx: X distance (number of data rows), odd and >= 3.
    dz: Z distance (number of data columns), odd and >= 3.

  Returns:
    A CodeLayout.

  Raises:
    LayoutError: if a distance is even or smaller than 3.
  """
  for name, value in (('dx', dx), ('dz', dz)):
    if int(value) != value or value < 3 or value % 2 == 0:
      raise LayoutError('%s must be an odd integer >= 3, got %r' % (name, value))
  dx, dz = int(dx), int(dz)
  stabilizers = {'X': [], 'Z': []}
  for i in range(dx + 1):
    for j in range(dz + 1):
      for kind in ('X', 'Z'):
        if not _is_plaquette(kind, i, j, dx, dz):
          continue
        corners = _corners(i, j, dx, dz)
        support = tuple(sorted(q for q in corners.values() if q is not None))
        slots = tuple(corners[name] for name in SCHEDULE_ORDER[kind])
        stabilizers[kind].append(Stabilizer(
            kind=kind, index=len(stabilizers[kind]), anchor=(i, j),
            corners=corners, support=support, slots=slots))
  layout = CodeLayout(dx, dz, stabilizers['X'], stabilizers['Z'])
  _LOG.debug('built %r with %d X and %d Z stabilizers', layout,
             len(layout.x_stabilizers), len(layout.z_stabilizers))
  return layout


def cnot_schedule(layout):
  """Returns the CNOT schedule of every stabilizer.

  Returns:
    dict mapping (kind, index) to a 4-tuple giving the data qubit touched at
    steps 1..4, with None where a weight-2 stabilizer idles.
  """
  schedule = {}
  for stab in layout.x_stabilizers + layout.z_stabilizers:
    schedule[(stab.kind, stab.index)] = stab.slots
  return schedule


def schedule_conflicts(layout):
  """Lists (step, qubit) pairs where a data qubit is used twice in one step."""
  conflicts = []
  for step in range(NUM_STEPS):
    seen = collections.Counter(
        stab.slots[step]
        for stab in layout.x_stabilizers + layout.z_stabilizers
        if stab.slots[step] is not None)
    conflicts.extend((step + 1, q) for q, n in sorted(seen.items()) if n > 1)
  return conflicts


def layout_to_json(layout):
  """Serializes a layout (coordinates, supports, schedule) for inspection."""
  def _stabs(kind):
    return [{
        'index': s.index,
        'anchor': list(s.anchor),
        'support': [list(q) for q in s.support],
        'schedule': [list(q) if q is not None else None for q in s.slots],
    } for s in layout.stabilizers(kind)]

  return json.dumps({
      'dx': layout.dx,
      'dz': layout.dz,
      'data_qubits': [list(q) for q in layout.data_qubits],
      'x_stabilizers': _stabs('X'),
      'z_stabilizers': _stabs('Z'),
      'logical_x': [list(q) for q in layout.logical_x],
      'logical_z': [list(q) for q in layout.logical_z],
  }, indent=2, sort_keys=True)
