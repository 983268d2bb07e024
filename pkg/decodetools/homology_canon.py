"""Homological canonicalization of data-qubit error slices.

An X error slice is simplified with the X-type plaquettes (multiplying by
them keeps its syndrome) and a Z slice with the Z-type plaquettes:

  weight reduction: weight 3 on a weight-4 plaquette becomes the missing
    single qubit, a full plaquette and a full weight-2 plaquette vanish.
  fix equivalence: weight-2 patterns on a weight-4 plaquette, and single
    qubits on a weight-2 plaquette, are moved to one preferred position.

Z rules are the X rules turned by 90 degrees. Both steps act on arrays of
shape (..., dx, dz) and treat every slice independently.
"""
import functools
import logging

import numpy as np

from decodetools import code_geometry

_LOG = logging.getLogger(__name__)

# (from, to) corner sets; `to` is always the complement of `from` on the
# plaquette support, so every rewrite is a multiplication by the plaquette.
_BULK_RULES = {
    'X': ((('sw', 'se'), ('nw', 'ne')),
          (('nw', 'sw'), ('ne', 'se')),
          (('nw', 'se'), ('ne', 'sw'))),
    'Z': ((('nw', 'sw'), ('ne', 'se')),
          (('nw', 'ne'), ('sw', 'se')),
          (('ne', 'sw'), ('nw', 'se'))),
}
# Weight-2 plaquettes: the corner that moves onto its partner.
_EDGE_RULES = {
    'X': {'top': 'se', 'bottom': 'nw'},
    'Z': {'right': 'sw', 'left': 'ne'},
}


class CanonicalizationError(RuntimeError):
  pass


class _Plaquette(object):

  def __init__(self, layout, stab):
    self.anchor = stab.anchor
    names = [n for n in code_geometry.CORNERS if stab.corners[n] is not None]
    self.names = names
    self.support = np.array(
        [layout.qubit_index(stab.corners[n]) for n in names], dtype=np.int64)
    self.patterns = []

  def pattern(self, corners):
    return np.array([1 if n in corners else 0 for n in self.names],
                    dtype=np.uint8)


def _edge_of(stab, layout):
  i, j = stab.anchor
  if i == 0:
    return 'top'
  if i == layout.dx:
    return 'bottom'
  if j == 0:
    return 'left'
  return 'right'


def _plaquettes(layout, basis):
  if basis not in ('X', 'Z'):
    raise ValueError('basis must be X or Z, got %r' % (basis,))
  return _compiled_plaquettes(layout.dx, layout.dz, basis)


# Layouts are rebuilt freely and hash by identity; key on the distances.
@functools.lru_cache(maxsize=None)
def _compiled_plaquettes(dx, dz, basis):
  layout = code_geometry.build_layout(dx, dz)
  compiled = []
  for stab in layout.stabilizers(basis):
    plaquette = _Plaquette(layout, stab)
    if len(plaquette.names) == 4:
      plaquette.patterns = [plaquette.pattern(src)
                            for src, _ in _BULK_RULES[basis]]
    else:
      moving = _EDGE_RULES[basis][_edge_of(stab, layout)]
      plaquette.patterns = [plaquette.pattern((moving,))]
    compiled.append(plaquette)
  return tuple(compiled)


def _as_flat(slices, layout):
  slices = np.asarray(slices, dtype=np.uint8)
  if slices.shape[-2:] != (layout.dx, layout.dz):
    raise ValueError('slice shape %r does not fit %r' % (slices.shape, layout))
  return slices.reshape((-1, layout.num_data)).copy(), slices.shape


def _reduce(flat, plaquettes):
  for plaquette in plaquettes:
    sub = flat[:, plaquette.support]
    weight = sub.sum(axis=1)
    limit = 3 if len(plaquette.support) == 4 else 2
    hit = weight >= limit
    if hit.any():
      flat[np.ix_(hit, plaquette.support)] ^= 1
  return flat


def _fix(flat, plaquettes):
  for plaquette in plaquettes:
    sub = flat[:, plaquette.support]
    hit = np.zeros(len(flat), dtype=bool)
    for pattern in plaquette.patterns:
      hit |= (sub == pattern).all(axis=1)
    if hit.any():
      flat[np.ix_(hit, plaquette.support)] ^= 1
  return flat


def weight_reduction(slices, layout, basis):
  """Reduces error weight on every same-type plaquette, row-major.

  Args:
    slices: binary array (..., dx, dz) of Pauli `basis` errors.
    layout: CodeLayout.
    basis: 'X' or 'Z'.

  Returns:
    uint8 array of the same shape and syndrome.
  """
  flat, shape = _as_flat(slices, layout)
  return _reduce(flat, _plaquettes(layout, basis)).reshape(shape)


def fix_equivalence(slices, layout, basis):
  """Moves weight-2 (and boundary weight-1) patterns to preferred positions."""
  flat, shape = _as_flat(slices, layout)
  return _fix(flat, _plaquettes(layout, basis)).reshape(shape)


def simplify(slices, layout, basis):
  """One pass: weight reduction over all plaquettes, then fix equivalence."""
  flat, shape = _as_flat(slices, layout)
  plaquettes = _plaquettes(layout, basis)
  return _fix(_reduce(flat, plaquettes), plaquettes).reshape(shape)


def canonicalize(slices, layout, basis):
  """Iterates simplify to a fixed point.

  Args:
    slices: binary array (..., dx, dz).
    layout: CodeLayout.
    basis: 'X' or 'Z'.

  Returns:
    uint8 array F with simplify(F) == F, the input's syndrome, and
    input XOR F in the span of the same-type stabilizers.

  Raises:
    CanonicalizationError: if 4*dx*dz passes do not reach a fixed point.
  """
  flat, shape = _as_flat(slices, layout)
  plaquettes = _plaquettes(layout, basis)
  cap = 4 * layout.dx * layout.dz
  active = np.arange(len(flat))
  for _ in range(cap + 1):
    if not len(active):
      return flat.reshape(shape)
    before = flat[active]
    after = _fix(_reduce(before.copy(), plaquettes), plaquettes)
    changed = (after != before).any(axis=1)
    flat[active] = after
    active = active[changed]
  if len(active):
    _LOG.error('%d %s slices of %r still changing after %d passes',
               len(active), basis, layout, cap)
    raise CanonicalizationError(
        'no fixed point after %d passes for %d slices' % (cap, len(active)))
  return flat.reshape(shape)


def gf2_rank(matrix):
  """Rank of a binary matrix over GF(2)."""
  m = np.array(matrix, dtype=np.uint8) % 2
  rank = 0
  rows, cols = m.shape
  for col in range(cols):
    pivot = np.flatnonzero(m[rank:, col])
    if not len(pivot):
      continue
    p = rank + pivot[0]
    m[[rank, p]] = m[[p, rank]]
    others = np.flatnonzero(m[:, col])
    others = others[others != rank]
    m[others] ^= m[rank]
    rank += 1
    if rank == rows:
      break
  return rank


def in_stabilizer_span(layout, pattern, basis):
  """True if a (dx, dz) pattern is a product of same-type stabilizers."""
  checks = layout.check_matrix(basis)
  vector = np.asarray(pattern, dtype=np.uint8).reshape(1, -1)
  return gf2_rank(np.vstack([checks, vector])) == gf2_rank(checks)
