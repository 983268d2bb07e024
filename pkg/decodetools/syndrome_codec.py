"""Network data representation of syndromes and errors.

Each stabilizer outcome is written into the dx-by-dz data-qubit matrix at a
fixed cell:

  basis X (Z-type outcomes): the top-left corner of the plaquette, except
    left-boundary weight-2 plaquettes which use their top-right qubit.
  basis Z (X-type outcomes): the top-left corner, except top-boundary
    weight-2 plaquettes which use their bottom-left qubit.

Network tensors are (..., dx, dz, dm, channels).
"""
import numpy as np

from decodetools import code_geometry
from decodetools import homology_canon

INPUT_CHANNELS = ('syndrome_x', 'syndrome_z', 'enc_x', 'enc_z',
                  'temporal_boundary')
TARGET_CHANNELS = ('x_changes', 'z_changes')
CHANNEL_ORDER_TAG = 'syn_x,syn_z,enc_x,enc_z,tbound/x_chg,z_chg'


class EncodingError(ValueError):
  pass


def _cell(stab):
  if stab.kind == 'Z':
    corner = 'ne' if stab.anchor[1] == 0 else 'nw'
  else:
    corner = 'sw' if stab.anchor[0] == 0 else 'nw'
  return stab.corners[corner]


def syndrome_cells(layout, basis):
  """Flat cell index of every detecting stabilizer, in stabilizer order.

  Raises:
    EncodingError: if two stabilizers share a cell.
  """
  kind = code_geometry.stabilizer_kind_for(basis)
  cells = np.array([layout.qubit_index(_cell(s))
                    for s in layout.stabilizers(kind)], dtype=np.int64)
  if len(set(cells.tolist())) != len(cells):
    raise EncodingError('stabilizer to cell map is not injective for %r'
                        % layout)
  return cells


def encode_syndrome_matrix(layout, outcomes, basis):
  """Writes stabilizer outcomes into the data-qubit matrix.

  Args:
    layout: CodeLayout.
    outcomes: binary array (..., num_stabilizers) of the type detecting
      `basis` errors.
    basis: 'X' or 'Z'.

  Returns:
    uint8 array (..., dx, dz).

  Raises:
    EncodingError: on an outcome length mismatch.
  """
  outcomes = np.asarray(outcomes, dtype=np.uint8)
  cells = syndrome_cells(layout, basis)
  if outcomes.shape[-1] != len(cells):
    raise EncodingError('expected %d outcomes, got %d'
                        % (len(cells), outcomes.shape[-1]))
  flat = np.zeros(outcomes.shape[:-1] + (layout.num_data,), dtype=np.uint8)
  flat[..., cells] = outcomes
  return flat.reshape(outcomes.shape[:-1] + (layout.dx, layout.dz))


def decode_syndrome_matrix(layout, matrix, basis):
  """Inverse of encode_syndrome_matrix."""
  matrix = np.asarray(matrix, dtype=np.uint8)
  flat = matrix.reshape(matrix.shape[:-2] + (layout.num_data,))
  return flat[..., syndrome_cells(layout, basis)]


def build_enc_channels(layout):
  """Returns (enc_x, enc_z), the cells every stabilizer maps to."""
  enc_x = encode_syndrome_matrix(
      layout, np.ones(len(layout.z_stabilizers), dtype=np.uint8), 'X')
  enc_z = encode_syndrome_matrix(
      layout, np.ones(len(layout.x_stabilizers), dtype=np.uint8), 'Z')
  return enc_x, enc_z


def _rounds_last(volume):
  # (..., dm, dx, dz) -> (..., dx, dz, dm)
  return np.moveaxis(volume, -3, -1)


def build_input(syndromes, layout, dtype=np.float32):
  """Assembles the 5-channel network input.

  Args:
    syndromes: SyndromeVolume, optionally with a leading shot axis.
    layout: CodeLayout.
    dtype: output dtype.

  Returns:
    array (..., dx, dz, dm, 5).
  """
  syn_x = _rounds_last(encode_syndrome_matrix(layout, syndromes.diff_x, 'X'))
  syn_z = _rounds_last(encode_syndrome_matrix(layout, syndromes.diff_z, 'Z'))
  dm = syn_x.shape[-1]
  enc_x, enc_z = build_enc_channels(layout)
  shape = syn_x.shape
  boundary = np.zeros(dm, dtype=np.uint8)
  boundary[0] = boundary[-1] = 1
  channels = [
      syn_x,
      syn_z,
      np.broadcast_to(enc_x[:, :, None], shape),
      np.broadcast_to(enc_z[:, :, None], shape),
      np.broadcast_to(boundary, shape),
  ]
  return np.stack(channels, axis=-1).astype(dtype)


def build_target(errors, layout, dtype=np.float32):
  """Assembles the 2-channel canonicalized change target.

  Args:
    errors: ErrorVolume, optionally with a leading shot axis.
    layout: CodeLayout.
    dtype: output dtype.

  Returns:
    array (..., dx, dz, dm, 2).
  """
  x_changes = homology_canon.canonicalize(errors.x_changes, layout, 'X')
  z_changes = homology_canon.canonicalize(errors.z_changes, layout, 'Z')
  return np.stack([_rounds_last(x_changes), _rounds_last(z_changes)],
                  axis=-1).astype(dtype)


def corrections_from_output(tensor):
  """Splits a (..., dx, dz, dm, 2) binary tensor into per-round change volumes.

  Returns:
    (x_changes, z_changes), uint8 arrays (..., dm, dx, dz).
  """
  tensor = np.asarray(tensor).astype(np.uint8)
  return (np.moveaxis(tensor[..., 0], -1, -3),
          np.moveaxis(tensor[..., 1], -1, -3))
