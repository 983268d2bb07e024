"""Versioned binary blobs and JSON manifests.

Blob layout:

  b'DCLB'                 magic
  uint16 little-endian    format version
  uint32 little-endian    header length
  header                  UTF-8 JSON: format name, user fields, tensor table
  tensors                 raw row-major bytes in tensor-table order
"""
import collections
import errno
import hashlib
import json
import os
import struct

import numpy as np

MAGIC = b'DCLB'
VERSION = 1

pjoin = os.path.join


class BlobFormatError(ValueError):
  pass


def MakeDirectoryIfNotExist(path):
  if not path:
    return
  try:
    os.makedirs(path)
  except OSError as exception:
    if exception.errno != errno.EEXIST:
      raise


def RemoveFileIfExist(path):
  try:
    os.remove(path)
  except OSError as exception:
    if exception.errno != errno.ENOENT:
      raise


def manifest_path(path):
  return path + '.json'


def file_digest(path):
  """sha256 hex digest of a file."""
  digest = hashlib.sha256()
  with open(path, 'rb') as f:
    for block in iter(lambda: f.read(1 << 20), b''):
      digest.update(block)
  return digest.hexdigest()


def write_manifest(path, data):
  MakeDirectoryIfNotExist(os.path.dirname(path))
  with open(path, 'w') as f:
    json.dump(data, f, indent=2, sort_keys=True)


def read_manifest(path):
  with open(path) as f:
    return json.load(f)


def write_blob(path, fmt, header, tensors):
  """Writes named arrays behind a JSON header.

  Any JSON sidecar of a previous blob at path is removed; savers that keep
  one write it again after the blob.

  Args:
    path: output file.
    fmt: format name checked on read (e.g. 'convnet', 'shots').
    header: JSON-serializable dict of extra fields.
    tensors: iterable of (name, array).
  """
  arrays = [(name, np.ascontiguousarray(a)) for name, a in tensors]
  table = [{'name': name, 'dtype': a.dtype.str, 'shape': list(a.shape)}
           for name, a in arrays]
  body = dict(header, format=fmt, tensors=table)
  encoded = json.dumps(body, sort_keys=True).encode('utf-8')
  MakeDirectoryIfNotExist(os.path.dirname(path))
  # A sidecar describes the blob it was written with.
  RemoveFileIfExist(manifest_path(path))
  with open(path, 'wb') as f:
    f.write(MAGIC)
    f.write(struct.pack('<HI', VERSION, len(encoded)))
    f.write(encoded)
    for _, a in arrays:
      f.write(a.tobytes(order='C'))


def read_blob(path, fmt):
  """Reads a blob written by write_blob.

  Returns:
    (header dict, OrderedDict of name -> array).

  Raises:
    BlobFormatError: on a bad magic, version or format name.
  """
  with open(path, 'rb') as f:
    if f.read(4) != MAGIC:
      raise BlobFormatError('%s is not a blob file' % path)
    version, length = struct.unpack('<HI', f.read(6))
    if version != VERSION:
      raise BlobFormatError('%s has version %d, expected %d'
                            % (path, version, VERSION))
    header = json.loads(f.read(length).decode('utf-8'))
    if header.get('format') != fmt:
      raise BlobFormatError('%s holds %r, expected %r'
                            % (path, header.get('format'), fmt))
    tensors = collections.OrderedDict()
    for entry in header['tensors']:
      dtype = np.dtype(entry['dtype'])
      count = int(np.prod(entry['shape'], dtype=np.int64))
      data = f.read(count * dtype.itemsize)
      if len(data) != count * dtype.itemsize:
        raise BlobFormatError('%s is truncated at %s' % (path, entry['name']))
      tensors[entry['name']] = np.frombuffer(data, dtype=dtype).reshape(
          entry['shape']).copy()
  return header, tensors


def _meta(header):
  return dict((k, v) for k, v in header.items()
              if k not in ('format', 'tensors'))


def save_shots(path, errors, syndromes, meta):
  """Persists a shot batch with a JSON sidecar.

  Args:
    path: blob path; the sidecar is path + '.json'.
    errors: ErrorVolume with a leading shot axis.
    syndromes: SyndromeVolume with a leading shot axis.
    meta: dict with at least dx, dz, dm, p and seed.
  """
  write_blob(path, 'shots', meta, [
      ('x_errors', errors.x_errors), ('z_errors', errors.z_errors),
      ('raw_x', syndromes.raw_x), ('raw_z', syndromes.raw_z),
  ])
  write_manifest(manifest_path(path), dict(
      meta, shape=list(errors.x_errors.shape), sha256=file_digest(path)))


def load_shots(path):
  """Returns (meta, x_errors, z_errors, raw_x, raw_z)."""
  header, t = read_blob(path, 'shots')
  return _meta(header), t['x_errors'], t['z_errors'], t['raw_x'], t['raw_z']


def save_tensors(path, inputs, targets, meta):
  """Persists network input/target batches with a JSON sidecar."""
  tensors = [('inputs', inputs)]
  if targets is not None:
    tensors.append(('targets', targets))
  write_blob(path, 'tensors', meta, tensors)
  write_manifest(manifest_path(path), dict(
      meta, input_shape=list(inputs.shape), sha256=file_digest(path)))


def load_tensors(path):
  """Returns (meta, inputs, targets or None)."""
  header, t = read_blob(path, 'tensors')
  return _meta(header), t['inputs'], t.get('targets')
