"""Monte Carlo experiments of the local + global decoding pipeline.

Each shot is sampled, corrected by a local decoder, folded back into the
syndrome differences (which leaves vertical pairs where the local decoder
acted), sparsified, decoded by the global decoder and judged on the final
perfect round.

Shots are processed in fixed-size chunks seeded by (seed, chunk index), so
results do not depend on the number of worker processes.
"""
import collections
import concurrent.futures
import csv
import errno
import functools
import hashlib
import json
import logging
import math
import os
import time

import numpy as np
from scipy import stats
from traitlets import Bool, Enum, Float, Integer, List, TraitError, Unicode
from traitlets import validate
from traitlets.config import Configurable

from decodetools import code_geometry
from decodetools import conv3d_net
from decodetools import matcher
from decodetools import noise_sampler
from decodetools import persist
from decodetools import sparsifier
from decodetools import syndrome_codec
from decodetools import union_find

_LOG = logging.getLogger(__name__)

CSV_SCHEMA_VERSION = 1
CSV_FIELDS = (
    'schema_version', 'dx', 'dz', 'dm', 'p', 'pipeline', 'shots',
    'x_failures', 'z_failures', 'x_rate', 'x_ci_low', 'x_ci_high',
    'z_rate', 'z_ci_low', 'z_ci_high', 'a_raw', 'a_local', 'a_sparse',
    'r_local', 'r_sparse', 'mean_matching', 'sample_s', 'local_s',
    'sparsify_s', 'global_s',
)
STAGES = ('sample', 'local', 'sparsify', 'global')


class FitError(ValueError):
  pass


class ExperimentConfig(Configurable):
  """One sweep over physical error rates for a fixed code volume."""

  dx = Integer(5, config=True, help='X distance (data rows), odd >= 3.')
  dz = Integer(5, config=True, help='Z distance (data columns), odd >= 3.')
  dm = Integer(5, config=True, help='Syndrome rounds, the last one perfect.')
  p = List(Float(), [1e-3], config=True,
           help='Physical error rates to sweep.')
  shots = Integer(1000, config=True, help='Shots per error rate.')
  local_decoder = Enum(('none', 'oracle', 'weights'), 'none', config=True,
                       help='Local decoder: none, the true error changes '
                            '(oracle) or a trained network (weights).')
  weights = Unicode('', config=True,
                    help='Network weights file for local_decoder=weights.')
  sheet_size = Integer(sparsifier.DEFAULT_SHEET_SIZE, config=True,
                       help='Rounds per sheet for the syndrome collapse.')
  sparsifier = Enum(('none', 'collapse', 'cleanup'), 'none', config=True,
                    help='Syndrome sparsification after local decoding.')
  cleanup_direction = Enum(('up', 'down', 'auto'), 'auto', config=True,
                           help='Sweep direction of the vertical cleanup.')
  global_decoder = Enum(('mwpm', 'uf'), 'mwpm', config=True,
                        help='Global decoder.')
  hadamard = Bool(False, config=True,
                  help='Use the Hadamard-rotated X-ancilla circuit.')
  seed = Integer(0, config=True, help='Master seed.')
  chunk_size = Integer(noise_sampler.DEFAULT_CHUNK_SIZE, config=True,
                       help='Shots per independently seeded chunk.')
  workers = Integer(1, config=True, help='Worker processes.')
  output_csv = Unicode('', config=True, help='CSV results path.')
  output_manifest = Unicode('', config=True, help='JSON run manifest path.')
  output_svg = Unicode('', config=True, help='SVG plot path.')

  @validate('dx', 'dz')
  def _valid_distance(self, proposal):
    value = proposal['value']
    if value < 3 or value % 2 == 0:
      raise TraitError('%s must be odd and >= 3, got %r'
                       % (proposal['trait'].name, value))
    return value

  @validate('dm', 'shots', 'sheet_size', 'chunk_size', 'workers')
  def _valid_count(self, proposal):
    if proposal['value'] < 1:
      raise TraitError('%s must be >= 1, got %r'
                       % (proposal['trait'].name, proposal['value']))
    return proposal['value']

  @validate('p')
  def _valid_rates(self, proposal):
    for p in proposal['value']:
      if not 0 <= p < 1:
        raise TraitError('error rates must lie in [0, 1), got %r' % (p,))
    return proposal['value']

  @property
  def pipeline(self):
    return '%s/%s/%s' % (self.local_decoder, self.sparsifier,
                         self.global_decoder)


_Job = collections.namedtuple('_Job', [
    'dx', 'dz', 'dm', 'local_decoder', 'weights', 'sparsifier', 'sheet_size',
    'cleanup_direction', 'global_decoder', 'hadamard',
])

_Chunk = collections.namedtuple('_Chunk', [
    'shots', 'x_failures', 'z_failures', 'raw', 'local', 'sparse', 'seconds',
])

PointResult = collections.namedtuple('PointResult', [
    'p', 'shots', 'x_failures', 'z_failures', 'x_rate', 'x_ci', 'z_rate',
    'z_ci', 'a_raw', 'a_local', 'a_sparse', 'r_local', 'r_sparse', 'seconds',
])


class ExperimentResult(object):
  """Per-p results of run_experiment plus the configuration that made them."""

  def __init__(self, settings, pipeline, points):
    self.settings = settings
    self.pipeline = pipeline
    self.points = points

  def point(self, p):
    for point in self.points:
      if point.p == p:
        return point
    raise KeyError(p)


def _job(config):
  return _Job(config.dx, config.dz, config.dm, config.local_decoder,
              config.weights, config.sparsifier, config.sheet_size,
              config.cleanup_direction, config.global_decoder,
              config.hadamard)


def _settings(config):
  return dict((name, getattr(config, name))
              for name in sorted(config.trait_names(config=True)))


@functools.lru_cache(maxsize=None)
def _layout(dx, dz):
  return code_geometry.build_layout(dx, dz)


@functools.lru_cache(maxsize=None)
def _graphs(job):
  layout = _layout(job.dx, job.dz)
  collapsed = job.sparsifier == 'collapse'
  return tuple(matcher.build_graph(layout, job.dm, collapsed=collapsed,
                                   sheet_size=job.sheet_size, basis=basis,
                                   hadamard=job.hadamard)
               for basis in ('X', 'Z'))


@functools.lru_cache(maxsize=4)
def _network(path):
  return conv3d_net.load_weights(path)


def wilson_interval(failures, shots, confidence=0.95):
  """Wilson score interval of a binomial rate.

  Returns:
    (low, high); (0, 1) for zero shots.
  """
  if shots <= 0:
    return 0.0, 1.0
  z = stats.norm.ppf(0.5 + confidence / 2.0)
  rate = failures / float(shots)
  denom = 1.0 + z * z / shots
  centre = (rate + z * z / (2.0 * shots)) / denom
  half = z * math.sqrt(rate * (1.0 - rate) / shots
                       + z * z / (4.0 * shots * shots)) / denom
  return max(0.0, centre - half), min(1.0, centre + half)


def syndrome_density(*volumes):
  """Mean number of 1-bits per shot, summed over the given volumes.

  Args:
    volumes: binary arrays with a leading shot axis.
  """
  if not volumes or not len(volumes[0]):
    return 0.0
  total = sum(np.asarray(v, dtype=np.int64).reshape(len(v), -1).sum()
              for v in volumes)
  return total / float(len(volumes[0]))


def _local_corrections(job, layout, errors, syndromes):
  if job.local_decoder == 'oracle':
    return errors.x_changes, errors.z_changes
  if job.local_decoder == 'weights':
    net = _network(job.weights)
    inputs = syndrome_codec.build_input(syndromes, layout, dtype=net.dtype)
    return syndrome_codec.corrections_from_output(
        conv3d_net.predict_corrections(net, inputs))
  zeros = np.zeros_like(errors.x_errors)
  return zeros, zeros.copy()


def _sparsify(job, diff, rng):
  if job.sparsifier == 'collapse':
    return sparsifier.syndrome_collapse(diff, job.sheet_size)
  if job.sparsifier == 'cleanup':
    return sparsifier.vertical_cleanup(diff, job.cleanup_direction, rng)
  return diff


def decode_shots(graphs, diffs, decoder='mwpm'):
  """Globally decodes a batch of shots.

  Args:
    graphs: (X graph, Z graph).
    diffs: (diff_x, diff_z), arrays (shots, layers, num_stabilizers).
    decoder: 'mwpm' or 'uf'.

  Returns:
    ((x_flips, z_flips) arrays (shots, dx, dz), summed highlight count).
  """
  decode = matcher.mwpm_decode if decoder == 'mwpm' else union_find.uf_decode
  flips = []
  matched = 0
  for graph, diff in zip(graphs, diffs):
    out = np.zeros((len(diff), graph.layout.dx, graph.layout.dz),
                   dtype=np.uint8)
    for shot in np.flatnonzero(diff.reshape(len(diff), -1).any(axis=1)):
      highlights = graph.highlights(diff[shot])
      matched += len(highlights)
      out[shot] = matcher.correction_flips(graph, decode(graph, highlights))
    flips.append(out)
  return tuple(flips), matched


def _run_chunk(job, p, seed, chunk_index, shots):
  """Runs one chunk of shots; returns a _Chunk of sums."""
  layout = _layout(job.dx, job.dz)
  rng = noise_sampler.chunk_rng(seed, chunk_index)
  seconds = dict.fromkeys(STAGES, 0.0)

  start = time.perf_counter()
  errors, syndromes = noise_sampler.sample_batch(
      layout, job.dm, noise_sampler.NoiseParams(p), shots, rng,
      hadamard=job.hadamard)
  diffs = (syndromes.diff_x, syndromes.diff_z)
  seconds['sample'] += time.perf_counter() - start

  start = time.perf_counter()
  corrections = _local_corrections(job, layout, errors, syndromes)
  diffs = tuple(d ^ layout.syndrome(c, basis)
                for d, c, basis in zip(diffs, corrections, 'XZ'))
  residual = tuple(f ^ (c.sum(axis=-3) % 2).astype(np.uint8)
                   for f, c in zip(errors.final_frame, corrections))
  seconds['local'] += time.perf_counter() - start

  start = time.perf_counter()
  sparse = tuple(_sparsify(job, d, rng) for d in diffs)
  seconds['sparsify'] += time.perf_counter() - start

  start = time.perf_counter()
  flips, _ = decode_shots(_graphs(job), sparse, job.global_decoder)
  x_fail, z_fail = noise_sampler.logical_failure(layout, residual, flips)
  seconds['global'] += time.perf_counter() - start

  return _Chunk(
      shots, int(np.sum(x_fail)), int(np.sum(z_fail)),
      syndrome_density(syndromes.diff_x, syndromes.diff_z) * shots,
      syndrome_density(*diffs) * shots, syndrome_density(*sparse) * shots,
      seconds)


def _chunk_plan(config):
  sizes = []
  for start in range(0, config.shots, config.chunk_size):
    sizes.append(min(config.chunk_size, config.shots - start))
  return sizes


def _ratio(post, pre):
  return post / pre if pre else 0.0


def _reduce(p, chunks):
  shots = sum(c.shots for c in chunks)
  x_failures = sum(c.x_failures for c in chunks)
  z_failures = sum(c.z_failures for c in chunks)
  a_raw = sum(c.raw for c in chunks) / shots
  a_local = sum(c.local for c in chunks) / shots
  a_sparse = sum(c.sparse for c in chunks) / shots
  seconds = dict((stage, sum(c.seconds[stage] for c in chunks))
                 for stage in STAGES)
  return PointResult(
      p, shots, x_failures, z_failures, x_failures / float(shots),
      wilson_interval(x_failures, shots), z_failures / float(shots),
      wilson_interval(z_failures, shots), a_raw, a_local, a_sparse,
      _ratio(a_local, a_raw), _ratio(a_sparse, a_raw), seconds)


def run_experiment(config):
  """Runs the decoding pipeline for every p of the configuration.

  Args:
    config: ExperimentConfig.

  Returns:
    ExperimentResult.

  Raises:
    IOError: if local_decoder is 'weights' and the weights file is missing.
  """
  if config.local_decoder == 'weights' and not os.path.isfile(config.weights):
    raise IOError(errno.ENOENT, 'weights file not found', config.weights)
  job = _job(config)
  sizes = _chunk_plan(config)
  tasks = [(p_index, chunk, size)
           for p_index in range(len(config.p))
           for chunk, size in enumerate(sizes)]

  def _args(task):
    p_index, chunk, size = task
    return (job, config.p[p_index], config.seed,
            p_index * len(sizes) + chunk, size)

  if config.workers > 1:
    with concurrent.futures.ProcessPoolExecutor(config.workers) as pool:
      futures = [pool.submit(_run_chunk, *_args(t)) for t in tasks]
      chunks = [f.result() for f in futures]
  else:
    chunks = [_run_chunk(*_args(t)) for t in tasks]

  points = []
  for p_index, p in enumerate(config.p):
    point = _reduce(p, chunks[p_index * len(sizes):(p_index + 1) * len(sizes)])
    _LOG.info('%s d=(%d,%d,%d) p=%g: X %d/%d (%.3g), Z %d/%d (%.3g), '
              'r_local %.3g, r_sparse %.3g', config.pipeline, config.dx,
              config.dz, config.dm, p, point.x_failures, point.shots,
              point.x_rate, point.z_failures, point.shots, point.z_rate,
              point.r_local, point.r_sparse)
    points.append(point)
  return ExperimentResult(_settings(config), config.pipeline, points)


FitResult = collections.namedtuple('FitResult', ['u', 'b', 'residuals'])


def fit_polynomial(points):
  """Fits p_L = u * d * dm * (b p)^((d - 1) / 2) in log space.

  Args:
    points: iterable of (d, p, p_L), with dm = d, or (d, dm, p, p_L).
      Points with p_L <= 0 carry no information and are dropped.

  Returns:
    FitResult(u, b, residuals of the log-space fit).

  Raises:
    FitError: with fewer than two distinct distances left.
  """
  rows, values = [], []
  for point in points:
    if len(point) == 3:
      d, p, rate = point
      dm = d
    else:
      d, dm, p, rate = point
    if rate <= 0:
      _LOG.warning('dropping point d=%r p=%r with rate %r', d, p, rate)
      continue
    half = (d - 1) / 2.0
    rows.append((1.0, half))
    values.append(math.log(rate) - math.log(d * dm) - half * math.log(p))
  design = np.array(rows, dtype=np.float64).reshape(-1, 2)
  if np.linalg.matrix_rank(design) < 2:
    raise FitError('need points at two or more distances to fit (u, b)')
  coef, _, _, _ = np.linalg.lstsq(design, np.array(values), rcond=None)
  residuals = np.array(values) - design @ coef
  return FitResult(math.exp(coef[0]), math.exp(coef[1]), residuals)


def error_density_profile(layout, dm, p, shots, seed,
                          chunk_size=noise_sampler.DEFAULT_CHUNK_SIZE):
  """Mean per-qubit X-error density of every round.

  Returns:
    dict with 'cumulative' (density of the accumulated error) and 'changes'
    (density of the per-round change), arrays of shape (dm,).
  """
  noise = noise_sampler.NoiseParams(p)
  circuit = noise_sampler.ExtractionCircuit(layout)
  cumulative = np.zeros(dm)
  changes = np.zeros(dm)
  for chunk, start in enumerate(range(0, shots, chunk_size)):
    size = min(chunk_size, shots - start)
    errors, _ = noise_sampler.sample_batch(
        layout, dm, noise, size, noise_sampler.chunk_rng(seed, chunk),
        circuit=circuit)
    cumulative += errors.x_errors.sum(axis=(0, 2, 3))
    changes += errors.x_changes.sum(axis=(0, 2, 3))
  scale = float(shots * layout.num_data)
  return {'cumulative': cumulative / scale, 'changes': changes / scale}


ModelComparison = collections.namedtuple(
    'ModelComparison', ['models', 'rows'])


def compare_models(config, weights_paths):
  """Runs the pipeline once per trained network.

  Args:
    config: ExperimentConfig; its local decoder is replaced by each network.
    weights_paths: network weights files.

  Returns:
    ModelComparison; every row holds p, the (x_rate, z_rate) of each model
    and the best model (lowest X + Z rate, ties to the earlier model).
  """
  if not weights_paths:
    raise ValueError('no models to compare')
  results = []
  for path in weights_paths:
    values = dict((name, getattr(config, name))
                  for name in config.trait_names(config=True))
    model_config = ExperimentConfig(**values)
    model_config.local_decoder = 'weights'
    model_config.weights = path
    model_config.output_csv = model_config.output_manifest = ''
    results.append(run_experiment(model_config))
  rows = []
  for i, p in enumerate(config.p):
    rates = [(r.points[i].x_rate, r.points[i].z_rate) for r in results]
    best = int(np.argmin([x + z for x, z in rates]))
    rows.append({'p': p, 'rates': rates, 'best': weights_paths[best]})
    _LOG.info('p=%g: best model %s', p, weights_paths[best])
  return ModelComparison(list(weights_paths), rows)


def complexity_report(result):
  """Sparsification ratios, matching sizes and stage times per p."""
  report = {'pipeline': result.pipeline, 'points': []}
  for point in result.points:
    report['points'].append({
        'p': point.p,
        'r_local': point.r_local,
        'r_sparse': point.r_sparse,
        'mean_matching': point.a_sparse,
        'seconds': dict(point.seconds),
    })
  return report


def _csv_row(settings, pipeline, point):
  return {
      'schema_version': CSV_SCHEMA_VERSION,
      'dx': settings['dx'], 'dz': settings['dz'], 'dm': settings['dm'],
      'p': point.p, 'pipeline': pipeline, 'shots': point.shots,
      'x_failures': point.x_failures, 'z_failures': point.z_failures,
      'x_rate': point.x_rate, 'x_ci_low': point.x_ci[0],
      'x_ci_high': point.x_ci[1], 'z_rate': point.z_rate,
      'z_ci_low': point.z_ci[0], 'z_ci_high': point.z_ci[1],
      'a_raw': point.a_raw, 'a_local': point.a_local,
      'a_sparse': point.a_sparse, 'r_local': point.r_local,
      'r_sparse': point.r_sparse, 'mean_matching': point.a_sparse,
      'sample_s': point.seconds['sample'], 'local_s': point.seconds['local'],
      'sparsify_s': point.seconds['sparsify'],
      'global_s': point.seconds['global'],
  }


def write_csv(results, path):
  """Writes one row per (volume, p, pipeline); appends to an existing file."""
  if isinstance(results, ExperimentResult):
    results = [results]
  persist.MakeDirectoryIfNotExist(os.path.dirname(path))
  fresh = not os.path.exists(path)
  with open(path, 'a', newline='') as f:
    writer = csv.DictWriter(f, fieldnames=CSV_FIELDS, lineterminator='\n')
    if fresh:
      writer.writeheader()
    for result in results:
      for point in result.points:
        writer.writerow(_csv_row(result.settings, result.pipeline, point))
  _LOG.info('wrote results to %s', path)


def read_csv(path):
  with open(path, newline='') as f:
    return list(csv.DictReader(f))


def write_run_manifest(result, path):
  """Writes the configuration, seed and weights digest of a run."""
  settings = dict(result.settings)
  manifest = {
      'pipeline': result.pipeline,
      'settings': settings,
      'seed': settings.get('seed'),
      'csv_schema_version': CSV_SCHEMA_VERSION,
      'settings_sha256': hashlib.sha256(
          json.dumps(settings, sort_keys=True).encode('utf-8')).hexdigest(),
  }
  if settings.get('weights'):
    manifest['weights_sha256'] = persist.file_digest(settings['weights'])
  persist.write_manifest(path, manifest)
  _LOG.info('wrote run manifest to %s', path)
