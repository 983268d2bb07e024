"""Circuit-level noise sampling by Pauli-frame propagation.

Each syndrome round of the extraction circuit runs these ticks:

  prep    reset every ancilla; Z-type ancillas start in |0>, X-type in |+>.
          Data qubits idle through the previous measure+reset window here.
  cnot1-4 the CNOT schedule of code_geometry.
  meas    measure every ancilla.

With `hadamard=True` the X-type ancillas start in |0> and are rotated by a
Hadamard before (h1) and after (h2) the CNOTs.

A fault location is followed by a Pauli drawn from the depolarizing model:
idle and single-qubit gate locations X/Y/Z each with p/3, CNOTs one of the
15 non-identity two-qubit Paulis each with p/15, preparations and
measurements a flip with 2p/3. The last round is perfect and draws nothing.

Frames are boolean (shots, qubits) arrays; a Y is an X bit plus a Z bit.
Single-qubit Pauli codes pack X in bit 0 and Z in bit 1. Two-qubit codes
pack the first (control) qubit in bits 0-1 and the second in bits 2-3.
"""
import collections
import logging

import numpy as np

from decodetools import code_geometry

_LOG = logging.getLogger(__name__)

STANDARD_TICKS = ('prep', 'cnot1', 'cnot2', 'cnot3', 'cnot4', 'meas')
HADAMARD_TICKS = ('prep', 'h1', 'cnot1', 'cnot2', 'cnot3', 'cnot4', 'h2',
                  'meas')

SINGLE_PAULI_CODES = {'I': 0, 'X': 1, 'Z': 2, 'Y': 3}

FLIP_KINDS = ('prep_x_flip', 'prep_z_flip', 'meas')

# Fixed chunk size used to seed shot batches, independent of worker count.
DEFAULT_CHUNK_SIZE = 1024


class UnknownLocationError(ValueError):
  pass


class NoiseParams(collections.namedtuple('NoiseParams', ['p'])):
  """Depolarizing strength of the circuit-level noise model."""

  def __new__(cls, p):
    p = float(p)
    if not 0.0 <= p <= 1.0:
      raise ValueError('p must lie in [0, 1], got %r' % p)
    return super(NoiseParams, cls).__new__(cls, p)

  def rates(self):
    """Per-outcome probabilities of every location class."""
    return {
        'gate1': self.p / 3,
        'idle': self.p / 3,
        'cnot': self.p / 15,
        'prep': 2 * self.p / 3,
        'meas': 2 * self.p / 3,
    }


Location = collections.namedtuple('Location', ['round', 'tick', 'qubits'])
Location.__doc__ = """A fault location: 1-based round, tick name, frame qubits."""

NoiseGroup = collections.namedtuple('NoiseGroup', ['kind', 'qubits'])
Tick = collections.namedtuple('Tick', ['name', 'action', 'targets', 'groups'])


class ExtractionCircuit(object):
  """The repeated stabilizer-measurement circuit of a layout.

  Frame qubit numbering: data qubits first (row-major), then the Z-type
  ancillas, then the X-type ancillas, each in stabilizer order.
  """

  def __init__(self, layout, hadamard=False):
    self.layout = layout
    self.hadamard = bool(hadamard)
    self.num_data = layout.num_data
    self.num_z = len(layout.z_stabilizers)
    self.num_x = len(layout.x_stabilizers)
    self.num_qubits = self.num_data + self.num_z + self.num_x
    self.data = np.arange(self.num_data)
    self.z_ancillas = np.arange(self.num_data, self.num_data + self.num_z)
    self.x_ancillas = np.arange(self.num_data + self.num_z, self.num_qubits)
    self.ticks = tuple(self._build_ticks())
    self._index = self._build_index()

  def ancilla(self, kind, index):
    if kind == 'Z':
      return int(self.z_ancillas[index])
    return int(self.x_ancillas[index])

  def data_location(self, round_number, qubit):
    """The idle location a data error "in round k" is injected at."""
    return Location(round_number, 'prep', (self.layout.qubit_index(qubit),))

  def measurement_location(self, round_number, kind, index):
    return Location(round_number, 'meas', (self.ancilla(kind, index),))

  def preparation_location(self, round_number, kind, index):
    return Location(round_number, 'prep', (self.ancilla(kind, index),))

  def cnot_location(self, round_number, kind, index, step):
    """The CNOT of stabilizer (kind, index) at schedule step 1..4."""
    stab = self.layout.stabilizers(kind)[index]
    qubit = stab.slots[step - 1]
    if qubit is None:
      raise UnknownLocationError(
          '%s stabilizer %d has no CNOT at step %d' % (kind, index, step))
    data = self.layout.qubit_index(qubit)
    ancilla = self.ancilla(kind, index)
    pair = (ancilla, data) if kind == 'X' else (data, ancilla)
    return Location(round_number, 'cnot%d' % step, pair)

  def locations(self, dm):
    """Every fault location of a dm-round experiment (rounds 1..dm-1)."""
    found = []
    for round_number in range(1, dm):
      for tick in self.ticks:
        for group in tick.groups:
          for qubits in group.qubits:
            found.append(Location(round_number, tick.name,
                                  tuple(int(q) for q in np.atleast_1d(qubits))))
    return found

  def resolve(self, location, dm):
    """Maps a Location to (tick index, group index, column, group kind).

    Raises:
      UnknownLocationError: if the location is not a fault location of a
        noisy round.
    """
    round_number, tick_name, qubits = location
    if not 1 <= round_number <= dm - 1:
      raise UnknownLocationError(
          'round %r has no fault locations (noisy rounds are 1..%d)'
          % (round_number, dm - 1))
    try:
      return self._index[(tick_name, tuple(qubits))]
    except KeyError:
      raise UnknownLocationError('unknown location %r' % (location,))

  def _build_ticks(self):
    layout = self.layout
    ancillas = np.concatenate([self.z_ancillas, self.x_ancillas])
    x_prep_kind = 'prep_x_flip' if self.hadamard else 'prep_z_flip'
    yield Tick('prep', 'prep', ancillas, (
        NoiseGroup('idle', self.data),
        NoiseGroup('prep_x_flip', self.z_ancillas),
        NoiseGroup(x_prep_kind, self.x_ancillas),
    ))
    if self.hadamard:
      yield self._hadamard_tick('h1')
    for step in range(code_geometry.NUM_STEPS):
      pairs = []
      for kind in ('Z', 'X'):
        for stab in layout.stabilizers(kind):
          qubit = stab.slots[step]
          if qubit is None:
            continue
          data = layout.qubit_index(qubit)
          ancilla = self.ancilla(kind, stab.index)
          pairs.append((ancilla, data) if kind == 'X' else (data, ancilla))
      pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)
      busy = np.zeros(self.num_qubits, dtype=bool)
      busy[pairs.ravel()] = True
      yield Tick('cnot%d' % (step + 1), 'cnot', pairs, (
          NoiseGroup('cnot', pairs),
          NoiseGroup('idle', np.flatnonzero(~busy)),
      ))
    if self.hadamard:
      yield self._hadamard_tick('h2')
    yield Tick('meas', 'meas', ancillas, (NoiseGroup('meas', ancillas),))

  def _hadamard_tick(self, name):
    return Tick(name, 'hadamard', self.x_ancillas, (
        NoiseGroup('gate1', self.x_ancillas),
        NoiseGroup('idle', np.concatenate([self.data, self.z_ancillas])),
    ))

  def _build_index(self):
    index = {}
    for t, tick in enumerate(self.ticks):
      for g, group in enumerate(tick.groups):
        for col, qubits in enumerate(group.qubits):
          key = (tick.name, tuple(int(q) for q in np.atleast_1d(qubits)))
          index[key] = (t, g, col, group.kind)
    return index


def pauli_code(kind, pauli):
  """Parses a Pauli label for a location kind into its frame code."""
  pauli = str(pauli).upper()
  if kind in FLIP_KINDS:
    flipping = {'prep_x_flip': ('X', 'Y'), 'prep_z_flip': ('Z', 'Y'),
                'meas': ()}[kind]
    if pauli == 'FLIP' or pauli in flipping:
      return 1
  elif kind == 'cnot':
    if (len(pauli) == 2 and all(c in SINGLE_PAULI_CODES for c in pauli)
        and pauli != 'II'):
      return SINGLE_PAULI_CODES[pauli[0]] | (SINGLE_PAULI_CODES[pauli[1]] << 2)
  elif pauli in ('X', 'Y', 'Z'):
    return SINGLE_PAULI_CODES[pauli]
  raise UnknownLocationError('Pauli %r does not fit a %s location' % (pauli, kind))


class RandomFaults(object):
  """Draws faults from the depolarizing model; silent in the last round."""

  def __init__(self, noise, rng):
    self.noise = noise
    self.rng = rng

  def draw(self, round_index, dm, group, shots):
    if round_index >= dm - 1 or self.noise.p == 0.0:
      return None
    p = self.noise.p
    shape = (shots, len(group.qubits))
    rng = self.rng
    if group.kind in FLIP_KINDS:
      return (rng.random(shape) < 2 * p / 3).astype(np.uint8)
    hit = rng.random(shape) < p
    if group.kind == 'cnot':
      which = rng.integers(1, 16, size=shape, dtype=np.uint8)
    else:
      which = rng.integers(1, 4, size=shape, dtype=np.uint8)
    return which * hit.astype(np.uint8)


class FixedFaults(object):
  """Replays an explicit fault list per shot."""

  def __init__(self, circuit, dm, faults_per_shot):
    self._table = collections.defaultdict(list)
    for shot, faults in enumerate(faults_per_shot):
      for location, pauli in faults:
        t, g, col, kind = circuit.resolve(location, dm)
        code = pauli_code(kind, pauli)
        self._table[(location.round - 1, t, g)].append((shot, col, code))
    self._tick_of = dict(
        (id(group), (t, g))
        for t, tick in enumerate(circuit.ticks)
        for g, group in enumerate(tick.groups))

  def draw(self, round_index, dm, group, shots):
    t, g = self._tick_of[id(group)]
    entries = self._table.get((round_index, t, g))
    if not entries:
      return None
    codes = np.zeros((shots, len(group.qubits)), dtype=np.uint8)
    for shot, col, code in entries:
      codes[shot, col] ^= code
    return codes


class ErrorVolume(object):
  """Data-qubit Pauli frames at every round's measurement.

  x_errors, z_errors: uint8 arrays (..., dm, dx, dz), cumulative per round.
  """

  def __init__(self, x_errors, z_errors):
    self.x_errors = x_errors
    self.z_errors = z_errors

  @property
  def x_changes(self):
    return round_differences(self.x_errors, axis=-3)

  @property
  def z_changes(self):
    return round_differences(self.z_errors, axis=-3)

  @property
  def final_frame(self):
    """(x, z) frames of the last, perfect round."""
    return self.x_errors[..., -1, :, :], self.z_errors[..., -1, :, :]

  def __len__(self):
    return len(self.x_errors)

  def __getitem__(self, item):
    return ErrorVolume(self.x_errors[item], self.z_errors[item])


class SyndromeVolume(object):
  """Stabilizer outcomes of every round.

  raw_x: (..., dm, num Z-type) outcomes, the syndrome of X errors.
  raw_z: (..., dm, num X-type) outcomes, the syndrome of Z errors.
  """

  def __init__(self, raw_x, raw_z):
    self.raw_x = raw_x
    self.raw_z = raw_z

  @property
  def diff_x(self):
    return round_differences(self.raw_x, axis=-2)

  @property
  def diff_z(self):
    return round_differences(self.raw_z, axis=-2)

  def __len__(self):
    return len(self.raw_x)

  def __getitem__(self, item):
    return SyndromeVolume(self.raw_x[item], self.raw_z[item])


def round_differences(values, axis):
  """XOR of consecutive rounds; the first round is kept as is."""
  values = np.asarray(values, dtype=np.uint8)
  out = values.copy()
  later = [slice(None)] * values.ndim
  earlier = [slice(None)] * values.ndim
  later[axis] = slice(1, None)
  earlier[axis] = slice(None, -1)
  out[tuple(later)] ^= values[tuple(earlier)]
  return out


def _apply_single(frame_x, frame_z, qubits, codes):
  frame_x[:, qubits] ^= (codes & 1).astype(bool)
  frame_z[:, qubits] ^= (codes & 2).astype(bool)


def propagate(circuit, dm, source, shots):
  """Runs dm rounds of the circuit over a batch of Pauli frames.

  Args:
    circuit: ExtractionCircuit.
    dm: number of rounds, >= 1; round dm is perfect.
    source: RandomFaults or FixedFaults.
    shots: batch size.

  Returns:
    (ErrorVolume, SyndromeVolume) with a leading shot axis.
  """
  if dm < 1:
    raise ValueError('dm must be >= 1, got %r' % dm)
  layout = circuit.layout
  frame_x = np.zeros((shots, circuit.num_qubits), dtype=bool)
  frame_z = np.zeros((shots, circuit.num_qubits), dtype=bool)
  x_errors = np.zeros((shots, dm, layout.dx, layout.dz), dtype=np.uint8)
  z_errors = np.zeros_like(x_errors)
  raw_x = np.zeros((shots, dm, circuit.num_z), dtype=np.uint8)
  raw_z = np.zeros((shots, dm, circuit.num_x), dtype=np.uint8)
  x_readout = frame_x if circuit.hadamard else frame_z
  for k in range(dm):
    for tick in circuit.ticks:
      if tick.action == 'meas':
        outcomes = np.concatenate(
            [frame_x[:, circuit.z_ancillas], x_readout[:, circuit.x_ancillas]],
            axis=1).astype(np.uint8)
        flips = source.draw(k, dm, tick.groups[0], shots)
        if flips is not None:
          outcomes ^= flips
        raw_x[:, k] = outcomes[:, :circuit.num_z]
        raw_z[:, k] = outcomes[:, circuit.num_z:]
        x_errors[:, k] = frame_x[:, :circuit.num_data].reshape(
            shots, layout.dx, layout.dz)
        z_errors[:, k] = frame_z[:, :circuit.num_data].reshape(
            shots, layout.dx, layout.dz)
        continue
      if tick.action == 'prep':
        frame_x[:, tick.targets] = False
        frame_z[:, tick.targets] = False
      elif tick.action == 'hadamard':
        swapped = frame_x[:, tick.targets].copy()
        frame_x[:, tick.targets] = frame_z[:, tick.targets]
        frame_z[:, tick.targets] = swapped
      else:
        control, target = tick.targets[:, 0], tick.targets[:, 1]
        frame_x[:, target] ^= frame_x[:, control]
        frame_z[:, control] ^= frame_z[:, target]
      for group in tick.groups:
        codes = source.draw(k, dm, group, shots)
        if codes is None:
          continue
        if group.kind == 'cnot':
          _apply_single(frame_x, frame_z, group.qubits[:, 0], codes & 3)
          _apply_single(frame_x, frame_z, group.qubits[:, 1], codes >> 2)
        elif group.kind == 'prep_x_flip':
          frame_x[:, group.qubits] ^= codes.astype(bool)
        elif group.kind == 'prep_z_flip':
          frame_z[:, group.qubits] ^= codes.astype(bool)
        else:
          _apply_single(frame_x, frame_z, group.qubits, codes)
  return ErrorVolume(x_errors, z_errors), SyndromeVolume(raw_x, raw_z)


def chunk_rng(master_seed, chunk_index):
  """Generator of one fixed-size shot chunk."""
  return np.random.default_rng(
      np.random.SeedSequence([int(master_seed), int(chunk_index)]))


def sample_batch(layout, dm, noise, shots, rng, hadamard=False, circuit=None):
  """Samples a batch of shots with a leading shot axis."""
  if circuit is None:
    circuit = ExtractionCircuit(layout, hadamard=hadamard)
  return propagate(circuit, dm, RandomFaults(noise, rng), shots)


def sample_shot(layout, dm, noise, seed, hadamard=False):
  """Samples one shot.

  Args:
    layout: CodeLayout.
    dm: number of syndrome rounds, >= 1.
    noise: NoiseParams.
    seed: integer seed; identical seeds give bit-identical volumes.
    hadamard: use the Hadamard-rotated X-ancilla circuit.

  Returns:
    (ErrorVolume, SyndromeVolume) of a single shot.
  """
  errors, syndromes = sample_batch(
      layout, dm, noise, 1, np.random.default_rng(seed), hadamard=hadamard)
  return errors[0], syndromes[0]


def circuit_locations(layout, dm, hadamard=False):
  """Every fault location of the noisy rounds 1..dm-1."""
  return ExtractionCircuit(layout, hadamard=hadamard).locations(dm)


def inject_fault_batch(circuit, dm, faults_per_shot):
  """Propagates one explicit fault list per shot."""
  source = FixedFaults(circuit, dm, faults_per_shot)
  return propagate(circuit, dm, source, len(faults_per_shot))


def inject_faults(layout, dm, faults, hadamard=False):
  """Propagates a fixed fault set through the circuit.

  Args:
    layout: CodeLayout.
    dm: number of rounds.
    faults: iterable of (Location, Pauli label). Labels are 'X', 'Y', 'Z' for
      idle and gate locations, two letters such as 'XI' for CNOTs (control
      first), and 'flip' for preparations and measurements.
    hadamard: use the Hadamard-rotated X-ancilla circuit.

  Returns:
    (ErrorVolume, SyndromeVolume) of a single shot.

  Raises:
    UnknownLocationError: for a location outside the noisy rounds' circuit.
  """
  circuit = ExtractionCircuit(layout, hadamard=hadamard)
  errors, syndromes = inject_fault_batch(circuit, dm, [list(faults)])
  return errors[0], syndromes[0]


def logical_failure(layout, residual, correction=None):
  """Judges the residual error of the final perfect round.

  Args:
    layout: CodeLayout.
    residual: (x_frame, z_frame), binary (..., dx, dz) arrays.
    correction: optional (x_flips, z_flips) of the same shapes.

  Returns:
    (x_fail, z_fail); booleans, or boolean arrays for batched input.
  """
  res_x, res_z = (np.asarray(a, dtype=np.uint8) for a in residual)
  if correction is not None:
    res_x = res_x ^ np.asarray(correction[0], dtype=np.uint8)
    res_z = res_z ^ np.asarray(correction[1], dtype=np.uint8)
  # X errors anticommute with the horizontal Z representative.
  x_fail = (res_x * layout.logical_mask('Z')).sum(axis=(-2, -1)) % 2 == 1
  z_fail = (res_z * layout.logical_mask('X')).sum(axis=(-2, -1)) % 2 == 1
  if np.ndim(x_fail) == 0:
    return bool(x_fail), bool(z_fail)
  return x_fail, z_fail
