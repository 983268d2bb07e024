import numpy as np
import pytest

from decodetools import noise_sampler
from decodetools.noise_sampler import Location


def _within(count, trials, rate, sigmas):
    return abs(count - trials * rate) <= sigmas * np.sqrt(trials * rate * (1 - rate))


def test_noise_params():
    rates = noise_sampler.NoiseParams(0.03).rates()
    assert rates['cnot'] == pytest.approx(0.002)
    assert rates['meas'] == pytest.approx(0.02)
    with pytest.raises(ValueError):
        noise_sampler.NoiseParams(1.5)


@pytest.mark.parametrize('kind,outcomes,rate', [
    ('cnot', 15, 0.01 / 15),
    ('idle', 3, 0.01 / 3),
    ('gate1', 3, 0.01 / 3),
    ('meas', 1, 0.02 / 3),
    ('prep_x_flip', 1, 0.02 / 3),
])
def test_fault_rates(kind, outcomes, rate):
    source = noise_sampler.RandomFaults(
        noise_sampler.NoiseParams(0.01), np.random.default_rng(7))
    qubits = np.zeros((10, 2), dtype=np.int64) if kind == 'cnot' else np.arange(10)
    group = noise_sampler.NoiseGroup(kind, qubits)
    codes = source.draw(0, 3, group, 100000).ravel()
    trials = codes.size
    assert _within(np.sum(codes > 0), trials, rate * outcomes, 3)
    for code in range(1, outcomes + 1):
        assert _within(np.sum(codes == code), trials, rate, 4)


def test_last_round_draws_nothing():
    source = noise_sampler.RandomFaults(
        noise_sampler.NoiseParams(0.5), np.random.default_rng(0))
    group = noise_sampler.NoiseGroup('idle', np.arange(4))
    assert source.draw(2, 3, group, 10) is None


def test_sample_shot_is_deterministic(d3):
    noise = noise_sampler.NoiseParams(0.02)
    a_err, a_syn = noise_sampler.sample_shot(d3, 4, noise, seed=11)
    b_err, b_syn = noise_sampler.sample_shot(d3, 4, noise, seed=11)
    assert np.array_equal(a_err.x_errors, b_err.x_errors)
    assert np.array_equal(a_syn.raw_z, b_syn.raw_z)
    assert a_err.x_errors.shape == (4, 3, 3)
    assert a_syn.raw_x.shape == (4, 4)


def test_zero_noise(d5, rng):
    errors, syndromes = noise_sampler.sample_batch(
        d5, 5, noise_sampler.NoiseParams(0.0), 20, rng)
    assert not errors.x_errors.any() and not errors.z_errors.any()
    assert not syndromes.raw_x.any() and not syndromes.raw_z.any()


def test_final_round_is_consistent(d5, rng):
    errors, syndromes = noise_sampler.sample_batch(
        d5, 5, noise_sampler.NoiseParams(0.01), 200, rng)
    final_x, final_z = errors.final_frame
    assert np.array_equal(syndromes.raw_x[:, -1], d5.syndrome(final_x, 'X'))
    assert np.array_equal(syndromes.raw_z[:, -1], d5.syndrome(final_z, 'Z'))


def test_data_error_signature(d3, circuit3):
    location = circuit3.data_location(1, (1, 1))
    errors, syndromes = noise_sampler.inject_faults(d3, 3, [(location, 'X')])
    assert errors.x_errors[:, 1, 1].tolist() == [1, 1, 1]
    assert syndromes.diff_x.sum(axis=1).tolist() == [2, 0, 0]
    assert not syndromes.raw_z.any()


def test_measurement_error_is_a_vertical_pair(d3, circuit3):
    location = circuit3.measurement_location(2, 'Z', 1)
    errors, syndromes = noise_sampler.inject_faults(d3, 4, [(location, 'flip')])
    assert not errors.x_errors.any()
    assert np.argwhere(syndromes.diff_x).tolist() == [[1, 1], [2, 1]]


def test_cnot_fault_signature(d5):
    circuit = noise_sampler.ExtractionCircuit(d5)
    late = d5.stabilizer_at('Z', (2, 3))
    early = d5.stabilizer_at('Z', (1, 2))
    location = circuit.cnot_location(2, 'Z', late.index, 1)
    errors, syndromes = noise_sampler.inject_faults(d5, 4, [(location, 'XI')])
    assert syndromes.raw_x.sum(axis=1).tolist() == [0, 1, 2, 2]
    assert syndromes.raw_x[1, early.index] == 1
    highlights = np.argwhere(syndromes.diff_x).tolist()
    assert highlights == [[1, early.index], [2, late.index]]
    assert errors.x_errors[-1, 1, 2] == 1


def test_unknown_locations(d3, circuit3):
    with pytest.raises(noise_sampler.UnknownLocationError):
        noise_sampler.inject_faults(d3, 3, [(Location(1, 'cnot1', (0, 1)), 'XI')])
    with pytest.raises(noise_sampler.UnknownLocationError):
        noise_sampler.inject_faults(
            d3, 3, [(circuit3.data_location(3, (0, 0)), 'X')])
    with pytest.raises(noise_sampler.UnknownLocationError):
        noise_sampler.inject_faults(
            d3, 3, [(circuit3.measurement_location(1, 'X', 0), 'X')])
    with pytest.raises(noise_sampler.UnknownLocationError):
        circuit3.cnot_location(1, 'X', 0, 1)


def test_circuit_locations(d3):
    locations = noise_sampler.circuit_locations(d3, 2)
    assert len(locations) == 69
    assert len(noise_sampler.circuit_locations(d3, 3)) == 138
    assert {loc.round for loc in locations} == {1}
    hadamard = noise_sampler.circuit_locations(d3, 2, hadamard=True)
    assert len(hadamard) == 69 + 2 * 17


def test_hadamard_circuit_reads_the_same_syndrome(d3):
    circuit = noise_sampler.ExtractionCircuit(d3, hadamard=True)
    faults = [(circuit.data_location(1, (1, 2)), 'Z'),
              (circuit.data_location(2, (0, 0)), 'X')]
    plain = noise_sampler.inject_faults(d3, 3, faults)
    rotated = noise_sampler.inject_faults(d3, 3, faults, hadamard=True)
    assert np.array_equal(plain[1].raw_z, rotated[1].raw_z)
    assert np.array_equal(plain[1].raw_x, rotated[1].raw_x)


def test_chunk_seeding():
    a = noise_sampler.chunk_rng(5, 3).random(4)
    b = noise_sampler.chunk_rng(5, 3).random(4)
    c = noise_sampler.chunk_rng(5, 4).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_logical_failure(d3):
    column = d3.logical_mask('X')
    assert noise_sampler.logical_failure(d3, (column, np.zeros_like(column))) == (True, False)
    assert noise_sampler.logical_failure(
        d3, (column, np.zeros_like(column)), (column, np.zeros_like(column))) == (False, False)
    stacked = np.stack([column, np.zeros_like(column)])
    x_fail, z_fail = noise_sampler.logical_failure(d3, (stacked, stacked))
    assert x_fail.tolist() == [True, False]
    assert z_fail.tolist() == [True, False]
