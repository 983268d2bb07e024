import numpy as np
import pytest

from decodetools import code_geometry
from decodetools import noise_sampler
from decodetools import syndrome_codec


@pytest.mark.parametrize('dx,dz', [(3, 3), (5, 5), (7, 7), (3, 5), (5, 3)])
@pytest.mark.parametrize('basis', ['X', 'Z'])
def test_cells_are_injective(dx, dz, basis):
    layout = code_geometry.build_layout(dx, dz)
    cells = syndrome_codec.syndrome_cells(layout, basis)
    assert len(set(cells.tolist())) == (dx * dz - 1) // 2


def test_matrix_inverts(d5, rng):
    outcomes = (rng.random((7, 12)) < 0.5).astype(np.uint8)
    for basis in ('X', 'Z'):
        matrix = syndrome_codec.encode_syndrome_matrix(d5, outcomes, basis)
        assert matrix.shape == (7, 5, 5)
        assert matrix.sum() == outcomes.sum()
        back = syndrome_codec.decode_syndrome_matrix(d5, matrix, basis)
        assert np.array_equal(back, outcomes)


def test_outcome_length_mismatch(d3):
    with pytest.raises(syndrome_codec.EncodingError):
        syndrome_codec.encode_syndrome_matrix(d3, np.zeros(5), 'X')


def test_enc_channels(d3):
    enc_x, enc_z = syndrome_codec.build_enc_channels(d3)
    assert enc_x.sum() == 4 and enc_z.sum() == 4
    # left-boundary Z check (1, 0) sits on its top-right qubit
    assert enc_x[0, 0] == 1
    # top-boundary X check (0, 2) sits on its bottom-left qubit
    assert enc_z[0, 1] == 1


def test_input_layout(d3, rng):
    errors, syndromes = noise_sampler.sample_batch(
        d3, 4, noise_sampler.NoiseParams(0.02), 6, rng)
    inputs = syndrome_codec.build_input(syndromes, d3)
    assert inputs.shape == (6, 3, 3, 4, 5)
    assert inputs.dtype == np.float32
    assert inputs[..., 4].tolist() == np.broadcast_to(
        [1, 0, 0, 1], (6, 3, 3, 4)).tolist()
    assert inputs[..., 0].sum() == syndromes.diff_x.sum()
    assert inputs[..., 1].sum() == syndromes.diff_z.sum()
    # syndromes only ever land on encoded cells
    assert not (inputs[..., 0] > inputs[..., 2]).any()


def test_single_shot_input(d3):
    _, syndromes = noise_sampler.sample_shot(
        d3, 3, noise_sampler.NoiseParams(0.05), seed=3)
    assert syndrome_codec.build_input(syndromes, d3).shape == (3, 3, 3, 5)


def test_target_is_canonical(d3, circuit3):
    errors, _ = noise_sampler.inject_faults(
        d3, 3, [(circuit3.data_location(1, (0, 2)), 'X')])
    target = syndrome_codec.build_target(errors, d3)
    assert target.shape == (3, 3, 3, 2)
    x_changes, z_changes = syndrome_codec.corrections_from_output(target)
    assert not z_changes.any()
    # the boundary single moves to its equivalent neighbour
    assert np.argwhere(x_changes).tolist() == [[0, 0, 1]]


def test_target_preserves_syndrome(d5, rng):
    errors, syndromes = noise_sampler.sample_batch(
        d5, 5, noise_sampler.NoiseParams(0.01), 30, rng)
    x_changes, z_changes = syndrome_codec.corrections_from_output(
        syndrome_codec.build_target(errors, d5))
    assert np.array_equal(d5.syndrome(x_changes, 'X'),
                          d5.syndrome(errors.x_changes, 'X'))
    assert np.array_equal(d5.syndrome(z_changes, 'Z'),
                          d5.syndrome(errors.z_changes, 'Z'))
