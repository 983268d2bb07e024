import numpy as np
import pytest

from decodetools import noise_sampler
from decodetools import sparsifier


def test_partition_sizes():
    assert sparsifier.sheet_partition(13, 6).sizes == (6, 6, 1)
    assert sparsifier.sheet_partition(12, 6).sizes == (6, 6)
    assert len(sparsifier.sheet_partition(5, 1)) == 5
    with pytest.raises(ValueError):
        sparsifier.sheet_partition(5, 0)


@pytest.mark.parametrize('sheet_size', [1, 3, 6, 20])
def test_collapse_telescopes(rng, sheet_size):
    raw = (rng.random((50, 13, 4)) < 0.3).astype(np.uint8)
    diff = noise_sampler.round_differences(raw, axis=-2)
    collapsed = sparsifier.syndrome_collapse(diff, sheet_size)
    partition = sparsifier.sheet_partition(13, sheet_size)
    assert collapsed.shape == (50, len(partition), 4)
    for s, (start, stop) in enumerate(partition.boundaries):
        before = raw[:, start - 1] if start else np.zeros_like(raw[:, 0])
        assert np.array_equal(collapsed[:, s], raw[:, stop - 1] ^ before)


def test_collapse_with_unit_sheets_is_identity(rng):
    diff = (rng.random((6, 4)) < 0.5).astype(np.uint8)
    assert np.array_equal(sparsifier.syndrome_collapse(diff, 1), diff)


def _no_adjacent_pairs(volume):
    return not (volume[..., :-1, :] & volume[..., 1:, :]).any()


@pytest.mark.parametrize('direction', ['up', 'down', 'auto'])
def test_cleanup_post_conditions(rng, direction):
    diff = (rng.random((40, 9, 4)) < 0.4).astype(np.uint8)
    clean = sparsifier.vertical_cleanup(diff, direction, rng)
    assert _no_adjacent_pairs(clean)
    assert not (clean > diff).any()
    assert np.array_equal(clean.sum(axis=-2) % 2, diff.sum(axis=-2) % 2)


def test_cleanup_sweep_order():
    column = np.array([1, 1, 1, 0], dtype=np.uint8)[:, None]
    assert sparsifier.vertical_cleanup(column, 'up')[:, 0].tolist() == [0, 0, 1, 0]
    assert sparsifier.vertical_cleanup(column, 'down')[:, 0].tolist() == [1, 0, 0, 0]


def test_cleanup_bad_direction():
    with pytest.raises(ValueError):
        sparsifier.vertical_cleanup(np.zeros((3, 2)), 'sideways')


def test_direction_rule():
    column = np.zeros(8, dtype=np.uint8)
    column[[5, 6]] = 1
    assert sparsifier.choose_cleanup_direction(column) == 'up'
    column[:] = 0
    column[0] = 1
    assert sparsifier.choose_cleanup_direction(column) == 'down'
    # the mid-point round is not counted
    column[:] = 0
    column[4] = 1
    seen = {sparsifier.choose_cleanup_direction(column, np.random.default_rng(s))
            for s in range(20)}
    assert seen == {'up', 'down'}


def test_batched_direction(rng):
    diff = np.zeros((2, 8, 3), dtype=np.uint8)
    diff[0, 7, 0] = 1
    diff[1, 1, 2] = 1
    up = sparsifier.choose_cleanup_direction(diff, rng)
    assert up.shape == (2, 3)
    assert up[0, 0] and not up[1, 2]


def test_min_rounds_for_timelike():
    assert sparsifier.min_rounds_for_timelike(2) == 4
    assert sparsifier.min_rounds_for_timelike(3) == 8
    with pytest.raises(ValueError):
        sparsifier.min_rounds_for_timelike(1)
