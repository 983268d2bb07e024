import json

import numpy as np
import pytest

from decodetools import code_geometry
from decodetools import homology_canon


@pytest.mark.parametrize('dx,dz', [(3, 3), (5, 5), (3, 5), (7, 7)])
def test_stabilizer_counts(dx, dz):
    layout = code_geometry.build_layout(dx, dz)
    assert len(layout.x_stabilizers) == (dx * dz - 1) // 2
    assert len(layout.z_stabilizers) == (dx * dz - 1) // 2
    weights = sorted(len(s.support) for s in layout.x_stabilizers)
    assert set(weights) == {2, 4}


def test_d3_anchors(d3):
    assert [s.anchor for s in d3.x_stabilizers] == [(0, 2), (1, 1), (2, 2), (3, 1)]
    assert [s.anchor for s in d3.z_stabilizers] == [(1, 0), (1, 2), (2, 1), (2, 3)]


@pytest.mark.parametrize('dx,dz', [(3, 3), (5, 5), (5, 3)])
def test_checks_commute(dx, dz):
    layout = code_geometry.build_layout(dx, dz)
    hx = layout.check_matrix('X').astype(int)
    hz = layout.check_matrix('Z').astype(int)
    assert not (hx @ hz.T % 2).any()


def test_logicals(d5):
    lx = d5.logical_mask('X').ravel().astype(int)
    lz = d5.logical_mask('Z').ravel().astype(int)
    assert not (d5.check_matrix('Z').astype(int) @ lx % 2).any()
    assert not (d5.check_matrix('X').astype(int) @ lz % 2).any()
    assert lx @ lz % 2 == 1
    assert not homology_canon.in_stabilizer_span(d5, d5.logical_mask('X'), 'X')
    assert not homology_canon.in_stabilizer_span(d5, d5.logical_mask('Z'), 'Z')


@pytest.mark.parametrize('dx,dz', [(3, 3), (5, 5), (7, 7), (3, 5)])
def test_schedule_has_no_conflicts(dx, dz):
    layout = code_geometry.build_layout(dx, dz)
    assert code_geometry.schedule_conflicts(layout) == []


def test_schedule_orders(d5):
    schedule = code_geometry.cnot_schedule(d5)
    x = d5.stabilizer_at('X', (2, 2))
    z = d5.stabilizer_at('Z', (2, 3))
    assert schedule[('X', x.index)] == ((1, 1), (1, 2), (2, 1), (2, 2))
    assert schedule[('Z', z.index)] == ((1, 2), (2, 2), (1, 3), (2, 3))


@pytest.mark.parametrize('dx,dz', [(4, 3), (3, 1), (2, 2), (3, 6)])
def test_bad_distances(dx, dz):
    with pytest.raises(code_geometry.LayoutError):
        code_geometry.build_layout(dx, dz)


def test_corner_syndromes(d3):
    error = np.zeros((3, 3), dtype=np.uint8)
    error[0, 0] = 1
    assert d3.syndrome(error, 'X').sum() == 1
    assert d3.syndrome(error, 'Z').sum() == 1
    centre = np.zeros((3, 3), dtype=np.uint8)
    centre[1, 1] = 1
    assert d3.syndrome(centre, 'X').tolist() == [0, 1, 1, 0]
    assert d3.syndrome(centre, 'Z').tolist() == [0, 1, 1, 0]
    assert d3.syndrome(np.stack([error, centre]), 'X').shape == (2, 4)


def test_stabilizer_at_unknown(d3):
    with pytest.raises(code_geometry.LayoutError):
        d3.stabilizer_at('X', (1, 2))


def test_basis_kind():
    assert code_geometry.stabilizer_kind_for('X') == 'Z'
    assert code_geometry.stabilizer_kind_for('Z') == 'X'
    with pytest.raises(code_geometry.LayoutError):
        code_geometry.stabilizer_kind_for('Y')


def test_layout_json(d3):
    data = json.loads(code_geometry.layout_to_json(d3))
    assert data['dx'] == 3 and len(data['data_qubits']) == 9
    assert len(data['x_stabilizers']) == 4
    assert data['logical_x'] == [[0, 0], [1, 0], [2, 0]]
