"""Decoding graphs and minimum-weight perfect matching.

Vertices are (stabilizer index, layer) pairs, where a layer is a round or,
for collapsed graphs, a sheet of rounds. Every layer also has a boundary
vertex ('B', layer); boundary vertices are chained by weight-0 edges.

Edges are derived by propagating every single-Pauli fault component of the
noisy rounds through the extraction circuit and reading off the highlighted
vertices it produces: one highlight gives a boundary edge, two a spatial,
vertical or diagonal edge. Each edge records the data qubits the fault
leaves flipped in the final frame; the first fault seen for an edge wins.
"""
import functools
import itertools
import json
import logging

import networkx as nx
import numpy as np

from decodetools import code_geometry
from decodetools import noise_sampler
from decodetools import sparsifier

_LOG = logging.getLogger(__name__)

BOUNDARY = 'B'


class DecodingGraph(object):
  """A networkx graph plus the bookkeeping needed to decode on it."""

  def __init__(self, layout, basis, layers, graph, sheet_size=None):
    self.layout = layout
    self.basis = basis
    self.layers = layers
    self.graph = graph
    self.sheet_size = sheet_size
    self.num_stabilizers = len(
        layout.stabilizers(code_geometry.stabilizer_kind_for(basis)))
    self._paths = {}

  def __repr__(self):
    return 'DecodingGraph(%s, layers=%d, nodes=%d, edges=%d%s)' % (
        self.basis, self.layers, self.graph.number_of_nodes(),
        self.graph.number_of_edges(),
        ', sheet=%d' % self.sheet_size if self.sheet_size else '')

  @property
  def collapsed(self):
    return self.sheet_size is not None

  @staticmethod
  def is_boundary(node):
    return node[0] == BOUNDARY

  def boundary_nodes(self):
    return [(BOUNDARY, k) for k in range(self.layers)]

  def edge_qubits(self, u, v):
    return self.graph.edges[u, v]['qubits']

  def edges_of_kind(self, kind):
    return [(u, v) for u, v, k in self.graph.edges(data='kind') if k == kind]

  def highlights(self, diff):
    """Highlighted vertices of a (layers, num_stabilizers) difference array."""
    layers, stabs = np.nonzero(np.asarray(diff))
    return [(int(s), int(k)) for k, s in zip(layers, stabs)]

  def shortest_paths(self, source):
    """Cached single-source Dijkstra (distances, paths)."""
    if source not in self._paths:
      self._paths[source] = nx.single_source_dijkstra(
          self.graph, source, weight='weight')
    return self._paths[source]

  def nearest_boundary(self, source):
    """(distance, path) to the closest boundary vertex, fewest hops first."""
    dist, paths = self.shortest_paths(source)
    best = None
    for node in self.boundary_nodes():
      if node not in dist:
        continue
      key = (dist[node], len(paths[node]))
      if best is None or key < best[0]:
        best = (key, paths[node])
    if best is None:
      return None, None
    return best[0][0], best[1]


def _edge_kind(u, v):
  if DecodingGraph.is_boundary(u) or DecodingGraph.is_boundary(v):
    return 'boundary'
  if u[1] == v[1]:
    return 'spatial'
  if u[0] == v[0]:
    return 'vertical'
  return 'diagonal'


def _empty_graph(num_stabilizers, layers):
  graph = nx.Graph()
  for k in range(layers):
    graph.add_nodes_from((s, k) for s in range(num_stabilizers))
  graph.add_nodes_from((BOUNDARY, k) for k in range(layers))
  for k in range(layers - 1):
    graph.add_edge((BOUNDARY, k), (BOUNDARY, k + 1), weight=0,
                   kind='boundary_link', qubits=frozenset())
  return graph


def _single_components(circuit, rounds):
  """One (Location, Pauli) per single-Pauli fault component."""
  components = []
  sim_rounds = max(rounds, 2)
  for round_number in range(1, sim_rounds):
    for tick in circuit.ticks:
      for group in tick.groups:
        if rounds == 1 and not (tick.name == 'prep' and group.kind == 'idle'):
          continue
        if group.kind == 'cnot':
          labels = ('XI', 'ZI', 'IX', 'IZ')
        elif group.kind in noise_sampler.FLIP_KINDS:
          labels = ('flip',)
        else:
          labels = ('X', 'Z')
        for qubits in group.qubits:
          location = noise_sampler.Location(
              round_number, tick.name,
              tuple(int(q) for q in np.atleast_1d(qubits)))
          components.extend((location, label) for label in labels)
  return components, sim_rounds


@functools.lru_cache(maxsize=16)
def build_graphs(layout, rounds, hadamard=False):
  """Builds the uncollapsed X and Z decoding graphs.

  Args:
    layout: CodeLayout.
    rounds: number of syndrome rounds, >= 1.
    hadamard: derive edges from the Hadamard-rotated circuit.

  Returns:
    (graph for X errors, graph for Z errors).
  """
  if rounds < 1:
    raise ValueError('rounds must be >= 1, got %r' % rounds)
  circuit = noise_sampler.ExtractionCircuit(layout, hadamard=hadamard)
  components, sim_rounds = _single_components(circuit, rounds)
  errors, syndromes = noise_sampler.inject_fault_batch(
      circuit, sim_rounds, [[c] for c in components])
  final_x, final_z = errors.final_frame
  result = []
  for basis, diff, final in (('X', syndromes.diff_x, final_x),
                             ('Z', syndromes.diff_z, final_z)):
    diff = diff[:, :rounds]
    num_stabs = diff.shape[-1]
    graph = _empty_graph(num_stabs, rounds)
    skipped = 0
    flat_final = final.reshape(len(final), -1)
    for shot in np.flatnonzero(diff.reshape(len(diff), -1).any(axis=1)):
      layers, stabs = np.nonzero(diff[shot])
      nodes = [(int(s), int(k)) for k, s in zip(layers, stabs)]
      if len(nodes) == 1:
        nodes.append((BOUNDARY, nodes[0][1]))
      elif len(nodes) > 2:
        skipped += 1
        _LOG.debug('skipping %s signature of %r with %d highlights',
                   basis, components[shot], len(nodes))
        continue
      u, v = nodes
      if graph.has_edge(u, v):
        continue
      graph.add_edge(u, v, weight=1, kind=_edge_kind(u, v),
                     qubits=frozenset(int(q) for q in
                                      np.flatnonzero(flat_final[shot])))
    decoding_graph = DecodingGraph(layout, basis, rounds, graph)
    _LOG.info('built %r (%d hyperedge signatures skipped)', decoding_graph,
              skipped)
    result.append(decoding_graph)
  return tuple(result)


def collapse_graph(graph, sheet_size):
  """Maps rounds onto sheets of sheet_size rounds.

  Within-sheet edges become spatial edges of the sheet, edges of one
  stabilizer across sheets become vertical inter-sheet edges, and
  diagonals across sheets and within-sheet self-loops are dropped.
  """
  partition = sparsifier.sheet_partition(graph.layers, sheet_size)
  sheet_of = np.repeat(np.arange(len(partition)), partition.sizes)
  collapsed = _empty_graph(graph.num_stabilizers, len(partition))

  def _sheet(node):
    return (node[0], int(sheet_of[node[1]]))

  for u, v, data in graph.graph.edges(data=True):
    if data['kind'] == 'boundary_link':
      continue
    a, b = _sheet(u), _sheet(v)
    if a == b or collapsed.has_edge(a, b):
      continue
    kind = _edge_kind(a, b)
    if kind == 'diagonal':
      continue
    collapsed.add_edge(a, b, weight=data['weight'], kind=kind,
                       qubits=data['qubits'])
  return DecodingGraph(graph.layout, graph.basis, len(partition), collapsed,
                       sheet_size=sheet_size)


def build_graph(layout, rounds, collapsed=False,
                sheet_size=sparsifier.DEFAULT_SHEET_SIZE, basis='X',
                hadamard=False):
  """Builds the decoding graph of one error basis.

  Args:
    layout: CodeLayout.
    rounds: syndrome rounds, >= 1.
    collapsed: collapse rounds into sheets of sheet_size.
    sheet_size: rounds per sheet when collapsed.
    basis: 'X' (Z-type stabilizer vertices) or 'Z'.
    hadamard: derive edges from the Hadamard-rotated circuit.

  Returns:
    DecodingGraph.
  """
  graph_x, graph_z = build_graphs(layout, rounds, hadamard)
  graph = graph_x if basis == 'X' else graph_z
  if collapsed:
    graph = collapse_graph(graph, sheet_size)
  return graph


class Matching(object):
  """Matched highlight pairs; a None partner means the boundary."""

  def __init__(self, pairs, weight):
    self.pairs = pairs
    self.weight = weight


def _syndrome_graph(graph, highlights):
  syndrome = nx.Graph()
  syndrome.add_nodes_from(range(len(highlights)))
  syndrome.add_nodes_from(('b', i) for i in range(len(highlights)))
  for i, j in itertools.combinations(range(len(highlights)), 2):
    dist, _ = graph.shortest_paths(highlights[i])
    if highlights[j] in dist:
      syndrome.add_edge(i, j, weight=dist[highlights[j]])
    syndrome.add_edge(('b', i), ('b', j), weight=0)
  for i, node in enumerate(highlights):
    distance, _ = graph.nearest_boundary(node)
    if distance is not None:
      syndrome.add_edge(i, ('b', i), weight=distance)
  return syndrome


def mwpm_match(graph, highlights):
  """Minimum-weight perfect matching of highlights and boundary copies.

  Returns:
    Matching with pairs (node, node) or (node, None) and the total weight.
  """
  highlights = sorted(highlights, key=lambda n: (n[1], n[0]))
  if not highlights:
    return Matching([], 0)
  syndrome = _syndrome_graph(graph, highlights)
  matched = nx.min_weight_matching(syndrome, weight='weight')
  pairs = []
  weight = 0
  for a, b in sorted(matched, key=lambda e: (str(e[0]), str(e[1]))):
    if isinstance(a, tuple) and isinstance(b, tuple):
      continue
    if isinstance(a, tuple):
      a, b = b, a
    weight += syndrome.edges[a, b]['weight']
    if isinstance(b, tuple):
      pairs.append((highlights[a], None))
    else:
      pairs.append((highlights[a], highlights[b]))
  return Matching(pairs, weight)


def mwpm_decode(graph, highlights):
  """Correction edges of a minimum-weight perfect matching.

  Args:
    graph: DecodingGraph.
    highlights: highlighted vertices.

  Returns:
    list of (u, v) graph edges along the matched paths.
  """
  edges = []
  for a, b in mwpm_match(graph, highlights).pairs:
    if b is None:
      _, path = graph.nearest_boundary(a)
    else:
      path = graph.shortest_paths(a)[1][b]
    edges.extend(e for e in zip(path[:-1], path[1:])
                 if graph.graph.edges[e]['weight'] > 0)
  return edges


def brute_force_matching_weight(distances, boundary):
  """Exhaustive minimum over perfect matchings with optional boundary pairing.

  Args:
    distances: (n, n) symmetric matrix of pair distances (inf if unreachable).
    boundary: (n,) distances to the boundary.
  """
  n = len(boundary)

  @functools.lru_cache(maxsize=None)
  def best(mask):
    if mask == 0:
      return 0.0
    i = (mask & -mask).bit_length() - 1
    rest = mask & ~(1 << i)
    result = boundary[i] + best(rest)
    for j in range(i + 1, n):
      if rest & (1 << j):
        result = min(result, distances[i][j] + best(rest & ~(1 << j)))
    return result

  return best((1 << n) - 1)


def correction_syndrome(graph, edges):
  """Non-boundary vertices touched an odd number of times by edges."""
  odd = set()
  for edge in edges:
    for node in edge:
      if not graph.is_boundary(node):
        odd ^= {node}
  return odd


def correction_flips(graph, edges):
  """Data-qubit flips (dx, dz) of a set of correction edges."""
  layout = graph.layout
  flips = np.zeros(layout.num_data, dtype=np.uint8)
  for u, v in edges:
    for q in graph.edge_qubits(u, v):
      flips[q] ^= 1
  return flips.reshape(layout.dx, layout.dz)


def apply_and_judge(layout, graphs, corrections, residual):
  """Applies X and Z correction edges to a residual frame and judges it.

  Args:
    layout: CodeLayout.
    graphs: (X graph, Z graph).
    corrections: (X correction edges, Z correction edges).
    residual: (x_frame, z_frame) of the final round.

  Returns:
    (x_fail, z_fail).
  """
  flips = (correction_flips(graphs[0], corrections[0]),
           correction_flips(graphs[1], corrections[1]))
  return noise_sampler.logical_failure(layout, residual, flips)


def export_graph(graph):
  """JSON adjacency of a decoding graph."""
  def _name(node):
    return [node[0], node[1]]

  return json.dumps({
      'basis': graph.basis,
      'layers': graph.layers,
      'sheet_size': graph.sheet_size,
      'nodes': [_name(n) for n in graph.graph.nodes],
      'edges': [{'u': _name(u), 'v': _name(v), 'weight': d['weight'],
                 'kind': d['kind'], 'qubits': sorted(d['qubits'])}
                for u, v, d in graph.graph.edges(data=True)],
  }, indent=2)
