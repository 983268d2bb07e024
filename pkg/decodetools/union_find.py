"""Union-Find decoding on a DecodingGraph.

Odd clusters grow by half an edge per step until every cluster is even or
touches the boundary; a spanning forest of each cluster, rooted at a
boundary vertex when it has one, is then peeled from the leaves.
"""
import collections
import logging

_LOG = logging.getLogger(__name__)


class _Clusters(object):

  def __init__(self, nodes, is_boundary):
    self.parent = list(range(len(nodes)))
    self.size = [1] * len(nodes)
    self.parity = [0] * len(nodes)
    self.boundary = [bool(is_boundary(n)) for n in nodes]
    self.members = [[i] for i in range(len(nodes))]

  def find(self, i):
    root = i
    while self.parent[root] != root:
      root = self.parent[root]
    while self.parent[i] != root:
      self.parent[i], i = root, self.parent[i]
    return root

  def union(self, a, b):
    a, b = self.find(a), self.find(b)
    if a == b:
      return a
    if self.size[a] < self.size[b]:
      a, b = b, a
    self.parent[b] = a
    self.size[a] += self.size[b]
    self.parity[a] ^= self.parity[b]
    self.boundary[a] = self.boundary[a] or self.boundary[b]
    self.members[a].extend(self.members[b])
    self.members[b] = []
    return a

  def active(self, root):
    return self.parity[root] and not self.boundary[root]


def _key(a, b):
  return (a, b) if a < b else (b, a)


def uf_decode(graph, highlights):
  """Union-Find correction for a set of highlighted vertices.

  Args:
    graph: DecodingGraph.
    highlights: highlighted (non-boundary) vertices.

  Returns:
    list of (u, v) graph edges whose syndrome is the highlight set.
  """
  nodes = list(graph.graph.nodes)
  index = {node: i for i, node in enumerate(nodes)}
  neighbors = [[index[m] for m in graph.graph[node]] for node in nodes]
  weight = {}
  for u, v, w in graph.graph.edges(data='weight'):
    weight[_key(index[u], index[v])] = w

  clusters = _Clusters(nodes, graph.is_boundary)
  grown = set()
  for key, w in weight.items():
    if w == 0:
      grown.add(key)
      clusters.union(*key)

  marked = set(index[h] for h in highlights)
  for i in marked:
    clusters.parity[clusters.find(i)] ^= 1

  support = collections.defaultdict(int)
  cap = 2 * len(weight) + 2
  for step in range(cap):
    roots = sorted({clusters.find(i) for i in marked})
    roots = [r for r in roots if clusters.active(r)]
    if not roots:
      break
    fused = []
    for root in roots:
      for v in clusters.members[root]:
        for u in neighbors[v]:
          key = _key(u, v)
          if key in grown:
            continue
          support[key] += 1
          if support[key] >= 2 * weight[key]:
            grown.add(key)
            fused.append(key)
    for key in fused:
      clusters.union(*key)
  else:
    raise RuntimeError('union-find growth did not terminate in %d steps'
                       % cap)
  _LOG.debug('union-find grew %d edges in %d steps', len(grown), step)

  forest = collections.defaultdict(list)
  for a, b in grown:
    forest[a].append(b)
    forest[b].append(a)

  corrections = []
  seen = set()
  for root in sorted({clusters.find(i) for i in marked}):
    members = clusters.members[root]
    starts = [m for m in members if graph.is_boundary(nodes[m])]
    start = min(starts) if starts else min(m for m in members if m in marked)
    if start in seen:
      continue
    order, parent = [start], {start: None}
    seen.add(start)
    queue = collections.deque([start])
    while queue:
      v = queue.popleft()
      for u in sorted(forest[v]):
        if u not in parent:
          parent[u] = v
          order.append(u)
          seen.add(u)
          queue.append(u)
    odd = {v: v in marked for v in order}
    for v in reversed(order[1:]):
      if odd[v]:
        p = parent[v]
        odd[v] = False
        odd[p] = not odd[p]
        if weight[_key(p, v)] > 0:
          corrections.append((nodes[p], nodes[v]))
  return corrections
