"""Decoder buffer times and the distance needed for a given memory depth.

Times are in seconds. The decoder takes T_DEC(r) to decode r rounds,
linear c*r unless a polynomial is configured. A lattice-surgery step that
waits on the decoder accumulates rounds while it waits, so the wait for
the j-th step is

  T_1 = T_DEC(r1 + r2) + T_l
  T_j = T_DEC(n_{j-1}) + T_l,   n_{j-1} = ceil(T_{j-1} / T_s)

which stays linear in j when c <= T_s and grows geometrically otherwise.
"""
import collections
import math

import numpy as np
from traitlets import Float, Integer, List, TraitError, validate
from traitlets.config import Configurable


class BufferDivergenceError(RuntimeError):
  pass


class WindowPlanError(ValueError):
  pass


class SuperthresholdError(ValueError):
  pass


class LatencyConfig(Configurable):
  """Timing parameters of a decoder feeding lattice surgery."""

  t_s = Float(1.4e-6, config=True,
              help='Seconds per syndrome measurement round.')
  t_l = Float(20e-6, config=True,
              help='Inbound latency in seconds between the device and the decoder.')
  c = Float(1e-6, config=True,
            help='Decode seconds per round of the linear decode-time model.')
  r1 = Integer(17, config=True,
               help='Rounds accumulated for the first buffer.')
  r2 = Integer(16, config=True,
               help='Rounds of the lattice-surgery measurement.')
  decode_poly = List(Float(), [], config=True,
                     help='Decode-time polynomial in rounds, highest power '
                          'first. Replaces c*r when set.')
  max_buffer = Float(1.0, config=True,
                     help='Buffer time in seconds treated as divergence.')

  @validate('t_s', 't_l', 'c', 'max_buffer')
  def _positive_time(self, proposal):
    if proposal['value'] <= 0:
      raise TraitError('%s must be positive, got %r'
                       % (proposal['trait'].name, proposal['value']))
    return proposal['value']

  @validate('r1', 'r2')
  def _positive_rounds(self, proposal):
    if proposal['value'] < 1:
      raise TraitError('%s must be >= 1, got %r'
                       % (proposal['trait'].name, proposal['value']))
    return proposal['value']

  @property
  def rounds(self):
    return self.r1 + self.r2


def decode_time(cfg, rounds):
  """T_DEC(rounds): c*rounds, or the configured polynomial."""
  if cfg.decode_poly:
    return float(np.polyval(cfg.decode_poly, rounds))
  return cfg.c * rounds


def _next_rounds(cfg, seconds, exact):
  if not exact:
    return seconds / cfg.t_s
  # Absorb float noise when seconds is an exact multiple of t_s.
  return math.ceil(seconds / cfg.t_s - 1e-9)


def buffer_time_recursive(cfg, j, exact=True):
  """Buffer time of the j-th step by iterating the wait recursion.

  Args:
    cfg: LatencyConfig.
    j: step index, >= 1.
    exact: round waiting time up to whole syndrome rounds; False gives the
      continuous relaxation the closed form solves.

  Returns:
    seconds.

  Raises:
    BufferDivergenceError: if the buffer exceeds cfg.max_buffer.
  """
  if j < 1:
    raise ValueError('j must be >= 1, got %r' % (j,))
  seconds = decode_time(cfg, cfg.rounds) + cfg.t_l
  for step in range(2, j + 1):
    if not math.isfinite(seconds) or seconds > cfg.max_buffer:
      break
    seconds = decode_time(cfg, _next_rounds(cfg, seconds, exact)) + cfg.t_l
  if not math.isfinite(seconds) or seconds > cfg.max_buffer:
    raise BufferDivergenceError(
        'buffer time exceeds %g s by step %d' % (cfg.max_buffer, j))
  return seconds


def buffer_time_closed_form(cfg, j):
  """Solves the continuous recursion for the linear decode-time model.

  With a = c / T_s and r = r1 + r2:

    T_j = a^(j-1) c r + T_l (a^j - 1) / (a - 1),

  and T_j = c r + j T_l at a = 1.
  """
  if j < 1:
    raise ValueError('j must be >= 1, got %r' % (j,))
  if cfg.decode_poly:
    raise ValueError('the closed form needs the linear decode-time model')
  a = cfg.c / cfg.t_s
  head = a ** (j - 1) * cfg.c * cfg.rounds
  if abs(a - 1.0) < 1e-9:
    geometric = j + j * (j - 1) / 2.0 * (a - 1.0)
  else:
    geometric = (a ** j - 1.0) / (a - 1.0)
  return head + cfg.t_l * geometric


def buffer_time_series(cfg, j_max, exact=True):
  """[(j, seconds or None once diverged)] for j = 1..j_max."""
  series = []
  for j in range(1, j_max + 1):
    try:
      series.append((j, buffer_time_recursive(cfg, j, exact)))
    except BufferDivergenceError:
      series.append((j, None))
  return series


class WindowPlan(collections.namedtuple('WindowPlan', ['sizes'])):
  """Consecutive decoding windows of r_1..r_nw rounds."""

  @property
  def total(self):
    return sum(self.sizes)

  def regimes(self, cfg):
    """'fast' where r_i T_s exceeds the previous window's decode time."""
    result = ['fast' if i and self.sizes[i] * cfg.t_s >
              decode_time(cfg, self.sizes[i - 1]) else 'slow'
              for i in range(len(self.sizes))]
    return result


def sliding_window_buffer(cfg, windows):
  """Buffer time when the rounds are decoded in consecutive windows.

  The first window costs T_l + T_DEC(r_1). A later window in the slow
  regime starts as soon as its predecessor's decode ends and adds
  T_DEC(r_i). In the fast regime the pending decode finishes inside the
  window's own r_i T_s of measurement, so the buffer advances by r_i T_s
  in place of that decode; after a slow window this is the idle gap
  r_i T_s - T_DEC(r_{i-1}). With every later window fast the total is
  T_l + sum_{i>=2} r_i T_s.

  Args:
    cfg: LatencyConfig; r1 + r2 is the total number of rounds.
    windows: WindowPlan or a sequence of window sizes.

  Raises:
    WindowPlanError: if the sizes are not positive or do not sum to r1 + r2.
  """
  if not isinstance(windows, WindowPlan):
    windows = WindowPlan(tuple(int(r) for r in windows))
  if not windows.sizes or min(windows.sizes) < 1:
    raise WindowPlanError('window sizes must be positive: %r'
                          % (windows.sizes,))
  if windows.total != cfg.rounds:
    raise WindowPlanError('windows cover %d rounds, expected %d'
                          % (windows.total, cfg.rounds))
  sizes = windows.sizes
  pending = decode_time(cfg, sizes[0])
  seconds = cfg.t_l + pending
  for size, regime in zip(sizes[1:], windows.regimes(cfg)[1:]):
    if regime == 'fast':
      seconds += size * cfg.t_s - pending
      pending = 0.0
    else:
      pending = decode_time(cfg, size)
      seconds += pending
  return seconds


def lambert_w(x, branch=0, tol=1e-12, max_iter=100):
  """Real Lambert W on branch 0 or -1 by Halley iteration.

  Args:
    x: argument; >= -1/e on branch 0, in [-1/e, 0) on branch -1.
    branch: 0 or -1.

  Returns:
    w with w * exp(w) == x.
  """
  x = float(x)
  branch_point = -1.0 / math.e
  if branch not in (0, -1):
    raise ValueError('branch must be 0 or -1, got %r' % (branch,))
  if x < branch_point - 1e-15 or (branch == -1 and x >= 0):
    raise ValueError('x=%r outside the domain of branch %d' % (x, branch))
  if x <= branch_point:
    return -1.0
  if branch == 0 and x == 0:
    return 0.0

  near = math.sqrt(2.0 * (math.e * x + 1.0))
  if near < 0.5:
    sign = 1.0 if branch == 0 else -1.0
    q = sign * near
    w = -1.0 + q - q * q / 3.0 + 11.0 / 72.0 * q ** 3
  elif branch == 0:
    w = math.log1p(x) if x < 3 else math.log(x) - math.log(math.log(x))
  else:
    l1 = math.log(-x)
    l2 = math.log(-l1)
    w = l1 - l2 + l2 / l1

  for _ in range(max_iter):
    ew = math.exp(w)
    f = w * ew - x
    step = f / (ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0))
    w -= step
    if abs(step) <= tol * (1.0 + abs(w)):
      return w
  raise RuntimeError('lambert_w did not converge for x=%r' % (x,))


class RatePolynomial(collections.namedtuple(
    'RatePolynomial', ['u', 'b', 'c', 'k'])):
  """p_L(d, dm, p) = u * d * dm * (b p)^(c d + k)."""

  def __new__(cls, u, b, c=0.5, k=-0.5):
    return super(RatePolynomial, cls).__new__(cls, u, b, c, k)


def logical_rate_polynomial(d, dm, p, poly):
  poly = RatePolynomial(*poly)
  return poly.u * d * dm * (poly.b * p) ** (poly.c * d + poly.k)


def _check(p, delta, poly):
  poly = RatePolynomial(*poly)
  if not 0 < delta < 1:
    raise ValueError('delta must lie in (0, 1), got %r' % (delta,))
  if poly.b * p >= 1:
    raise SuperthresholdError('b*p = %g is not below threshold' % (poly.b * p))
  return poly


def _odd_ceiling(d):
  n = max(1, int(math.ceil(d - 1e-9)))
  return n if n % 2 else n + 1


def distance_for_dm(dm, p, delta, poly):
  """Smallest odd distance with p_L below delta for dm rounds.

  Solves u d dm (b p)^(c d + k) = delta on the decreasing side of the rate
  curve with the -1 branch of Lambert W: with L = log(b p),
  d = W(x) / (c L) for x = c L (b p)^(-k) delta / (u dm).

  Args:
    dm: number of syndrome rounds.
    p: physical error rate.
    delta: target logical error rate in (0, 1).
    poly: RatePolynomial or (u, b[, c, k]).

  Raises:
    SuperthresholdError: if b p >= 1.
  """
  poly = _check(p, delta, poly)
  scale = poly.c * math.log(poly.b * p)
  x = scale * (poly.b * p) ** (-poly.k) * delta / (poly.u * dm)
  if x < -1.0 / math.e:
    # delta exceeds the peak of the rate curve; every distance qualifies.
    return 1
  return _odd_ceiling(lambert_w(x, branch=-1) / scale)


def distance_by_bisection(dm, p, delta, poly, tol=1e-9):
  """distance_for_dm by bisection on the rate polynomial."""
  poly = _check(p, delta, poly)
  peak = -1.0 / (poly.c * math.log(poly.b * p))

  def excess(d):
    return logical_rate_polynomial(d, dm, p, poly) - delta

  lo = max(peak, 1e-12)
  if excess(lo) < 0:
    return 1
  hi = 2.0 * lo + 1.0
  while excess(hi) >= 0:
    hi *= 2.0
  while hi - lo > tol * hi:
    mid = 0.5 * (lo + hi)
    if excess(mid) >= 0:
      lo = mid
    else:
      hi = mid
  return _odd_ceiling(hi)


def distance_curve(dm_values, p, delta, poly):
  return [distance_for_dm(dm, p, delta, poly) for dm in dm_values]
