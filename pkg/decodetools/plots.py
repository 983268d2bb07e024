"""SVG line charts rendered from a jinja2 template."""
import logging
import math
import os

from jinja2 import Environment
from jinja2 import FileSystemLoader

from decodetools import persist

_LOG = logging.getLogger(__name__)

TEMPLATE_DIR = persist.pjoin(
    os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
    'decodelab', 'resources')
TEMPLATE_NAME = 'lineplot.svg'
WIDTH, HEIGHT = 640, 420
MARGIN = {'left': 80, 'right': 150, 'top': 40, 'bottom': 60}
COLORS = ('#1f77b4', '#ff7f0e', '#2ca02c', '#d62728', '#9467bd', '#8c564b',
          '#e377c2', '#7f7f7f')


class _Axis(object):

  def __init__(self, values, log, start, stop):
    values = [v for v in values if v is not None and (v > 0 or not log)]
    if not values:
      values = [1.0]
    self.log = log
    lo, hi = min(values), max(values)
    if log:
      lo, hi = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    if hi == lo:
      hi = lo + 1
    self.lo, self.hi = lo, hi
    self.start, self.stop = start, stop

  def __call__(self, value):
    if self.log:
      value = math.log10(value)
    return self.start + (value - self.lo) / (self.hi - self.lo) * (
        self.stop - self.start)

  def ticks(self):
    if self.log:
      return [(self(10.0 ** e), '1e%d' % e)
              for e in range(int(self.lo), int(self.hi) + 1)]
    step = (self.hi - self.lo) / 5.0
    return [(self(self.lo + i * step), '%.3g' % (self.lo + i * step))
            for i in range(6)]


def line_chart(series, title, xlabel, ylabel, log_x=False, log_y=False):
  """Lays out a chart.

  Args:
    series: list of (label, [(x, y), ...]); points with y None or, on a log
      axis, y <= 0 are skipped.
    title, xlabel, ylabel: text.
    log_x, log_y: logarithmic axes.

  Returns:
    template context dict.
  """
  def _usable(x, y):
    return y is not None and not (log_y and y <= 0) and not (log_x and x <= 0)

  xs = [x for _, pts in series for x, y in pts if _usable(x, y)]
  ys = [y for _, pts in series for x, y in pts if _usable(x, y)]
  x_axis = _Axis(xs, log_x, MARGIN['left'], WIDTH - MARGIN['right'])
  y_axis = _Axis(ys, log_y, HEIGHT - MARGIN['bottom'], MARGIN['top'])
  lines = []
  for i, (label, points) in enumerate(series):
    pixels = [(x_axis(x), y_axis(y)) for x, y in points if _usable(x, y)]
    lines.append({
        'label': label,
        'color': COLORS[i % len(COLORS)],
        'points': pixels,
        'path': ' '.join('%.1f,%.1f' % p for p in pixels),
    })
  return {
      'width': WIDTH, 'height': HEIGHT, 'margin': MARGIN,
      'title': title, 'xlabel': xlabel, 'ylabel': ylabel,
      'xticks': x_axis.ticks(), 'yticks': y_axis.ticks(), 'lines': lines,
  }


def render_chart(chart, path=None, template_dir=TEMPLATE_DIR):
  """Renders a line_chart context; writes it to path when given."""
  env = Environment(loader=FileSystemLoader(template_dir), autoescape=True)
  svg = env.get_template(TEMPLATE_NAME).render(chart)
  if path:
    persist.MakeDirectoryIfNotExist(os.path.dirname(path))
    with open(path, 'w') as f:
      f.write(svg)
    _LOG.info('wrote chart to %s', path)
  return svg


def error_rate_chart(results):
  """Logical X error rate against p, one series per code volume."""
  series = []
  for result in results:
    s = result.settings
    series.append(('d=(%d,%d,%d)' % (s['dx'], s['dz'], s['dm']),
                   [(pt.p, pt.x_rate) for pt in result.points]))
  return line_chart(series, 'Logical error rate (%s)' % results[0].pipeline,
                    'physical error rate p', 'logical X error rate',
                    log_x=True, log_y=True)


def buffer_chart(curves):
  """Buffer time against j; curves is [(label, [(j, seconds or None)])]."""
  series = [(label, [(j, t * 1e6 if t is not None else None)
                     for j, t in points]) for label, points in curves]
  return line_chart(series, 'Buffer time', 'j', 'buffer time (us)',
                    log_y=True)


def distance_chart(curves):
  """Distance against dm; curves is [(label, [(dm, d)])]."""
  return line_chart(curves, 'Distance for a target logical rate',
                    'syndrome rounds dm', 'distance d', log_x=True)
