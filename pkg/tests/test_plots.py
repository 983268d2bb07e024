from decodetools import latency_model
from decodetools import plots


def test_line_chart_skips_unusable_points():
    chart = plots.line_chart([('a', [(1, 1e-3), (2, 0.0), (3, None)])],
                             't', 'x', 'y', log_y=True)
    assert len(chart['lines'][0]['points']) == 1
    assert [label for _, label in chart['yticks']] == ['1e-3', '1e-2']


def test_render(tmp_path):
    curves = [('c=1', latency_model.buffer_time_series(
        latency_model.LatencyConfig(), 4))]
    path = str(tmp_path / 'out' / 'buffer.svg')
    svg = plots.render_chart(plots.buffer_chart(curves), path)
    assert svg.lstrip().startswith('<?xml')
    assert '<polyline' in svg and 'c=1' in svg
    with open(path) as f:
        assert f.read() == svg


def test_labels_are_escaped():
    svg = plots.render_chart(plots.distance_chart([('a<b', [(10, 3), (100, 5)])]))
    assert 'a&lt;b' in svg
