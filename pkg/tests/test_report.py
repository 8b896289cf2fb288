import math
import xml.etree.ElementTree as ET

import pytest

from rfnoise.metrics import MetricCurve
from rfnoise.report import _nice_ticks, curve_svg, line_plot


def test_deterministic_and_parseable():
    s = [("a", [0, 1, 2], [1.0, 3.0, 2.0]), ("b", [0, 1, 2], [0.5, math.nan, 2.5])]
    svg = line_plot(s, "t & <x>", "x", "y")
    assert svg == line_plot(s, "t & <x>", "x", "y")
    root = ET.fromstring(svg)
    polylines = [e for e in root.iter() if e.tag.endswith("polyline")]
    assert len(polylines) == 3  # the NaN splits series b


@pytest.mark.parametrize("lo, hi", [(0.0, 1.0), (-3.2, 17.9), (1e-9, 3e-9)])
def test_ticks_inside_range(lo, hi):
    ticks = _nice_ticks(lo, hi)
    assert 2 <= len(ticks) <= 12
    assert all(lo - 1e-12 <= t <= hi + 1e-12 for t in ticks)


def test_degenerate_inputs():
    assert line_plot([], "empty", "x", "y").startswith("<svg")
    assert "<polyline" in line_plot([("c", [1, 1], [2, 2])], "flat", "x", "y")


def test_curve_svg_adds_analytic(tmp_path):
    c = MetricCurve("gain_vs_freq", [1.0, 2.0], [20.0, 19.0], [20.1, 19.2], [20.0, 19.1])
    curve_svg(tmp_path / "c.svg", c, "gain", "f", "dB")
    assert ">analytic<" in (tmp_path / "c.svg").read_text()
