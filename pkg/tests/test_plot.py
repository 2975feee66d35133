import json
import xml.etree.ElementTree as ET
from importlib import resources

import numpy as np

from tonalvae.metrics import LatentPoint, camelot_order
from tonalvae.plot import key_colour, palette, render_scatter, svg_scatter

NS = "{http://www.w3.org/2000/svg}"


def single_point_clusters(mode="major"):
    return [LatentPoint("p", i, k, np.zeros(2), (float(np.cos(i)), float(np.sin(i))))
            for i, k in enumerate(camelot_order(mode))]


def test_palette_fixture():
    raw = json.loads(resources.files("tonalvae.data").joinpath("camelot_palette.json").read_text())
    assert sorted(map(int, raw)) == list(range(1, 13))
    assert len(set(raw.values())) == 12
    assert palette()[1] == raw["1"]


def test_twelve_single_point_clusters():
    root = ET.fromstring(svg_scatter(single_point_clusters()))
    dots = root.find(f"{NS}g[@id='points']").findall(f"{NS}circle")
    stars = root.find(f"{NS}g[@id='centroids']").findall(f"{NS}polygon")
    assert len(dots) == 12 and len(stars) == 12
    for dot, star in zip(dots, stars):
        assert dot.get("fill") == star.get("fill")


def test_colours_follow_camelot_number():
    for mode in ("major", "minor"):
        root = ET.fromstring(svg_scatter(single_point_clusters(mode)))
        fills = [c.get("fill") for c in root.find(f"{NS}g[@id='points']").findall(f"{NS}circle")]
        assert fills == [palette()[i] for i in range(1, 13)]
        assert fills == [key_colour(k) for k in camelot_order(mode)]


def test_legend_labels():
    root = ET.fromstring(svg_scatter(single_point_clusters()))
    labels = [t.text.split()[0] for t in root.find(f"{NS}g[@id='legend']").findall(f"{NS}text")]
    assert labels == [f"{i}B" for i in range(1, 13)]
    assert "11B" in labels


def test_empty_input_has_legend_only(tmp_path):
    path = tmp_path / "e.svg"
    render_scatter([], path)
    root = ET.parse(path).getroot()
    assert root.tag == f"{NS}svg" and root.get("version") == "1.1"
    assert not root.find(f"{NS}g[@id='points']").findall(f"{NS}circle")
    assert len(root.find(f"{NS}g[@id='legend']").findall(f"{NS}text")) == 12


def test_deterministic_and_escaped(tmp_path):
    pts = single_point_clusters()
    a = svg_scatter(pts, title="a <b> & c")
    assert a == svg_scatter(pts, title="a <b> & c")
    assert ET.fromstring(a).find(f"{NS}text").text == "a <b> & c"


def test_unprojected_points_rejected():
    import pytest

    with pytest.raises(ValueError):
        svg_scatter([LatentPoint("p", 0, camelot_order()[0], np.zeros(2))])
