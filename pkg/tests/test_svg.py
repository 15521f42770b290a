import xml.etree.ElementTree as ET

from graphon_nn.svg import Series, line_chart, write_chart

NS = "{http://www.w3.org/2000/svg}"


def parse(text):
    root = ET.fromstring(text)
    assert root.tag == NS + "svg"
    return root


def test_valid_document_with_series_and_legend():
    s = [Series("a", [1, 2, 3], [1.0, 4.0, 9.0], yerr=[0.1, 0.2, 0.3]),
         Series("b", [1, 2, 3], [2.0, 3.0, 4.0], dashed=True)]
    root = parse(line_chart(s, title="t", xlabel="n", ylabel="err"))
    lines = root.findall(NS + "polyline")
    assert len(lines) == 2
    assert lines[1].get("stroke-dasharray") == "6 4"
    assert len(root.findall(NS + "circle")) == 6
    texts = {t.text for t in root.iter(NS + "text")}
    assert {"t", "n", "err", "a", "b"} <= texts


def test_log_axes_drop_nonpositive_points():
    s = [Series("e", [0, 10, 100, 1000], [1e-3, 0.0, 1e-2, 1e-1])]
    root = parse(line_chart(s, logx=True, logy=True))
    pts = root.find(NS + "polyline").get("points").split()
    assert len(pts) == 2


def test_empty_and_degenerate_series():
    parse(line_chart([]))
    parse(line_chart([Series("flat", [5, 5], [2.0, 2.0])]))
    parse(line_chart([Series("none", [1], [float("nan")])], logy=True))


def test_labels_are_escaped(tmp_path):
    p = tmp_path / "c.svg"
    write_chart(p, [Series("a<b & c", [1, 2], [1, 2])], title="x > y")
    root = parse(p.read_text())
    texts = {t.text for t in root.iter(NS + "text")}
    assert "a<b & c" in texts and "x > y" in texts
