import math

import numpy as np

from nvsqueeze.tables import ResultTable, read_table, render_table, write_table


def test_empty_table_has_header_and_metadata(tmp_path):
    t = ResultTable(columns=["a", "b"], metadata={"x": 1})
    text = render_table(t)
    lines = text.splitlines()
    assert lines[-1] == "a,b"
    assert all(line.startswith("#") for line in lines[:-1])
    path = write_table(t, tmp_path / "sub" / "t.csv")
    assert len(read_table(path)) == 0


def test_full_precision_roundtrip(tmp_path):
    t = ResultTable(columns=["x", "flag", "n"])
    vals = [1 / 3, math.pi * 1e-7, -2.5e300, math.nan]
    for i, v in enumerate(vals):
        t.append(dict(x=v, flag=i % 2 == 0, n=i))
    path = write_table(t, tmp_path / "t.csv")
    raw = path.read_bytes()
    assert b"\r" not in raw
    back = read_table(path)
    col = back.column("x")
    assert all(a == b for a, b in zip(col[:3], vals[:3]))
    assert math.isnan(col[3])
    assert list(back.column("flag")) == [True, False, True, False]


def test_render_deterministic_and_sorted():
    t = ResultTable(columns=["v"], metadata={"b": np.float64(2.0), "a": [np.int64(1)]})
    t.append(dict(v=np.float64(0.1)))
    assert render_table(t) == render_table(t)
    lines = render_table(t).splitlines()
    assert lines[0].startswith("# a = [1]")
    assert lines[-1] == "0.10000000000000001"


def test_svg_plot(tmp_path):
    t = ResultTable(columns=["x", "y", "g"])
    for g in (0.0, 1.0):
        for x in range(3):
            t.append(dict(x=x, y=x * g, g=g))
    write_table(t, tmp_path / "p.csv", plot=True, x="x", y="y", group="g")
    svg = (tmp_path / "p.svg").read_text()
    assert svg.startswith("<?xml")
