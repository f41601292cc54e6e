import pytest

from qlab.errors import ConfigError
from qlab.flatfile import dump_flat, parse_flat


def test_parse_values():
    text = """
    # a comment
    kind = semiclassical
    eta = [[0, 1], [-1, 0]]   # trailing comment
    name = "run #1"
    seed = 42
    """
    e = parse_flat(text)
    assert e["kind"].value == "semiclassical"
    assert e["eta"].value == [[0, 1], [-1, 0]]
    assert e["name"].value == "run #1"
    assert e["seed"].value == 42 and e["seed"].line == 6


def test_diagnostics_are_line_anchored():
    with pytest.raises(ConfigError) as info:
        parse_flat("a = 1\nno equals\na = 2\nb = [1,\n", "cfg")
    d = info.value.diagnostics
    assert d[0].startswith("cfg:2:")
    assert "duplicate key 'a'" in d[1] and d[1].startswith("cfg:3:")
    assert d[2].startswith("cfg:4:")


def test_roundtrip():
    values = {"kind": "weyl", "hbar_list": [0.1, 0.05], "symbol_f": "X^2"}
    assert {k: e.value for k, e in parse_flat(dump_flat(values)).items()} == values
