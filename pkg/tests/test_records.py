import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sigma2flow.flow_engine import FlowConfig, TimeSeries, run
from sigma2flow.records import (
    CHECKPOINT_MAGIC,
    fmt,
    jsonable,
    read_checkpoint,
    read_csv,
    write_checkpoint,
    write_csv,
    write_json,
    write_timeseries,
)
from sigma2flow.sphere_geometry import ConformalFactor, Grid


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_roundtrips_doubles(x):
    assert float(fmt(x)) == x


@pytest.mark.parametrize("v, s", [(True, "true"), (False, "false"), (3, "3"), ("a", "a")])
def test_fmt_other_types(v, s):
    assert fmt(v) == s


def test_jsonable_nan_and_nested():
    out = jsonable({"a": [1.0, math.nan, np.float64(2.5)], "b": np.arange(2), "c": math.inf})
    assert out == {"a": [1.0, None, 2.5], "b": [0, 1], "c": None}


def test_write_json_is_sorted(tmp_path):
    p = write_json(tmp_path / "r.json", {"b": 1, "a": math.nan})
    assert json.loads(p.read_text()) == {"a": None, "b": 1}
    assert p.read_text().index('"a"') < p.read_text().index('"b"')


def test_csv_roundtrip(tmp_path):
    rows = [[0.1, True, 3], [1 / 3, False, -1]]
    write_csv(tmp_path / "t.csv", ["x", "flag", "n"], rows)
    header, got = read_csv(tmp_path / "t.csv")
    assert header == ["x", "flag", "n"]
    assert float(got[1][0]) == 1 / 3 and got[0][1] == "true"


def test_checkpoint_bit_exact(tmp_path, rng):
    grid = Grid(64)
    cf = ConformalFactor(grid, rng.standard_normal(64) * 1e-3 + np.pi)
    cfg = FlowConfig(eps=0.000123, dt_safety=0.3, max_steps=7, normalization="quadrature")
    p = write_checkpoint(tmp_path / "c.txt", cf, 1 / 7, cfg)
    assert p.read_text().splitlines()[0] == CHECKPOINT_MAGIC
    cf2, t, cfg2 = read_checkpoint(p)
    assert np.array_equal(cf2.u, cf.u) and cf2.grid == grid
    assert t == 1 / 7
    assert cfg2 == cfg


def test_checkpoint_without_config(tmp_path):
    cf = ConformalFactor.constant(Grid(16), 0.25)
    cf2, t, cfg = read_checkpoint(write_checkpoint(tmp_path / "c.txt", cf, 0.0))
    assert cfg is None and np.array_equal(cf2.u, cf.u)


def test_checkpoint_rejects_foreign_file(tmp_path):
    (tmp_path / "x.txt").write_text("hello\n")
    with pytest.raises(ValueError):
        read_checkpoint(tmp_path / "x.txt")


def test_timeseries_csv_has_exact_columns(tmp_path):
    res = run(ConformalFactor.constant(Grid(32)), FlowConfig(eps=5e-4))
    header, rows = read_csv(write_timeseries(tmp_path / "ts.csv", res.series))
    assert tuple(header) == res.series.columns
    assert len(rows) == 1
