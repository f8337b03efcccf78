import json
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from persistify.config import (ConfigError, apply_overrides, build_sim_config, emit_config,
                               load_config, parse_config)

PRESETS = Path(__file__).resolve().parents[1] / "presets"

MINIMAL = """{
  "sim": {
    "n_robots": 2,
    "T": 1.0
  }
}
"""


def test_defaults_fill_in():
    doc = parse_config(MINIMAL)
    cfg = build_sim_config(doc)
    assert cfg.n_robots == 2 and cfg.T == 1.0 and cfg.dt == 0.02
    assert doc["output"]["trace"] == "trace.csv"


@pytest.mark.parametrize("name", ["explore.cfg", "coverage.cfg"])
def test_presets_parse_and_round_trip(name):
    doc = load_config(PRESETS / name)
    assert parse_config(emit_config(doc)) == doc
    assert emit_config(parse_config(emit_config(doc))) == emit_config(doc)


@given(st.integers(1, 9), st.floats(0.001, 0.5), st.floats(0.0, 100.0),
       st.sampled_from(["euler", "rk4"]), st.integers(0, 2 ** 31), st.floats(0.01, 0.2),
       st.floats(0.5, 0.95), st.booleans())
def test_round_trip_property(n, dt, T, integ, seed, k, ic, clf):
    doc = parse_config(json.dumps({"sim": {"n_robots": n, "dt": dt, "T": T, "integrator": integ,
                                           "seed": seed},
                                   "energy": {"k": k, "i_c": ic},
                                   "persistence": {"clf": clf}}))
    again = parse_config(emit_config(doc))
    assert again == doc
    c1, c2 = build_sim_config(doc), build_sim_config(again)
    assert (c1.dt, c1.T, c1.seed, c1.energy, c1.persistence.clf) == \
        (c2.dt, c2.T, c2.seed, c2.energy, c2.persistence.clf)


def test_unknown_key_reports_line():
    text = MINIMAL.replace('"T": 1.0', '"T": 1.0,\n    "horizon": 3')
    with pytest.raises(ConfigError, match=r"x.cfg:5: key 'sim.horizon': unknown key"):
        parse_config(text, "x.cfg")


def test_bad_type_reports_line():
    text = MINIMAL.replace('"n_robots": 2', '"n_robots": "two"')
    with pytest.raises(ConfigError, match=r"x.cfg:3: key 'sim.n_robots'"):
        parse_config(text, "x.cfg")


def test_malformed_json_reports_line():
    # the decoder stops at the closing brace after the trailing comma
    with pytest.raises(ConfigError, match=r"x.cfg:5: malformed JSON"):
        parse_config(MINIMAL.replace('"T": 1.0', '"T": 1.0,'), "x.cfg")


def test_semantic_error_is_reported():
    with pytest.raises(ConfigError, match="sim"):
        parse_config(MINIMAL.replace('"T": 1.0', '"T": 1.0,\n    "dt": -1'), "x.cfg")


def test_overrides():
    doc = parse_config(MINIMAL)
    out = apply_overrides(doc, ["sim.seed=7", "persistence.clf=false", "task.kind=coverage"])
    assert out["sim"]["seed"] == 7 and out["persistence"]["clf"] is False
    assert out["task"]["kind"] == "coverage"
    assert doc["sim"]["seed"] == 0
    with pytest.raises(ConfigError, match="unknown key"):
        apply_overrides(doc, ["sim.bogus=1"])
    with pytest.raises(ConfigError, match="key=value"):
        apply_overrides(doc, ["sim.seed"])


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config("/nonexistent/none.cfg")
