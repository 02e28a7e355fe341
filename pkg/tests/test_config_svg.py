import json
import math
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zo_minmax.config import (
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    from_dict,
    load_config,
    parse_config,
    parse_override_args,
)
from zo_minmax.svg import Band, Series, band_chart, bar_chart, line_chart

SVG_NS = "{http://www.w3.org/2000/svg}"


# -- config ------------------------------------------------------------------------------


def test_defaults_mirror_the_experiment_protocol():
    cfg = ExperimentConfig()
    assert (cfg.objective.delta, cfg.objective.kappa, cfg.model.zeta) == (0.4, 0.5, 0.05)
    assert cfg.solver.variant == "OGDA_RR"
    assert cfg.robustness.zeta_grid == [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3]
    assert cfg.sweep.epoch_cap == 5000 and cfg.sweep.epsilon == 0.1


def test_canonical_round_trip():
    cfg = parse_config('{"solver": {"eta0": 0.02, "variant": "SGDA_WR"}, "model": {"mask": [0, 2]}}')
    text = cfg.to_json()
    again = parse_config(text)
    assert again == cfg
    assert again.to_json() == text
    assert list(json.loads(text)) == sorted(json.loads(text))


def test_hash_is_stable_and_ignores_output_directory():
    a = parse_config('{"solver": {"seed": 3}}')
    b = parse_config('{"solver": {"seed": 3}, "outputs": {"dir": "elsewhere"}}')
    c = parse_config('{"solver": {"seed": 4}}')
    assert a.hash() == b.hash() == parse_config(a.to_json()).hash()
    assert a.hash() != c.hash()


@pytest.mark.parametrize(
    "text",
    [
        '{"bogus": 1}',
        '{"solver": {"speed": 1}}',
        '{"solver": {"epochs": "many"}}',
        '{"solver": {"epochs": 2.5}}',
        '{"solver": {"eta0": NaN}}',
        '{"reference": {"enabled": 1}}',
        '{"solver": {"epochs": 1, "epochs": 2}}',
        '{"solver": {"chi": 0.3}}',
        '{"problem": "other"}',
        "[1, 2]",
        "{not json",
    ],
)
def test_bad_configs_are_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_ints_are_accepted_for_float_fields():
    assert parse_config('{"solver": {"eta0": 1}}').solver.eta0 == 1.0


def test_load_config_from_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"dataset": {"n": 12}}')
    assert load_config(str(path)).dataset.n == 12


def test_overrides_apply_dotted_paths():
    cfg = apply_overrides(ExperimentConfig(), [("solver.eta0", "0.5"), ("model.mask", "[1, 3]"), ("solver.variant", "all")])
    assert cfg.solver.eta0 == 0.5 and cfg.model.mask == [1, 3] and cfg.solver.variant == "all"
    with pytest.raises(ConfigError):
        apply_overrides(ExperimentConfig(), [("solver.eta0.x", "1")])
    with pytest.raises(ConfigError):
        apply_overrides(ExperimentConfig(), [("nothing", "1")])


def test_override_argument_forms():
    assert parse_override_args(["--a.b", "1", "--c.d=x y"]) == [("a.b", "1"), ("c.d", "x y")]
    with pytest.raises(ConfigError):
        parse_override_args(["--a.b"])
    with pytest.raises(ConfigError):
        parse_override_args(["positional"])


@settings(max_examples=50, deadline=None)
@given(
    eta0=st.floats(1e-4, 10, allow_nan=False),
    epochs=st.integers(1, 10_000),
    mask=st.none() | st.lists(st.integers(0, 9), max_size=5),
    variant=st.sampled_from(["OGDA_RR", "OGDA_WR", "SGDA_RR", "SGDA_WR", "all"]),
)
def test_serialization_round_trip_property(eta0, epochs, mask, variant):
    cfg = from_dict({"solver": {"eta0": eta0, "epochs": epochs, "variant": variant}, "model": {"mask": mask}})
    assert parse_config(cfg.to_json()) == cfg


# -- svg ---------------------------------------------------------------------------------


def assert_self_contained(text):
    root = ET.fromstring(text)
    assert root.tag == f"{SVG_NS}svg"
    for el in root.iter():
        for key, value in el.attrib.items():
            assert "href" not in key
            assert "url(" not in value
    body = text.split(">", 2)[2]
    assert "http" not in body.replace('xmlns="http://www.w3.org/2000/svg"', "")
    return root


def test_line_chart_is_valid_and_self_contained():
    text = line_chart([Series("A-I", [1, 2, 3], [1.0, 0.1, 0.01]), Series("A-II", [1, 2, 3], [2.0, 0.0, 0.5])], title="t <&>")
    root = assert_self_contained(text)
    lines = root.findall(f".//{SVG_NS}polyline")
    assert len(lines) == 2
    # the zero is dropped on the log axis
    assert len(lines[1].get("points").split()) == 2
    assert "t &lt;&amp;&gt;" in text


def test_linear_axis_keeps_zero():
    root = assert_self_contained(line_chart([Series("s", [0, 1], [0.0, 1.0])], log_y=False))
    assert len(root.find(f".//{SVG_NS}polyline").get("points").split()) == 2


def test_band_chart_has_polygon_per_band():
    band = Band("A-I", [1, 2, 3], [1.0, 0.5, 0.2], [0.5, -0.1, 0.1], [1.5, 1.1, 0.3])
    root = assert_self_contained(band_chart([band, band]))
    assert len(root.findall(f".//{SVG_NS}polygon")) == 2


def test_bar_chart_marks_capped_bars():
    text = bar_chart(["n=50", "n=100"], [1000.0, math.inf], marks=["", "cap"])
    root = assert_self_contained(text)
    rects = [r for r in root.findall(f".//{SVG_NS}rect") if r.get("stroke-dasharray")]
    assert len(rects) == 1
    assert any(t.text == "cap" for t in root.iter(f"{SVG_NS}text"))


def test_charts_survive_empty_and_degenerate_input():
    assert_self_contained(line_chart([Series("empty", [], [])]))
    assert_self_contained(line_chart([Series("flat", [1, 1], [2.0, 2.0])]))
    assert_self_contained(bar_chart([], []))
