import json
from pathlib import Path

import pytest

from trimwave.config import config_hash, load_config, parse_config, physics_diagnostics, validate
from trimwave.errors import ConfigurationError

CONFIGS = Path(__file__).parent / "data" / "configs"
SHIPPED = Path(__file__).parent.parent / "src" / "trimwave" / "configs"

BASE = {"experiment": "spectrum",
        "geometry": {"d1": 1, "d2": 1, "periods": [2, 2], "m1": 0, "m2": 2, "k": [8]},
        "trim": "single-layer", "distribution": {"a": 0.0, "b": 1.0}, "seed": 0}


def cfg_text(**over):
    raw = json.loads(json.dumps(BASE))
    raw.update(over)
    return json.dumps(raw, indent=1)


@pytest.mark.parametrize("name", ["spectrum", "endpoints", "extended", "green", "ucp", "wegner_small"])
def test_valid_examples(name):
    assert validate(CONFIGS / f"{name}.json") == []


def test_shipped_config_is_valid():
    assert validate(SHIPPED / "mobility_p2.json") == []


def test_period_one_rejected_with_line():
    msgs = validate(CONFIGS / "bad_period.json")
    assert msgs == ["line 6: geometry/periods/0: 1 is less than the minimum of 2"]


def test_unknown_key_anchored_to_its_line():
    msgs = validate(CONFIGS / "unknown_key.json")
    assert len(msgs) == 1 and msgs[0].startswith("line 7: <root>:") and "colour" in msgs[0]


def test_odd_strip_width_flagged():
    msgs = validate(CONFIGS / "extended_odd.json")
    assert len(msgs) == 1 and "odd" in msgs[0]


def test_allow_odd_silences_parity():
    cfg = load_config(CONFIGS / "extended_odd.json")
    cfg.params["allow_odd"] = True
    assert physics_diagnostics(cfg) == []


def test_wegner_energy_inside_sigma0():
    msgs = validate(CONFIGS / "wegner_inside.json")
    assert len(msgs) == 1 and "gamma_floor" in msgs[0]


def test_wegner_eps_too_large():
    text = cfg_text(experiment="wegner", params={"energy": 6.0, "eps": [3.0]})
    assert any("eps exceeds" in m for m in physics_diagnostics(parse_config(text)))


def test_wegner_needs_energy():
    assert physics_diagnostics(parse_config(cfg_text(experiment="wegner"))) == ["wegner needs params.energy"]


def test_zeta_order():
    text = cfg_text(experiment="green", params={"zeta_min": 0.5, "zeta_max": 0.1})
    assert physics_diagnostics(parse_config(text)) == ["zeta_min must be below zeta_max"]


@pytest.mark.parametrize("over, fragment", [
    ({"experiment": "nope"}, "experiment"),
    ({"seed": -1}, "seed"),
    ({"distribution": {"a": 0.0}}, "'b' is a required property"),
    ({"params": {"dump_states": True}}, "params"),
    ({"trim": "double-layer"}, "trim"),
])
def test_schema_errors(over, fragment):
    with pytest.raises(ConfigurationError, match=fragment):
        parse_config(cfg_text(**over))


def test_invalid_json_reports_line():
    with pytest.raises(ConfigurationError, match="line 2: invalid JSON"):
        parse_config('{\n  "seed": ,\n}')


def test_bc_length_checked():
    geo = dict(BASE["geometry"], bc=["periodic"])
    with pytest.raises(ConfigurationError, match="bc"):
        parse_config(cfg_text(geometry=geo))


def test_explicit_gamma0():
    cfg = parse_config(cfg_text(trim={"gamma0": [[0, 0], [0, 1]]}))
    assert cfg.gamma0 == {(0, 0), (0, 1)} and not cfg.single_layer_default


def test_config_hash_ignores_key_order():
    a = json.loads(cfg_text())
    b = dict(reversed(list(a.items())))
    assert config_hash(a) == config_hash(b)
    assert parse_config(cfg_text()).config_hash == config_hash(a)
