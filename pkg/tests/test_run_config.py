import pytest

from errors import ConfigError, InvalidParams
from run_config import (apply_overrides, config_from_dict, config_hash,
                        load_run_config, parse_flat)

PARAMS = {"m": 1.0, "R": 1.0, "gamma": 2.0, "T_inf": 0.5, "u_inf": -2.0, "phi_b": -0.05}

FLAT = """
# nondegenerate reference
m = 1
R = 1
gamma = 2
T_inf = 0.5
u_inf = -2
phi_b = -0.05
grid.N = 256
evolution.perturbation.components = ["psi", "zeta"]
output_prefix = nondeg   # trailing comment
"""


def test_parse_flat_routes_keys():
    tree = parse_flat(FLAT)
    assert tree["params"]["u_inf"] == -2
    assert tree["grid"] == {"N": 256}
    assert tree["evolution"]["perturbation"]["components"] == ["psi", "zeta"]
    assert tree["output_prefix"] == "nondeg"


def test_parse_flat_rejects_bare_lines():
    with pytest.raises(ConfigError, match="line 1"):
        parse_flat("grid.N 256")


def test_load_flat_and_json_agree(tmp_path):
    flat = tmp_path / "run.cfg"
    flat.write_text(FLAT)
    cfg = load_run_config(flat)
    assert cfg.params.u_inf == -2.0
    assert cfg.grid.N == 256
    assert cfg.evolution.perturbation.components == ["psi", "zeta"]

    as_json = tmp_path / "run.json"
    as_json.write_text(cfg.to_json())
    assert config_hash(load_run_config(as_json)) == config_hash(cfg)


def test_defaults():
    cfg = config_from_dict({"params": PARAMS})
    assert cfg.grid.L is None and cfg.grid.N == 2048
    assert cfg.evolution.cfl == 0.4
    assert cfg.diagnostics.qcheck_epsilon == 4.0
    assert cfg.output_prefix == "run"


def test_missing_key_names_it():
    params = dict(PARAMS)
    del params["gamma"]
    with pytest.raises(ConfigError, match="missing required key 'gamma' in params"):
        config_from_dict({"params": params})
    with pytest.raises(ConfigError, match="params"):
        config_from_dict({"grid": {"N": 64}})


def test_invalid_physics_is_not_a_config_error():
    with pytest.raises(InvalidParams):
        config_from_dict({"params": dict(PARAMS, gamma=0.5)})


@pytest.mark.parametrize("section, values", [
    ("grid", {"N": 4}),
    ("grid", {"L": -1.0}),
    ("evolution", {"cfl": 0.0}),
    ("evolution", {"t_end": -1.0}),
    ("diagnostics", {"weight_kind": "gaussian"}),
    ("diagnostics", {"fit_model": "power"}),
    ("verify", {"max_order": 5}),
])
def test_validation(section, values):
    with pytest.raises(ConfigError):
        config_from_dict({"params": PARAMS, section: values})


def test_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text('{"params": ')
    with pytest.raises(ConfigError):
        load_run_config(broken)


def test_hash_is_canonical():
    a = config_from_dict({"params": PARAMS, "grid": {"N": 256}})
    b = config_from_dict({"grid": {"N": 256}, "params": dict(reversed(list(PARAMS.items())))})
    assert config_hash(a) == config_hash(b)
    assert len(config_hash(a)) == 64
    assert config_hash(apply_overrides(a, {"phi_b": -0.04})) != config_hash(a)


def test_overrides():
    cfg = config_from_dict({"params": PARAMS})
    changed = apply_overrides(cfg, {"evolution.t_end": 3.0, "grid.N": None, "verify.max_order": 1})
    assert changed.evolution.t_end == 3.0
    assert changed.grid.N == cfg.grid.N
    assert changed.verify.max_order == 1
    assert cfg.evolution.t_end == 10.0
