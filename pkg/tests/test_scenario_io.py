import numpy as np
import pytest
import yaml

from utils.errors import ScenarioError
from utils.harness import generate_scenario, seed_streams
from utils.scenario_io import load_scenario, save_scenario, scenario_from_dict, scenario_to_dict

FIELDS = (
    "n_bs", "n_users", "n_ul_subcarriers", "n_dl_subcarriers", "n_power_levels", "bandwidth_hz",
    "noise_power_w", "path_loss_exp", "p_max_ul_w", "p_max_dl_w", "mec_cpu_hz", "cycles_per_bit_mec",
    "result_ratio", "bs_positions", "user_positions", "ul_gain", "dl_gain", "user_cpu_hz",
    "cycles_per_bit_user", "task_bits", "task_type", "seed",
)


def assert_same(a, b):
    for name in FIELDS:
        assert np.array_equal(getattr(a, name), getattr(b, name)), name


@pytest.mark.parametrize("mode", ["explicit", "seeded"])
def test_yaml_round_trip(tmp_path, quick_config, mode):
    s = generate_scenario(quick_config, seed_streams(4)[0])
    path = save_scenario(s, tmp_path / f"{mode}.yaml", mode)
    loaded = load_scenario(path)
    assert_same(s, loaded)


def test_seeded_file_has_no_gain_matrices(tmp_path, quick_config):
    s = generate_scenario(quick_config, seed_streams(4)[0])
    data = yaml.safe_load(save_scenario(s, tmp_path / "s.yaml", "seeded").read_text(encoding="utf-8"))
    assert data["format"] == "mec-scenario/1"
    assert "gains" not in data and data["seed"] == s.seed


def test_explicit_scenario_without_seed(make_scenario):
    s = make_scenario(n_users=2, n_ul=2, n_dl=1)
    with pytest.raises(ScenarioError, match="explicit"):
        scenario_to_dict(s, "seeded")
    assert_same(s, scenario_from_dict(scenario_to_dict(s)))


def test_malformed_scenarios(tmp_path, make_scenario):
    data = scenario_to_dict(make_scenario())
    with pytest.raises(ScenarioError, match="format"):
        scenario_from_dict({**data, "format": "other/2"})
    broken = {**data, "gains": {"ul": [[[1.0, 2.0]]], "dl": data["gains"]["dl"]}}
    with pytest.raises(ScenarioError):
        scenario_from_dict(broken)
    (tmp_path / "list.yaml").write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "list.yaml")
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.yaml")
