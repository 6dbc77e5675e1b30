"""YAML serialization of NetworkScenario.

Schema (format mec-scenario/1):

    format: mec-scenario/1
    mode: explicit | seeded
    dims: {n_bs, n_users, n_ul_subcarriers, n_dl_subcarriers, n_power_levels}
    constants: {bandwidth_hz, noise_power_w, path_loss_exp, p_max_ul_w,
                p_max_dl_w, mec_cpu_hz, cycles_per_bit_mec, result_ratio}
    users: {user_cpu_hz, cycles_per_bit_user, task_bits, task_type}   # one entry per user
    positions: {bs: [[x, y], ...], users: [[x, y], ...]}
    gains: {ul: N x M x I, dl: N x M x J}                             # explicit mode
    seed: int                                                         # seeded mode
"""

import logging
from pathlib import Path

import numpy as np
import yaml

from utils.errors import ScenarioError
from utils.net_model import NetworkScenario, gains_from_seed

logger = logging.getLogger(__name__)

FORMAT = "mec-scenario/1"
MODES = ("explicit", "seeded")

_DIMS = ("n_bs", "n_users", "n_ul_subcarriers", "n_dl_subcarriers", "n_power_levels")
_CONSTANTS = (
    "bandwidth_hz", "noise_power_w", "path_loss_exp", "p_max_ul_w",
    "p_max_dl_w", "mec_cpu_hz", "cycles_per_bit_mec", "result_ratio",
)
_USERS = ("user_cpu_hz", "cycles_per_bit_user", "task_bits", "task_type")


def scenario_to_dict(s: NetworkScenario, mode: str = "explicit") -> dict:
    if mode not in MODES:
        raise ScenarioError(f"unknown serialization mode '{mode}'")
    if mode == "seeded" and s.seed is None:
        raise ScenarioError("scenario has no gain seed; save it in explicit mode")
    data = {
        "format": FORMAT,
        "mode": mode,
        "dims": {k: int(getattr(s, k)) for k in _DIMS},
        "constants": {k: float(getattr(s, k)) for k in _CONSTANTS},
        "users": {k: np.asarray(getattr(s, k)).tolist() for k in _USERS},
        "positions": {"bs": s.bs_positions.tolist(), "users": s.user_positions.tolist()},
    }
    if mode == "explicit":
        data["gains"] = {"ul": s.ul_gain.tolist(), "dl": s.dl_gain.tolist()}
        if s.seed is not None:
            data["seed"] = int(s.seed)
    else:
        data["seed"] = int(s.seed)
    return data


def scenario_from_dict(data: dict) -> NetworkScenario:
    if data.get("format") != FORMAT:
        raise ScenarioError(f"unsupported scenario format {data.get('format')!r}, expected {FORMAT}")
    mode = data.get("mode")
    if mode not in MODES:
        raise ScenarioError(f"unknown serialization mode {mode!r}")
    try:
        dims = {k: int(data["dims"][k]) for k in _DIMS}
        constants = {k: float(data["constants"][k]) for k in _CONSTANTS}
        users = {k: np.asarray(data["users"][k], dtype=int if k == "task_type" else float) for k in _USERS}
        bs_positions = np.asarray(data["positions"]["bs"], dtype=float).reshape(dims["n_bs"], 2)
        user_positions = np.asarray(data["positions"]["users"], dtype=float).reshape(dims["n_users"], 2)
        seed = data.get("seed")
        if mode == "explicit":
            shape_ul = (dims["n_bs"], dims["n_users"], dims["n_ul_subcarriers"])
            shape_dl = (dims["n_bs"], dims["n_users"], dims["n_dl_subcarriers"])
            ul_gain = np.asarray(data["gains"]["ul"], dtype=float).reshape(shape_ul)
            dl_gain = np.asarray(data["gains"]["dl"], dtype=float).reshape(shape_dl)
        else:
            seed = int(seed)
            ul_gain, dl_gain = gains_from_seed(
                seed, bs_positions, user_positions,
                dims["n_ul_subcarriers"], dims["n_dl_subcarriers"], constants["path_loss_exp"],
            )
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioError(f"malformed scenario data: {e}") from e
    return NetworkScenario(
        **dims,
        **constants,
        **users,
        bs_positions=bs_positions,
        user_positions=user_positions,
        ul_gain=ul_gain,
        dl_gain=dl_gain,
        seed=None if seed is None else int(seed),
    )


def save_scenario(s: NetworkScenario, path: str | Path, mode: str = "explicit") -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        yaml.safe_dump(scenario_to_dict(s, mode), f, sort_keys=False)
    logger.info(f"Saved {mode} scenario to {path}")
    return path


def load_scenario(path: str | Path) -> NetworkScenario:
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ScenarioError(f"cannot read scenario {path}: {e}") from e
    if not isinstance(data, dict):
        raise ScenarioError(f"scenario {path} must be a mapping")
    return scenario_from_dict(data)
