import numpy as np
import pytest

from utils.net_model import NetworkScenario
from utils.run_config import RunConfig


def build_scenario(n_bs=1, n_users=1, n_ul=1, n_dl=1, gain=1.0, task_type=3, **overrides) -> NetworkScenario:
    """Hand-sized scenario: unit bandwidth, unit noise, flat gains"""
    fields = dict(
        n_bs=n_bs,
        n_users=n_users,
        n_ul_subcarriers=n_ul,
        n_dl_subcarriers=n_dl,
        bandwidth_hz=1.0,
        noise_power_w=1.0,
        path_loss_exp=2.0,
        bs_positions=np.column_stack((np.arange(n_bs) * 50.0, np.zeros(n_bs))),
        user_positions=np.column_stack((np.arange(n_users) * 10.0 + 5.0, np.ones(n_users))),
        ul_gain=np.full((n_bs, n_users, n_ul), gain),
        dl_gain=np.full((n_bs, n_users, n_dl), gain),
        p_max_ul_w=1.0,
        p_max_dl_w=1.0,
        n_power_levels=1,
        mec_cpu_hz=1e11,
        user_cpu_hz=np.full(n_users, 5e8),
        cycles_per_bit_mec=1500.0,
        cycles_per_bit_user=np.full(n_users, 1500.0),
        task_bits=np.full(n_users, 1e5),
        result_ratio=1.0,
        task_type=np.full(n_users, task_type),
    )
    fields.update(overrides)
    return NetworkScenario(**fields)


@pytest.fixture
def make_scenario():
    return build_scenario


@pytest.fixture
def quick_config():
    """Desk-scale dims with a short budget for learning tests"""
    return RunConfig.desk_scale(seeds=[0, 1, 2], iterations=300, convergence_window=50)


@pytest.fixture
def tiny_config():
    """One BS, two users, one subcarrier per link: a 9-action catalog"""
    cfg = RunConfig.desk_scale(seeds=[0, 1], iterations=200, convergence_window=20)
    return cfg.updated("scenario", n_bs=1, n_users=2, n_ul_subcarriers=1, n_dl_subcarriers=1, n_power_levels=1)
