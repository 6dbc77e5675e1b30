import logging
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from config import Config, experiments
from utils.errors import ConfigError

logger = logging.getLogger(__name__)

SWEEP_AXES = ("alpha", "gamma", "subcarriers", "task_bits", "nu", "users")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ScenarioParams(_Strict):
    n_bs: int = Field(Config.Network.N_BS, ge=1, description="Number of base stations N")
    n_users: int = Field(Config.Network.N_USERS, ge=1, description="Number of users M")
    n_ul_subcarriers: int = Field(Config.Network.N_UL_SUBCARRIERS, ge=0, description="Uplink subcarriers I")
    n_dl_subcarriers: int = Field(Config.Network.N_DL_SUBCARRIERS, ge=0, description="Downlink subcarriers J")
    n_power_levels: int = Field(Config.Network.N_POWER_LEVELS, ge=1, description="Power levels N_a per link")
    bandwidth_hz: float = Field(Config.Network.BANDWIDTH_HZ, gt=0, description="Bandwidth W per subcarrier")
    noise_power_dbm: float = Field(Config.Network.NOISE_POWER_DBM, description="Noise power in dBm")
    path_loss_exp: float = Field(Config.Network.PATH_LOSS_EXP, gt=0, description="Path loss exponent delta")
    p_max_ul_w: float = Field(Config.Network.P_MAX_UL_W, gt=0, description="Uplink power budget P_U per BS")
    p_max_dl_w: float = Field(Config.Network.P_MAX_DL_W, gt=0, description="Downlink power budget P_B per BS")
    radius_m: float = Field(Config.Network.RADIUS_M, gt=0, description="Radius of the deployment disc")
    mec_cpu_hz: float = Field(Config.Task.MEC_CPU_HZ, gt=0, description="MEC server CPU frequency F")
    user_cpu_hz: float = Field(Config.Task.USER_CPU_HZ, gt=0, description="User CPU frequency f_m")
    cycles_per_bit_user: float = Field(Config.Task.CYCLES_PER_BIT_USER, gt=0, description="User cycles per bit omega_m")
    cycles_per_bit_mec_range: tuple[float, float] = Field(
        Config.Task.CYCLES_PER_BIT_MEC_RANGE, description="Uniform range for MEC cycles per bit omega"
    )
    cycles_per_bit_mec: Optional[float] = Field(None, gt=0, description="Pinned omega, overrides the range")
    task_bits_range: tuple[float, float] = Field(Config.Task.TASK_BITS_RANGE, description="Uniform range for lambda_m in bits")
    result_ratio: float = Field(Config.Task.RESULT_RATIO, gt=0, le=1, description="Result ratio nu")
    task_types: Optional[list[Literal[1, 2, 3]]] = Field(
        None, description="Fixed per-user task types, uniform over {1, 2, 3} when omitted"
    )

    @model_validator(mode="after")
    def _check_ranges(self):
        for name in ("cycles_per_bit_mec_range", "task_bits_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must satisfy 0 < low <= high, got ({lo}, {hi})")
        if self.task_types is not None and len(self.task_types) != self.n_users:
            raise ValueError(f"task_types has {len(self.task_types)} entries for {self.n_users} users")
        return self


class LearnerParams(_Strict):
    alpha: float = Field(Config.Learner.ALPHA, ge=0, le=1, description="Learning rate")
    gamma: float = Field(Config.Learner.GAMMA, ge=0, le=1, description="Discount factor")
    epsilon: float = Field(Config.Learner.EPSILON, ge=0, le=1, description="Exploration probability")
    epsilon_final: Optional[float] = Field(None, ge=0, le=1, description="Epsilon after linear decay")
    epsilon_decay_steps: int = Field(0, ge=0, description="Steps of linear epsilon decay, 0 disables it")
    n_stacks: int = Field(Config.Learner.N_STACKS, ge=0, description="Number of novelty stacks G")
    stack_length: int = Field(Config.Learner.STACK_LENGTH, ge=0, description="Records per stack B")
    n_delay_bins: int = Field(Config.Learner.N_DELAY_BINS, ge=1, description="Finite t_max bins")
    retry_cap: int = Field(Config.Learner.RETRY_CAP, ge=0, description="Re-selections after a repeated experience")
    reward_floor: float = Field(Config.Learner.REWARD_FLOOR, lt=0, description="Reward for infinite or very large delays")
    reward_reference: Literal["cycles_over_cpu", "bits_over_cpu"] = Field(
        "cycles_over_cpu", description="Normalising delay: max omega_m*lambda_m/f_m or max lambda_m/f_m"
    )
    reward_reference_scale: float = Field(
        Config.Learner.REWARD_REFERENCE_SCALE, gt=0, description="Multiplier on the normalising delay"
    )


class HarnessParams(_Strict):
    seeds: list[int] = Field(
        default_factory=lambda: list(range(Config.Harness.N_SEEDS)), min_length=1, description="Run seeds"
    )
    iterations: int = Field(Config.Harness.ITERATIONS, ge=1, description="Iteration budget per run")
    convergence_window: int = Field(Config.Harness.CONVERGENCE_WINDOW, ge=1, description="Moving-average window W")
    convergence_tolerance: float = Field(Config.Harness.CONVERGENCE_TOLERANCE, gt=0, description="Relative MA change")
    eval_horizon: int = Field(
        Config.Harness.EVAL_HORIZON, ge=1, description="Greedy steps played from the initial state per evaluation"
    )
    catalog_cap: int = Field(Config.Harness.CATALOG_CAP, ge=1, description="Largest catalog materialised per BS")
    oracle_cap: int = Field(Config.Harness.ORACLE_CAP, ge=1, description="Largest joint space the oracle scans")
    action_mode: Literal["auto", "exact", "sampled"] = Field("auto", description="Catalog or sampled action space")
    experiment_id: Optional[str] = Field(None, description="Preset id from config.experiments")

    @field_validator("experiment_id")
    @classmethod
    def _known_experiment(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and value not in experiments:
            raise ValueError(f"unknown experiment '{value}', expected one of {', '.join(sorted(experiments))}")
        return value


class RunConfig(_Strict):
    scenario: ScenarioParams = Field(default_factory=ScenarioParams)
    learner: LearnerParams = Field(default_factory=LearnerParams)
    harness: HarnessParams = Field(default_factory=HarnessParams)
    runtime: dict = Field(default_factory=dict, description="Process settings, see utils.settings")

    @model_validator(mode="after")
    def _check_budget(self):
        if self.harness.iterations < self.harness.convergence_window:
            raise ValueError(
                f"iteration budget {self.harness.iterations} is below the convergence window "
                f"{self.harness.convergence_window}"
            )
        return self

    @classmethod
    def desk_scale(cls, **harness) -> "RunConfig":
        """Default constants at the dims used for learning experiments"""
        scenario = ScenarioParams(
            n_bs=Config.Harness.DESK_N_BS,
            n_users=Config.Harness.DESK_N_USERS,
            n_ul_subcarriers=Config.Harness.DESK_N_SUBCARRIERS,
            n_dl_subcarriers=Config.Harness.DESK_N_SUBCARRIERS,
            n_power_levels=Config.Harness.DESK_N_POWER_LEVELS,
        )
        return cls(scenario=scenario, harness=HarnessParams(**harness))

    def updated(self, section: str, **changes) -> "RunConfig":
        """Copy with fields of one section replaced, re-validated"""
        data = self.model_dump()
        data[section].update(changes)
        return build_run_config(data)

    def with_axis(self, axis: str, value: float) -> "RunConfig":
        """Apply one sweep-axis value"""
        if axis == "alpha":
            return self.updated("learner", alpha=float(value))
        if axis == "gamma":
            return self.updated("learner", gamma=float(value))
        if axis == "subcarriers":
            return self.updated("scenario", n_ul_subcarriers=int(value), n_dl_subcarriers=int(value))
        if axis == "task_bits":
            # same relative spread as the default [100, 400] kbit range
            return self.updated("scenario", task_bits_range=(0.4 * value, 1.6 * value))
        if axis == "nu":
            return self.updated("scenario", result_ratio=float(value))
        if axis == "users":
            return self.updated("scenario", n_users=int(value), task_types=None)
        raise ConfigError(f"unknown sweep axis '{axis}', expected one of {', '.join(SWEEP_AXES)}")


def build_run_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid run configuration:\n{e}") from e


def load_run_config(path: str | Path) -> RunConfig:
    """Load a RunConfig from a YAML file"""
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"config {path} is not valid YAML: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    logger.info(f"Loaded run configuration from {path}")
    return build_run_config(data)
