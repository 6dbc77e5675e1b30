from config.experiments import experiments


class Config:
    PROJECT_NAME = "mec-multistack-sim"

    class Network:
        N_BS = 3
        N_USERS = 6
        N_UL_SUBCARRIERS = 9
        N_DL_SUBCARRIERS = 9
        BANDWIDTH_HZ = 3e6
        NOISE_POWER_DBM = -95.0
        PATH_LOSS_EXP = 2.0
        P_MAX_UL_W = 0.5
        P_MAX_DL_W = 1.0
        N_POWER_LEVELS = 10
        RADIUS_M = 100.0
        # keeps r^-delta finite for users dropped on top of a BS
        MIN_DISTANCE_M = 1.0

    class Task:
        MEC_CPU_HZ = 100e9
        USER_CPU_HZ = 0.5e9
        CYCLES_PER_BIT_USER = 1500.0
        CYCLES_PER_BIT_MEC_RANGE = (1000.0, 2000.0)
        TASK_BITS_RANGE = (100e3, 400e3)
        RESULT_RATIO = 1.0

    class Learner:
        ALPHA = 0.7
        GAMMA = 0.9
        EPSILON = 0.1
        N_STACKS = 10
        STACK_LENGTH = 150
        N_DELAY_BINS = 32
        RETRY_CAP = 10
        REWARD_FLOOR = -1.0
        # a local task adds its result upload to the slowest local computation
        REWARD_REFERENCE_SCALE = 2.0

    class Harness:
        # desk-scale dims for learning runs
        DESK_N_BS = 2
        DESK_N_USERS = 4
        DESK_N_SUBCARRIERS = 3
        DESK_N_POWER_LEVELS = 2
        N_SEEDS = 50
        ITERATIONS = 5000
        CONVERGENCE_WINDOW = 200
        CONVERGENCE_TOLERANCE = 0.005
        EVAL_HORIZON = 4
        CATALOG_CAP = 200_000
        ORACLE_CAP = 10_000_000


__all__ = ["Config", "experiments"]
