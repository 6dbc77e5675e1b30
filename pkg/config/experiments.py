# Sweep presets: id -> (title, axis, values, algorithms, metric)
experiments = {
    "alpha-convergence": (
        "Iterations to converge vs learning rate",
        "alpha",
        [0.1, 0.3, 0.5, 0.7, 0.9],
        ["multistack", "qlearning"],
        "iterations_to_converge",
    ),
    "gamma-convergence": (
        "Iterations to converge vs discount factor",
        "gamma",
        [0.1, 0.3, 0.5, 0.7, 0.9],
        ["multistack", "qlearning"],
        "iterations_to_converge",
    ),
    "subcarrier-delay": (
        "Maximal delay vs number of subcarriers",
        "subcarriers",
        [1, 2, 3, 4, 5],
        ["multistack", "qlearning", "task-only", "task+subcarrier", "task+power"],
        "final_t_max",
    ),
    "task-size-delay": (
        "Maximal delay vs mean task size",
        "task_bits",
        [100e3, 200e3, 300e3, 400e3, 600e3],
        ["multistack", "qlearning", "local-only", "edge-only"],
        "final_t_max",
    ),
    "subcarrier-split": (
        "Mean task split vs number of subcarriers",
        "subcarriers",
        [1, 2, 3, 4, 5],
        ["multistack"],
        "mean_mu",
    ),
    "result-ratio-delay": (
        "Maximal delay vs result ratio",
        "nu",
        [0.2, 0.4, 0.6, 0.8, 1.0],
        ["multistack", "qlearning"],
        "final_t_max",
    ),
    "user-count-delay": (
        "Maximal delay vs number of users",
        "users",
        [2, 3, 4, 5, 6],
        ["multistack", "qlearning"],
        "final_t_max",
    ),
}
