import argparse
import logging
import sys

from config import experiments
from utils.errors import MecSimError
from utils.harness import ALGORITHMS
from utils.run_config import SWEEP_AXES, RunConfig, load_run_config
from utils.settings import SettingsManager


def global_options(default) -> argparse.ArgumentParser:
    """Options accepted before or after the subcommand"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=default, help="YAML run configuration (default constants at desk scale)")
    common.add_argument("--workers", type=int, default=default, help="Worker processes (overrides MECSIM_WORKERS)")
    common.add_argument("--output-dir", default=default, help="Directory for CSV output (overrides MECSIM_OUTPUT_DIR)")
    common.add_argument("--log-level", default=default, help="Logging level (overrides MECSIM_LOG_LEVEL)")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mecsim", description="MEC/OFDMA simulator with multi-stack Q-learning", parents=[global_options(None)]
    )
    sub = parser.add_subparsers(dest="command", required=True)
    # SUPPRESS keeps a value given before the subcommand
    common = [global_options(argparse.SUPPRESS)]

    run = sub.add_parser("run", parents=common, help="Train one algorithm on one seed")
    run.add_argument("--algo", choices=ALGORITHMS, default="multistack")
    run.add_argument("--seed", type=int, help="Run seed (default: first configured seed)")
    run.add_argument("--scenario", help="Load the scenario from a YAML file instead of generating it")
    run.add_argument("--save-scenario", help="Write the scenario to a YAML file")
    run.add_argument("--scenario-mode", choices=("explicit", "seeded"), default="explicit")
    run.add_argument("--dump-q", help="Directory for per-BS Q-table dumps")

    sweep = sub.add_parser("sweep", parents=common, help="Sweep one parameter over all seeds")
    sweep.add_argument("--experiment", choices=sorted(experiments), help="Preset axis, values and algorithms")
    sweep.add_argument("--axis", choices=SWEEP_AXES)
    sweep.add_argument("--values", type=float, nargs="+")
    sweep.add_argument("--algos", nargs="+", choices=ALGORITHMS)
    sweep.add_argument("--gnuplot", action="store_true", help="Also write gnuplot .dat blocks")

    compare = sub.add_parser("compare", parents=common, help="Paired one-sided test between two algorithms")
    compare.add_argument("--first", choices=ALGORITHMS, default="multistack")
    compare.add_argument("--second", choices=ALGORITHMS, default="qlearning")
    compare.add_argument(
        "--metric", choices=("iterations_to_converge", "final_t_max", "best_t_max"), default="iterations_to_converge"
    )

    verify = sub.add_parser("verify", parents=common, help="Validate the analytical results numerically")
    verify.add_argument("--theorem", type=int, choices=(1, 2, 3), help="Only this result (default: all)")
    verify.add_argument("--oracle", action="store_true", help="Also compare the learner with the exhaustive optimum")
    verify.add_argument("--scenarios", type=int, default=1000, help="Random scenarios per validator")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--oracle-seeds", type=int, default=50)
    verify.add_argument("--max-iterations", type=int, default=20_000)

    count = sub.add_parser("count-actions", parents=common, help="Compare the action-count formula with enumeration")
    count.add_argument("--dims", type=int, nargs=4, metavar=("M", "I", "J", "N_A"), required=True)
    count.add_argument("--cap", type=int, help="Largest catalog to enumerate")
    return parser


def load_config(args) -> RunConfig:
    if args.config:
        return load_run_config(args.config)
    return RunConfig.desk_scale()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except MecSimError as e:
        print(f"❌ {e}", file=sys.stderr)
        return 1

    runtime = dict(cfg.runtime)
    for key in ("workers", "output_dir", "log_level"):
        if getattr(args, key, None) is not None:
            runtime[key] = getattr(args, key)
    settings = SettingsManager(runtime)
    logging.basicConfig(
        level=settings.get_log_level(), format="%(asctime)s %(name)s %(levelname)s %(message)s"
    )
    if not all(settings.validate_settings().values()):
        print(settings.get_settings_status(), file=sys.stderr)
        return 1

    if args.command in ("run", "sweep", "compare"):
        from app_run import run_app as run_experiment_app
        return run_experiment_app(args, cfg, settings)

    from app_verify import run_app as run_verify_app
    return run_verify_app(args, cfg, settings)


if __name__ == "__main__":
    sys.exit(main())
