import logging
from pathlib import Path

from config import experiments
from utils.errors import ConfigError, MecSimError
from utils.harness import ExperimentRunner, generate_scenario, run_training, seed_streams
from utils.report import emit_report, run_frame, summary_frame
from utils.run_config import RunConfig
from utils.scenario_io import load_scenario, save_scenario
from utils.settings import SettingsManager

logger = logging.getLogger(__name__)


def run_single(args, cfg: RunConfig, out_dir: Path) -> int:
    seed = args.seed if args.seed is not None else cfg.harness.seeds[0]
    scenario_rng, rng, eval_rng = seed_streams(seed)
    scenario = load_scenario(args.scenario) if args.scenario else generate_scenario(cfg, scenario_rng)
    if args.save_scenario:
        save_scenario(scenario, args.save_scenario, args.scenario_mode)

    metrics = run_training(cfg, scenario, args.algo, seed, rng, eval_rng, q_dump_dir=args.dump_q)
    name = f"run_{args.algo}_seed{seed}"
    emit_report(
        {name: run_frame(metrics), f"{name}_summary": summary_frame([metrics], cfg.harness.iterations)},
        out_dir,
    )
    if not metrics.converged:
        logger.warning(f"{args.algo} seed {seed} did not converge within {cfg.harness.iterations} iterations")
    status = f"converged at {metrics.iterations_to_converge}" if metrics.converged else "did not converge"
    print(f"✅ {args.algo} seed {seed}: {status}, final t_max {metrics.final_t_max:.6g} s -> {out_dir}/{name}.csv")
    return 0


def run_sweep(args, cfg: RunConfig, runner: ExperimentRunner, out_dir: Path) -> int:
    experiment = args.experiment or cfg.harness.experiment_id
    if experiment:
        title, axis, values, algorithms, metric = experiments[experiment]
        name = experiment
    else:
        if not args.axis or not args.values:
            raise ConfigError("sweep needs --experiment, harness.experiment_id in the config, or both --axis and --values")
        title, axis, values, algorithms, metric = None, args.axis, args.values, ["multistack", "qlearning"], None
        name = f"sweep_{axis}"
    if args.algos:
        algorithms = args.algos
    if args.axis and experiment and args.axis != axis:
        raise ConfigError(f"preset {experiment} sweeps {axis}, not {args.axis}")
    if args.values and experiment:
        values = args.values

    table = runner.sweep(cfg, axis, values, algorithms)
    paths = emit_report({name: table}, out_dir, gnuplot=args.gnuplot)
    print(f"✅ {title or name}: {len(table)} rows -> {paths[0]}")
    if metric:
        for algo in algorithms:
            trend = table[table["algorithm"] == algo][f"{metric}_mean"].tolist()
            print(f"   {algo}: {metric} = {', '.join(f'{v:.6g}' for v in trend)}")
    return 0


def run_compare(args, cfg: RunConfig, runner: ExperimentRunner) -> int:
    result = runner.compare(cfg, args.first, args.second, args.metric)
    marker = "✅" if result["significant"] else "⚠️"
    print(
        f"{marker} {args.metric}: {args.first} {result['mean_first']:.6g} vs {args.second} "
        f"{result['mean_second']:.6g} (ratio {result['ratio']:.3f}, "
        f"mean diff {result['mean_difference']:.6g}, one-sided p={result['p_value']:.3g}, n={result['n']})"
    )
    return 0 if result["significant"] else 1


def run_app(args, cfg: RunConfig, settings: SettingsManager) -> int:
    out_dir = Path(settings.ensure_output_dir())
    runner = ExperimentRunner(settings.get_workers())
    try:
        if args.command == "run":
            return run_single(args, cfg, out_dir)
        if args.command == "sweep":
            return run_sweep(args, cfg, runner, out_dir)
        return run_compare(args, cfg, runner)
    except MecSimError as e:
        print(f"❌ {e}")
        return 1
