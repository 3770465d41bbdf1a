import argparse
import os
import sys
from typing import List, Optional
from pydantic import ValidationError
from .agents.utils.checkpoint import load_team, save_checkpoint
from .evaluation import evaluate, inactivation_study
from .experiment_config import ExperimentConfig, load_experiment
from .metrics import importance_report, summarize
from .trainer import DecentralizedTrainer
from .scenario_config import format_validation_error
from .utils.errors import ConfigError, TaskAllocatorError
from .utils.export import (
    write_ablation_csv,
    write_importance_csv,
    write_json,
    write_timeline_csv,
    write_training_csv,
    write_trials_csv,
)


def _parse_ids(value: str) -> List[int]:
    try:
        return [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated agent ids, got '{value}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="task-allocator",
        description="Train and analyse decentralized load-aware task allocation teams",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="Experiment config document (JSON); flags override its fields")
    common.add_argument("--scenario", type=str, help="Scenario file or shipped scenario name (e.g. heterogeneous)")
    common.add_argument("--preset", type=str, help="Reward preset, e.g. with_idle_medium_trp or idle_medium_trp")
    common.add_argument("--seed", type=int, help="Run seed recorded in every output")
    common.add_argument("--out", type=str, help="Output directory")
    common.add_argument("--verbose", action="store_true", help="Print status updates to the console")

    subparsers = parser.add_subparsers(dest="command", required=True)

    train_parser = subparsers.add_parser("train", parents=[common], help="Train one Q-network per agent")
    train_parser.add_argument("--episodes", type=int, help="Number of training episodes")

    for name, help_text in [
        ("evaluate", "Evaluate trained checkpoints over many trials"),
        ("importance", "Compute agent importance from evaluation rollouts"),
        ("ablate", "Compare the full team against single-agent inactivations"),
    ]:
        sub = subparsers.add_parser(name, parents=[common], help=help_text)
        sub.add_argument("--trials", type=int, help="Number of evaluation trials")
        sub.add_argument("--checkpoints", type=str, help="Checkpoint directory (defaults to the output directory)")
        if name == "evaluate":
            sub.add_argument("--inactive", type=_parse_ids, help="Comma-separated agent ids forced to idle")
            sub.add_argument("--timeline", type=int, help="Export the first N decision steps of every trial")
        if name == "ablate":
            sub.add_argument("--agent", type=_parse_ids, help="Restrict the study to these agent ids")
    return parser


def build_experiment(args: argparse.Namespace) -> ExperimentConfig:
    """Start from the config document (or defaults) and apply command-line overrides"""
    experiment = load_experiment(args.config) if args.config else ExperimentConfig()
    updates = {}
    if args.scenario is not None:
        updates["scenario"] = args.scenario
    if args.preset is not None:
        updates["preset"] = args.preset
        updates["reward"] = None
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["output_dir"] = args.out
    if getattr(args, "episodes", None) is not None:
        updates["train"] = experiment.train.model_copy(update={"episodes": args.episodes})
    if getattr(args, "trials", None) is not None:
        updates["ablate_trials" if args.command == "ablate" else "trials"] = args.trials
    if getattr(args, "checkpoints", None) is not None:
        updates["checkpoint_dir"] = args.checkpoints
    if getattr(args, "inactive", None) is not None:
        updates["inactive"] = args.inactive
    if getattr(args, "timeline", None) is not None:
        updates["timeline_steps"] = args.timeline
    if getattr(args, "agent", None) is not None:
        updates["ablate_agents"] = args.agent
    # re-validate so flag values obey the same constraints as document values
    try:
        return ExperimentConfig.model_validate({**experiment.model_dump(), **updates})
    except ValidationError as e:
        raise ConfigError(f"Invalid arguments: {format_validation_error(e)}")


def cmd_train(experiment: ExperimentConfig, verbose: bool = False) -> List[str]:
    """Train the team, then write one checkpoint per agent, the training curve and a manifest"""
    scenario = experiment.load_scenario()
    reward_cfgs = experiment.reward_configs(scenario)
    train_cfg = experiment.resolved_train()
    config_hash = experiment.config_hash(scenario)
    seed = experiment.run_seed

    result = DecentralizedTrainer(scenario, reward_cfgs, train_cfg, verbose=verbose).run()

    out = experiment.output_dir
    paths = [
        save_checkpoint(net, agent.id, scenario, out, seed=seed)
        for net, agent in zip(result.nets, scenario.agents)
    ]
    paths.append(write_training_csv(result.history, os.path.join(out, "training.csv"), config_hash, seed))
    manifest = {
        "scenario": scenario.name,
        "scenario_fingerprint": scenario.fingerprint(),
        "preset": experiment.preset if experiment.reward is None else None,
        "rewards": [cfg.model_dump(mode="json") for cfg in reward_cfgs],
        "train": train_cfg.model_dump(mode="json"),
        "checkpoints": [os.path.basename(p) for p in paths[:-1]],
        "target_syncs": result.target_syncs,
        "belief_fallbacks": result.belief_fallbacks,
    }
    paths.append(write_json(manifest, os.path.join(out, "manifest.json"), config_hash, seed))
    print(f"Trained {len(result.nets)} agents for {train_cfg.episodes} episodes; outputs in {out}")
    return paths


def cmd_evaluate(experiment: ExperimentConfig, verbose: bool = False) -> List[str]:
    """Roll out the trained team and write per-trial metrics, a summary and optional decision timelines"""
    scenario = experiment.load_scenario()
    reward_cfgs = experiment.reward_configs(scenario)
    config_hash = experiment.config_hash(scenario)
    seed = experiment.run_seed
    nets = load_team(experiment.checkpoints, scenario)

    report = evaluate(
        nets,
        scenario,
        reward_cfgs,
        E=experiment.trials,
        seed=seed,
        inactive=experiment.inactive,
        verbose=verbose,
    )
    summary = summarize(report)

    out = experiment.output_dir
    suffix = "" if not report.inactive else "_inactive_" + "_".join(str(i) for i in report.inactive)
    paths = [
        write_trials_csv(report, os.path.join(out, f"trials{suffix}.csv"), config_hash, seed),
        write_json(summary, os.path.join(out, f"summary{suffix}.json"), config_hash, seed, {"scenario": scenario.name}),
    ]
    if experiment.timeline_steps:
        paths.append(write_timeline_csv(
            report, scenario, experiment.timeline_steps, os.path.join(out, f"timeline{suffix}.csv"), config_hash, seed
        ))

    completion = summary.completion_step.mean
    print(
        f"{report.trials} trials: failure rate {summary.failure_rate:.1%}, mean completion step "
        f"{'n/a' if completion is None else f'{completion:.2f}'}, unused capability {summary.unused_fraction:.1%}, "
        f"idle count {summary.idle_count.mean:.2f}, reassignment count {summary.reassignment_count.mean:.2f}"
    )
    return paths


def cmd_importance(experiment: ExperimentConfig, verbose: bool = False) -> List[str]:
    """Evaluate, then tabulate capability, usage and importance per agent with the team's urgency weights"""
    scenario = experiment.load_scenario()
    config_hash = experiment.config_hash(scenario)
    seed = experiment.run_seed
    nets = load_team(experiment.checkpoints, scenario)

    report = evaluate(nets, scenario, E=experiment.trials, seed=seed, verbose=verbose)
    importance = importance_report(report, scenario)

    out = experiment.output_dir
    paths = [
        write_importance_csv(importance, os.path.join(out, "importance.csv"), config_hash, seed),
        write_json(importance, os.path.join(out, "importance.json"), config_hash, seed),
    ]
    print(importance.format_table())
    return paths


def cmd_ablate(experiment: ExperimentConfig, verbose: bool = False) -> List[str]:
    """Inactivation study: per-trial completion steps of the baseline and each single-agent ablation"""
    scenario = experiment.load_scenario()
    config_hash = experiment.config_hash(scenario)
    seed = experiment.run_seed
    nets = load_team(experiment.checkpoints, scenario)

    study = inactivation_study(
        nets,
        scenario,
        E=experiment.ablate_trials,
        seed=seed,
        agents=experiment.ablate_agents,
        verbose=verbose,
    )

    out = experiment.output_dir
    paths = [
        write_ablation_csv(study, os.path.join(out, "ablation.csv"), config_hash, seed),
        write_json(study, os.path.join(out, "ablation_summary.json"), config_hash, seed),
    ]
    for variant in [study.baseline, *study.variants.values()]:
        mean = variant.mean_completion_step
        print(
            f"{variant.label}: mean completion step {'n/a' if mean is None else f'{mean:.2f}'}, "
            f"failure rate {variant.failure_rate:.1%}"
        )
    return paths


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "importance": cmd_importance,
    "ablate": cmd_ablate,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        experiment = build_experiment(args)
        COMMANDS[args.command](experiment, verbose=args.verbose)
    except TaskAllocatorError as e:
        print(f"error: {e.message}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


# Command line entry point
def cli_entry():
    """Entry point for the command-line interface."""
    sys.exit(main())


if __name__ == "__main__":
    cli_entry()
