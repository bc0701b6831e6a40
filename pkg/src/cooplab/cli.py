"""Single entry point for all workflows.

Subcommands: train-sp, train-mep, train-robust, eval, sweep-alpha,
verify-bounds, serve, replay. Configuration resolves as profile defaults
(paper or desk), overridden by a YAML config file, overridden by flags;
every run echoes its fully resolved configuration (including the layout
text) to resolved.yaml so it can be reproduced bit for bit.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import runio
from .coopgrid import Action, load_builtin, load_layout_file, parse_layout, replay_episode
from .evaluation import EvalSpec, cross_play, results_csv_lines, summary_dict
from .mep import MEPConfig, alpha_sweep, sweep_csv_lines, train_population
from .policy import NetSpec, load_params, save_params
from .pop_metrics import bounds_lab
from .ppo import TrainConfig, desk_profile, train_selfplay
from .robust import PartnerPool, minimax_report, train_robust_agent

PROFILES = ("paper", "desk")

DESK_NET = dict(conv_layers=1, conv_filters=12, hidden_layers=1, hidden_size=64)
PAPER_NET = dict(conv_layers=3, conv_filters=25, hidden_layers=3, hidden_size=64)


class CliError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# configuration resolution
# ---------------------------------------------------------------------------


def _layout_text(name_or_path: str) -> tuple[str, str]:
    path = Path(name_or_path)
    if path.suffix == ".layout" or path.exists():
        return path.stem, path.read_text(encoding="utf-8")
    try:
        layout = load_builtin(name_or_path)
    except Exception as exc:
        raise CliError(f"unknown layout {name_or_path!r}: {exc}") from exc
    from importlib.resources import files

    text = (files("cooplab.coopgrid") / "layouts" / f"{name_or_path}.layout").read_text()
    return layout.name, text


def _apply_overrides(base: dict, overrides: dict | None, section: str) -> dict:
    out = dict(base)
    for key, value in (overrides or {}).items():
        if key not in out:
            raise CliError(f"unknown {section} field {key!r}")
        out[key] = value
    return out


def resolve_config(args) -> dict:
    file_cfg = runio.load_config_file(args.config) if getattr(args, "config", None) else {}

    profile = getattr(args, "profile", None) or file_cfg.get("profile") or "desk"
    if profile not in PROFILES:
        raise CliError(f"profile must be one of {PROFILES}")

    train_defaults = desk_profile() if profile == "desk" else TrainConfig()
    train = _apply_overrides(dataclasses.asdict(train_defaults), file_cfg.get("train"), "train")
    net = _apply_overrides(
        dict(DESK_NET if profile == "desk" else PAPER_NET), file_cfg.get("net"), "net"
    )
    mep = _apply_overrides(
        {"population_size": 3 if profile == "desk" else 5, "alpha": 0.01},
        file_cfg.get("mep"),
        "mep",
    )
    priority = _apply_overrides({"beta": 3.0}, file_cfg.get("priority"), "priority")
    eval_cfg = _apply_overrides(
        {"seeds": [0, 1, 2, 3, 4], "episodes_per_partner": 10, "greedy": False},
        file_cfg.get("eval"),
        "eval",
    )

    for assignment in getattr(args, "set", None) or []:
        if "=" not in assignment:
            raise CliError(f"--set expects section.key=value, got {assignment!r}")
        dotted, raw = assignment.split("=", 1)
        if "." not in dotted:
            raise CliError(f"--set expects section.key=value, got {assignment!r}")
        section, key = dotted.split(".", 1)
        value = yaml.safe_load(raw)
        target = {"train": train, "net": net, "mep": mep, "priority": priority,
                  "eval": eval_cfg}.get(section)
        if target is None or key not in target:
            raise CliError(f"unknown override {assignment!r}")
        target[key] = value

    if getattr(args, "alpha", None) is not None:
        mep["alpha"] = args.alpha
    if getattr(args, "beta", None) is not None:
        priority["beta"] = args.beta

    if "layout_text" in file_cfg and not getattr(args, "layout", None):
        layout_name = file_cfg.get("layout_name", "layout")
        layout_text = file_cfg["layout_text"]
    else:
        layout_name, layout_text = _layout_text(
            getattr(args, "layout", None) or file_cfg.get("layout") or "cramped_room"
        )

    seeds = list(getattr(args, "seed", None) or file_cfg.get("seeds") or [1])
    output_dir = str(
        runio.output_root(getattr(args, "out", None) or file_cfg.get("output_dir"))
    )

    return {
        "layout_name": layout_name,
        "layout_text": layout_text,
        "profile": profile,
        "seeds": seeds,
        "output_dir": output_dir,
        "train": train,
        "net": net,
        "mep": mep,
        "priority": priority,
        "eval": eval_cfg,
    }


def build_objects(resolved: dict):
    layout = parse_layout(resolved["layout_text"], name=resolved["layout_name"])
    train = TrainConfig(**resolved["train"])
    from .coopgrid import observation_shape

    channels, height, width = observation_shape(layout)
    net = NetSpec(in_channels=channels, height=height, width=width, **resolved["net"])
    return layout, train, net


def _logger(run_dir: Path):
    def log(record):
        runio.append_jsonl(run_dir / "log.jsonl", record)

    return log


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_train_sp(args) -> int:
    resolved = resolve_config(args)
    layout, train, net = build_objects(resolved)
    for seed in resolved["seeds"]:
        run_dir = runio.ensure_run_dir(
            Path(resolved["output_dir"]), f"sp_{layout.name}_seed{seed}"
        )
        runio.echo_config(run_dir, {**resolved, "seeds": [seed], "command": "train-sp"})
        result = train_selfplay(layout, train, seed, net_spec=net, log_fn=_logger(run_dir))
        for stage, params in result.checkpoints.items():
            save_params(params, run_dir / "agent" / f"{stage}.ckpt")
        print(f"{run_dir}: final reward "
              f"{result.history[-1]['mean_episode_task_reward']:.1f}")
    return 0


def cmd_train_mep(args) -> int:
    resolved = resolve_config(args)
    layout, train, net = build_objects(resolved)
    config = MEPConfig(
        population_size=resolved["mep"]["population_size"],
        alpha=resolved["mep"]["alpha"],
        train=train,
    )
    for seed in resolved["seeds"]:
        run_dir = runio.ensure_run_dir(
            Path(resolved["output_dir"]),
            f"mep_{layout.name}_a{config.alpha}_seed{seed}",
        )
        runio.echo_config(run_dir, {**resolved, "seeds": [seed], "command": "train-mep"})
        population = train_population(
            layout, config, seed, net_spec=net, log_fn=_logger(run_dir)
        )
        for i, stages in enumerate(population.checkpoints):
            for stage, params in stages.items():
                save_params(params, run_dir / f"member_{i}" / f"{stage}.ckpt")
        last = population.history[-1]
        print(f"{run_dir}: reward {last['mean_episode_task_reward']:.1f} "
              f"population entropy {last['population_entropy']:.3f}")
    return 0


def load_pool_from_dir(population_dir: Path) -> PartnerPool:
    member_dirs = sorted(
        (d for d in Path(population_dir).glob("member_*") if d.is_dir()),
        key=lambda d: int(d.name.split("_")[1]),
    )
    if not member_dirs:
        raise CliError(f"no member_<i> directories under {population_dir}")
    checkpoints = []
    for d in member_dirs:
        for stage in ("beginner", "middle", "best"):
            path = d / f"{stage}.ckpt"
            if not path.exists():
                raise CliError(f"missing checkpoint {path}")
            checkpoints.append((f"{d.name}/{stage}", load_params(path)))
    return PartnerPool.from_checkpoints(checkpoints)


def cmd_train_robust(args) -> int:
    resolved = resolve_config(args)
    layout, train, net = build_objects(resolved)
    pool = load_pool_from_dir(Path(args.population))
    beta = resolved["priority"]["beta"]
    for seed in resolved["seeds"]:
        run_dir = runio.ensure_run_dir(
            Path(resolved["output_dir"]), f"robust_{layout.name}_b{beta}_seed{seed}"
        )
        runio.echo_config(
            run_dir,
            {**resolved, "seeds": [seed], "command": "train-robust",
             "population": str(args.population)},
        )
        result = train_robust_agent(
            pool, layout, train, seed, beta=beta, net_spec=net, log_fn=_logger(run_dir)
        )
        for stage, params in result.checkpoints.items():
            save_params(params, run_dir / "agent" / f"{stage}.ckpt")
        for entry in result.priorities_log:
            runio.append_jsonl(run_dir / "priorities.jsonl", entry)
        report = minimax_report(
            result.params, result.pool, layout,
            episodes_per_partner=resolved["eval"]["episodes_per_partner"],
            seed=seed,
        )
        runio.write_json(run_dir / "minimax.json", report)
        print(f"{run_dir}: min-over-pool return {report['min_return']:.1f} "
              f"(hardest {report['hardest_partner']})")
    return 0


def cmd_eval(args) -> int:
    resolved = resolve_config(args)
    layout, _, _ = build_objects(resolved)
    agent = load_params(args.agent)
    partner_paths: list[Path] = [Path(p) for p in args.partner or []]
    if args.partner_dir:
        partner_paths += sorted(Path(args.partner_dir).rglob("*.ckpt"))
    if not partner_paths:
        raise CliError("no partners given (use --partner / --partner-dir)")
    partners = tuple((str(p), load_params(p)) for p in partner_paths)
    spec = EvalSpec(
        layout=layout, agent=agent, partners=partners,
        seeds=tuple(resolved["eval"]["seeds"]), greedy=resolved["eval"]["greedy"],
    )
    result = cross_play(spec)
    out_dir = runio.ensure_run_dir(Path(resolved["output_dir"]), f"eval_{layout.name}")
    runio.echo_config(out_dir, {**resolved, "command": "eval", "agent": str(args.agent)})
    runio.write_lines(out_dir / "results.csv", results_csv_lines(result, str(args.agent)))
    runio.write_json(out_dir / "summary.json", summary_dict(result))
    print(json.dumps(summary_dict(result)["per_partner_mean"], indent=2, sort_keys=True))
    print(f"aggregate mean: {result.aggregate_mean:.2f}")
    return 0


def cmd_sweep_alpha(args) -> int:
    resolved = resolve_config(args)
    layout, train, net = build_objects(resolved)
    alphas = [float(a) for a in args.alphas.split(",")]
    if len(alphas) < 1:
        raise CliError("need at least one alpha")
    config = MEPConfig(
        population_size=resolved["mep"]["population_size"], alpha=alphas[0], train=train
    )
    report = alpha_sweep(
        layout, alphas, config, seeds=resolved["seeds"], net_spec=net
    )
    out_dir = runio.ensure_run_dir(Path(resolved["output_dir"]), f"sweep_{layout.name}")
    runio.echo_config(out_dir, {**resolved, "command": "sweep-alpha", "alphas": alphas})
    runio.write_json(out_dir / "sweep.json", report)
    runio.write_lines(out_dir / "sweep.csv", sweep_csv_lines(report))
    for row in report["rows"]:
        print(f"alpha {row['alpha']}: best reward {row['best_reward']:.1f} "
              f"entropy {row['entropy_at_best']:.3f} (seed {row['seed']})")
    return 0


def cmd_verify_bounds(args) -> int:
    report = bounds_lab(
        population_trials=args.trials, mdp_trials=args.mdp_trials, seed=args.bounds_seed
    )
    out_dir = runio.ensure_run_dir(runio.output_root(args.out), "bounds")
    runio.write_json(out_dir / "bounds_report.json", report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0 if report["all_pass"] else 1


def cmd_serve(args) -> int:
    import uvicorn

    from .server import build_app

    resolved = resolve_config(args)
    layout, _, _ = build_objects(resolved)
    app = build_app(
        default_layout=layout,
        checkpoint_dir=Path(args.checkpoint_dir) if args.checkpoint_dir else Path.cwd(),
        static_dir=Path(args.static_dir) if args.static_dir else None,
        transcript_dir=Path(resolved["output_dir"]) / "transcripts",
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_replay(args) -> int:
    data = json.loads(Path(args.transcript).read_text(encoding="utf-8"))
    layout = parse_layout(data["layout_text"], name=data.get("layout_name", "layout"))
    actions = [(Action(a), Action(b)) for a, b in data["actions"]]
    state, total = replay_episode(layout, actions)
    recorded = data["final_score"]
    match = bool(total == recorded)
    print(json.dumps({
        "recorded_score": recorded,
        "replayed_score": total,
        "steps": len(actions),
        "match": match,
    }, sort_keys=True))
    return 0 if match else 1


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML config file (or an echoed resolved.yaml)")
    p.add_argument("--layout", help="builtin layout name or path to a .layout file")
    p.add_argument("--profile", choices=PROFILES)
    p.add_argument("--seed", type=int, action="append", help="repeatable")
    p.add_argument("--out", help="output root (default $COOPLAB_RUNS or ./runs)")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override any train/net/mep/priority/eval field")
    p.add_argument("--alpha", type=float, help="population-entropy reward weight")
    p.add_argument("--beta", type=float, help="prioritized-sampling exponent")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cooplab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-sp", help="self-play baseline")
    _add_common(p)
    p.set_defaults(fn=cmd_train_sp)

    p = sub.add_parser("train-mep", help="maximum-entropy population")
    _add_common(p)
    p.set_defaults(fn=cmd_train_mep)

    p = sub.add_parser("train-robust", help="robust agent against a frozen pool")
    _add_common(p)
    p.add_argument("--population", required=True, help="a train-mep run directory")
    p.set_defaults(fn=cmd_train_robust)

    p = sub.add_parser("eval", help="cross-play evaluation")
    _add_common(p)
    p.add_argument("--agent", required=True)
    p.add_argument("--partner", action="append")
    p.add_argument("--partner-dir")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sweep-alpha", help="entropy-weight sweep")
    _add_common(p)
    p.add_argument("--alphas", default="0.0,0.01", help="comma-separated")
    p.set_defaults(fn=cmd_sweep_alpha)

    p = sub.add_parser("verify-bounds", help="run the numerical property suites")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--mdp-trials", type=int, default=1_000)
    p.add_argument("--bounds-seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_verify_bounds)

    p = sub.add_parser("serve", help="live human-play server")
    _add_common(p)
    p.add_argument("--checkpoint-dir", help="root for checkpoint paths in create messages")
    p.add_argument("--static-dir", help="directory with the browser client")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("replay", help="recompute a transcript's score")
    p.add_argument("transcript")
    p.set_defaults(fn=cmd_replay)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(json.dumps({"error": "config", "detail": str(exc)}), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - single reporting point
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
