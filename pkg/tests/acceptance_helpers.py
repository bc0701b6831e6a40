"""Training-run orchestration for the acceptance suite.

Every heavy artifact (self-play baselines, populations, robust agents,
holdout partners) is produced by a module-level job function so the session
fixture can farm jobs out to a small process pool. Each job is keyed by its
run directory under the shared cache root and is skipped when a previous
job already completed it (marker file), which keeps reruns incremental.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

CACHE_ENV = "COOPLAB_TEST_CACHE"
WORKERS_ENV = "COOPLAB_TEST_WORKERS"

ROBUST_SYNTH_STEPS = 160_000  # budget for the beta comparison pool runs


def cache_root() -> Path:
    root = os.environ.get(CACHE_ENV)
    if not root:
        raise RuntimeError("acceptance cache root not configured")
    return Path(root)


def _done(run_dir: Path) -> bool:
    return (run_dir / ".done").exists()


def _mark(run_dir: Path) -> str:
    (run_dir / ".done").touch()
    return str(run_dir)


def _cli(*argv) -> None:
    from cooplab.cli import main

    code = main([str(a) for a in argv])
    if code != 0:
        raise RuntimeError(f"cli failed ({code}): {argv}")


def sp_dir(layout: str, seed: int) -> Path:
    return cache_root() / f"sp_{layout}_seed{seed}"


def mep_dir(layout: str, alpha: float, seed: int) -> Path:
    return cache_root() / f"mep_{layout}_a{alpha}_seed{seed}"


def robust_dir(layout: str, beta: float, seed: int) -> Path:
    return cache_root() / f"robust_{layout}_b{beta}_seed{seed}"


def train_sp_job(layout: str, seed: int) -> str:
    run = sp_dir(layout, seed)
    if _done(run):
        return str(run)
    _cli("train-sp", "--layout", layout, "--seed", seed, "--out", cache_root(),
         "--profile", "desk")
    return _mark(run)


def train_mep_job(layout: str, alpha: float, seed: int) -> str:
    run = mep_dir(layout, alpha, seed)
    if _done(run):
        return str(run)
    _cli("train-mep", "--layout", layout, "--seed", seed, "--out", cache_root(),
         "--profile", "desk", "--alpha", alpha)
    return _mark(run)


def train_robust_job(layout: str, population: str, beta: float, seed: int) -> str:
    run = robust_dir(layout, beta, seed)
    if _done(run):
        return str(run)
    _cli("train-robust", "--layout", layout, "--seed", seed, "--out", cache_root(),
         "--profile", "desk", "--population", population, "--beta", beta)
    return _mark(run)


def train_robust_synthetic_job(layout: str, pool_paths: list[str], beta: float,
                               seed: int) -> str:
    """Robust training against an explicit checkpoint pool (module API, not CLI)."""
    run = cache_root() / f"robsynth_{layout}_b{beta}_seed{seed}"
    if _done(run):
        return str(run)
    from cooplab.coopgrid import load_builtin
    from cooplab.policy import load_params, save_params
    from cooplab.ppo import desk_profile, net_spec_for
    from cooplab.robust import PartnerPool, minimax_report, train_robust_agent
    from cooplab import runio

    layout_obj = load_builtin(layout)
    pool = PartnerPool.from_checkpoints(
        [(Path(p).parent.name + "/" + Path(p).stem, load_params(p)) for p in pool_paths]
    )
    config = desk_profile(total_env_steps=ROBUST_SYNTH_STEPS)
    result = train_robust_agent(
        pool, layout_obj, config, seed, beta=beta,
        net_spec=net_spec_for(layout_obj, "desk"),
        log_fn=lambda rec: runio.append_jsonl(run / "log.jsonl", rec),
    )
    save_params(result.params, run / "agent" / "final.ckpt")
    report = minimax_report(result.params, pool, layout_obj,
                            episodes_per_partner=10, seed=seed)
    runio.write_json(run / "minimax.json", report)
    return _mark(run)


def random_ckpt_job(layout: str, seed: int) -> str:
    """An untrained (random-init) checkpoint, the adversarial-quality partner."""
    run = cache_root() / f"random_{layout}_seed{seed}"
    if _done(run):
        return str(run)
    from cooplab.coopgrid import load_builtin
    from cooplab.policy import init_params, save_params
    from cooplab.ppo import net_spec_for

    layout_obj = load_builtin(layout)
    save_params(init_params(net_spec_for(layout_obj, "desk"), seed),
                run / "agent" / "final.ckpt")
    return _mark(run)


def run_jobs(jobs: list[tuple], workers: int | None = None) -> list[str]:
    """jobs: (callable, *args). Runs in a small process pool, order-preserving."""
    if not jobs:
        return []
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "0")) or min(2, os.cpu_count() or 1)
    if workers <= 1 or len(jobs) == 1:
        return [fn(*args) for fn, *args in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *args) for fn, *args in jobs]
        return [f.result() for f in futures]


def history(run_dir: str | Path) -> list[dict]:
    with open(Path(run_dir) / "log.jsonl", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
