"""Command-line entry points: batch runs, analysis, and the session service."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .benchmarks import benchmark_names
from .harness import RunConfig, collect_results, load_trace, run_and_save, save_trace
from .psychophysics import PatientModel, VaConfig, run_va_experiment
from .rules import rules_for_mode
from .stats import stratified_ranking


def _parse_seeds(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(text)]


@click.group()
def main():
    """Contextual Bayesian optimization toolkit."""


@main.command()
@click.option("--rule", required=True, help="acquisition rule id, e.g. ucb-ald")
@click.option("--benchmark", required=True, type=click.Choice(benchmark_names()))
@click.option("--mode", default="binary", type=click.Choice(["binary", "pref"]))
@click.option("--seeds", default="0", help="seed or inclusive range A..B")
@click.option("--iters", default=60, type=int)
@click.option("--n-init", default=5, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def run(rule, benchmark, mode, seeds, iters, n_init, out_dir):
    """Run benchmark optimizations and save one trace per seed."""
    mode_full = "preferential" if mode == "pref" else "binary"
    if rule not in rules_for_mode(mode_full):
        raise click.ClickException(
            f"rule {rule!r} not available in mode {mode_full}; "
            f"choose from {rules_for_mode(mode_full)}"
        )
    for seed in _parse_seeds(seeds):
        config = RunConfig(
            rule=rule,
            benchmark=benchmark,
            mode=mode_full,
            iterations=iters,
            n_init=n_init,
            seed=seed,
        )
        path = run_and_save(config, out_dir)
        trace = load_trace(path)
        status = "ok" if trace.valid else f"INVALID ({trace.error})"
        click.echo(f"{path} final={trace.final_objective():+.4f} [{status}]")
        if not trace.valid:
            raise click.ClickException("run failed; see trace error")


@main.command()
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--alpha", default=5e-4, type=float)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def analyze(in_dir, alpha, out_path):
    """Stratified ranking (Mann-Whitney wins, AUC tie-break, Borda) over saved traces."""
    paths = sorted(Path(in_dir).glob("*.jsonl"))
    if not paths:
        raise click.ClickException(f"no traces found under {in_dir}")
    results = collect_results(paths)
    report = stratified_ranking(results, alpha=alpha)
    Path(out_path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    click.echo(f"wrote {out_path}")
    for rank, rule in enumerate(report.ranking, start=1):
        click.echo(f"{rank}. {rule}: Borda {report.aggregate[rule]}")


@main.command()
@click.option("--slope", default=5.0, type=float)
@click.option("--seeds", default="0", help="seed or inclusive range A..B")
@click.option("--iters", default=260, type=int)
@click.option("--rule", default="ucb-ald")
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False))
def psychophysics(slope, seeds, iters, rule, out_dir):
    """Simulated visual-acuity optimization runs."""
    if rule not in rules_for_mode("binary"):
        raise click.ClickException(f"rule {rule!r} not available")
    finals = []
    for seed in _parse_seeds(seeds):
        config = VaConfig(rule=rule, iterations=iters, seed=seed, slope=slope)
        trace = run_va_experiment(config)
        final_va = trace.records[-1].extra["true_va"]
        finals.append(final_va)
        click.echo(f"seed {seed}: final VA {final_va:.4f} logMAR")
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            save_trace(trace, out / f"visual-acuity__{rule}__slope{slope}__seed{seed}.jsonl")
    click.echo(f"mean final VA {np.mean(finals):.4f} logMAR over {len(finals)} seeds")


@main.command()
@click.option("--port", default=8000, type=int)
@click.option("--host", default="127.0.0.1")
def serve(port, host):
    """Start the refraction session service."""
    import uvicorn

    uvicorn.run("ctxbo.service:app", host=host, port=port)


@main.command()
@click.option("--url", default="http://127.0.0.1:8000")
@click.option("--trials", default=260, type=int)
@click.option("--slope", default=5.0, type=float)
@click.option("--seed", default=0, type=int)
@click.option("--rule", default="ucb-ald")
def drive(url, trials, slope, seed, rule):
    """Thin client: a simulated patient answering trials over HTTP."""
    import httpx

    patient = PatientModel(
        true_sphere=0.0,
        true_cylinder=0.0,
        slope=slope,
        rng=np.random.default_rng(np.random.SeedSequence((seed, 1))),
    )
    truth_rng = np.random.default_rng(np.random.SeedSequence((seed, 2)))
    truth = truth_rng.uniform(-2.0, 2.0, size=2)
    patient.true_sphere, patient.true_cylinder = float(truth[0]), float(truth[1])

    with httpx.Client(base_url=url, timeout=120.0) as client:
        created = client.post(
            "/sessions",
            json={"rule": rule, "iterations": trials, "seed": seed, "slope": slope},
        )
        created.raise_for_status()
        session_id = created.json()["id"]
        trial = client.get(f"/sessions/{session_id}/trial").json()
        while not trial.get("done", False):
            c = patient.respond(trial["s"], np.array(trial["x"]))
            reply = client.post(
                f"/sessions/{session_id}/response",
                json={"c": c, "iteration": trial["iteration"]},
            )
            reply.raise_for_status()
            trial = reply.json()
        estimate = client.get(f"/sessions/{session_id}/estimate").json()
        click.echo(json.dumps(estimate["x_hat"]))
        click.echo(
            f"true correction: [{patient.true_sphere:.4f}, {patient.true_cylinder:.4f}]"
        )


if __name__ == "__main__":
    sys.exit(main())
