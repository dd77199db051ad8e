"""Command-line entry point."""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import click

from mobisearch import settings
from mobisearch.core import PipelineHandler
from mobisearch.utils.errors import exit_code_for
from mobisearch.utils.logging import setup_logging

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]
LOG_FILE = "mobisearch.log"


@dataclass(slots=True)
class RunContext:
    seed: int | None
    config: Path | None
    jobs: int


def _emit(envelope: dict[str, Any]) -> None:
    click.echo(json.dumps(envelope, sort_keys=True, ensure_ascii=False, default=str))
    sys.exit(exit_code_for(envelope))


def _present(**values: Any) -> dict[str, Any]:
    """Flag values the user actually gave."""
    return {key: value for key, value in values.items() if value is not None}


@click.group()
@click.option("--seed", type=int, default=None, help="Run seed; all randomness derives from it")
@click.option(
    "--config",
    "config_path",
    type=click.Path(path_type=Path),
    default=None,
    help="KEY=VALUE hyperparameter file",
)
@click.option("--jobs", type=click.IntRange(min=1), default=1, help="Maximum worker threads")
@click.option(
    "--log-level",
    default="INFO",
    type=click.Choice(LOG_LEVELS, case_sensitive=False),
    help="Log level",
)
@click.option(
    "--output-root",
    type=click.Path(path_type=Path),
    default=None,
    help="Root for relative output paths (overrides MOBISEARCH_OUTPUT_ROOT)",
)
@click.option("--log-file", is_flag=True, help="Also write logs under the output root")
@click.pass_context
def cli(
    ctx: click.Context,
    seed: int | None,
    config_path: Path | None,
    jobs: int,
    log_level: str,
    output_root: Path | None,
    log_file: bool,
) -> None:
    """Target app selection and next-app recommendation for mobile search."""
    if output_root is not None:
        settings._settings_override["output_root"] = output_root
    else:
        settings._settings_override.pop("output_root", None)
    log_path = settings.get_settings().output_root / LOG_FILE if log_file else None
    setup_logging(log_level, log_path)
    ctx.obj = RunContext(seed=seed, config=config_path, jobs=jobs)


@cli.command()
@click.option("--data-dir", required=True, type=click.Path(path_type=Path), help="Directory with the raw TSV files")
@click.option("--out-dir", required=True, type=click.Path(path_type=Path), help="Output directory")
@click.option("--top-apps", type=int, default=None, help="Keep only the N most used apps")
@click.option("--allow-errors", is_flag=True, help="Skip malformed lines")
def ingest(data_dir: Path, out_dir: Path, top_apps: int | None, allow_errors: bool) -> None:
    """Validate and normalize TSV logs."""
    _emit(
        PipelineHandler().handle_ingest(
            {
                "data_dir": data_dir,
                "out_dir": out_dir,
                "top_apps": top_apps,
                "allow_errors": allow_errors,
            }
        )
    )


@cli.command()
@click.option("--data-dir", required=True, type=click.Path(path_type=Path))
@click.option("--out-dir", required=True, type=click.Path(path_type=Path))
@click.option(
    "--strategy",
    required=True,
    type=click.Choice(["istas_r", "istas_t", "lsapp"]),
    help="Split strategy",
)
@click.option("--repeats", type=click.IntRange(min=1), default=1, help="Repeats of the random split")
@click.pass_obj
def split(run: RunContext, data_dir: Path, out_dir: Path, strategy: str, repeats: int) -> None:
    """Write train/validation/test split files."""
    _emit(
        PipelineHandler().handle_split(
            {
                "data_dir": data_dir,
                "out_dir": out_dir,
                "strategy": strategy,
                "seed": run.seed or 0,
                "repeats": repeats,
                "jobs": run.jobs,
            }
        )
    )


@cli.command()
@click.option("--model", required=True, type=click.Choice(["cntas", "neusa"]))
@click.option("--data-dir", required=True, type=click.Path(path_type=Path))
@click.option("--split", "split_path", required=True, type=click.Path(path_type=Path))
@click.option("--out-dir", required=True, type=click.Path(path_type=Path))
@click.option("--d", "d", type=int, default=None, help="Embedding dimension")
@click.option("--hidden", type=str, default=None, help="Widths of the two hidden layers, e.g. 128,64")
@click.option("--lr", type=float, default=None)
@click.option("--batch", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--dropout", type=float, default=None)
@click.option("--optimizer", type=click.Choice(["sgd", "adam"]), default=None)
@click.option("--negatives", type=int, default=None, help="cntas: negatives per positive")
@click.option("--loss", type=click.Choice(["pointwise", "pairwise"]), default=None)
@click.option("--context/--no-context", "use_context", default=None, help="cntas: use the usage context")
@click.option("--k", "k", type=int, default=None, help="neusa: window length")
@click.option("--h", "h", type=int, default=None, help="neusa: LSTM hidden size")
@click.option("--user/--no-user", "use_user", default=None, help="neusa: user embedding")
@click.option("--time/--no-time", "use_time", default=None, help="neusa: time-bin embedding")
@click.option(
    "--bin-usage/--no-bin-usage",
    "bin_usage_feature",
    default=None,
    help="neusa: bin-conditioned usage embedding",
)
@click.option("--sweep", type=str, default=None, help="Comma-separated negatives counts or window lengths")
@click.option("--ablations", is_flag=True, help="neusa: train every ablation preset")
@click.pass_obj
def train(
    run: RunContext,
    model: str,
    data_dir: Path,
    split_path: Path,
    out_dir: Path,
    sweep: str | None,
    ablations: bool,
    **hyperparameters: Any,
) -> None:
    """Train a cntas or neusa model and save a checkpoint."""
    overrides = _present(seed=run.seed, **hyperparameters)
    _emit(
        PipelineHandler().handle_train(
            {
                "model": model,
                "data_dir": data_dir,
                "split_path": split_path,
                "out_dir": out_dir,
                "config_file": run.config,
                "config": overrides,
                "sweep": sweep or (),
                "ablations": ablations,
                "jobs": run.jobs,
            }
        )
    )


@cli.command(name="eval")
@click.option("--task", required=True, type=click.Choice(["selection", "recommendation"]))
@click.option("--data-dir", type=click.Path(path_type=Path), default=None)
@click.option("--split", "split_path", type=click.Path(path_type=Path), default=None)
@click.option("--out-dir", required=True, type=click.Path(path_type=Path))
@click.option("--checkpoint", "checkpoints", multiple=True, type=click.Path(path_type=Path))
@click.option("--baseline", "baselines", multiple=True, help="e.g. mfu, bm25, knn-cr, mru")
@click.option("--predictions", type=click.Path(path_type=Path), default=None)
@click.option("--oracle", is_flag=True, help="Score the Bayes-optimal ranking of a synthetic dataset")
@click.option("--embeddings", type=click.Path(path_type=Path), default=None)
@click.option("--alpha", type=float, default=None, help="Significance level")
@click.pass_obj
def evaluate(
    run: RunContext,
    task: str,
    data_dir: Path | None,
    split_path: Path | None,
    out_dir: Path,
    checkpoints: tuple[Path, ...],
    baselines: tuple[str, ...],
    predictions: Path | None,
    oracle: bool,
    embeddings: Path | None,
    alpha: float | None,
) -> None:
    """Evaluate checkpoints, baselines, external predictions or the oracle."""
    _emit(
        PipelineHandler().handle_eval(
            {
                "task": task,
                "data_dir": data_dir,
                "split_path": split_path,
                "out_dir": out_dir,
                "checkpoints": list(checkpoints),
                "baselines": list(baselines),
                "predictions": predictions,
                "oracle": oracle,
                "embeddings": embeddings,
                "alpha": alpha,
                "seed": run.seed or 0,
            }
        )
    )


@cli.command()
@click.option("--data-dir", required=True, type=click.Path(path_type=Path))
@click.option("--out-dir", required=True, type=click.Path(path_type=Path))
@click.option("--threshold", type=float, default=0.05, help="Edge threshold of the transition graph")
@click.option("--max-rank", type=int, default=10)
@click.option("--top-n", type=int, default=10)
def analyze(data_dir: Path, out_dir: Path, threshold: float, max_rank: int, top_n: int) -> None:
    """Write analysis reports over query and usage logs."""
    _emit(
        PipelineHandler().handle_analyze(
            {
                "data_dir": data_dir,
                "out_dir": out_dir,
                "threshold": threshold,
                "max_rank": max_rank,
                "top_n": top_n,
            }
        )
    )


@cli.command()
@click.option("--out-dir", required=True, type=click.Path(path_type=Path))
@click.option("--num-users", type=int, default=None)
@click.option("--num-apps", type=int, default=None)
@click.option("--events-per-user", type=int, default=None)
@click.option("--chain", type=click.Choice(["dirichlet", "cycle", "uniform"]), default=None)
@click.option("--order", type=click.Choice(["1", "3"]), default=None)
@click.option("--user-specific-chains/--shared-chain", default=None)
@click.option("--bin-preference-strength", type=float, default=None)
@click.option("--queries-per-user", type=int, default=None)
@click.option("--mixing", type=float, default=None)
@click.option("--context-correlation", type=float, default=None)
@click.pass_obj
def synth(run: RunContext, out_dir: Path, **knobs: Any) -> None:
    """Generate a synthetic dataset with a known generating process."""
    _emit(
        PipelineHandler().handle_synth(
            {
                "out_dir": out_dir,
                "config_file": run.config,
                "spec": _present(seed=run.seed, **knobs),
            }
        )
    )


@cli.command()
@click.option("--checkpoint", required=True, type=click.Path(path_type=Path))
@click.option("--data-dir", required=True, type=click.Path(path_type=Path))
@click.option("--user", "user_id", required=True)
@click.option("--timestamp", required=True, type=int)
@click.option("--query", default=None, help="Query text, required by selection checkpoints")
@click.option("--top-k", type=int, default=10)
def predict(
    checkpoint: Path,
    data_dir: Path,
    user_id: str,
    timestamp: int,
    query: str | None,
    top_k: int,
) -> None:
    """Rank apps for an ad-hoc input with a checkpoint."""
    _emit(
        PipelineHandler().handle_predict(
            {
                "checkpoint": checkpoint,
                "data_dir": data_dir,
                "user_id": user_id,
                "timestamp": timestamp,
                "query": query,
                "top_k": top_k,
            }
        )
    )


if __name__ == "__main__":
    cli()
