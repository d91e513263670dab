import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, NamedTuple, Optional

from deepdiff import DeepDiff
from docstring_parser import parse
from dotenv import load_dotenv
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table
from rich.text import Text

from fedcluster.config import parse_config
from fedcluster.util.errors import ConfigError, FedClusterError

THREADS_ENV = "FEDCLUSTER_THREADS"
SUMMARY_NAME = "summary.json"

console = Console()
error_console = Console(stderr=True)


class CompareRow(NamedTuple):
    method: str
    top_accuracy: Optional[float]
    transmissions: int
    rounds: int
    config_delta: List[str]


def _env_threads() -> int:
    """Worker count from $FEDCLUSTER_THREADS, or 0 when unset."""
    raw = os.getenv(THREADS_ENV, "").strip()
    if not raw:
        return 0
    try:
        threads = int(raw)
    except ValueError:
        threads = 0
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}.")
    return threads


def cmd_run(
    config_path,
    out: Optional[str] = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    progress: bool = False,
) -> int:
    """
    Run one simulation and write its per-round metrics and summary.

    Metrics go to <out>/metrics.jsonl, one RoundRecord per line, and the summary to
    <out>/summary.json. Both are byte-identical across runs with the same config and seed.
    """
    from fedcluster.messages import RoundOutput
    from fedcluster.simulation import method_label, run_simulation
    from fedcluster.util.metrics import write_metrics, write_summary

    config = parse_config(config_path)
    updates = {}
    if seed is not None:
        updates["seed"] = seed
    if out:
        updates["output"] = {**config.output.model_dump(), "dir": out}
    if updates:
        config = config.model_validate(config.model_dump() | updates)

    threads = threads or _env_threads() or config.threads
    method = method_label(config)
    on_round = (lambda record: RoundOutput(method, record).cprint()) if progress else None

    records, summary = run_simulation(config, threads=threads, on_round=on_round)
    out_dir = Path(config.output.dir)
    write_metrics(records, out_dir / config.output.metrics_file)
    write_summary(summary, out_dir / config.output.summary_file)

    accuracy = "n/a" if summary.top_accuracy is None else f"{summary.top_accuracy:.4f}"
    console.print(
        f"{summary.method}: top_accuracy={accuracy} transmissions={summary.total_uploads} "
        f"modal_p={summary.modal_p}"
    )
    return 0


def compare_runs(metrics_paths: List[str]) -> List[CompareRow]:
    """One row per metrics file; config deltas are taken against the first run."""
    from fedcluster.util.metrics import read_metrics, read_summary

    rows = []
    base_config = None
    for path in metrics_paths:
        path = Path(path)
        records = read_metrics(path)
        summary_path = path.parent / SUMMARY_NAME
        summary = read_summary(summary_path) if summary_path.is_file() else None
        method = summary.method if summary else path.parent.name or path.stem
        config = summary.config if summary else {}

        delta = []
        if base_config is None:
            base_config = config
        elif config or base_config:
            delta = sorted(DeepDiff(base_config, config, ignore_order=True).affected_paths)

        accuracies = [r.test_accuracy for r in records if r.test_accuracy is not None]
        rows.append(
            CompareRow(
                method=method,
                top_accuracy=max(accuracies) if accuracies else None,
                transmissions=records[-1].cumulative_uploads,
                rounds=records[-1].round,
                config_delta=delta,
            )
        )
    return rows


def cmd_compare(metrics_paths: List[str]) -> int:
    """
    Tabulate top accuracy and transmission count of finished runs.
    """
    if not metrics_paths:
        error_console.print("usage: fedcluster compare <metrics.jsonl> [<metrics.jsonl> ...]")
        return 2

    table = Table(title="Runs")
    table.add_column("Method")
    table.add_column("Top accuracy", justify="right")
    table.add_column("Transmission times", justify="right")
    table.add_column("Rounds", justify="right")
    table.add_column("Config delta")
    for row in compare_runs(metrics_paths):
        accuracy = "n/a" if row.top_accuracy is None else f"{100 * row.top_accuracy:.2f}%"
        table.add_row(
            row.method, accuracy, str(row.transmissions), str(row.rounds), ", ".join(row.config_delta)
        )
    console.print(table)
    return 0


def partition_report(config) -> tuple[List[int], List[dict[int, int]]]:
    """Per-client label counts of the shards a config produces."""
    from fedcluster.simulation import load_federated_data

    shards, _, spec = load_federated_data(config)
    classes = list(range(spec.class_count))
    return classes, [shard.dataset.label_counts(classes) for shard in shards]


def cmd_partition_report(config_path) -> int:
    """
    Show how many samples of each label every client holds.
    """
    classes, rows = partition_report(parse_config(config_path))
    table = Table(title="Label distribution")
    table.add_column("Client", justify="right")
    for label in classes:
        table.add_column(str(label), justify="right")
    table.add_column("Total", justify="right")
    for client, counts in enumerate(rows):
        table.add_row(
            str(client), *(str(counts[label]) for label in classes), str(sum(counts.values()))
        )
    console.print(table)
    return 0


def _help(command) -> str:
    return parse(command.__doc__ or "").short_description or ""


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        description="Federated learning simulator with adaptive cluster-based client selection."
    )
    parser.add_argument("--verbose", action="store_true", default=False, help="Debug logging.")

    subparsers = parser.add_subparsers(dest="command", help="Commands.")
    subparsers.required = True

    # run
    run_parser = subparsers.add_parser("run", help=_help(cmd_run))
    run_parser.add_argument("--config", type=str, required=True, help="Path to the JSON config.")
    run_parser.add_argument("--out", type=str, default=None, help="Output directory.")
    run_parser.add_argument("--seed", type=int, default=None, help="Override the master seed.")
    run_parser.add_argument(
        "--threads", type=int, default=None, help="Local-training workers (default: config)."
    )
    run_parser.add_argument(
        "--progress", action="store_true", default=False, help="Print one line per round."
    )

    # compare
    compare_parser = subparsers.add_parser("compare", help=_help(cmd_compare))
    compare_parser.add_argument("metrics", nargs="+", help="metrics.jsonl files of finished runs.")

    # partition
    partition_parser = subparsers.add_parser("partition", help=_help(cmd_partition_report))
    partition_parser.add_argument("--config", type=str, required=True, help="Path to the JSON config.")

    args = parser.parse_args(argv)

    load_dotenv()
    debug = args.verbose or os.getenv("DEBUG_MODE", "").lower() in ("1", "true")
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        if args.command == "run":
            return cmd_run(args.config, args.out, args.seed, args.threads, args.progress)
        elif args.command == "compare":
            return cmd_compare(args.metrics)
        elif args.command == "partition":
            return cmd_partition_report(args.config)
    except (FedClusterError, ValidationError, OSError) as e:
        error_console.print(Text("error: ", style="red") + Text(str(e)))
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
