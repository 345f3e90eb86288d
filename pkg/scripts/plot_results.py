#!/usr/bin/env python3
"""Plot sources, observations and aligned components of one seed directory"""
import sys
from pathlib import Path

import click
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from core.experiment import OBSERVATIONS_FILE, SOURCES_FILE, find_seed_dirs  # noqa: E402
from evaluation.metrics import display_name  # noqa: E402
from output.csv_exporter import CSVExporter  # noqa: E402
from synthesis.signals import read_signals, zscore_rows  # noqa: E402


def plot_seed(seed_dir: Path, out_file: Path, dpi: int) -> None:
    sources, _ = read_signals(seed_dir / SOURCES_FILE)
    observations, _ = read_signals(seed_dir / OBSERVATIONS_FILE)
    sources = zscore_rows(sources)
    inferred = {path.stem[len("inferred_"):]: read_signals(path)[0]
                for path in sorted(seed_dir.glob("inferred_*.csv"))}

    n = sources.shape[0]
    panels = 1 + len(inferred)
    fig, axes = plt.subplots(panels + 1, n, figsize=(4 * n, 2.2 * (panels + 1)), sharex=True,
                             squeeze=False)

    for j in range(n):
        if j < observations.shape[0]:
            axes[0, j].plot(observations[j], color="grey")
            axes[0, j].set_title(f"Observation {j + 1}")
        else:
            axes[0, j].axis("off")
        axes[1, j].plot(sources[j], color="black")
        axes[1, j].set_title(f"Source {j + 1}")
    axes[0, 0].set_ylabel("mixed")
    axes[1, 0].set_ylabel("truth")

    for row, (variant, signals) in enumerate(inferred.items(), start=2):
        for j in range(n):
            axes[row, j].plot(sources[j], color="black", alpha=0.3)
            axes[row, j].plot(signals[j], color="tab:blue")
        axes[row, 0].set_ylabel(display_name(variant))

    for ax in axes[-1]:
        ax.set_xlabel("t")
    fig.tight_layout()
    fig.savefig(out_file, dpi=dpi)
    plt.close(fig)


def plot_history(seed_dir: Path, out_file: Path, dpi: int) -> bool:
    histories = sorted(seed_dir.glob("history_*.csv"))
    if not histories:
        return False
    fig, ax = plt.subplots(figsize=(8, 4))
    for path in histories:
        rows = CSVExporter().load_rows(path)
        column = rows[0].index("total")
        totals = [float(row[column]) for row in rows[1:]]
        ax.plot(totals, label=path.stem[len("history_"):])
    ax.set_yscale("symlog")
    ax.set_xlabel("epoch")
    ax.set_ylabel("total loss")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_file, dpi=dpi)
    plt.close(fig)
    return True


@click.command()
@click.argument('run_dir', type=click.Path(exists=True, file_okay=False))
@click.option('--dpi', default=150, show_default=True, help='Figure resolution')
def main(run_dir, dpi):
    """Write signals.png and history.png into every seed directory under RUN_DIR"""
    seed_dirs = find_seed_dirs(run_dir)
    if not seed_dirs:
        raise click.ClickException(f"no seed directories under {run_dir}")
    for seed_dir in seed_dirs:
        plot_seed(seed_dir, seed_dir / "signals.png", dpi)
        click.echo(str(seed_dir / "signals.png"))
        if plot_history(seed_dir, seed_dir / "history.png", dpi):
            click.echo(str(seed_dir / "history.png"))


if __name__ == '__main__':
    main()
