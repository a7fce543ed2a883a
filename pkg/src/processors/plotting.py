"""
Plotting Module
Renders a finished run directory to SVG: one figure per diagnostics column and one
overlay of the stored snapshots
"""
import logging
from pathlib import Path
from typing import List

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from processors.output_writer import COLUMN_UNITS, read_diagnostics, read_snapshots  # noqa: E402
from shared.exceptions import OutputError  # noqa: E402

logger = logging.getLogger(__name__)

PLOT_DIR = 'plots'
MAX_OVERLAID_SNAPSHOTS = 8


def _save(fig, path: Path) -> Path:
    try:
        fig.savefig(path, format='svg')
    except OSError as e:
        raise OutputError(f"Cannot write {path}: {e}") from e
    finally:
        plt.close(fig)
    return path


def plot_run(run_dir) -> List[Path]:
    """
    Convert the diagnostics CSV and snapshots of a run into SVG figures

    Args:
        run_dir: Run directory written by a simulation

    Returns:
        list: paths of the written figures
    """
    run_dir = Path(run_dir)
    frame = read_diagnostics(run_dir)
    out = run_dir / PLOT_DIR
    out.mkdir(exist_ok=True)
    written = []

    for column in frame.columns:
        if column == 't' or frame[column].isna().all():
            continue
        unit, meaning = COLUMN_UNITS.get(column, ('', column))
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(frame['t'], frame[column], marker='.', linewidth=1)
        ax.set_xlabel('t')
        ax.set_ylabel(f"{column} [{unit}]")
        ax.set_title(meaning, fontsize=9)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        written.append(_save(fig, out / f'{column}.svg'))

    snapshots = read_snapshots(run_dir)
    if snapshots:
        picks = np.unique(np.linspace(0, len(snapshots) - 1, min(len(snapshots), MAX_OVERLAID_SNAPSHOTS)).astype(int))
        times = frame['t'].to_numpy()
        fig, ax = plt.subplots(figsize=(7, 4))
        for index in picks:
            data = snapshots[index]
            label = f"t = {times[index]:.3g}" if index < times.size else f"#{index}"
            ax.plot(data[:, 0], data[:, 1], linewidth=1, label=label)
        ax.set_xlabel('x')
        ax.set_ylabel('f')
        ax.legend(fontsize=7)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        written.append(_save(fig, out / 'snapshots.svg'))

    logger.info(f"Wrote {len(written)} figures to {out}")
    return written
