"""
Output Writer Module
Writes the run directory: diagnostics CSV, plain-text snapshots, run summary,
metadata sidecar and the state dump of an aborted run
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from processors.diagnostics import BalanceReport, DiagnosticsRecord
from processors.spectral import GridFunction
from shared.exceptions import OutputError

logger = logging.getLogger(__name__)

DIAGNOSTICS_FILE = 'diagnostics.csv'
SUMMARY_FILE = 'summary.json'
METADATA_FILE = 'metadata.json'
ABORT_FILE = 'abort_state.txt'
SNAPSHOT_DIR = 'snapshots'
FLOAT_FORMAT = '%.17e'

COLUMN_UNITS = {
    't': ('time', 'simulation time'),
    'sup_f': ('length', 'max_x f'),
    'inf_f': ('length', 'min_x f'),
    'sup_slope': ('1', '||f_x||_inf'),
    'l2_sq': ('length^3', '||f||_2^2 = int f^2 dx'),
    'l1': ('length^2', '||f||_{L1} = int |f| dx'),
    'wiener1': ('1', 'Wiener norm ||f||_1 = sum |xi| |f_hat|'),
    'wiener2d': ('length^-(1+delta)', 'Wiener norm ||f||_{2+delta}'),
    'dissipation': ('length^2', 'D = int int ln(1 + (D_alpha f)^2) dx dalpha (NaN when not tracked)'),
    'mean': ('length', 'average of f over the torus'),
    'balance_lhs': ('length^3', '||f||^2(t) + (rho/pi) int_0^t D ds'),
    'balance_rhs': ('length^3', '||f0||^2'),
    'balance_residual': ('length^3', 'balance_lhs - balance_rhs'),
    'balance_relative_residual': ('1', 'balance_residual / balance_rhs'),
}


def diagnostics_frame(records: Sequence[DiagnosticsRecord], balance: Optional[Sequence[BalanceReport]] = None) -> pd.DataFrame:
    """One row per snapshot: the record fields followed by the balance fields"""
    frame = pd.DataFrame([record.to_dict() for record in records])
    if balance is not None and len(balance) != len(records):
        raise OutputError(f"Balance series has {len(balance)} rows, diagnostics {len(records)}")
    for name in ('lhs', 'rhs', 'residual', 'relative_residual'):
        column = [getattr(report, name) for report in balance] if balance is not None else [math.nan] * len(records)
        frame[f'balance_{name}'] = column
    return frame


class OutputWriter:
    """Writer bound to one run directory"""

    def __init__(self, run_dir):
        self.run_dir = Path(run_dir)

    def prepare(self) -> Path:
        try:
            self.run_dir.mkdir(parents=True, exist_ok=True)
            (self.run_dir / SNAPSHOT_DIR).mkdir(exist_ok=True)
        except OSError as e:
            raise OutputError(f"Cannot create run directory {self.run_dir}: {e}") from e
        logger.info(f"Writing outputs to {self.run_dir}")
        return self.run_dir

    def write_diagnostics(
        self, records: Sequence[DiagnosticsRecord], balance: Optional[Sequence[BalanceReport]] = None
    ) -> Path:
        """
        Write the diagnostics series as CSV

        Every column is declared in '#' header lines with its unit before the header row.

        Args:
            records: Diagnostics records, one per snapshot
            balance: Energy-balance reports at the same snapshots, or None

        Returns:
            Path: the CSV file
        """
        frame = diagnostics_frame(records, balance)
        path = self.run_dir / DIAGNOSTICS_FILE
        try:
            with open(path, 'w', newline='') as handle:
                for column in frame.columns:
                    unit, meaning = COLUMN_UNITS[column]
                    handle.write(f"# {column} [{unit}]: {meaning}\n")
                frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT)
        except OSError as e:
            raise OutputError(f"Cannot write {path}: {e}") from e
        logger.info(f"Wrote {len(frame)} diagnostics rows to {path.name}")
        return path

    def write_snapshots(self, times: Sequence[float], states: Sequence[GridFunction]) -> List[Path]:
        """One two-column (x, f) text file per stored state"""
        paths = []
        for index, (t, state) in enumerate(zip(times, states)):
            path = self.run_dir / SNAPSHOT_DIR / f'snapshot_{index:05d}.txt'
            self._write_state(path, state, f"t = {float(t):.17e}")
            paths.append(path)
        logger.info(f"Wrote {len(paths)} snapshots")
        return paths

    def write_state_dump(self, state: GridFunction, t: float) -> Path:
        path = self.run_dir / ABORT_FILE
        self._write_state(path, state, f"last finite state, t = {float(t):.17e}")
        logger.info(f"Dumped last finite state to {path}")
        return path

    def _write_state(self, path: Path, state: GridFunction, comment: str):
        try:
            np.savetxt(
                path,
                np.column_stack([state.spec.x, state.values]),
                fmt=FLOAT_FORMAT,
                delimiter=',',
                header=f"{comment}\nx,f",
            )
        except OSError as e:
            raise OutputError(f"Cannot write {path}: {e}") from e

    def write_summary(self, summary: Dict[str, Any]) -> Path:
        """Deterministic run summary; no timestamps"""
        return self._write_json(self.run_dir / SUMMARY_FILE, summary)

    def write_metadata(self, metadata: Dict[str, Any]) -> Path:
        """Sidecar for everything time-dependent: timestamps, durations, config hash"""
        return self._write_json(self.run_dir / METADATA_FILE, metadata)

    def _write_json(self, path: Path, payload: Dict[str, Any]) -> Path:
        try:
            path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + '\n')
        except (OSError, TypeError) as e:
            raise OutputError(f"Cannot write {path}: {e}") from e
        return path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def read_diagnostics(run_dir) -> pd.DataFrame:
    path = Path(run_dir) / DIAGNOSTICS_FILE
    if not path.is_file():
        raise OutputError(f"No diagnostics file in {run_dir}")
    return pd.read_csv(path, comment='#', float_precision='round_trip')


def read_snapshots(run_dir) -> List[np.ndarray]:
    """(x, f) arrays of every snapshot file, in time order"""
    paths = sorted((Path(run_dir) / SNAPSHOT_DIR).glob('snapshot_*.txt'))
    return [np.loadtxt(path, delimiter=',', ndmin=2) for path in paths]
