"""
CLI Handler Class
Implements the simulate, constants, verify and plot commands and maps their outcomes to exit codes
"""
import json
import logging
import traceback
from pathlib import Path
from typing import List, Optional

import pandas as pd

from handlers.run_config import RunConfig, parse_config
from processors.constants import verify_claims
from processors.plotting import plot_run
from processors.run_processor import RunProcessor
from processors.verification import CheckResult
from shared.exceptions import (
    ConfigurationError,
    ConstantsMismatchError,
    MuskatError,
    SimulationAbortedError,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_ABORTED = 2


class CLIHandler:
    """Handles command-line requests for the simulator"""

    def __init__(self, echo=print):
        self.echo = echo

    def cmd_simulate(self, config_path) -> int:
        """
        Run a simulation from a config file

        Args:
            config_path: INI run configuration

        Returns:
            int: 0 on a clean finish, 1 on bad configuration or output failure, 2 on abort
        """
        run_config = self._load(config_path)
        if run_config is None:
            return EXIT_FAILURE
        try:
            result = RunProcessor(run_config).process()
        except SimulationAbortedError as e:
            self.echo(f"Simulation aborted at t = {e.t:.6g}: {e}")
            return EXIT_ABORTED
        except MuskatError as e:
            return self._fail("Simulation failed", e)

        self.echo(f"Run written to {result.run_dir}")
        if not result.healthy:
            logger.warning("Monitors reported violations; see summary.json")
        return EXIT_OK

    def cmd_constants(self, delta: float = 0.0, tol: float = 1e-15) -> int:
        """Print the constants report; nonzero exit if a reference value is not reproduced"""
        try:
            report = verify_claims(delta, tol)
        except ConstantsMismatchError as e:
            return self._fail("Constants not reproduced", e)
        except MuskatError as e:
            return self._fail("Invalid constants request", e)
        self.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))
        return EXIT_OK

    def cmd_verify(self, config_path) -> int:
        """Run the verification battery and print a pass/fail table"""
        run_config = self._load(config_path)
        if run_config is None:
            return EXIT_FAILURE
        try:
            results = RunProcessor(run_config).verify()
        except MuskatError as e:
            return self._fail("Verification could not run", e)
        except Exception as e:
            logger.exception("Verification crashed")
            return self._fail("Verification crashed", e)
        self.echo(format_table(results))
        failed = [result for result in results if not result.passed]
        if failed:
            self.echo(f"{len(failed)} check(s) failed")
            return EXIT_FAILURE
        self.echo(f"All {len(results)} checks passed")
        return EXIT_OK

    def cmd_plot(self, run_dir) -> int:
        """Render the diagnostics of a finished run to SVG"""
        if not Path(run_dir).is_dir():
            self.echo(f"Run directory not found: {run_dir}")
            return EXIT_FAILURE
        try:
            paths = plot_run(run_dir)
        except MuskatError as e:
            return self._fail("Plotting failed", e)
        self.echo(f"Wrote {len(paths)} figures")
        return EXIT_OK

    def _load(self, config_path) -> Optional[RunConfig]:
        try:
            return parse_config(config_path)
        except ConfigurationError as e:
            self._fail("Invalid configuration", e)
            return None

    def _fail(self, summary: str, error: Exception) -> int:
        logger.error(f"{summary}: {error}")
        logger.debug(f"Traceback: {traceback.format_exc()}")
        self.echo(f"{summary}: {error}")
        return EXIT_FAILURE


def format_table(results: List[CheckResult]) -> str:
    """Pass/fail table of a verification battery"""
    frame = pd.DataFrame([
        {
            'check': result.name,
            'status': 'SKIP' if result.skipped else ('PASS' if result.passed else 'FAIL'),
            'value': f"{result.value:.3e}",
            'threshold': f"{result.threshold:.3e}",
            'detail': result.detail,
        }
        for result in results
    ])
    return frame.to_string(index=False)
