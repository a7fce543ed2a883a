"""
Run Processor Class
Orchestrates one simulation run: initial data, time integration, post-run
diagnostics and the run directory
"""
import logging
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

from processors.diagnostics import (
    BalanceReport,
    DiagnosticsRecord,
    SeparableBump,
    compute_record,
    default_test_function,
    energy_balance,
    maximum_principle_monitor,
    weak_form_functionals,
    weak_form_residual,
    wiener_decay_monitor,
)
from processors.initdata import build_profile, describe_profile, mollification_report, mollify_approx
from processors.output_writer import OutputWriter
from processors.plotting import plot_run
from processors.spectral import GridFunction
from processors.timestepping import Trajectory, simulate
from processors.verification import CheckResult, run_battery
from shared.config import Config
from shared.exceptions import MuskatError, SimulationAbortedError
from shared.utils import format_duration, generate_hash

logger = logging.getLogger(__name__)

TOTAL_STEPS = 6


@dataclass
class RunResult:
    run_dir: Path
    trajectory: Trajectory
    records: List[DiagnosticsRecord]
    balance: Optional[List[BalanceReport]]
    summary: Dict[str, Any]
    durations: Dict[str, float] = field(default_factory=dict)

    @property
    def healthy(self) -> bool:
        return bool(self.summary.get('monitors_ok', True))


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


class RunProcessor:
    """Main simulation orchestrator"""

    def __init__(self, run_config):
        self.run_config = run_config
        self.config_hash = generate_hash(run_config.source_text)
        self.run_dir = run_config.output_directory()
        self.writer = OutputWriter(self.run_dir)
        self.durations: Dict[str, float] = {}

    def build_initial_data(self) -> GridFunction:
        rc = self.run_config
        f0 = build_profile(rc.profile, rc.grid)
        if rc.mollify_eps is not None:
            report = mollification_report(f0, rc.mollify_eps)
            logger.info(
                f"Mollified initial data at eps = {rc.mollify_eps:g}: sup {report.sup_before:.6g} -> "
                f"{report.sup_after:.6g}, slope {report.slope_before:.6g} -> {report.slope_after:.6g}"
            )
            f0 = mollify_approx(f0, rc.mollify_eps)
        return f0

    def process(self) -> RunResult:
        """
        Run the configured simulation and write the run directory

        Returns:
            RunResult: trajectory, diagnostics and the summary written to disk

        Raises:
            SimulationAbortedError: After the last finite state has been dumped
            OutputError: If the run directory cannot be written
        """
        rc = self.run_config
        started_at = _timestamp()
        start_time = time.time()

        logger.info(f"STEP 1/{TOTAL_STEPS}: Building initial data ({rc.profile.kind.value})")
        f0 = self._timed('initial_data', self.build_initial_data)

        logger.info(f"STEP 2/{TOTAL_STEPS}: Preparing run directory {self.run_dir}")
        self.writer.prepare()

        logger.info(
            f"STEP 3/{TOTAL_STEPS}: Integrating {rc.form.value} form to t = {rc.stepper.t_final} "
            f"with {rc.stepper.scheme.value}"
        )
        eta = default_test_function(rc.stepper.t_final, rc.grid.half_period)
        functionals = None
        if self._weak_form_wanted():
            functionals = weak_form_functionals(eta, rc.grid, rc.physics, rc.quadrature)
        try:
            traj, records = self._timed('simulation', lambda: simulate(
                f0,
                rc.physics,
                rc.regularization,
                rc.stepper,
                rc.quadrature,
                rc.cadence,
                form=rc.form,
                wiener_delta=rc.wiener_delta,
                track_dissipation=rc.track_dissipation,
                functionals=functionals,
            ))
        except SimulationAbortedError as e:
            self._handle_abort(e, started_at, start_time)
            raise

        logger.info(f"STEP 4/{TOTAL_STEPS}: Evaluating conservation law and monitors")
        balance, summary = self._timed('diagnostics', lambda: self._post_process(f0, traj, records, eta))

        logger.info(f"STEP 5/{TOTAL_STEPS}: Writing outputs")
        self._timed('output', lambda: self._write(traj, records, balance, summary))

        if rc.write_plots:
            logger.info(f"STEP 6/{TOTAL_STEPS}: Rendering plots")
            self._timed('plots', lambda: plot_run(self.run_dir))
        else:
            logger.info(f"STEP 6/{TOTAL_STEPS}: Plots disabled")

        total = time.time() - start_time
        self.writer.write_metadata(self._metadata('completed', started_at, total))
        logger.info(f"Run completed in {format_duration(total)}")
        logger.info(f"   - Snapshots: {len(traj)}")
        logger.info(f"   - Final sup norm: {traj.final.sup_norm():.6g}")
        logger.info(f"   - Monitors: {'ok' if summary['monitors_ok'] else 'VIOLATED'}")
        return RunResult(self.run_dir, traj, records, balance, summary, dict(self.durations))

    def verify(self) -> List[CheckResult]:
        """Run the cross-validation battery on the configured initial data"""
        rc = self.run_config
        logger.info(f"STEP 1/2: Building initial data ({rc.profile.kind.value})")
        f0 = self.build_initial_data()
        logger.info("STEP 2/2: Running verification battery")
        return run_battery(
            f0,
            rc.physics,
            rc.quadrature,
            rc.stepper,
            rc.regularization,
            cadence=rc.cadence,
            wiener_delta=rc.wiener_delta,
            slack=rc.slack,
            weak_form=rc.weak_form,
        )

    def _timed(self, name: str, func):
        started = time.time()
        try:
            return func()
        finally:
            self.durations[name] = time.time() - started
            logger.debug(f"{name} took {format_duration(self.durations[name])}")

    def _weak_form_wanted(self) -> bool:
        return self.run_config.weak_form and self.run_config.regularization is None

    def _post_process(self, f0: GridFunction, traj: Trajectory, records: List[DiagnosticsRecord], eta: SeparableBump):
        rc = self.run_config
        balance = None
        if rc.track_dissipation and rc.regularization is None:
            balance = energy_balance(traj, rc.physics, dissipation=[record.dissipation for record in records])

        maximum = maximum_principle_monitor(traj, rc.slack)
        wiener = wiener_decay_monitor(traj, delta=rc.wiener_delta, slack=rc.slack)
        summary: Dict[str, Any] = {
            'config_hash': self.config_hash,
            'form': rc.form.value,
            'scheme': rc.stepper.scheme.value,
            'n': rc.grid.n,
            'half_period': rc.grid.half_period,
            'rho': rc.physics.rho,
            'eps': rc.regularization.eps if rc.regularization else None,
            't_final': traj.times[-1],
            'snapshots': len(traj),
            'initial': describe_profile(f0),
            'final': describe_profile(traj.final),
            'maximum_principle': {
                'sup_f': asdict(maximum.sup_f),
                'inf_f': asdict(maximum.inf_f),
                'sup_slope': asdict(maximum.sup_slope),
                'slope_stayed_below_one': maximum.slope_stayed_below_one,
                'observed_decay_rate': maximum.observed_decay_rate,
            },
            'wiener_decay': {
                'wiener1': asdict(wiener.wiener1),
                'wiener2d': asdict(wiener.wiener2d),
                'threshold': wiener.threshold,
                'c0': wiener.c0,
            },
        }
        if balance is not None:
            summary['energy_balance'] = {
                'max_abs_relative_residual': max(abs(report.relative_residual) for report in balance),
                'final': balance[-1].to_dict(),
            }
        if rc.mollify_eps is not None:
            summary['mollification'] = asdict(mollification_report(build_profile(rc.profile, rc.grid), rc.mollify_eps))
        if self._weak_form_wanted():
            try:
                summary['weak_form'] = asdict(weak_form_residual(traj, eta, rc.physics, rc.quadrature))
            except MuskatError as e:
                logger.warning(f"Weak-form residual skipped: {e}")
        summary['monitors_ok'] = maximum.ok and wiener.ok
        return balance, summary

    def _write(self, traj: Trajectory, records, balance, summary):
        rc = self.run_config
        self.writer.write_diagnostics(records, balance)
        if rc.write_snapshots:
            self.writer.write_snapshots(traj.times, traj.states)
        self.writer.write_summary(summary)

    def _handle_abort(self, error: SimulationAbortedError, started_at: str, start_time: float):
        logger.error(f"Simulation aborted: {error}")
        try:
            if error.state is not None:
                self.writer.write_state_dump(error.state, error.t)
            if error.trajectory is not None:
                self.writer.write_diagnostics(self._records_of(error.trajectory))
            metadata = self._metadata('aborted', started_at, time.time() - start_time)
            metadata['abort'] = {'t': error.t, 'message': str(error)}
            self.writer.write_metadata(metadata)
        except MuskatError as write_error:
            logger.warning(f"Failed to write abort outputs: {write_error}")

    def _records_of(self, traj: Trajectory) -> List[DiagnosticsRecord]:
        rc = self.run_config
        return [
            compute_record(state, t, rc.quadrature, rc.wiener_delta, with_dissipation=False)
            for t, state in zip(traj.times, traj.states)
        ]

    def _metadata(self, status: str, started_at: str, total: float) -> Dict[str, Any]:
        return {
            'status': status,
            'started_at': started_at,
            'finished_at': _timestamp(),
            'config_hash': self.config_hash,
            'config_path': self.run_config.source_path,
            'environment': Config().to_dict(),
            'durations': {name: round(value, 6) for name, value in self.durations.items()},
            'total_duration': round(total, 6),
            'total_duration_human': format_duration(total),
        }
