"""
Run Configuration Loader
Parses INI run files into a validated RunConfig; every error names the offending line
"""
import configparser
import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from processors.contour import PhysParams, RegularizationParams, RhsForm
from processors.initdata import ProfileKind, ProfileSpec
from processors.quadrature import QuadratureConfig, QuadratureRule
from processors.spectral import GridSpec
from processors.timestepping import Scheme, StepperConfig
from shared.config import Config
from shared.exceptions import ConfigurationError, InvalidParameterError, UnstableConfigurationError
from shared.utils import parse_real

logger = logging.getLogger(__name__)

_SECTION_LINE = re.compile(r'^\s*\[(?P<name>[^\]]+)\]')
_KEY_LINE = re.compile(r'^\s*(?P<key>[^=:;#\s\[][^=:]*?)\s*[=:]')
_TRUE = {'1', 'true', 'yes', 'on'}
_FALSE = {'0', 'false', 'no', 'off'}


def _boolean(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ValueError(f"expected a boolean, got '{text}'")


def _integer(text: str) -> int:
    return int(text.strip())


def _text(text: str) -> str:
    return text.strip()


def _optional(parser: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(text: str) -> Any:
        return None if text.strip().lower() in ('', 'none') else parser(text)

    return parse


# section -> key -> (parser, default)
SCHEMA: Dict[str, Dict[str, Tuple[Callable[[str], Any], Any]]] = {
    'grid': {
        'n': (_integer, 512),
        'half_period': (parse_real, 16.0 * np.pi),
    },
    'physics': {
        'rho1': (parse_real, 0.0),
        'rho2': (parse_real, 2.0 * np.pi),
    },
    'regularization': {
        'enabled': (_boolean, False),
        'eps': (parse_real, 0.1),
        'big_c': (_optional(parse_real), None),
    },
    'stepper': {
        'scheme': (_text, Scheme.INTEGRATING_FACTOR_RK4.value),
        'form': (_optional(_text), None),
        'cfl': (parse_real, 0.5),
        'dt_max': (parse_real, 1e-2),
        't_final': (parse_real, 1.0),
        'fixed_dt': (_optional(parse_real), None),
    },
    'quadrature': {
        'alpha_points': (_optional(_integer), None),
        'tail_cut': (_optional(parse_real), None),
        'rule': (_text, QuadratureRule.TRAPEZOID.value),
        'images': (_integer, 4),
        'workers': (_optional(_integer), None),
        'block_size': (_optional(_integer), None),
        'verify': (_boolean, False),
        'refinement_tol': (parse_real, 1e-6),
    },
    'profile': {
        'kind': (_text, ProfileKind.GAUSSIAN_BUMP.value),
        'amplitude': (parse_real, 1.0),
        'width': (parse_real, 4.0),
        'center': (parse_real, 0.0),
        'mode': (_integer, 1),
        'n_modes': (_integer, 8),
        'seed': (_integer, 0),
        'target_slope': (_optional(parse_real), None),
        'target_wiener1': (_optional(parse_real), None),
        'remove_mean': (_boolean, True),
        'samples_file': (_optional(_text), None),
        'mollify_eps': (_optional(parse_real), None),
    },
    'diagnostics': {
        'cadence': (_integer, 16),
        'wiener_delta': (parse_real, 0.1),
        'dissipation': (_boolean, True),
        'slack': (parse_real, 1e-8),
        'weak_form': (_boolean, True),
    },
    'output': {
        'name': (_text, 'run'),
        'root': (_optional(_text), None),
        'snapshots': (_boolean, True),
        'plots': (_boolean, False),
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Everything one simulate or verify invocation needs"""

    grid: GridSpec
    physics: PhysParams
    regularization: Optional[RegularizationParams]
    stepper: StepperConfig
    form: RhsForm
    quadrature: QuadratureConfig
    profile: ProfileSpec
    mollify_eps: Optional[float] = None
    cadence: int = 16
    wiener_delta: float = 0.1
    track_dissipation: bool = True
    slack: float = 1e-8
    weak_form: bool = True
    output_name: str = 'run'
    output_root: Optional[str] = None
    write_snapshots: bool = True
    write_plots: bool = False
    source_text: str = field(default='', repr=False)
    source_path: Optional[str] = None

    def output_directory(self, env: Optional[Config] = None) -> Path:
        """MUSKAT_OUTPUT_ROOT wins over [output] root, which wins over the built-in default"""
        env = env or Config()
        root = os.environ.get('MUSKAT_OUTPUT_ROOT') or self.output_root or env.get_output_root()
        return Path(root) / self.output_name


def _line_index(text: str) -> Dict[Tuple[str, Optional[str]], int]:
    index: Dict[Tuple[str, Optional[str]], int] = {}
    section = None
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in '#;':
            continue
        header = _SECTION_LINE.match(line)
        if header:
            section = header.group('name').strip()
            index.setdefault((section, None), number)
            continue
        key = _KEY_LINE.match(line)
        if key and section is not None:
            index.setdefault((section, key.group('key').strip().lower()), number)
    return index


def _read(text: str, source: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=('#', ';'))
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigurationError(f"Missing section header in {source}", line=e.lineno) from e
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ConfigurationError(f"Malformed line in {source}", line=line) from e
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as e:
        raise ConfigurationError(str(e).split(':')[-1].strip() or str(e), line=e.lineno) from e
    return parser


def _values(parser: configparser.ConfigParser, lines) -> Dict[str, Dict[str, Any]]:
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigurationError(f"Unknown section [{section}]", line=lines.get((section, None)))
        for key in parser[section]:
            if key not in SCHEMA[section]:
                raise ConfigurationError(f"Unknown key '{key}' in [{section}]", line=lines.get((section, key)))

    values: Dict[str, Dict[str, Any]] = {}
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (convert, default) in keys.items():
            if parser.has_option(section, key):
                raw = parser.get(section, key)
                try:
                    values[section][key] = convert(raw)
                except ValueError as e:
                    raise ConfigurationError(
                        f"Invalid value '{raw}' for {section}.{key}: {e}", line=lines.get((section, key))
                    ) from e
            else:
                values[section][key] = default
    return values


def _build(lines, section: str, key: Optional[str], factory: Callable[[], Any]) -> Any:
    try:
        return factory()
    except UnstableConfigurationError as e:
        raise UnstableConfigurationError(str(e), line=lines.get((section, key)) or lines.get((section, None))) from e
    except (InvalidParameterError, ValueError) as e:
        raise ConfigurationError(f"[{section}] {e}", line=lines.get((section, key)) or lines.get((section, None))) from e


def _load_samples(path_text: str, base: Path, n: int, lines) -> np.ndarray:
    path = Path(path_text)
    if not path.is_absolute():
        path = base / path
    try:
        data = np.loadtxt(path, ndmin=2)
    except OSError as e:
        raise ConfigurationError(f"Cannot read samples file {path}", line=lines.get(('profile', 'samples_file'))) from e
    samples = data[:, -1]
    if samples.size != n:
        raise ConfigurationError(
            f"Samples file {path} has {samples.size} values, grid needs {n}", line=lines.get(('profile', 'samples_file'))
        )
    return samples


def parse_config(path) -> RunConfig:
    """
    Load and validate a run configuration

    Args:
        path: INI file

    Returns:
        RunConfig: validated configuration

    Raises:
        ConfigurationError: Missing file, malformed syntax, unknown key or constraint violation
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"Config file not found: {path}")
    text = path.read_text()
    return parse_config_text(text, source=str(path), base=path.parent)


def parse_config_text(text: str, source: str = '<string>', base: Optional[Path] = None) -> RunConfig:
    """Validate configuration text; see parse_config"""
    lines = _line_index(text)
    v = _values(_read(text, source), lines)
    env = Config()
    quad_defaults = env.get_quadrature_defaults()

    grid = _build(lines, 'grid', 'n', lambda: GridSpec(v['grid']['n'], v['grid']['half_period']))
    physics = _build(lines, 'physics', 'rho2', lambda: PhysParams(v['physics']['rho1'], v['physics']['rho2']))

    regularization = None
    if v['regularization']['enabled']:
        regularization = _build(
            lines, 'regularization', 'eps',
            lambda: RegularizationParams(v['regularization']['eps'], v['regularization']['big_c']),
        )

    stepper_values = v['stepper']
    stepper = _build(lines, 'stepper', 'scheme', lambda: StepperConfig(
        scheme=Scheme(stepper_values['scheme']),
        cfl=stepper_values['cfl'],
        dt_max=stepper_values['dt_max'],
        t_final=stepper_values['t_final'],
        fixed_dt=stepper_values['fixed_dt'],
    ))
    form_text = stepper_values['form']
    if regularization is not None:
        if form_text not in (None, RhsForm.REGULARIZED.value):
            raise ConfigurationError(
                f"Form '{form_text}' conflicts with enabled regularization", line=lines.get(('stepper', 'form'))
            )
        form = RhsForm.REGULARIZED
    else:
        form = _build(lines, 'stepper', 'form', lambda: RhsForm(form_text or RhsForm.MUSKAT.value))
        if form is RhsForm.REGULARIZED:
            raise ConfigurationError(
                "Form 'regularized' needs [regularization] enabled = true", line=lines.get(('stepper', 'form'))
            )

    q = v['quadrature']
    quadrature = _build(lines, 'quadrature', 'alpha_points', lambda: QuadratureConfig(
        alpha_points=q['alpha_points'],
        tail_cut=q['tail_cut'],
        rule=QuadratureRule(q['rule']),
        images=q['images'],
        workers=q['workers'] if q['workers'] is not None else quad_defaults['workers'],
        block_size=q['block_size'] if q['block_size'] is not None else quad_defaults['block_size'],
        verify=q['verify'],
        refinement_tol=q['refinement_tol'],
    ))
    _build(lines, 'quadrature', 'tail_cut', lambda: quadrature.resolved_tail_cut(grid))

    pv = v['profile']
    samples = None
    if pv['samples_file'] is not None:
        samples = _load_samples(pv['samples_file'], base or Path('.'), grid.n, lines)
    profile = _build(lines, 'profile', 'kind', lambda: ProfileSpec(
        kind=ProfileKind(pv['kind']),
        amplitude=pv['amplitude'],
        width=pv['width'],
        mode=pv['mode'],
        seed=pv['seed'],
        center=pv['center'],
        n_modes=pv['n_modes'],
        target_slope=pv['target_slope'],
        target_wiener1=pv['target_wiener1'],
        remove_mean=pv['remove_mean'],
        samples=tuple(samples) if samples is not None else None,
    ))
    if pv['mollify_eps'] is not None and not pv['mollify_eps'] > 0:
        raise ConfigurationError("mollify_eps must be positive", line=lines.get(('profile', 'mollify_eps')))

    d = v['diagnostics']
    if d['cadence'] < 1:
        raise ConfigurationError("cadence must be positive", line=lines.get(('diagnostics', 'cadence')))
    if d['wiener_delta'] < 0:
        raise ConfigurationError("wiener_delta must be nonnegative", line=lines.get(('diagnostics', 'wiener_delta')))

    o = v['output']
    if not o['name'] or '/' in o['name']:
        raise ConfigurationError("output name must be a plain directory name", line=lines.get(('output', 'name')))

    run_config = RunConfig(
        grid=grid,
        physics=physics,
        regularization=regularization,
        stepper=stepper,
        form=form,
        quadrature=quadrature,
        profile=profile,
        mollify_eps=pv['mollify_eps'],
        cadence=d['cadence'],
        wiener_delta=d['wiener_delta'],
        track_dissipation=d['dissipation'],
        slack=d['slack'],
        weak_form=d['weak_form'],
        output_name=o['name'],
        output_root=o['root'],
        write_snapshots=o['snapshots'],
        write_plots=o['plots'],
        source_text=text,
        source_path=source,
    )
    logger.info(f"Loaded run configuration from {source}: N = {grid.n}, L = {grid.half_period:.6g}, form {form.value}")
    return run_config
