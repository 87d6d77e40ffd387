#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Main Application Entry Point for semidoa
Subcommands: sample, estimate, bound, simulate
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

sys.path.insert(0, str(Path(__file__).parent.parent))

from semidoa import __version__  # noqa: E402
from semidoa.array_model import build_covariance  # noqa: E402
from semidoa.bound import sscrb  # noqa: E402
from semidoa.ces import synthesize_snapshots  # noqa: E402
from semidoa.config import (ConfigManager, load_distribution, load_experiment_config,  # noqa: E402
                            load_experiment_settings, load_scene_config, read_ini)
from semidoa.estimators import estimate_all  # noqa: E402
from semidoa.exceptions import ConfigurationError, SemidoaError  # noqa: E402
from semidoa.models import (ESTIMATOR_NAMES, DensityGeneratorSpec, ExperimentResult,  # noqa: E402
                            Family, SourceScene)
from semidoa.music import estimate_doa, pseudospectrum  # noqa: E402
from semidoa.plotting import plot_experiment  # noqa: E402
from semidoa.simulation import run_experiment  # noqa: E402
from semidoa.storage import (bound_row, estimate_row, read_snapshots, write_bounds,  # noqa: E402
                             write_estimates, write_metadata, write_pseudospectrum, write_result,
                             write_snapshots)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERRUPTED = 130

DEFAULT_SNAPSHOTS = 40  # L = 5N for the reference 8-sensor scene
DEFAULT_SOURCES = 2


def _u64(value: str) -> int:
    try:
        seed = int(value, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {value!r}")
    if not 0 <= seed < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {value}")
    return seed


def _float_list(value: str) -> List[float]:
    try:
        return [float(v) for v in value.replace(',', ' ').split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {value!r}")


def _scene(config_path: Optional[str]) -> SourceScene:
    if config_path:
        return load_scene_config(config_path)
    return SourceScene.reference_scene()


def _section_param(section, family: Family) -> Optional[float]:
    """lambda or s from a [distribution] section, None when absent"""
    key = 'lambda' if family is Family.STUDENT_T else 's'
    if family is Family.GAUSSIAN or key not in section:
        return None
    try:
        return float(section[key])
    except ValueError:
        raise ConfigurationError(f"Configuration validation failed: {key} must be a number, got {section[key]!r}")


def _distribution(args) -> DensityGeneratorSpec:
    """Flags override the [distribution] section; default is Gaussian"""
    if args.family is None and args.param is None:
        return load_distribution(args.config) if args.config else DensityGeneratorSpec.gaussian()
    section = read_ini(args.config).get('distribution', {}) if args.config else {}
    family = Family.parse(args.family or section.get('family', 'gaussian'))
    value = args.param if args.param is not None else _section_param(section, family)
    if family is not Family.GAUSSIAN and value is None:
        raise ConfigurationError(f"Configuration validation failed: --param is required for family {family.value}")
    return DensityGeneratorSpec.for_sweep(family, value)


def cmd_sample(args, settings: ConfigManager) -> int:
    """Synthesize L snapshots of the configured scene and write CSV + sidecar"""
    if args.snapshots < 1:
        raise ConfigurationError(f"Configuration validation failed: snapshots (L) must be >= 1, got {args.snapshots}")
    scene = _scene(args.config)
    spec = _distribution(args)
    logger.info(f"Sampling {args.snapshots} snapshots: N={scene.n_sensors}, {spec.label}, seed={args.seed}")

    snapshots = synthesize_snapshots(build_covariance(scene), spec, args.snapshots, args.seed)
    extra = {f"scene.{k}": v for k, v in scene.to_dict().items()}
    write_snapshots(snapshots, args.out, extra)
    return EXIT_OK


def cmd_estimate(args, settings: ConfigManager) -> int:
    """Estimate spatial frequencies from a snapshot file; one CSV row per estimator on stdout"""
    snapshots = read_snapshots(args.snapshots)
    n = snapshots.n_sensors
    k = args.sources
    if not 1 <= k < n:
        raise ConfigurationError(f"Configuration validation failed: sources K={k} must satisfy 1 <= K < N={n}")
    if snapshots.n_snapshots < n:
        raise ConfigurationError(
            f"Configuration validation failed: snapshot file has L={snapshots.n_snapshots} < N={n} snapshots"
        )
    grid_size = args.grid_size or settings.get_nested('numerics', 'grid_size', default=4096)
    names = ESTIMATOR_NAMES if args.estimator == 'all' else (args.estimator,)
    value_cap = float(settings.get_nested('numerics', 'value_cap', default=1e12))

    shapes = estimate_all(snapshots, names,
                          settings.get_nested('numerics', 'tyler_tol', default=1e-9),
                          settings.get_nested('numerics', 'tyler_max_iter', default=500))
    rows = []
    for name in names:
        shape = shapes[name]
        if isinstance(shape, Exception):
            logger.warning(f"{name} estimator failed: {shape}")
            rows.append(estimate_row(name, None, k, failure=f"{type(shape).__name__}: {shape}"))
            continue
        try:
            estimate = estimate_doa(shape, k, grid_size, args.refine, value_cap)
        except SemidoaError as e:
            logger.warning(f"MUSIC failed for {name}: {e}")
            rows.append(estimate_row(name, None, k, shape.diagnostics, f"{type(e).__name__}: {e}"))
            continue
        rows.append(estimate_row(name, estimate, k, shape.diagnostics))
        if args.spectrum:
            target = Path(args.spectrum)
            target = target.with_name(f"{target.stem}_{name}{target.suffix or '.csv'}")
            write_pseudospectrum(pseudospectrum(shape, k, grid_size, value_cap), target,
                                 {"estimator": name, "K": k, "G": grid_size, "source": args.snapshots})

    write_estimates(rows, sys.stdout)
    return EXIT_OK


def cmd_bound(args, settings: ConfigManager) -> int:
    """SSCRB index per sweep value"""
    if args.snapshots < 1:
        raise ConfigurationError(f"Configuration validation failed: snapshots (L) must be >= 1, got {args.snapshots}")
    scene = _scene(args.config)
    sections = read_ini(args.config) if args.config else {}

    distribution = sections.get('distribution', {})
    family = Family.parse(args.family or distribution.get('family', 'gaussian'))

    if args.sweep is not None:
        values = args.sweep
    elif 'sweep' in sections.get('experiment', {}):
        values = load_experiment_settings(args.config).experiment.sweep
    elif family is Family.GAUSSIAN:
        values = [None]
    elif _section_param(distribution, family) is not None:
        values = [_section_param(distribution, family)]
    else:
        raise ConfigurationError(f"Configuration validation failed: --sweep is required for family {family.value}")

    specs = [DensityGeneratorSpec.for_sweep(family, v) for v in values]
    rows = []
    for spec in specs:
        try:
            result = sscrb(scene, spec, args.snapshots)
        except SemidoaError as e:
            logger.warning(f"SSCRB failed at {spec.label}: {e}")
            rows.append(bound_row(spec.sweep_value, None, f"{type(e).__name__}: {e}"))
        else:
            rows.append(bound_row(spec.sweep_value, result))

    metadata = {f"scene.{k}": v for k, v in scene.to_dict().items()}
    metadata.update({"family": family.value, "snapshots": args.snapshots})
    write_bounds(rows, args.out, metadata)
    return EXIT_OK


def cmd_simulate(args, settings: ConfigManager) -> int:
    """Monte Carlo sweep; partial results are flushed after every sweep point"""
    experiment = load_experiment_config(args.config, runs=args.runs, seed=args.seed)
    file_settings = load_experiment_settings(args.config)

    out = args.out or file_settings.output.csv
    if out is None:
        out = str(Path(settings.get('output_dir', 'results')) / f"{Path(args.config).stem}.csv")
    workers = args.workers or file_settings.experiment.workers or settings.get_nested('simulation', 'workers', default=1)
    progress = settings.get_nested('simulation', 'progress', default=True) and not args.no_progress

    def flush(partial: ExperimentResult):
        write_result(partial, out)

    result = run_experiment(experiment, workers=workers, progress=progress, on_point=flush)

    if args.plot:
        if args.out or not file_settings.output.plot:
            plot_path = str(Path(out).with_suffix('.svg'))
        else:
            plot_path = file_settings.output.plot
        plot_experiment(result, plot_path)
        write_metadata(plot_path, {"source": out, **experiment.to_dict()})
    return EXIT_OK


def _add_distribution_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--family', choices=['gaussian', 't', 'gg'], default=None,
                        help='Density generator family (overrides [distribution])')
    parser.add_argument('--param', type=float, default=None,
                        help='t degrees of freedom lambda or GG shape s')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='semidoa',
        description="semidoa - robust semiparametric DOA estimation and SSCRB simulator",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument('--settings', default=None,
                        help='Application settings file (default: config/config.json if present)')
    parser.add_argument('--verbose', '-v', action='store_true', help='Debug logging')
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")

    subparsers = parser.add_subparsers(dest='command', help='Available commands')
    formatter = argparse.ArgumentDefaultsHelpFormatter

    sample = subparsers.add_parser('sample', help='Synthesize CES snapshots to CSV',
                                   formatter_class=formatter)
    sample.add_argument('--config', default=None,
                        help='Scene/distribution file (default: reference scene, Gaussian)')
    sample.add_argument('--out', default='snapshots.csv', help='Snapshot CSV path')
    sample.add_argument('--snapshots', '-L', type=int, default=DEFAULT_SNAPSHOTS, help='Number of snapshots L')
    sample.add_argument('--seed', type=_u64, default=0, help='Unsigned 64-bit seed')
    _add_distribution_flags(sample)
    sample.set_defaults(handler=cmd_sample)

    estimate = subparsers.add_parser('estimate', help='Estimate DOAs from a snapshot CSV (CSV to stdout)',
                                     formatter_class=formatter)
    estimate.add_argument('snapshots', help='Snapshot CSV written by `sample`')
    estimate.add_argument('--sources', '-K', type=int, default=DEFAULT_SOURCES, help='Number of sources K')
    estimate.add_argument('--estimator', choices=list(ESTIMATOR_NAMES) + ['all'], default='all',
                          help='Shape estimator')
    estimate.add_argument('--grid-size', '-G', type=int, default=None,
                          help='MUSIC grid size (default: numerics.grid_size, 4096)')
    estimate.add_argument('--refine', choices=['none', 'parabolic', 'bounded'], default='parabolic',
                          help='Peak refinement')
    estimate.add_argument('--spectrum', default=None,
                          help='Also dump each pseudospectrum to <stem>_<estimator>.csv')
    estimate.set_defaults(handler=cmd_estimate)

    bound = subparsers.add_parser('bound', help='SSCRB per sweep value', formatter_class=formatter)
    bound.add_argument('--config', default=None, help='Scene/distribution/experiment file')
    bound.add_argument('--out', default='sscrb.csv', help='Bound CSV path')
    bound.add_argument('--snapshots', '-L', type=int, default=DEFAULT_SNAPSHOTS, help='Number of snapshots L')
    bound.add_argument('--family', choices=['gaussian', 't', 'gg'], default=None,
                       help='Density generator family (overrides the config file)')
    bound.add_argument('--sweep', type=_float_list, default=None,
                       help='Comma separated lambda or s values')
    bound.set_defaults(handler=cmd_bound)

    simulate = subparsers.add_parser('simulate', help='Monte Carlo MSE vs SSCRB sweep',
                                     formatter_class=formatter)
    simulate.add_argument('--config', required=True, help='Experiment file (e.g. config/fig1.cfg)')
    simulate.add_argument('--out', default=None,
                          help='Result CSV (default: [output] csv or <output_dir>/<config>.csv)')
    simulate.add_argument('--seed', type=_u64, default=None, help='Override the experiment seed')
    simulate.add_argument('--runs', type=int, default=None, help='Override runs per sweep point')
    simulate.add_argument('--workers', type=int, default=None,
                          help='Worker processes (default: available parallelism)')
    simulate.add_argument('--plot', action='store_true', help='Also write an SVG figure')
    simulate.add_argument('--no-progress', action='store_true', help='Disable the progress bar')
    simulate.set_defaults(handler=cmd_simulate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main application entry point; returns the process exit code"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return ConfigurationError.exit_code

    try:
        settings = ConfigManager(args.settings)
        settings.setup_logging(verbose=args.verbose)
        if getattr(args, 'workers', None) is not None and args.workers < 1:
            raise ConfigurationError(f"Configuration validation failed: workers must be >= 1, got {args.workers}")
        if getattr(args, 'runs', None) is not None and args.runs < 1:
            raise ConfigurationError(f"Configuration validation failed: runs must be >= 1, got {args.runs}")
        return args.handler(args, settings)
    except SemidoaError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    except KeyboardInterrupt:
        print("\nOperation cancelled by user", file=sys.stderr)
        return EXIT_INTERRUPTED
    except Exception as e:
        logger.exception(f"Unexpected error in {args.command}: {e}")
        return 1


if __name__ == '__main__':
    sys.exit(main())
