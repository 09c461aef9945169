import os
import sys
import argparse
import logging
from logging.handlers import RotatingFileHandler
from dotenv import load_dotenv

# Add the project root to the path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pandas as pd

from src import config
from src.bench import named_plan, render_report, run_bench
from src.calibration import build_calibration, load_calibration, save_calibration
from src.datasets import GENERATORS, delay_embed, generate, load_table, make_spec
from src.errors import CalibrationError, DancoError, InputError, ParameterError
from src.estimators import estimate_cd, estimate_danco, estimate_mind_kl, estimate_mind_ml, estimate_mle_lb
from src.table_reader import TableReader

METHODS = ('danco', 'mind_kl', 'mind_ml', 'mle', 'cd')
INTEGER_METHODS = ('danco', 'mind_kl', 'mind_ml')

logger = logging.getLogger(__name__)


def setup_logging(verbose=False):
    # Load environment variables
    load_dotenv()

    # Configure logging
    log_file = os.getenv('LOG_FILE', 'application.log')
    log_level = 'DEBUG' if verbose else os.getenv('LOGGING_LEVEL', 'INFO').upper()
    max_log_size_mb = int(os.getenv('MAX_LOG_SIZE_MB', 5))
    log_backup_count = int(os.getenv('LOG_BACKUP_COUNT', 5))

    # Convert max size to bytes
    max_log_size_bytes = max_log_size_mb * 1024 * 1024

    # Create logs directory if it doesn't exist
    log_dir = os.path.dirname(log_file)
    if log_dir and not os.path.exists(log_dir):
        os.makedirs(log_dir)

    # Set up root logger, replacing handlers from an earlier call in the same process
    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    for handler in [h for h in root_logger.handlers if getattr(h, '_danco_cli', False)]:
        root_logger.removeHandler(handler)
        handler.close()

    # Create a rotating file handler
    file_handler = RotatingFileHandler(
        log_file,
        maxBytes=max_log_size_bytes,
        backupCount=log_backup_count
    )
    file_handler.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))

    # Console goes to stderr; stdout carries results only
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))

    for handler in (file_handler, console_handler):
        handler._danco_cli = True
        root_logger.addHandler(handler)


class CliParser(argparse.ArgumentParser):
    """Usage errors become ParameterError so they share the error line format."""

    def error(self, message):
        raise ParameterError(f"{self.prog}: {message}")


def build_parser():
    parser = CliParser(prog='danco', description='Intrinsic dimension estimation')
    parser.add_argument('--verbose', '-v', action='store_true', help='Print the effective configuration and debug logs')
    subparsers = parser.add_subparsers(dest='subcommand', parser_class=CliParser)
    subparsers.required = True

    estimate = subparsers.add_parser('estimate', help='Estimate the intrinsic dimension of a point table')
    estimate.add_argument('--input', help='Point table (.csv, whitespace text or .xlsx)')
    estimate.add_argument('--sheet', help='Sheet name for .xlsx input')
    estimate.add_argument('--method', choices=METHODS, default='danco')
    estimate.add_argument('--preset', choices=sorted(config.PRESETS), default='synthetic')
    estimate.add_argument('--k', type=int, help='Neighborhood size')
    estimate.add_argument('--k1', type=int, help='Smallest MLE neighborhood')
    estimate.add_argument('--k2', type=int, help='Largest MLE neighborhood')
    estimate.add_argument('--max-dim', type=int, help='Largest candidate dimension (default: ambient dimension)')
    estimate.add_argument('--seed', type=int, default=config.DEFAULT_SEED)
    estimate.add_argument('--n-reps', type=int, default=config.CALIBRATION_REPS)
    estimate.add_argument('--calibration', default=config.CALIBRATION_CACHE, help='Calibration cache path (built and saved if missing)')
    estimate.add_argument('--dedupe', action='store_true', help='Drop repeated rows before estimating')
    estimate.add_argument('--verbose', '-v', action='store_true', default=argparse.SUPPRESS)

    calibrate = subparsers.add_parser('calibrate', help='Build and save a calibration table')
    calibrate.add_argument('--max-dim', type=int, required=True)
    calibrate.add_argument('--n', type=int, default=config.CALIBRATION_N)
    calibrate.add_argument('--k', type=int, default=config.DEFAULT_K)
    calibrate.add_argument('--seed', type=int, default=config.DEFAULT_SEED)
    calibrate.add_argument('--n-reps', type=int, default=config.CALIBRATION_REPS)
    calibrate.add_argument('--workers', type=int, default=config.WORKERS)
    calibrate.add_argument('--out', default=config.CALIBRATION_CACHE)
    calibrate.add_argument('--verbose', '-v', action='store_true', default=argparse.SUPPRESS)

    gen = subparsers.add_parser('generate', help='Write a synthetic dataset or a delay embedding')
    gen.add_argument('--dataset', choices=sorted(GENERATORS))
    gen.add_argument('--intrinsic-dim', '--d', dest='intrinsic_dim', type=int)
    gen.add_argument('--ambient-dim', type=int, help='Ambient dimension, or window length with --from-series')
    gen.add_argument('--n', type=int, default=2500)
    gen.add_argument('--seed', type=int, default=config.DEFAULT_SEED)
    gen.add_argument('--from-series', help='Table holding a scalar time series to delay-embed')
    gen.add_argument('--column', default='0', help='Series column (position or header name)')
    gen.add_argument('--out', help='Output path (default: standard output)')
    gen.add_argument('--verbose', '-v', action='store_true', default=argparse.SUPPRESS)

    bench = subparsers.add_parser('bench', help='Run the synthetic benchmark')
    bench.add_argument('--plan', choices=('small', 'full'), default='small')
    bench.add_argument('--instances', type=int)
    bench.add_argument('--n', type=int)
    bench.add_argument('--seed', type=int)
    bench.add_argument('--workers', type=int)
    bench.add_argument('--format', choices=('plain', 'delimited'), default='plain')
    bench.add_argument('--out', help='Also write the delimited report to this path')
    bench.add_argument('--verbose', '-v', action='store_true', default=argparse.SUPPRESS)
    return parser


def format_estimate(result):
    if result.method in INTEGER_METHODS:
        return f"{result.method}: d = {int(result.d_hat)}"
    return f"{result.method}: d = {result.d_hat:.2f}"


def print_config(settings):
    print('config: ' + ' '.join(f"{key}={value}" for key, value in settings.items()))


def _resolve_calibration(path, max_dim, n, k, n_reps, seed):
    """
    Load the cache at ``path`` when it fits (N, k, D); otherwise build in
    memory, saving only when the path does not exist yet.
    """
    if path and os.path.exists(path):
        try:
            table = load_calibration(path)
            if table.n_points == n and table.k == k and table.max_dim >= max_dim:
                return table
            logger.warning(f"Refusing calibration cache {path}: built for N={table.n_points}, k={table.k}, "
                           f"D={table.max_dim}; need N={n}, k={k}, D>={max_dim}")
        except CalibrationError as e:
            logger.warning(f"Refusing calibration cache {path}: {e}")
        return build_calibration(max_dim, n, k, n_reps, seed)

    if not path:
        logger.warning(f"No calibration cache supplied; building one in memory (D={max_dim}, N={n}, k={k})")
    table = build_calibration(max_dim, n, k, n_reps, seed)
    if path:
        save_calibration(table, path)
    return table


def cmd_estimate(args):
    input_path = args.input or os.getenv('DANCO_INPUT_PATH')
    if not input_path:
        raise ParameterError("estimate requires --input (or DANCO_INPUT_PATH)")
    data = load_table(input_path, sheet_name=args.sheet)
    if args.dedupe:
        data = data.deduplicated()

    params = config.preset(args.preset)
    k = args.k if args.k is not None else params['k']
    k1 = args.k1 if args.k1 is not None else params['k1']
    k2 = args.k2 if args.k2 is not None else params['k2']
    max_dim = args.max_dim if args.max_dim is not None else data.ambient_dim

    settings = {'method': args.method, 'input': input_path, 'N': data.n_points, 'D_ambient': data.ambient_dim}
    if args.method in ('danco', 'mind_kl'):
        calib = _resolve_calibration(args.calibration, max_dim, data.n_points, k, args.n_reps, args.seed)
        runner = estimate_danco if args.method == 'danco' else estimate_mind_kl
        result = runner(data, k, max_dim, calib)
        settings.update(k=k, max_dim=max_dim, seed=calib.seed, n_reps=calib.n_reps,
                        calibration=calib.calibration_id, calibration_path=args.calibration)
    elif args.method == 'mind_ml':
        result = estimate_mind_ml(data, k, max_dim)
        settings.update(k=k, max_dim=max_dim)
    elif args.method == 'mle':
        result = estimate_mle_lb(data, k1, k2)
        settings.update(k1=k1, k2=k2)
    else:
        result = estimate_cd(data)
        settings.update(result.params)

    if args.verbose:
        print_config(settings)
    print(format_estimate(result))
    if args.verbose and result.kl_profile:
        profile = pd.DataFrame(
            [(row.d, row.kl_norm, row.kl_vm, row.total) for row in result.kl_profile],
            columns=['d', 'kl_norm', 'kl_vm', 'total'],
        )
        print(profile.to_string(index=False, float_format=lambda value: f"{value:.6g}"))
    for warning in result.warnings:
        logger.warning(warning)
    return 0


def cmd_calibrate(args):
    if not args.out:
        raise ParameterError("calibrate requires --out (or DANCO_CALIBRATION_CACHE)")
    table = build_calibration(args.max_dim, args.n, args.k, args.n_reps, args.seed, args.workers)
    save_calibration(table, args.out)
    if args.verbose:
        print_config({'max_dim': args.max_dim, 'N': args.n, 'k': args.k, 'seed': args.seed,
                      'n_reps': args.n_reps, 'workers': args.workers, 'out': args.out})
    print(f"calibration {table.calibration_id}: D={table.max_dim} N={table.n_points} k={table.k} -> {args.out}")
    return 0


def _write_points(points, out):
    frame = pd.DataFrame(np.asarray(points))
    text = frame.to_csv(header=False, index=False, float_format='%.17g')
    if out:
        with open(out, 'w', encoding='utf-8') as handle:
            handle.write(text)
        logger.info(f"Wrote {frame.shape[0]} x {frame.shape[1]} points to {out}")
    else:
        sys.stdout.write(text)


def cmd_generate(args):
    if args.from_series:
        if args.ambient_dim is None:
            raise ParameterError("--from-series needs --ambient-dim as the window length")
        column = int(args.column) if args.column.isdigit() else args.column
        series = TableReader(file_path=args.from_series).read_series(column)
        data = delay_embed(series, args.ambient_dim)
        settings = {'from_series': args.from_series, 'column': column, 'window': args.ambient_dim}
    else:
        if not args.dataset:
            raise ParameterError("generate requires --dataset or --from-series")
        spec = make_spec(args.dataset, args.intrinsic_dim, args.ambient_dim, n_points=args.n, seed=args.seed)
        data = generate(spec)
        settings = {'dataset': spec.name, 'd': spec.intrinsic_dim, 'D': spec.ambient_dim,
                    'N': spec.n_points, 'seed': spec.seed}
    if args.verbose:
        logger.info('config: ' + ' '.join(f"{key}={value}" for key, value in settings.items()))
    _write_points(data.points, args.out)
    return 0


def cmd_bench(args):
    plan = named_plan(args.plan, instances=args.instances, n_points=args.n, seed=args.seed,
                      workers=args.workers, output_path=args.out)
    if args.verbose:
        print_config({'plan': args.plan, 'datasets': ','.join(case.label for case in plan.datasets),
                      'estimators': ','.join(e.label for e in plan.estimators), 'instances': plan.instances,
                      'N': plan.n_points, 'seed': plan.seed, 'workers': plan.workers})
    report = run_bench(plan)
    sys.stdout.write(render_report(report, args.format))
    return 0


COMMANDS = {
    'estimate': cmd_estimate,
    'calibrate': cmd_calibrate,
    'generate': cmd_generate,
    'bench': cmd_bench,
}


def error_line(error):
    message = ' '.join(str(error).split())
    return f"error kind={error.kind} code={error.exit_code} message={message}"


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = build_parser().parse_args(argv)
    except DancoError as e:
        print(error_line(e), file=sys.stderr)
        return e.exit_code

    setup_logging(args.verbose)

    try:
        logger.info(f"Starting {args.subcommand}...")
        return COMMANDS[args.subcommand](args)
    except DancoError as e:
        logger.error(f"{args.subcommand} failed: {e}")
        print(error_line(e), file=sys.stderr)
        return e.exit_code
    except OSError as e:
        error = InputError(str(e))
        logger.error(f"{args.subcommand} failed: {e}")
        print(error_line(error), file=sys.stderr)
        return error.exit_code
    except Exception as e:
        import traceback
        logger.error(f"An error occurred during {args.subcommand}: {e}")
        logger.error(traceback.format_exc())
        print(f"error kind=unexpected code=1 message={' '.join(str(e).split())}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
