"""
Benchmark harness: generate several instances of each catalog dataset, run
each estimator on every instance, average, and summarize with the mean
percentage error.
"""

import time
import logging
import threading
from dataclasses import dataclass, field, replace
from multiprocessing.pool import ThreadPool

import numpy as np
import pandas as pd
import scipy
import sklearn

from src import config
from src.calibration import build_calibration, substream
from src.datasets import generate, make_spec
from src.errors import DancoError, ParameterError
from src.estimators import (
    RadiusGrid,
    estimate_cd,
    estimate_danco,
    estimate_mind_kl,
    estimate_mind_ml,
    estimate_mle_lb,
    mpe,
)

# Get logger for this module
logger = logging.getLogger(__name__)

CALIBRATED_METHODS = ('danco', 'mind_kl')
METHODS = ('danco', 'mind_kl', 'mind_ml', 'mle', 'cd')


@dataclass(frozen=True)
class DatasetCase:
    label: str
    spec: object
    reference: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def true_dim(self):
        return self.spec.intrinsic_dim


def _case(label, name, d=None, big_d=None, **reference):
    return DatasetCase(label=label, spec=make_spec(name, d, big_d), reference=reference)


# Rows of the synthetic suite whose construction is known, with the values
# reported for them in the original evaluation.
CATALOG = {
    case.label: case for case in (
        _case('M12', 'line', 1, 13, danco=1.00, mle=1.00, cd=1.14, mind_kl=1.00),
        _case('M5', 'helix', danco=2.00, mle=1.97, cd=1.98, mind_kl=2.00),
        _case('M7', 'swiss_roll', danco=2.00, mle=1.96, cd=1.93, mind_kl=2.00),
        _case('M2', 'affine', 3, 5, danco=3.00, mle=2.88, cd=2.88, mind_kl=3.00),
        _case('M1', 'sphere_surface', 10, 11, danco=10.00, mle=9.10, cd=9.12, mind_kl=10.30),
        _case('M9a', 'hypercube', 10, 11, danco=9.50, mle=8.26, cd=8.09, mind_kl=9.85),
        _case('M9b', 'hypercube', 17, 18, danco=16.47, mle=12.87, cd=12.30, mind_kl=16.25),
        _case('M13', 'm13', danco=18.20, mle=15.95, cd=11.60, mind_kl=18.60),
        _case('M8', 'affine', 20, 20, danco=19.54, mle=14.64, cd=13.75, mind_kl=19.15),
        _case('M11', 'gaussian', 20, 20, danco=19.90, mle=15.82, cd=11.26, mind_kl=19.35),
        _case('M9c', 'hypercube', 24, 25, danco=23.85, mle=16.96, cd=15.58, mind_kl=22.55),
        _case('M14', 'm14', danco=25.00, mle=19.83, cd=14.03, mind_kl=25.30),
        _case('M9d', 'hypercube', 70, 71, danco=70.42, mle=36.49, cd=31.4, mind_kl=65.30),
    )
}

# Rows whose generators are not reproduced (no published construction).
EXCLUDED_ROWS = ('M3', 'M4', 'M6', 'M10')


@dataclass(frozen=True)
class EstimatorConfig:
    method: str
    params: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def label(self):
        return self.method


@dataclass
class BenchPlan:
    datasets: list
    estimators: list
    instances: int = config.BENCH_INSTANCES
    n_points: int = 2500
    seed: int = config.DEFAULT_SEED
    calibration_reps: int = config.CALIBRATION_REPS
    workers: int = config.WORKERS
    output_path: str = None

    def validate(self):
        if not self.datasets:
            raise ParameterError("A bench plan needs at least one dataset")
        if not self.estimators:
            raise ParameterError("A bench plan needs at least one estimator")
        if self.instances < 1:
            raise ParameterError(f"Instance count must be >= 1, got {self.instances}")
        for estimator in self.estimators:
            if estimator.method not in METHODS:
                raise ParameterError(f"Unknown estimator {estimator.method!r}; expected one of {METHODS}")
        return self


@dataclass
class CellResult:
    dataset: str
    estimator: str
    true_dim: float
    estimates: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def mean(self):
        return float(np.mean(self.estimates)) if self.estimates else None


@dataclass
class BenchReport:
    datasets: list = field(default_factory=list)
    estimators: list = field(default_factory=list)
    cells: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def cell(self, dataset, estimator):
        return self.cells.get((dataset, estimator))

    def mpe(self, estimator):
        pairs = [(cell.true_dim, cell.mean) for (_, name), cell in self.cells.items()
                 if name == estimator and cell.mean is not None]
        return mpe(pairs) if pairs else None

    def mpe_by_estimator(self):
        return {estimator: self.mpe(estimator) for estimator in self.estimators}

    @property
    def failed_cells(self):
        return [key for key, cell in self.cells.items() if cell.errors]


def named_plan(name, **overrides):
    """
    'small' is the desk-scale subset (5 instances); 'full' restores 20
    instances over every catalog row and all estimators.
    """
    if name == 'small':
        plan = BenchPlan(
            datasets=[CATALOG[label] for label in ('M12', 'M5', 'M2', 'M1', 'M9a', 'M8')],
            estimators=[EstimatorConfig('danco'), EstimatorConfig('mind_ml'), EstimatorConfig('mle')],
        )
    elif name == 'full':
        plan = BenchPlan(
            datasets=list(CATALOG.values()),
            estimators=[EstimatorConfig(method) for method in METHODS],
            instances=config.FULL_BENCH_INSTANCES,
        )
    else:
        raise ParameterError(f"Unknown plan {name!r}; expected 'small' or 'full'")
    for key, value in overrides.items():
        if value is not None:
            setattr(plan, key, value)
    return plan


def _instance_seed(seed, dataset_position, instance):
    return int(substream(seed, 1_000_000 + dataset_position, instance).integers(0, 2 ** 31 - 1))


def _run_estimator(estimator, data, max_dim, calibrations):
    params = estimator.params
    k = params.get('k', config.DEFAULT_K)
    if estimator.method in CALIBRATED_METHODS:
        calib = calibrations[(data.n_points, k)]
        runner = estimate_danco if estimator.method == 'danco' else estimate_mind_kl
        return runner(data, k, max_dim, calib)
    if estimator.method == 'mind_ml':
        return estimate_mind_ml(data, k, max_dim)
    if estimator.method == 'mle':
        return estimate_mle_lb(data, params.get('k1', config.MLE_K1), params.get('k2', config.MLE_K2))
    if estimator.method == 'cd':
        return estimate_cd(data, params.get('grid', RadiusGrid()))
    raise ParameterError(f"Unknown estimator {estimator.method!r}")


def _prepare_calibrations(plan):
    """
    One table per (N, k) used by a calibrated estimator, built up to the
    largest ambient dimension in the plan. Per-d substreams make the entries
    independent of how far the table extends.
    """
    max_dim = max(case.spec.ambient_dim for case in plan.datasets)
    keys = sorted({(plan.n_points, estimator.params.get('k', config.DEFAULT_K))
                   for estimator in plan.estimators if estimator.method in CALIBRATED_METHODS})
    calibrations = {}
    for n, k in keys:
        calibrations[(n, k)] = build_calibration(max_dim, n, k, plan.calibration_reps, plan.seed, plan.workers)
    return calibrations


def run_bench(plan):
    """
    Execute every (dataset instance, estimator) cell and collect a BenchReport.
    Failures are recorded per cell and never abort the run.

    :param plan: BenchPlan
    :return: BenchReport
    """
    plan.validate()
    logger.info(f"Starting bench: {len(plan.datasets)} datasets x {len(plan.estimators)} estimators x {plan.instances} instances")
    calibrations = {}
    calibration_error = None
    try:
        calibrations = _prepare_calibrations(plan)
    except DancoError as e:
        calibration_error = f"{type(e).__name__}: {e}"
        logger.error(f"Calibration failed; calibrated estimators will be reported as errors: {e}")

    report = BenchReport(
        datasets=[case.label for case in plan.datasets],
        estimators=[estimator.label for estimator in plan.estimators],
        metadata={
            'seed': plan.seed,
            'instances': plan.instances,
            'n_points': plan.n_points,
            'calibration_reps': plan.calibration_reps,
            'calibration_ids': {f"N={n},k={k}": table.calibration_id for (n, k), table in calibrations.items()},
            'excluded_rows': list(EXCLUDED_ROWS),
            'versions': {'numpy': np.__version__, 'scipy': scipy.__version__,
                         'scikit-learn': sklearn.__version__, 'pandas': pd.__version__},
        },
    )
    for case in plan.datasets:
        for estimator in plan.estimators:
            report.cells[(case.label, estimator.label)] = CellResult(case.label, estimator.label, case.true_dim)

    tasks = []
    for position, case in enumerate(plan.datasets):
        for instance in range(plan.instances):
            tasks.append((case, instance, _instance_seed(plan.seed, position, instance)))

    lock = threading.Lock()

    def run_task(task):
        case, instance, seed = task
        spec = replace(case.spec, n_points=plan.n_points, seed=seed)
        outcomes = []
        try:
            data = generate(spec)
        except DancoError as e:
            logger.error(f"{case.label} instance {instance}: generation failed: {e}")
            return [(estimator.label, None, f"{type(e).__name__}: {e}", 0.0) for estimator in plan.estimators]
        for estimator in plan.estimators:
            started = time.perf_counter()
            if calibration_error and estimator.method in CALIBRATED_METHODS:
                outcomes.append((estimator.label, None, calibration_error, 0.0))
                continue
            try:
                result = _run_estimator(estimator, data, spec.ambient_dim, calibrations)
                outcomes.append((estimator.label, result.d_hat, None, time.perf_counter() - started))
            except Exception as e:
                logger.error(f"{case.label} instance {instance} / {estimator.label} failed: {e}")
                outcomes.append((estimator.label, None, f"{type(e).__name__}: {e}", time.perf_counter() - started))
        with lock:
            logger.debug(f"Finished {case.label} instance {instance}")
        return outcomes

    if plan.workers > 1:
        with ThreadPool(plan.workers) as pool:
            all_outcomes = pool.map(run_task, tasks)
    else:
        all_outcomes = [run_task(task) for task in tasks]

    # ordered reduction: task order is (dataset, instance), independent of scheduling
    for (case, _, _), outcomes in zip(tasks, all_outcomes):
        for label, d_hat, error, elapsed in outcomes:
            cell = report.cells[(case.label, label)]
            cell.wall_time += elapsed
            if error is None:
                cell.estimates.append(d_hat)
            else:
                cell.errors.append(error)

    print_summary(report)
    if plan.output_path:
        with open(plan.output_path, 'w', encoding='utf-8') as handle:
            handle.write(render_report(report, 'delimited'))
        logger.info(f"Bench report written to {plan.output_path}")
    return report


def print_summary(report):
    """
    Log a summary block of the bench run.
    """
    logger.info("\n--- Bench Summary ---")
    logger.info(f"Cells run: {len(report.cells)}")
    logger.info(f"Cells with failures: {len(report.failed_cells)}")
    for estimator, value in report.mpe_by_estimator().items():
        shown = f"{value:.2f}" if value is not None else 'n/a'
        logger.info(f"MPE {estimator}: {shown}")
    excluded = report.metadata.get('excluded_rows')
    if excluded:
        logger.info(f"Rows not reproduced: {', '.join(excluded)}")
    logger.info("---------------------\n")


def report_frame(report):
    """
    Datasets x estimators table of mean estimates with the true dimension in
    the first column and the MPE row last.
    """
    columns = ['d'] + list(report.estimators)
    rows = []
    for dataset in report.datasets:
        true_dim = next((cell.true_dim for (name, _), cell in report.cells.items() if name == dataset), np.nan)
        row = [float(true_dim)]
        for estimator in report.estimators:
            cell = report.cell(dataset, estimator)
            row.append(cell.mean if cell is not None and cell.mean is not None else np.nan)
        rows.append(row)
    frame = pd.DataFrame(rows, index=list(report.datasets), columns=columns, dtype=float)
    if report.datasets:
        frame.loc['MPE'] = [np.nan] + [value if value is not None else np.nan for value in report.mpe_by_estimator().values()]
    frame.index.name = 'dataset'
    return frame


def render_report(report, format='plain'):
    """
    Render the report as an aligned text table ('plain') or CSV ('delimited'),
    two decimals throughout. The plain table ends with an ``excluded:`` line
    when the run recorded catalog rows it does not reproduce.
    """
    frame = report_frame(report)
    if format == 'plain':
        if frame.empty:
            text = ' '.join([frame.index.name] + list(frame.columns)) + '\n'
        else:
            text = frame.to_string(float_format=lambda value: f"{value:.2f}", na_rep='-') + '\n'
        excluded = report.metadata.get('excluded_rows')
        if excluded:
            text += f"excluded: {', '.join(excluded)}\n"
        return text
    if format == 'delimited':
        return frame.to_csv(float_format='%.2f', na_rep='nan')
    raise ParameterError(f"Unknown report format {format!r}; expected 'plain' or 'delimited'")


def run_robustness(ns=(200, 500, 1000, 2000), ks=(5, 10, 20, 50), runs=10, dim=5, seed=None, calibration_reps=None):
    """
    Repeat DANCo on standard Gaussian samples in R^dim over a grid of sample
    sizes and neighborhood sizes (combinations with k >= N - 2 are skipped).

    :return: DataFrame with columns N, k, estimates, all_correct
    """
    seed = config.DEFAULT_SEED if seed is None else seed
    records = []
    for n in ns:
        for k in ks:
            if k >= n - 2:
                logger.info(f"Skipping N={n}, k={k} (k must be below N - 2)")
                continue
            calib = build_calibration(dim, n, k, calibration_reps, seed)
            estimates = []
            for run in range(runs):
                spec = make_spec('gaussian', dim, dim, n_points=n, seed=_instance_seed(seed, n * 1000 + k, run))
                estimates.append(estimate_danco(generate(spec), k, dim, calib).d_hat)
            records.append({'N': n, 'k': k, 'estimates': estimates,
                            'all_correct': all(value == dim for value in estimates)})
            logger.info(f"Robustness N={n}, k={k}: {estimates}")
    return pd.DataFrame.from_records(records, columns=['N', 'k', 'estimates', 'all_correct'])
