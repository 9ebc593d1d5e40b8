"""
Command-line interface.

Every command resolves its options as flags over a TOML --config file over
defaults, validates them with the matching form in forms.py, writes its data
files and a manifest.json into --out, and exits with

    0 success, 2 usage, 3 solver / sweep failure / oracle mismatch,
    4 truncation ladder exhausted.
"""
import logging
import os
import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict
from functools import wraps

import click
import numpy as np

from app import __version__, resolve_workers
from ecs_hamiltonian import ground_state_ecs
from fock_oracle import converged_fock_ground_state, fock_ground_state, fock_to_ecs
from forms import CollapseForm, ConvergeForm, ExponentsForm, OracleCheckForm, ScanForm
from models import (BoundaryError, DimensionError, FitError, InconsistencyError, ModelParams,
                    SolverError, SweepError, critical_coupling)
from observables import minimal_truncation
from scaling import (build_collapse, collapse_spread, fit_chi_exponent, fit_delta_p_peak_exponent,
                     fit_fmin_quadratic, fit_gamma_exponent)
from sweep import SweepConfig, locate_critical, run_critical, run_sweep, susceptibility_probe
from utils import (RunManifest, find_scan_files, read_criticals_csv, read_scan_csv, scan_filename,
                   write_collapse_csv, write_collapse_plot, write_criticals_csv, write_exponent_plots,
                   write_json, write_overlay_plots, write_scan_csv, write_scan_plots)

logger = logging.getLogger(__name__)

EXIT_SOLVER = 3
EXIT_NOT_CONVERGED = 4
ORACLE_ENERGY_TOLERANCE = 1e-9
ORACLE_OVERLAP_TOLERANCE = 1e-8


class CommandFailed(click.ClickException):
    """Non-usage failure with its own exit code."""

    def __init__(self, message, exit_code=EXIT_SOLVER):
        super().__init__(message)
        self.exit_code = exit_code


def load_config_file(path):
    """Flat TOML mapping of option names to values."""
    try:
        with open(path, 'rb') as f:
            data = tomllib.load(f)
    except (OSError, tomllib.TOMLDecodeError) as e:
        raise click.UsageError(f"Cannot read config file {path}: {str(e)}")
    nested = [key for key, value in data.items() if isinstance(value, dict)]
    if nested:
        raise click.UsageError(f"Config file {path} must be flat, found tables: {', '.join(nested)}")
    return data


def resolve_options(form_class, config_path, flags):
    """Merge defaults < config file < flags and validate them with form_class."""
    known = set(form_class()._fields)
    options = {}
    if config_path:
        for key, value in load_config_file(config_path).items():
            name = key.replace('-', '_')
            if name not in known:
                raise click.UsageError(f"Unknown option '{key}' in {config_path}")
            options[name] = value
    options.update({key: value for key, value in flags.items() if value is not None})

    form = form_class(options)
    if not form.validate():
        raise click.UsageError(form.error_text)
    return form


def handle_domain_errors(f):
    """
    Translate domain exceptions into click errors with the contracted exit codes.

    Only exception types that describe a user-facing problem are mapped. Any
    other ValueError is an internal failure and propagates with its traceback.
    """
    @wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (BoundaryError, DimensionError) as e:
            raise click.UsageError(str(e))
        except (InconsistencyError, FitError, SolverError, SweepError) as e:
            logger.error(str(e))
            raise CommandFailed(str(e))
    return wrapper


def common_options(f):
    options = [
        click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
                     help='Flat TOML file whose keys mirror the flag names.'),
        click.option('--out', 'out_dir', type=click.Path(file_okay=False), default='.', show_default=True,
                     help='Output directory.'),
        click.option('--omega', default=None, help='Cavity frequency [default: 1].'),
        click.option('--omega0', default=None, help='Atomic level splitting [default: 1].'),
        click.option('--workers', default=None, help='Worker processes; DICKE_WORKERS overrides.'),
        click.option('--emit-plot/--no-emit-plot', default=None, help='Write gnuplot scripts.'),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def sweep_options(f):
    options = [
        click.option('--gamma-min', default=None, help='First coupling of the grid [default: 0.5].'),
        click.option('--gamma-max', default=None, help='Last coupling of the grid [default: 0.6].'),
        click.option('--dgamma', default=None, help='Grid step and fidelity increment [default: 0.001].'),
        click.option('--nmax', default=None, help='ECS truncation [default: 8].'),
        click.option('--refine/--no-refine', default=None, help='Golden-section refinement of the peak.'),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _model(form, n_atoms):
    return ModelParams(omega=form.omega.data, omega0=form.omega0.data, n_atoms=n_atoms)


def _sweep_config(form):
    return SweepConfig(gamma_start=form.gamma_min.data, gamma_end=form.gamma_max.data,
                       dgamma=form.dgamma.data, n_max=form.nmax.data, refine=form.refine.data)


def _manifest(command, form):
    resolved = dict(form.data)
    resolved['workers'] = resolve_workers(form.workers.data)
    return RunManifest(command=command, version=__version__, config=resolved)


def _sweep_or_record(params, sweep_config, form, out_dir, manifest):
    """run_critical; on a failed sweep the partial scan and manifest are still written."""
    try:
        return run_critical(params, sweep_config, workers=form.workers.data)
    except SweepError as e:
        manifest.add_output(write_scan_csv(e.points, os.path.join(out_dir, scan_filename(params.n_atoms))))
        manifest.diagnostics['failed_gammas'] = {str(params.n_atoms): e.failed}
        manifest.write(out_dir)
        raise


@click.group()
@click.version_option(__version__, prog_name='dicke-ed')
def cli():
    """Exact diagonalization of the Dicke model in the extended coherent-state basis."""


@cli.command()
@common_options
@sweep_options
@click.option('--n-atoms', default=None, help='Number of atoms N.')
@handle_domain_errors
def scan(config_path, out_dir, **flags):
    """Fidelity, susceptibility and Delta-P over a coupling grid at fixed N."""
    started = time.perf_counter()
    form = resolve_options(ScanForm, config_path, flags)
    params = _model(form, form.n_atoms.data)
    sweep_config = _sweep_config(form)
    os.makedirs(out_dir, exist_ok=True)
    manifest = _manifest('scan', form)
    csv_path = os.path.join(out_dir, scan_filename(params.n_atoms))

    try:
        points = run_sweep(params, sweep_config, workers=form.workers.data)
    except SweepError as e:
        manifest.add_output(write_scan_csv(e.points, csv_path))
        manifest.diagnostics['failed_gammas'] = e.failed
        manifest.timings['total_seconds'] = time.perf_counter() - started
        manifest.write(out_dir)
        raise
    manifest.timings['sweep_seconds'] = time.perf_counter() - started
    manifest.add_output(write_scan_csv(points, csv_path))
    manifest.diagnostics['degenerate_points'] = sum(1 for p in points if p.degenerate)

    chi_at = susceptibility_probe(params, sweep_config) if sweep_config.refine else None
    try:
        critical = locate_critical(points, sweep_config, n_atoms=params.n_atoms, chi_at=chi_at)
        manifest.diagnostics['critical'] = asdict(critical)
        click.echo(f"N={params.n_atoms} gamma_max={critical.gamma_max:.6f} chi_max={critical.chi_max:.6g} "
                   f"delta_p_peak={critical.delta_p_peak_gamma:.6f}")
    except (BoundaryError, InconsistencyError) as e:
        logger.info(f"No interior extremum reported: {str(e)}")
        manifest.diagnostics['critical'] = None

    if form.emit_plot.data:
        for script in write_scan_plots(os.path.basename(csv_path), out_dir, params.n_atoms):
            manifest.add_output(script)
    manifest.timings['total_seconds'] = time.perf_counter() - started
    manifest.write(out_dir)
    click.echo(f"Wrote {len(points)} rows to {csv_path}")


@cli.command()
@common_options
@sweep_options
@click.option('--n-list', default=None, help='Comma-separated atom numbers, e.g. 100,200,400.')
@handle_domain_errors
def exponents(config_path, out_dir, **flags):
    """Critical points per N and the finite-size scaling fits."""
    started = time.perf_counter()
    form = resolve_options(ExponentsForm, config_path, flags)
    sweep_config = _sweep_config(form)
    os.makedirs(out_dir, exist_ok=True)
    manifest = _manifest('exponents', form)

    criticals = []
    gamma_c = None
    for n_atoms in sorted(set(form.n_list.data)):
        params = _model(form, n_atoms)
        gamma_c = critical_coupling(params)
        lap = time.perf_counter()
        try:
            points, critical = _sweep_or_record(params, sweep_config, form, out_dir, manifest)
        except BoundaryError as e:
            raise click.UsageError(f"N={n_atoms}: {str(e)}")
        manifest.timings[f'N{n_atoms}_seconds'] = time.perf_counter() - lap
        csv_path = manifest.add_output(write_scan_csv(points, os.path.join(out_dir, scan_filename(n_atoms))))
        if form.emit_plot.data:
            for script in write_scan_plots(os.path.basename(csv_path), out_dir, n_atoms):
                manifest.add_output(script)
        criticals.append(critical)

    manifest.add_output(write_criticals_csv(criticals, os.path.join(out_dir, 'criticals.csv')))
    report = {
        'gamma_c': gamma_c,
        'criticals': [asdict(c) for c in criticals],
        'gamma_exponent': fit_gamma_exponent(criticals, gamma_c).to_dict(),
        'chi_exponent': fit_chi_exponent(criticals).to_dict(),
    }
    try:
        report['fmin_quadratic'] = fit_fmin_quadratic(criticals).to_dict()
    except FitError as e:
        logger.warning(f"F_min quadratic fit skipped: {str(e)}")
        report['fmin_quadratic'] = None
    if all(c.delta_p_peak_gamma > gamma_c for c in criticals):
        report['delta_p_peak_exponent'] = fit_delta_p_peak_exponent(criticals, gamma_c).to_dict()
    else:
        report['delta_p_peak_exponent'] = None

    manifest.add_output(write_json(report, os.path.join(out_dir, 'exponents.json')))
    if form.emit_plot.data:
        for script in write_exponent_plots(out_dir, gamma_c):
            manifest.add_output(script)
        for script in write_overlay_plots(out_dir, [c.n_atoms for c in criticals]):
            manifest.add_output(script)
    manifest.timings['total_seconds'] = time.perf_counter() - started
    manifest.write(out_dir)
    click.echo(f"gamma exponent={report['gamma_exponent']['exponent']:.6f} "
               f"chi exponent={report['chi_exponent']['exponent']:.6f}")


def _inferred_config(points):
    """Grid settings recovered from a stored scan."""
    gammas = np.array([p.gamma for p in points])
    dgamma = float(np.median(np.diff(gammas)))
    return SweepConfig(gamma_start=float(gammas[0]), gamma_end=float(gammas[0] + len(gammas) * dgamma),
                       dgamma=dgamma)


@cli.command()
@common_options
@sweep_options
@click.option('--nu', default=None, help='Scaling exponent applied to N [default: 2/3].')
@click.option('--scan-dir', default=None, help='Directory of scan_N<n>.csv files from earlier runs.')
@click.option('--n-list', default=None, help='Atom numbers to sweep inline when no --scan-dir is given.')
@click.option('--x-limit', default=None, help='Half-width of the x window for the spread [default: 2].')
@handle_domain_errors
def collapse(config_path, out_dir, **flags):
    """Specific-susceptibility data collapse."""
    started = time.perf_counter()
    form = resolve_options(CollapseForm, config_path, flags)
    os.makedirs(out_dir, exist_ok=True)
    manifest = _manifest('collapse', form)

    scans, criticals = {}, {}
    if form.scan_dir.data:
        files = find_scan_files(form.scan_dir.data) if os.path.isdir(form.scan_dir.data) else {}
        if not files:
            raise click.UsageError(f"No scan_N<n>.csv files found in {form.scan_dir.data}")
        try:
            scans = {n_atoms: read_scan_csv(path) for n_atoms, path in files.items()}
            stored = os.path.join(form.scan_dir.data, 'criticals.csv')
            if os.path.exists(stored):
                criticals = {c.n_atoms: c for c in read_criticals_csv(stored) if c.n_atoms in scans}
            for n_atoms, points in scans.items():
                if n_atoms not in criticals:
                    criticals[n_atoms] = locate_critical(points, _inferred_config(points), n_atoms=n_atoms)
        except (InconsistencyError, BoundaryError):
            raise
        except ValueError as e:
            # stored files are user input
            raise click.UsageError(f"{form.scan_dir.data}: {str(e)}")
    else:
        sweep_config = _sweep_config(form)
        for n_atoms in sorted(set(form.n_list.data)):
            params = _model(form, n_atoms)
            try:
                points, critical = _sweep_or_record(params, sweep_config, form, out_dir, manifest)
            except BoundaryError as e:
                raise click.UsageError(f"N={n_atoms}: {str(e)}")
            manifest.add_output(write_scan_csv(points, os.path.join(out_dir, scan_filename(n_atoms))))
            scans[n_atoms], criticals[n_atoms] = points, critical

    points = build_collapse(scans, criticals, form.nu.data)
    manifest.add_output(write_collapse_csv(points, os.path.join(out_dir, 'collapse.csv')))
    try:
        spread = collapse_spread(points, x_limit=form.x_limit.data)
    except FitError as e:
        logger.warning(str(e))
        spread = float('nan')
    manifest.diagnostics['spread'] = spread
    manifest.diagnostics['nu'] = form.nu.data
    if form.emit_plot.data:
        manifest.add_output(write_collapse_plot(out_dir, sorted(scans), form.nu.data))
    manifest.timings['total_seconds'] = time.perf_counter() - started
    manifest.write(out_dir)
    click.echo(f"nu={form.nu.data:.6g} spread={spread:.6g} ({len(points)} points, {len(scans)} curves)")


@cli.command()
@common_options
@click.option('--n-atoms', default=None, help='Number of atoms N.')
@click.option('--gamma', default=None, help='Coupling.')
@click.option('--tolerance', default=None, help='Delta-P tolerance [default: DICKE_DELTA_P_TOLERANCE or 1e-8].')
@click.option('--nmax-start', default=None, help='First truncation tried [default: 0].')
@click.option('--nmax-ceiling', default=None, help='Last truncation tried [default: 40].')
@handle_domain_errors
def converge(config_path, out_dir, **flags):
    """Smallest truncation whose Delta-P is below the tolerance."""
    started = time.perf_counter()
    form = resolve_options(ConvergeForm, config_path, flags)
    os.makedirs(out_dir, exist_ok=True)
    manifest = _manifest('converge', form)
    params = _model(form, form.n_atoms.data).with_gamma(form.gamma.data)

    ladder = minimal_truncation(params, tolerance=form.tolerance.data, n_max_start=form.nmax_start.data,
                                n_max_ceiling=form.nmax_ceiling.data)
    manifest.add_output(write_json(asdict(ladder), os.path.join(out_dir, 'converge.json')))
    manifest.timings['total_seconds'] = time.perf_counter() - started
    manifest.write(out_dir)
    if not ladder.converged:
        raise CommandFailed(f"No truncation up to {form.nmax_ceiling.data} reached delta_p < "
                            f"{ladder.tolerance:g}", exit_code=EXIT_NOT_CONVERGED)
    click.echo(f"n_max={ladder.n_max} delta_p={ladder.rungs[-1]['delta_p']:.3e}")


@cli.command('oracle-check')
@common_options
@click.option('--n-atoms', default=None, help='Number of atoms N (small).')
@click.option('--gamma-list', default=None, help='Comma-separated couplings.')
@click.option('--cutoff', default=None, help='Fixed photon cutoff; converged automatically when omitted.')
@click.option('--nmax', default=None, help='ECS truncation [default: 40].')
@handle_domain_errors
def oracle_check(config_path, out_dir, **flags):
    """Compare the ECS ground state with the brute-force Fock-basis oracle."""
    started = time.perf_counter()
    form = resolve_options(OracleCheckForm, config_path, flags)
    os.makedirs(out_dir, exist_ok=True)
    manifest = _manifest('oracle-check', form)

    rows = []
    for gamma in form.gamma_list.data:
        params = _model(form, form.n_atoms.data).with_gamma(gamma)
        if form.cutoff.data:
            cutoff = form.cutoff.data
            energy, vector = fock_ground_state(params, cutoff)
        else:
            energy, vector, cutoff = converged_fock_ground_state(params)
        psi = ground_state_ecs(params, form.nmax.data)
        mapped = fock_to_ecs(vector, params, cutoff, form.nmax.data)
        overlap = float(abs(np.dot(psi.coeffs, mapped)))
        row = {
            'gamma': gamma,
            'cutoff': cutoff,
            'oracle_energy': energy,
            'ecs_energy': psi.energy,
            'energy_delta': abs(psi.energy - energy),
            'overlap': overlap,
        }
        row['passed'] = row['energy_delta'] <= ORACLE_ENERGY_TOLERANCE and overlap >= 1 - ORACLE_OVERLAP_TOLERANCE
        logger.info(f"Oracle N={params.n_atoms} gamma={gamma}: dE={row['energy_delta']:.2e} overlap={overlap:.12f}")
        rows.append(row)

    passed = all(row['passed'] for row in rows)
    manifest.add_output(write_json({'passed': passed, 'n_atoms': form.n_atoms.data, 'rows': rows},
                                   os.path.join(out_dir, 'oracle_check.json')))
    manifest.timings['total_seconds'] = time.perf_counter() - started
    manifest.write(out_dir)
    if not passed:
        failing = [row['gamma'] for row in rows if not row['passed']]
        raise CommandFailed(f"ECS and oracle disagree at gamma in {failing}")
    click.echo(f"Oracle check passed for N={form.n_atoms.data} at {len(rows)} couplings")
