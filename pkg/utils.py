import json
import logging
import math
import os
import re
from dataclasses import dataclass, field

import pandas as pd

from observables import ScanPoint
from scaling import CollapsePoint
from sweep import CriticalPoint

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'
SCAN_COLUMNS = ['gamma', 'fidelity', 'chi_f', 'delta_p', 'energy', 'degenerate']
CRITICAL_COLUMNS = ['n_atoms', 'gamma_max', 'f_min', 'chi_max', 'delta_p_peak_gamma']
COLLAPSE_COLUMNS = ['n_atoms', 'x', 'y']
SCAN_FILE_PATTERN = re.compile(r'^scan_N(\d+)\.csv$')


def scan_filename(n_atoms):
    return f'scan_N{n_atoms}.csv'


def write_frame(frame, path):
    """Write a frame with lossless 17-significant-digit reals and '\\n' line endings."""
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep='nan', lineterminator='\n')
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def read_frame(path, columns):
    """Read a CSV written by write_frame; the header must match exactly."""
    frame = pd.read_csv(path, float_precision='round_trip', keep_default_na=False, na_values=['nan'])
    if list(frame.columns) != columns:
        raise ValueError(f"{path}: expected columns {','.join(columns)}, got {','.join(frame.columns)}")
    return frame


def scan_frame(points):
    """Scan points as a frame with the exact CSV column order, rows in ascending gamma."""
    rows = [{
        'gamma': p.gamma,
        'fidelity': p.fidelity,
        'chi_f': p.chi_f,
        'delta_p': p.delta_p,
        'energy': p.energy,
        'degenerate': int(p.degenerate),
    } for p in sorted(points, key=lambda p: p.gamma)]
    return pd.DataFrame(rows, columns=SCAN_COLUMNS)


def write_scan_csv(points, path):
    return write_frame(scan_frame(points), path)


def read_scan_csv(path):
    frame = read_frame(path, SCAN_COLUMNS)
    points = []
    for row in frame.itertuples(index=False):
        if math.isnan(row.fidelity):
            points.append(ScanPoint.failure(float(row.gamma)))
            continue
        points.append(ScanPoint(
            gamma=float(row.gamma),
            fidelity=float(row.fidelity),
            chi_f=float(row.chi_f),
            delta_p=float(row.delta_p),
            energy=float(row.energy),
            degenerate=bool(row.degenerate),
        ))
    return points


def write_criticals_csv(criticals, path):
    frame = pd.DataFrame([{
        'n_atoms': c.n_atoms,
        'gamma_max': c.gamma_max,
        'f_min': c.f_min,
        'chi_max': c.chi_max,
        'delta_p_peak_gamma': c.delta_p_peak_gamma,
    } for c in sorted(criticals, key=lambda c: c.n_atoms)], columns=CRITICAL_COLUMNS)
    return write_frame(frame, path)


def read_criticals_csv(path):
    frame = read_frame(path, CRITICAL_COLUMNS)
    return [CriticalPoint(n_atoms=int(row.n_atoms), gamma_max=float(row.gamma_max),
                          f_min=float(row.f_min), chi_max=float(row.chi_max),
                          delta_p_peak_gamma=float(row.delta_p_peak_gamma))
            for row in frame.itertuples(index=False)]


def write_collapse_csv(points, path):
    frame = pd.DataFrame([{'n_atoms': p.n_atoms, 'x': p.x, 'y': p.y} for p in points],
                         columns=COLLAPSE_COLUMNS)
    return write_frame(frame, path)


def read_collapse_csv(path):
    frame = read_frame(path, COLLAPSE_COLUMNS)
    return [CollapsePoint(n_atoms=int(row.n_atoms), x=float(row.x), y=float(row.y))
            for row in frame.itertuples(index=False)]


def find_scan_files(directory):
    """Map n_atoms -> path for every scan_N<n>.csv in a directory."""
    found = {}
    for name in sorted(os.listdir(directory)):
        match = SCAN_FILE_PATTERN.match(name)
        if match:
            found[int(match.group(1))] = os.path.join(directory, name)
    return found


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def write_json(data, path):
    with open(path, 'w') as f:
        json.dump(_json_safe(data), f, indent=2, sort_keys=True)
        f.write('\n')
    return path


@dataclass
class RunManifest:
    """Resolved configuration, outputs, timings and solver diagnostics of one command."""
    command: str
    version: str
    config: dict
    outputs: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def add_output(self, path):
        self.outputs.append(os.path.basename(path))
        return path

    def write(self, directory):
        missing = [name for name in self.outputs if not os.path.exists(os.path.join(directory, name))]
        if missing:
            raise FileNotFoundError(f"Manifest lists missing outputs: {', '.join(missing)}")
        return write_json({
            'command': self.command,
            'version': self.version,
            'config': self.config,
            'outputs': self.outputs,
            'timings': self.timings,
            'diagnostics': self.diagnostics,
        }, os.path.join(directory, 'manifest.json'))


def _write_script(path, lines):
    with open(path, 'w') as f:
        f.write('\n'.join(lines) + '\n')
    return path


def _gnuplot_header(output):
    return [
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set terminal pngcairo size 900,600",
        f"set output '{output}'",
    ]


def write_scan_plots(csv_name, directory, n_atoms):
    """Fidelity, susceptibility and Delta-P against gamma, one gnuplot script each."""
    base = os.path.splitext(csv_name)[0]
    scripts = []
    for column, label, suffix in ((2, 'F', 'fidelity'), (3, 'chi_F', 'chi'), (4, 'Delta P', 'delta_p')):
        stem = f'{base}_{suffix}'
        lines = _gnuplot_header(f'{stem}.png') + [
            "set xlabel 'gamma'",
            f"set ylabel '{label}'",
            f"set title 'N = {n_atoms}'",
            f"plot '{csv_name}' using 1:{column} with lines title '{label}'",
        ]
        scripts.append(_write_script(os.path.join(directory, f'{stem}.gp'), lines))
    return scripts


def write_exponent_plots(directory, gamma_c):
    """log-log plots of gamma_max - gamma_c and chi_max, semilog plot of F_min."""
    specs = (
        ('gamma_max', "set logscale xy", f"using 1:($2-{gamma_c!r})", 'gamma_max - gamma_c'),
        ('f_min', "set logscale y", "using 1:3", 'F_min'),
        ('chi_max', "set logscale xy", "using 1:4", 'chi_max'),
    )
    scripts = []
    for stem, scale, using, label in specs:
        lines = _gnuplot_header(f'{stem}.png') + [
            scale,
            "set xlabel 'N'",
            f"set ylabel '{label}'",
            f"plot 'criticals.csv' {using} with linespoints title '{label}'",
        ]
        scripts.append(_write_script(os.path.join(directory, f'{stem}.gp'), lines))
    return scripts


def write_collapse_plot(directory, n_values, nu):
    lines = _gnuplot_header('collapse.png') + [
        f"set xlabel 'N^{{{nu:.4g}}} (gamma - gamma_max)'",
        "set ylabel 'chi_S'",
        "set xrange [-2:2]",
        "plot " + ', \\\n     '.join(
            f"'collapse.csv' using ($1=={n} ? $2 : 1/0):3 with points title 'N={n}'" for n in n_values),
    ]
    return _write_script(os.path.join(directory, 'collapse.gp'), lines)


def write_overlay_plots(directory, n_values):
    """F and chi_F against gamma with every scan_N*.csv on one axis."""
    scripts = []
    for column, label, stem in ((2, 'F', 'scans_fidelity'), (3, 'chi_F', 'scans_chi')):
        lines = _gnuplot_header(f'{stem}.png') + [
            "set xlabel 'gamma'",
            f"set ylabel '{label}'",
            "plot " + ', \\\n     '.join(
                f"'{scan_filename(n)}' using 1:{column} with lines title 'N={n}'" for n in n_values),
        ]
        scripts.append(_write_script(os.path.join(directory, f'{stem}.gp'), lines))
    return scripts
