"""Command implementations behind the CLI and the HTTP service.

Every command is a plain function; the CLI maps raised errors to exit codes
and the service maps them to HTTP responses.  Output directories are guarded
by a lock file for the duration of a run, and every run leaves a manifest
recording the config digest and every convention switch, so identical configs
must produce byte-identical output trees.
"""

from __future__ import annotations

import os
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import ModelIOError
from .generator import generate_model
from .model import MolecularModel, validate_model
from .nlrm import read_model
from .oracle import extract_orders
from .presets import preset_path
from .runconfig import RunConfig, parse_run_config
from .signals import SignalTrace, energy_exchange, heterodyne_signal, linear_spectra

LOCK_NAME = ".nlres-lock"
MANIFEST_NAME = "run_manifest.txt"
VALIDATION_REPORT = "validation.txt"
COMPARISON_NAME = "oracle_comparison.csv"


@contextmanager
def locked_output(out: Path):
    """Hold an exclusive lock file inside ``out`` while producing results."""
    out.mkdir(parents=True, exist_ok=True)
    lock = out / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ModelIOError(
            f"output directory {out} is locked ({LOCK_NAME} exists); "
            "another run owns it, or a crashed run left the lock behind"
        ) from None
    try:
        os.write(fd, f"{os.getpid()}\n".encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def resolve_model_source(source: str | Path) -> Path:
    """Accept either a recipe path or the bare name of a shipped preset."""
    candidate = Path(source)
    if candidate.is_file():
        return candidate
    return preset_path(str(source))


def _manifest_text(config: RunConfig, command: str, outputs: list[str]) -> str:
    entries = {
        "command": command,
        "config_digest": config.config_digest,
        "model": str(config.model_dir),
        "orders": " ".join(str(n) for n in config.orders),
        "outputs": " ".join(sorted(outputs)),
        "time.t0": f"{config.time_grid.t0:.17g}",
        "time.dt": f"{config.time_grid.dt:.17g}",
        "time.n_t": str(config.time_grid.n_t),
    }
    for key, value in config.conventions.items():
        entries[f"conventions.{key}"] = value
    for key, value in config.tolerances.items():
        entries[f"tolerances.{key}"] = value
    return "\n".join(f"{k} = {entries[k]}" for k in sorted(entries)) + "\n"


def _write_outputs(config: RunConfig, command: str, files: dict[str, str]) -> Path:
    out = config.output_dir
    files = dict(files)
    files[MANIFEST_NAME] = _manifest_text(config, command, [n for n in files])
    for name in sorted(files):
        (out / name).write_text(files[name])
    return out


def cmd_validate(model_dir: str | Path, report_dir: str | Path | None = None) -> tuple[int, str]:
    """Check a stored model; returns (exit_code, report text).

    The report also lands in ``validation.txt`` next to the model (or in
    ``report_dir`` when given), so CI can archive it.
    """
    model = read_model(model_dir)
    report = validate_model(model)
    text = report.to_text()
    target = Path(report_dir) if report_dir is not None else Path(model_dir)
    target.mkdir(parents=True, exist_ok=True)
    (target / VALIDATION_REPORT).write_text(text)
    return (0 if report.passed else 1), text


def cmd_gen_model(recipe: str | Path, out_dir: str | Path) -> Path:
    """Build a model from a recipe (or preset name) into an NLRM/1 directory."""
    return generate_model(resolve_model_source(recipe), Path(out_dir))


def _run_traces(
    config: RunConfig, model: MolecularModel
) -> tuple[dict[str, str], dict[int, SignalTrace]]:
    files: dict[str, str] = {}
    energy: dict[int, SignalTrace] = {}
    for n in config.orders:
        trace = energy_exchange(model, config.field, n)
        energy[n] = trace
        files[f"energy_exchange_order{n}.csv"] = trace.to_csv()
    for i, request in enumerate(config.heterodynes, start=1):
        trace = heterodyne_signal(model, config.field, request.mode, request.max_order)
        files[f"heterodyne_{i}.csv"] = trace.to_csv()
    if config.spectra is not None:
        s = config.spectra
        dip, naive = linear_spectra(
            model,
            s.omega,
            polarization=s.polarization,
            e0=s.e0,
            v_q=s.v_q,
            n0=s.n0,
            route=s.route,
        )
        files["spectrum_dipole.csv"] = dip.to_csv()
        files["spectrum_naive_mc.csv"] = naive.to_csv()
    return files, energy


def cmd_run(config_path: str | Path) -> Path:
    """Produce every requested perturbative trace as CSV plus a run manifest."""
    config = parse_run_config(config_path)
    model = read_model(config.model_dir)
    with locked_output(config.output_dir):
        files, _ = _run_traces(config, model)
        return _write_outputs(config, "run", files)


def _rel_l2(values: np.ndarray, reference: np.ndarray) -> float:
    scale = float(np.linalg.norm(reference))
    if scale == 0.0:
        return float(np.linalg.norm(values))
    return float(np.linalg.norm(values - reference) / scale)


_ABSENT_FLOOR = 1e-10


def comparison_csv(
    extracted: dict[int, SignalTrace],
    perturbative: dict[int, SignalTrace],
    tolerance: float,
) -> str:
    """Per-order relative errors between the sweep fit and the direct series.

    An order whose perturbative trace is negligible against the leading one
    (symmetry-forbidden, e.g. even response of a centrosymmetric model) has no
    usable own scale; there the extracted trace is measured against the
    leading order instead, and must agree that the order is absent.
    """
    orders = sorted(set(extracted) & set(perturbative))
    lead = max((float(np.linalg.norm(perturbative[n].values)) for n in orders), default=0.0)
    lines = ["# order, rel_l2, tolerance, verdict, basis"]
    for n in orders:
        own = float(np.linalg.norm(perturbative[n].values))
        if lead > 0.0 and own <= _ABSENT_FLOOR * lead:
            err = float(np.linalg.norm(extracted[n].values)) / lead
            basis = "leading"
        else:
            err = _rel_l2(extracted[n].values, perturbative[n].values)
            basis = "self"
        verdict = "pass" if err <= tolerance else "fail"
        lines.append(f"{n},{err:.17g},{tolerance:.17g},{verdict},{basis}")
    return "\n".join(lines) + "\n"


def cmd_oracle(config_path: str | Path) -> Path:
    """Cross-check the perturbative traces against the propagated reference.

    Runs the order-extraction sweep on the configured field, writes the
    extracted traces next to the perturbative ones, and a comparison CSV with
    one relative-error row per order.
    """
    config = parse_run_config(config_path)
    model = read_model(config.model_dir)
    request = config.oracle
    with locked_output(config.output_dir):
        files, perturbative = _run_traces(config, model)
        kwargs = {}
        if request is not None and request.scales is not None:
            kwargs["scales"] = request.scales
        if request is not None and request.dt_sub is not None:
            kwargs["dt_sub"] = request.dt_sub
        extracted = extract_orders(model, config.field, **kwargs)
        by_order = {trace.order: trace for trace in extracted}
        for n, trace in sorted(by_order.items()):
            files[f"oracle_order{n}.csv"] = trace.to_csv()
        tolerance = request.tolerance if request is not None else 1e-2
        files[COMPARISON_NAME] = comparison_csv(by_order, perturbative, tolerance)
        return _write_outputs(config, "oracle", files)
