"""NLRM/1 model directory format.

One directory per model: a text manifest ``model.nlrm`` with ``key = value``
lines, plus one raw binary per stored operator pair.  Binaries hold complex128
little-endian values, interleaved (re, im), grid points x-fastest (the same
flat order the in-memory arrays use); vector files are component-major (every
x component, then y, then z).  Only pairs with a >= b are stored; the mirror
is reconstructed by conjugation, which is an exact bit-level involution, so a
write-then-read round trip reproduces the model arrays byte for byte.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ModelIOError, ValidationFailure
from .grid import Grid3D
from .model import MolecularModel

MANIFEST_NAME = "model.nlrm"
FORMAT_TAG = "NLRM/1"

_REQUIRED_KEYS = (
    "format",
    "n_states",
    "electron_count",
    "endianness",
    "energies",
    "populations",
    "dephasing",
    "grid_dims",
    "grid_spacing",
    "grid_origin",
)


def _fmt_floats(values) -> str:
    return " ".join(f"{float(v):.17g}" for v in np.asarray(values).ravel())


def _sigma_name(a: int, b: int) -> str:
    return f"sigma_{a}_{b}.c128"


def _current_name(a: int, b: int) -> str:
    return f"current_{a}_{b}.c128"


def write_model(model: MolecularModel, directory: str | Path) -> Path:
    """Persist a model as an NLRM/1 directory, overwriting existing files."""
    out = Path(directory)
    if out.exists() and not out.is_dir():
        raise ModelIOError(f"{out} exists and is not a directory")
    out.mkdir(parents=True, exist_ok=True)

    n = model.n_states
    for a in range(n):
        for b in range(a):
            if not np.array_equal(model.sigma[b, a], np.conj(model.sigma[a, b])) or not (
                np.array_equal(model.current[b, a], np.conj(model.current[a, b]))
            ):
                raise ValidationFailure(
                    f"pair ({a}, {b}) and its mirror are not exact conjugates; "
                    "refusing to store a non-Hermitian model"
                )

    lines = [
        f"format = {FORMAT_TAG}",
        f"n_states = {n}",
        f"electron_count = {model.electron_count}",
        "endianness = little",
        f"energies = {_fmt_floats(model.energies)}",
        f"populations = {_fmt_floats(model.populations)}",
        f"dephasing = {_fmt_floats(model.dephasing)}",
        "grid_dims = " + " ".join(str(d) for d in model.grid.dims),
        f"grid_spacing = {_fmt_floats(model.grid.spacing)}",
        f"grid_origin = {_fmt_floats(model.grid.origin)}",
    ]
    (out / MANIFEST_NAME).write_text("\n".join(lines) + "\n")

    for a in range(n):
        for b in range(a + 1):
            sig = np.ascontiguousarray(model.sigma[a, b], dtype="<c16")
            (out / _sigma_name(a, b)).write_bytes(sig.tobytes())
            cur = np.ascontiguousarray(model.current[a, b], dtype="<c16")
            (out / _current_name(a, b)).write_bytes(cur.tobytes())
    return out


def _parse_manifest(path: Path) -> dict[str, str]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelIOError(f"cannot read manifest {path}: {exc}") from exc
    entries: dict[str, str] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ModelIOError(f"{path}:{ln}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    for key in _REQUIRED_KEYS:
        if key not in entries:
            raise ModelIOError(f"manifest {path} is missing required key '{key}'")
    for key in entries:
        if key not in _REQUIRED_KEYS:
            raise ModelIOError(f"manifest {path} has unknown key '{key}'")
    return entries


def _read_block(path: Path, expected_values: int) -> np.ndarray:
    if not path.is_file():
        raise ModelIOError(f"model binary {path} is missing")
    data = path.read_bytes()
    expected = 16 * expected_values
    if len(data) != expected:
        raise ModelIOError(
            f"{path.name}: expected {expected} bytes ({expected_values} complex values), "
            f"found {len(data)}"
        )
    return np.frombuffer(data, dtype="<c16").astype(np.complex128)


def read_model(directory: str | Path) -> MolecularModel:
    """Load an NLRM/1 directory back into a model."""
    root = Path(directory)
    if not root.is_dir():
        raise ModelIOError(f"{root} is not a model directory")
    entries = _parse_manifest(root / MANIFEST_NAME)

    if entries["format"] != FORMAT_TAG:
        raise ModelIOError(f"unsupported model format {entries['format']!r}")
    if entries["endianness"] != "little":
        raise ModelIOError(f"unsupported endianness {entries['endianness']!r}")
    try:
        n = int(entries["n_states"])
        electron_count = int(entries["electron_count"])
        energies = np.array(entries["energies"].split(), dtype=np.float64)
        populations = np.array(entries["populations"].split(), dtype=np.float64)
        dephasing = np.array(entries["dephasing"].split(), dtype=np.float64)
        dims = tuple(int(v) for v in entries["grid_dims"].split())
        spacing = tuple(float(v) for v in entries["grid_spacing"].split())
        origin = tuple(float(v) for v in entries["grid_origin"].split())
    except ValueError as exc:
        raise ModelIOError(f"malformed manifest value: {exc}") from exc
    if energies.shape != (n,) or populations.shape != (n,):
        raise ModelIOError(f"energies/populations must hold {n} values")
    if dephasing.size != n * n:
        raise ModelIOError(f"dephasing must hold {n * n} values (row-major)")

    grid = Grid3D(dims=dims, spacing=spacing, origin=origin)
    npts = grid.n_points
    sigma = np.zeros((n, n, npts), dtype=np.complex128)
    current = np.zeros((n, n, 3, npts), dtype=np.complex128)
    for a in range(n):
        for b in range(a + 1):
            sigma[a, b] = _read_block(root / _sigma_name(a, b), npts)
            current[a, b] = _read_block(root / _current_name(a, b), 3 * npts).reshape(3, npts)
            if a != b:
                sigma[b, a] = np.conj(sigma[a, b])
                current[b, a] = np.conj(current[a, b])

    return MolecularModel(
        energies=energies,
        populations=populations,
        dephasing=dephasing.reshape(n, n),
        electron_count=electron_count,
        grid=grid,
        sigma=sigma,
        current=current,
    )
