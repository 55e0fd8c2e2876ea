"""
KAR Learner - Model files, run manifests and atomic file writes
"""
import json
import os
import tempfile
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np
import pandas as pd

from src.activation import Activation
from src.errors import ModelFormatError
from src.network import NetworkSpec, WeightStack

MODEL_FORMAT = "karnet-model"
MODEL_VERSION = 1

PathLike = Union[str, Path]


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write_text(path: PathLike, text: str):
    """
    Write text to a temp file next to path, then rename over it.

    The file ends up with the mode a plain open() would give it (0666 less the umask).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        # mkstemp creates the file 0600
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_frame(path: PathLike, frame: pd.DataFrame):
    """CSV with shortest round-trip float formatting, written atomically"""
    atomic_write_text(path, frame.to_csv(index=False, lineterminator="\n"))


def _format_row(row: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in row)


def model_to_text(spec: NetworkSpec, W: WeightStack) -> str:
    """Serialise a network (see FORMATS.md)"""
    W.validate(spec)
    lines = [
        f"format = {MODEL_FORMAT}",
        f"version = {MODEL_VERSION}",
        f"input_dim = {spec.input_dim}",
        f"widths = {','.join(str(h) for h in spec.widths)}",
    ]
    for k, a in enumerate(spec.activations, start=1):
        lines.append(f"activation.{k} = {a.kind} {a.shift!r} {a.clip_epsilon!r}")
    for k, layer in enumerate(W.layers, start=1):
        rows, cols = layer.shape
        lines.append(f"[W_{k}] {rows} {cols}")
        lines.extend(_format_row(row) for row in layer)
    lines.append("end")
    return "\n".join(lines) + "\n"


def save_model(path: PathLike, spec: NetworkSpec, W: WeightStack):
    atomic_write_text(path, model_to_text(spec, W))


def _parse_header(lines: List[str]) -> Tuple[Dict[str, str], int]:
    header = {}
    i = 0
    while i < len(lines) and not lines[i].startswith("["):
        line = lines[i].strip()
        i += 1
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ModelFormatError(f"line {i}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        header[key.strip()] = value.strip()
    return header, i


def model_from_text(text: str) -> Tuple[NetworkSpec, WeightStack]:
    lines = text.splitlines()
    header, i = _parse_header(lines)
    if header.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"not a {MODEL_FORMAT} file")
    if header.get("version") != str(MODEL_VERSION):
        raise ModelFormatError(f"unsupported model version {header.get('version')!r}")
    try:
        widths = tuple(int(h) for h in header["widths"].split(","))
        activations = []
        for k in range(1, len(widths) + 1):
            kind, shift, eps = header[f"activation.{k}"].split()
            activations.append(Activation(kind, float(shift), float(eps)))
        spec = NetworkSpec(int(header["input_dim"]), widths, tuple(activations))

        layers = []
        for k in range(1, spec.n_layers + 1):
            tag, rows, cols = lines[i].split()
            if tag != f"[W_{k}]":
                raise ModelFormatError(f"line {i + 1}: expected [W_{k}], got {tag!r}")
            rows, cols = int(rows), int(cols)
            block = [[float(v) for v in lines[i + 1 + r].split()] for r in range(rows)]
            layers.append(np.array(block, dtype=np.float64).reshape(rows, cols))
            i += rows + 1
        if lines[i].strip() != "end":
            raise ModelFormatError(f"line {i + 1}: expected end marker")
    except (KeyError, IndexError, ValueError) as e:
        raise ModelFormatError(f"malformed model file: {e}") from e
    W = WeightStack(tuple(layers))
    W.validate(spec)
    return spec, W


def load_model(path: PathLike) -> Tuple[NetworkSpec, WeightStack]:
    return model_from_text(Path(path).read_text(encoding="utf-8"))


def manifest_path(output: PathLike) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".manifest")


def write_manifest(output: PathLike, command: str, argv: List[str], params: Dict[str, Any]) -> Path:
    """
    Record a run's effective parameters next to its main output.

    argv is stored as JSON so replay can re-run the exact command line.
    """
    lines = [f"command = {command}", f"argv = {json.dumps(argv)}"]
    lines.extend(f"{key} = {value}" for key, value in params.items())
    for package in ("numpy", "scipy", "pandas"):
        try:
            lines.append(f"version.{package} = {version(package)}")
        except PackageNotFoundError:
            lines.append(f"version.{package} = unknown")
    path = manifest_path(output)
    atomic_write_text(path, "\n".join(lines) + "\n")
    return path


def read_manifest(path: PathLike) -> Dict[str, str]:
    entries = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            entries[key.strip()] = value.strip()
    return entries
