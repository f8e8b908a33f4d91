"""Bit-exact CSV and manifest output.

Every study run produces one CSV per table plus a manifest JSON tying the
rows back to the exact configuration (sha256 of the canonical config dump),
tool version, master seed and wall-clock interval.  All files are written
atomically (temp file then rename) with UTF-8 encoding, LF line endings and
repr-formatted floats, so reruns with the same config are byte-identical.
"""

import hashlib
import json
import os
import tempfile

import numpy as np

from . import __version__
from .errors import ContractViolation


def format_cell(value):
    """Canonical cell text: repr for floats (shortest round-trip), str else."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _atomic_write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, columns, rows):
    """Fixed column order; missing cells are empty, extras are an error."""
    lines = [",".join(columns)]
    for row in rows:
        unknown = set(row) - set(columns)
        if unknown:
            raise ContractViolation(
                f"row has columns outside the declared schema: {sorted(unknown)}")
        lines.append(",".join(format_cell(row.get(c, "")) for c in columns))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config_dict):
    return hashlib.sha256(canonical_json(config_dict).encode("utf-8")).hexdigest()


def write_manifest(path, config_dict, master_seed, started, finished, outputs):
    manifest = {
        "version": __version__,
        "config": config_dict,
        "config_sha256": config_hash(config_dict),
        "master_seed": master_seed,
        "started_unix": started,
        "finished_unix": finished,
        "outputs": sorted(outputs),
    }
    _atomic_write_text(path, json.dumps(manifest, sort_keys=True, indent=2) + "\n")
