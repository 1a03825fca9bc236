"""Export module for hnoma results.

The Export class writes the result of one command to CSV or JSON. Every file
starts with the provenance of the run:

- CSV files open with a ``# tool=hnoma version=... command=... config_hash=...
  seed=...`` comment line, followed by the column header;
- JSON files are ``{"meta": {...}, "data": ...}`` objects whose ``meta``
  block also carries the validated config.

No timestamps are written, so identical config and seed give byte-identical
files.
"""

import csv
import json
import math
from typing import Any, Dict, Iterable, Optional, Sequence

import numpy as np

from . import __version__


def clean(value: Any) -> Any:
    """Turn numpy scalars/arrays into plain JSON data; NaN and inf become ``None``."""
    if isinstance(value, dict):
        return {str(k): clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return clean(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


class Export:
    """Writer for the files of one command run.

    Attributes:
        command: Command name (``ess``, ``replicator``, ...).
        config_hash: SHA-256 of the canonical config.
        seed: Seed of the run, ``None`` for deterministic commands.
        config: Canonical config data, stored in JSON metadata.
    """

    def __init__(self, command: str, config_hash: str, seed: Optional[int] = None,
                 config: Optional[Dict[str, Any]] = None):
        self.command = command
        self.config_hash = config_hash
        self.seed = seed
        self.config = config or {}

    def meta(self) -> Dict[str, Any]:
        return {
            "tool": "hnoma",
            "version": __version__,
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "config": self.config,
        }

    def header_line(self) -> str:
        seed = "-" if self.seed is None else str(self.seed)
        return "# tool=hnoma version=%s command=%s config_hash=%s seed=%s" % (
            __version__, self.command, self.config_hash, seed)

    def write(self, export_type: str, filename: str, data: Any) -> int:
        """Proxy method that dispatches to the ``write_<export_type>`` writer.

        Args:
            export_type: Writer name, e.g. ``trajectorycsv`` or ``simjson``.
            filename: Output path without extension (added from the type suffix).
            data: Object handed to the writer.

        Returns:
            int: Number of records written.
        """
        call_write = getattr(self, 'write_' + export_type)
        if export_type.endswith('csv'):
            filename += '.csv'
        elif export_type.endswith('json'):
            filename += '.json'
        return call_write(filename, data)

    # ------------------------------------------------------------------
    # Generic writers
    # ------------------------------------------------------------------

    def write_csv(self, filename: str, keys: Sequence[str], rows: Iterable[Sequence[Any]]) -> int:
        count = 0
        with open(filename, 'w', newline='\n', encoding='utf-8') as file:
            file.write(self.header_line() + '\n')
            writer = csv.writer(file, lineterminator='\n')
            writer.writerow(keys)
            for row in rows:
                writer.writerow(['' if isinstance(v, float) and math.isnan(v) else v for v in row])
                count += 1
        return count

    def write_json(self, filename: str, data: Any) -> int:
        with open(filename, 'w', newline='\n', encoding='utf-8') as file:
            json.dump({"meta": clean(self.meta()), "data": clean(data)}, file,
                      indent=2, sort_keys=True, allow_nan=False)
            file.write('\n')
        return len(data) if isinstance(data, list) else 1

    # ------------------------------------------------------------------
    # Typed writers
    # ------------------------------------------------------------------

    def write_trajectorycsv(self, filename, trajectory) -> int:
        return self.write_csv(filename, ['iter', 'x1', 'x2', 'x3', 'payoff'], trajectory.rows())

    def write_trajectoryjson(self, filename, trajectory) -> int:
        return self.write_json(filename, {
            "converged": trajectory.converged,
            "iterations": trajectory.iterations,
            "step_size": trajectory.step_size,
            "flags": trajectory.flags,
            "rows": [list(r) for r in trajectory.rows()],
        })

    def write_adaptivecsv(self, filename, result) -> int:
        return self.write_csv(filename,
                              ['block', 'x1', 'x2', 'x3', 'c', 'est_payoff1', 'est_payoff2'],
                              result.rows())

    def write_adaptivejson(self, filename, result) -> int:
        data = {
            "protocol": result.protocol.value,
            "flags": result.trajectory.flags,
            "rows": [list(r) for r in result.rows()],
            "tracking_error": result.tracking_error() if result.reference else None,
        }
        if result.dispersion:
            data["dispersion"] = result.dispersion
        return self.write_json(filename, data)

    def write_usersjson(self, filename, result) -> int:
        return self.write_json(filename, result.user_dump())

    def write_sweepcsv(self, filename, table) -> int:
        return self.write_csv(filename,
                              [table.axis, 'x1', 'x2', 'x3', 'eta_hnoma', 'eta_oma', 'valid', 'regime'],
                              (r.as_tuple() for r in table.rows))

    def write_sweepjson(self, filename, table) -> int:
        return self.write_json(filename, {
            "summary": table.summary(),
            "rows": [list(r.as_tuple()) for r in table.rows],
        })

    def write_simjson(self, filename, stats) -> int:
        return self.write_json(filename, stats.to_dict())

    def write_tracecsv(self, filename, stats) -> int:
        return self.write_csv(filename,
                              ['slot', 'block', 'user', 'action', 'snr', 'power', 'success'],
                              stats.trace)

    def write_summaryjson(self, filename, data) -> int:
        return self.write_json(filename, data)

    def write_rowscsv(self, filename, data) -> int:
        """Generic table given as ``{"keys": [...], "rows": [...]}``."""
        return self.write_csv(filename, data["keys"], data["rows"])


__all__ = ["Export", "clean"]
