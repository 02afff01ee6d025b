"""JSON persistence for protocols and optimization runs.

Protocol files are self-contained: they carry the ring size and coupling
plus everything needed to re-simulate and reproduce the recorded loss.
Run records additionally echo the full configuration and seed, so a record
alone suffices to reproduce the run.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .cw import CwOptConfig, SinePulse
from .errors import DomainError
from .nmr import NmrOptConfig, NmrSequence

SCHEMA_VERSION = 1


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def protocol_to_dict(protocol, n: int, j: float = 1.0, loss: float | None = None) -> dict:
    """Serializable description of a pulse protocol."""
    if isinstance(protocol, NmrSequence):
        body = {
            "kind": "nmr",
            "n": n,
            "j": j,
            "alphas": protocol.alphas.tolist(),
            "phis": protocol.phis.tolist(),
            "xis": protocol.xis.tolist(),
        }
    elif isinstance(protocol, SinePulse):
        body = {
            "kind": "cw",
            "n": n,
            "j": j,
            "duration": protocol.duration,
            "coeffs_x": protocol.coeffs_x.tolist(),
            "coeffs_y": protocol.coeffs_y.tolist(),
            "active_x": protocol.active_x.tolist(),
            "active_y": protocol.active_y.tolist(),
        }
    else:
        raise DomainError(f"unknown protocol type {type(protocol)!r}")
    if loss is not None:
        body["loss"] = float(loss)
    return body


def protocol_from_dict(data: dict):
    """Rebuild a protocol; returns (protocol, n, j)."""
    kind = data.get("kind")
    if kind == "nmr":
        seq = NmrSequence(
            np.array(data["alphas"]), np.array(data["phis"]), np.array(data["xis"])
        )
        return seq, int(data["n"]), float(data.get("j", 1.0))
    if kind == "cw":
        pulse = SinePulse(
            float(data["duration"]),
            np.array(data["coeffs_x"]),
            np.array(data["coeffs_y"]),
            np.array(data["active_x"], dtype=bool),
            np.array(data["active_y"], dtype=bool),
        )
        return pulse, int(data["n"]), float(data.get("j", 1.0))
    raise DomainError(f"protocol file has unknown kind {kind!r}")


def config_to_dict(cfg) -> dict:
    if isinstance(cfg, (NmrOptConfig, CwOptConfig)):
        return asdict(cfg)
    raise DomainError(f"unknown config type {type(cfg)!r}")


def make_run_record(config: dict, results: dict) -> dict:
    from . import __version__

    return {
        "schema": SCHEMA_VERSION,
        "config": _jsonable(config),
        "results": _jsonable(results),
        "provenance": {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "software": f"ringctl {__version__}",
        },
    }


def save_json(data: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(_jsonable(data), indent=2) + "\n", encoding="utf-8")


def load_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def load_protocol(path: str | Path):
    """Load a protocol from either a bare protocol file or a run record."""
    data = load_json(path)
    if "kind" in data:
        return protocol_from_dict(data)
    if "results" in data and "best_protocol" in data["results"]:
        return protocol_from_dict(data["results"]["best_protocol"])
    raise DomainError(f"{path} contains neither a protocol nor a run record")
