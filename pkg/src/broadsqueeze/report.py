"""Canonical, byte-reproducible JSON reports."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

SCHEMA_VERSION = 1
SIGNIFICANT_DIGITS = 12


def canonical(obj: Any) -> Any:
    """Plain-JSON copy with floats rounded to 12 significant digits; NaN/inf become ``None``."""
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [canonical(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{SIGNIFICANT_DIGITS}g}")
    if obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj: Any) -> str:
    return json.dumps(canonical(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_hash(obj: Any) -> str:
    return hashlib.sha256(json.dumps(canonical(obj), sort_keys=True).encode()).hexdigest()


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions() -> dict:
    import scipy

    from . import __version__

    return {"broadsqueeze": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def estimate_block(est) -> dict:
    if est is None:
        return None
    return {"value": est[0], "sigma": est[1]}


@dataclass
class ReportBundle:
    kind: str
    metadata: dict
    photon_statistics: dict | None = None
    modes: dict | None = None
    spectrum: dict | None = None
    manifest: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "metadata": self.metadata,
            "photon_statistics": self.photon_statistics,
            "modes": self.modes,
            "spectrum": self.spectrum,
            "manifest": list(self.manifest),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ReportBundle":
        if obj.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema_version {obj.get('schema_version')!r}")
        return cls(
            obj["kind"],
            obj["metadata"],
            obj.get("photon_statistics"),
            obj.get("modes"),
            obj.get("spectrum"),
            list(obj.get("manifest", [])),
        )


def write_report(bundle: ReportBundle, path: str | Path) -> None:
    Path(path).write_text(dumps(bundle.to_dict()))


def read_report(path: str | Path) -> ReportBundle:
    return ReportBundle.from_dict(json.loads(Path(path).read_text()))
