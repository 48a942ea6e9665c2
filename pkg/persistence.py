"""
Artifact I/O: fixed-format CSVs, JSON sidecars, gnuplot scripts and the
run manifest.

Data files never carry timestamps so repeated runs are byte-identical;
the manifest is the only place a creation time is written.
"""
import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import OUTPUT
from errors import ConfigError, DependencyMissing
from evolution import EvolutionState, GridSpec
from params import PlasmaParams, Regime, RegimeKind
from sagdeev import potential_from_offset
from stationary import SheathProfile, offset_from_potential

logger = logging.getLogger(__name__)

Pathlike = Union[str, Path]

PROFILE_HEADER = ("x", "phi", "n", "u", "T")
SNAPSHOT_HEADER = ("x", "v", "u", "T", "phi")


def resolve_output_root(out: Optional[Pathlike] = None) -> Path:
    """--out, else $SHEATHLAB_OUTPUT_ROOT, else ./experiments"""
    if out:
        return Path(out)
    return Path(os.environ.get(OUTPUT.ROOT_ENV) or OUTPUT.ROOT)


def write_csv(path: Pathlike, header: Sequence[str], columns: Sequence[np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, fmt=OUTPUT.FLOAT_FORMAT, delimiter=",",
               header=",".join(header), comments="")
    return path


def read_csv(path: Pathlike) -> Tuple[List[str], np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise DependencyMissing(f"missing artifact {path}")
    with open(path) as f:
        header = f.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def write_json(path: Pathlike, payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def read_json(path: Pathlike) -> Dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise DependencyMissing(f"missing artifact {path}")
    with open(path) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e


def _columns(header: List[str], data: np.ndarray, expected: Sequence[str], path: Path):
    if tuple(header) != tuple(expected):
        raise ConfigError(f"{path}: header {','.join(header)} != {','.join(expected)}")
    return [data[:, j] for j in range(len(expected))]


# Profiles ----------------------------------------------------------------

def write_profile(profile: SheathProfile, prefix: Pathlike,
                  config_hash: Optional[str] = None) -> List[Path]:
    """<prefix>.csv ("x,phi,n,u,T") and <prefix>.json"""
    prefix = Path(prefix)
    csv_path = write_csv(prefix.with_suffix(".csv"), PROFILE_HEADER,
                         [profile.x, profile.phi, profile.n, profile.u, profile.T])
    sidecar = {
        "params": profile.params.to_dict(),
        "regime": {"kind": profile.regime.kind.value, "margin": profile.regime.margin},
        "meta": profile.meta,
        "config_hash": config_hash,
    }
    json_path = write_json(prefix.with_suffix(".json"), sidecar)
    logger.debug("Profile written to %s", csv_path)
    return [csv_path, json_path]


def read_profile(path: Pathlike) -> SheathProfile:
    """Reload a profile; the density offset and phi_x are rebuilt from phi"""
    path = Path(path).with_suffix(".csv")
    header, data = read_csv(path)
    x, phi, n, u, T = _columns(header, data, PROFILE_HEADER, path)
    sidecar = read_json(path.with_suffix(".json"))
    params = PlasmaParams.from_dict(sidecar["params"])
    regime = Regime(RegimeKind(sidecar["regime"]["kind"]), sidecar["regime"]["margin"])

    w = offset_from_potential(phi, params, w0=n - 1.0)
    V = np.maximum(potential_from_offset(w, params), 0.0)
    dphi = -np.sign(params.phi_b) * np.sqrt(2.0 * V)
    return SheathProfile(x=x, phi=phi, n=n, u=u, T=T, dphi=dphi, w=w, regime=regime,
                         params=params, meta=dict(sidecar.get("meta") or {}))


# Snapshots ---------------------------------------------------------------

def write_snapshot(state: EvolutionState, prefix: Pathlike, config_hash: Optional[str] = None,
                   tolerances: Optional[Dict[str, float]] = None) -> List[Path]:
    """<prefix>.csv ("x,v,u,T,phi") and a sidecar for restarts"""
    prefix = Path(prefix)
    csv_path = write_csv(prefix.with_suffix(".csv"), SNAPSHOT_HEADER,
                         [state.x, state.v, state.u, state.T, state.phi])
    sidecar = {
        "t": state.t,
        "params": state.params.to_dict(),
        "grid": {"L": state.grid.L, "N": state.grid.N},
        "tolerances": tolerances or {},
        "config_hash": config_hash,
    }
    return [csv_path, write_json(prefix.with_suffix(".json"), sidecar)]


def read_snapshot(path: Pathlike) -> EvolutionState:
    path = Path(path).with_suffix(".csv")
    header, data = read_csv(path)
    _, v, u, T, phi = _columns(header, data, SNAPSHOT_HEADER, path)
    sidecar = read_json(path.with_suffix(".json"))
    grid = GridSpec(float(sidecar["grid"]["L"]), int(sidecar["grid"]["N"]))
    return EvolutionState(t=float(sidecar["t"]), grid=grid, v=v, u=u, T=T, phi=phi,
                          params=PlasmaParams.from_dict(sidecar["params"]))


# Plot scripts ------------------------------------------------------------

def write_gnuplot(path: Pathlike, csv_name: str, title: str, columns: Sequence[int],
                  xlabel: str = "x", logscale_y: bool = False) -> Path:
    """Gnuplot command file plotting the given 1-based CSV columns against column 1"""
    lines = [
        'set datafile separator ","',
        "set key autotitle columnhead",
        f'set title "{title}"',
        f'set xlabel "{xlabel}"',
    ]
    if logscale_y:
        lines.append("set logscale y")
    plots = [f'"{csv_name}" using 1:{c} with lines' for c in columns[:1]]
    plots += [f'"" using 1:{c} with lines' for c in columns[1:]]
    lines.append("plot " + ", \\\n     ".join(plots))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


# Manifest ----------------------------------------------------------------

@dataclass
class Manifest:
    """Every artifact of a run with its producing stage and config hash"""
    root: Path
    entries: List[Dict[str, str]] = field(default_factory=list)

    @classmethod
    def load(cls, root: Pathlike) -> "Manifest":
        root = Path(root)
        path = root / OUTPUT.MANIFEST_NAME
        if not path.is_file():
            return cls(root)
        return cls(root, list(read_json(path).get("artifacts", [])))

    def add(self, path: Pathlike, stage: str, config_hash: str):
        rel = os.path.relpath(Path(path), self.root)
        self.entries = [e for e in self.entries if e["path"] != rel]
        self.entries.append({"path": rel, "stage": stage, "config_hash": config_hash})

    def paths(self, stage: Optional[str] = None) -> List[str]:
        return [e["path"] for e in self.entries if stage is None or e["stage"] == stage]

    def write(self) -> Path:
        payload = {"created": datetime.now().isoformat(timespec="seconds"),
                   "artifacts": self.entries}
        return write_json(self.root / OUTPUT.MANIFEST_NAME, payload)
