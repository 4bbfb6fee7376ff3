"""Plain-text artifacts: point files, CSV tables, configs and run manifests."""

import configparser
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .pointproc import PointSet

__all__ = [
    "write_points",
    "read_points",
    "csv_text",
    "write_csv",
    "read_csv",
    "read_config",
    "ExperimentManifest",
    "digest",
]

POINTS_MAGIC = "# rwre-points v1"


def _num(x) -> str:
    """Shortest round-trip text for a number."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def write_points(path, points: PointSet, seed=None) -> Path:
    """One point per line, comma-separated shortest round-trip decimals."""
    path = Path(path)
    kind = points.kind or "unknown"
    header = f"{POINTS_MAGIC} dim={points.dim} box={_num(points.box_half_width)} kind={kind} seed={seed}"
    lines = [header]
    lines.extend(",".join(_num(v) for v in row) for row in points.points)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_points(path) -> PointSet:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith(POINTS_MAGIC):
        raise ValueError(f"{path}: not an rwre points file")
    meta = dict(tok.split("=", 1) for tok in text[0][len(POINTS_MAGIC):].split())
    dim = int(meta["dim"])
    rows = [line.replace(",", " ").split() for line in text[1:] if line.strip()]
    pts = np.array(rows, dtype=float).reshape(-1, dim)
    seed = None if meta.get("seed") in (None, "None") else meta["seed"]
    prov = {"kind": meta.get("kind"), "params": {}, "seed": seed}
    return PointSet(dim, pts, float(meta["box"]), prov)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_num(v) for v in row) + "\n")
    return buf.getvalue()


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.write_text(csv_text(header, rows))
    return path


def read_csv(path):
    """Returns ``(header, rows)`` with numeric fields converted to float."""
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        if not line:
            continue
        vals = []
        for tok in line.split(","):
            try:
                vals.append(float(tok))
            except ValueError:
                vals.append(tok)
        rows.append(vals)
    return header, rows


def _parse_value(text: str):
    text = text.strip()
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    if text.lower() in ("none", ""):
        return None
    if "," in text:
        return [_parse_value(t) for t in text.split(",")]
    return text


def read_config(path) -> dict:
    """``key = value`` sections into nested dicts with numbers parsed."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    with open(path) as fh:
        parser.read_file(fh)
    return {sec: {k: _parse_value(v) for k, v in parser.items(sec)} for sec in parser.sections()}


def _format_value(v) -> str:
    if isinstance(v, (list, tuple)):
        return ",".join(_format_value(x) for x in v)
    return _num(v)


def digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class ExperimentManifest:
    """Everything needed to repeat a run, plus digests of what it wrote.

    Wall-clock timings are recorded but excluded from reproducibility
    comparisons.
    """

    config: dict
    seeds: list
    version: str = __version__
    digests: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def to_text(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        parser["meta"] = {"version": self.version, "seeds": _format_value(list(self.seeds))}
        for sec, values in sorted(self.config.items()):
            parser[f"config.{sec}"] = {k: _format_value(v) for k, v in sorted(values.items())}
        parser["digests"] = dict(sorted(self.digests.items()))
        parser["timings"] = {k: f"{v:.3f}" for k, v in sorted(self.timings.items())}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_text())
        return path

    @classmethod
    def read(cls, path) -> "ExperimentManifest":
        raw = read_config(path)
        meta = raw.pop("meta", {})
        digests = {k: str(v) for k, v in raw.pop("digests", {}).items()}
        timings = raw.pop("timings", {})
        config = {k[len("config."):]: v for k, v in raw.items() if k.startswith("config.")}
        seeds = meta.get("seeds")
        seeds = [] if seeds is None else (seeds if isinstance(seeds, list) else [seeds])
        return cls(config, seeds, str(meta.get("version", "")), digests, timings)

    def same_outputs(self, other: "ExperimentManifest") -> bool:
        return self.digests == other.digests

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "seeds": self.seeds, "version": self.version,
                           "digests": self.digests, "timings": self.timings}, indent=2, sort_keys=True)
