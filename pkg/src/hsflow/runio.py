"""Run configuration parsing and artifact logging.

A run is fully determined by one INI-style configuration file (sections of
key = value pairs) plus the seed; reruns with the same configuration and
seed write bit-identical CSV artifacts in reproducible mode (CSV floats are
emitted with repr, the shortest round-trip form).
"""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fields import Grid, read_field
from .manufactured import manufactured_problem
from .stokes import StokesProblem
from .stress import StressModel

__all__ = ["RunConfig", "ConfigError", "RunWriter", "default_config_text"]


class ConfigError(ValueError):
    pass


_DEFAULTS = {
    "grid": {"n": "2", "L": "6.283185307179586", "N_xp": "64", "H": "16.0",
             "N_xn": "48", "T": "1.0", "N_t": "64", "spacing": "uniform",
             "grading": "2.0"},
    "exponents": {"p": "8.0", "q": "8.0", "alpha": "1.6"},
    "stress": {"family": "S3", "mu0": "0.5", "mu1": "1.0", "d": "3.0"},
    "data": {"kind": "manufactured", "amplitude": "2e-3",
             "u0": "", "g_tangential": "", "g_normal": "", "forcing": ""},
    "iterate": {"m_max": "25", "stop_tol": "1e-8", "override_gate": "false"},
    "gate": {"c_solver": "1.0"},
    "tolerances": {"compat": "1e-8"},
    "verify": {"count": "20", "suite_seed": "9"},
    "run": {"seed": "0", "reproducible": "true", "parallelism": "1"},
}


def default_config_text() -> str:
    cp = configparser.ConfigParser()
    for sec, kv in _DEFAULTS.items():
        cp[sec] = dict(kv)
    import io

    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


@dataclass
class RunConfig:
    parser: configparser.ConfigParser

    @classmethod
    def load(cls, path: str | Path | None, overrides: list[str] = ()) -> "RunConfig":
        cp = configparser.ConfigParser()
        for sec, kv in _DEFAULTS.items():
            cp[sec] = dict(kv)
        if path is not None:
            p = Path(path)
            if not p.exists():
                raise ConfigError(f"configuration file not found: {p}")
            try:
                cp.read(p)
            except configparser.Error as exc:
                raise ConfigError(f"configuration parse failure: {exc}") from exc
        for ov in overrides or ():
            if "=" not in ov or "." not in ov.split("=", 1)[0]:
                raise ConfigError(f"override must look like section.key=value: {ov!r}")
            key, value = ov.split("=", 1)
            sec, k = key.strip().split(".", 1)
            if sec not in cp:
                cp[sec] = {}
            cp[sec][k.strip()] = value.strip()
        cfg = cls(cp)
        cfg.validate()
        return cfg

    # -- typed getters -------------------------------------------------------
    def _get(self, sec: str, key: str) -> str:
        try:
            return self.parser[sec][key]
        except KeyError as exc:
            raise ConfigError(f"missing configuration key [{sec}] {key}") from exc

    def getfloat(self, sec: str, key: str) -> float:
        raw = self._get(sec, key)
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"[{sec}] {key} = {raw!r} is not a number") from exc

    def getint(self, sec: str, key: str) -> int:
        raw = self._get(sec, key)
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"[{sec}] {key} = {raw!r} is not an integer") from exc

    def getbool(self, sec: str, key: str) -> bool:
        raw = self._get(sec, key).lower()
        if raw in ("true", "1", "yes", "on"):
            return True
        if raw in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"[{sec}] {key} = {raw!r} is not a boolean")

    def validate(self) -> None:
        self.grid()
        self.model()
        kind = self._get("data", "kind")
        if kind not in ("manufactured", "zero", "files"):
            raise ConfigError(f"[data] kind = {kind!r} not one of manufactured|zero|files")
        if self.getfloat("exponents", "alpha") <= 1.0 \
                or self.getfloat("exponents", "alpha") >= 2.0:
            raise ConfigError("[exponents] alpha must lie in (1, 2)")

    # -- object builders ------------------------------------------------------
    def grid(self) -> Grid:
        try:
            return Grid(
                n=self.getint("grid", "n"), L=self.getfloat("grid", "L"),
                N_xp=self.getint("grid", "N_xp"), H=self.getfloat("grid", "H"),
                N_xn=self.getint("grid", "N_xn"), T=self.getfloat("grid", "T"),
                N_t=self.getint("grid", "N_t"), spacing=self._get("grid", "spacing"),
                grading=self.getfloat("grid", "grading"),
            )
        except ValueError as exc:
            raise ConfigError(f"invalid grid: {exc}") from exc

    def model(self) -> StressModel:
        try:
            return StressModel(
                family=self._get("stress", "family"),
                mu0=self.getfloat("stress", "mu0"),
                mu1=self.getfloat("stress", "mu1"),
                d=self.getfloat("stress", "d"),
            )
        except ValueError as exc:
            raise ConfigError(f"invalid stress model: {exc}") from exc

    def problem(self) -> StokesProblem:
        from .fields import BoundaryField, SpatialField

        grid = self.grid()
        kind = self._get("data", "kind")
        p = self.getfloat("exponents", "p")
        q = self.getfloat("exponents", "q")
        alpha = self.getfloat("exponents", "alpha")
        tol = self.getfloat("tolerances", "compat")
        if kind == "manufactured":
            amp = self.getfloat("data", "amplitude")
            pr = manufactured_problem(grid, amplitude=amp, p=p, q=q, alpha=alpha)
            return StokesProblem(pr.u0, pr.g, pr.F, p, q, alpha, compat_tol=tol)
        if kind == "zero":
            return StokesProblem(
                SpatialField.zeros(grid, 1), BoundaryField.zeros(grid, 1),
                None, p, q, alpha, compat_tol=tol,
            )
        # kind == files: u0 / forcing are field snapshots, wall data derived
        # from the own trace of a reference field is out of scope here
        raise ConfigError("[data] kind = files needs explicit loaders; "
                          "use the library API for custom data")

    def seed(self) -> int:
        return self.getint("run", "seed")

    def as_dict(self) -> dict:
        return {sec: dict(self.parser[sec]) for sec in self.parser.sections()}


class RunWriter:
    """Writes the run directory: metadata, JSONL certificates, CSV traces."""

    def __init__(self, out_dir: str | Path):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)

    def metadata(self, cfg: RunConfig, extra: dict | None = None) -> None:
        meta = {"config": cfg.as_dict()}
        if extra:
            meta.update(extra)
        with open(self.dir / "metadata.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True, default=_jsonable)

    def certificate(self, record: dict) -> None:
        with open(self.dir / "certificates.jsonl", "a") as fh:
            fh.write(json.dumps(record, sort_keys=True, default=_jsonable) + "\n")

    def csv(self, name: str, columns: list[str], rows: list[dict]) -> Path:
        path = self.dir / name
        with open(path, "w") as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                out = []
                for c in columns:
                    v = row.get(c)
                    if v is None:
                        out.append("")
                    elif isinstance(v, float):
                        out.append(repr(v))
                    else:
                        out.append(str(v))
                fh.write(",".join(out) + "\n")
        return path


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return str(obj)
