"""Simulation configuration, the ``key = value`` config format and presets."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .waveform import StreamAllocation

__all__ = ["ConfigError", "SimConfig", "parse_config", "PRESETS", "preset", "list_presets"]

MODES = ("scm-single", "scm-multi", "ofdm-baseline")
DEFAULT_SWEEP = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)


class ConfigError(ValueError):
    """Invalid configuration value; the message names the offending field."""


@dataclass(frozen=True)
class SimConfig:
    N: int = 1024
    L: int = 8
    M: int = 64
    K: int = 32
    Lk: tuple[int, ...] | None = None   # None -> one stream per UE
    L_h: int = 32
    pdp: str = "uniform"
    pdp_decay: float = 4.0
    N_cp: int | None = None             # None -> L_h
    zc_root: int = 1
    es_n0_db: tuple[float, ...] = DEFAULT_SWEEP
    trials: int = 200
    seed: int = 0
    threads: int = 1
    mode: str = "scm-single"
    out: str | None = None
    alphabet: str = "qpsk"
    unbias: str = "diagonal"
    shifts: tuple[int, ...] | None = None  # per-stream shift pattern shared by all UEs
    name: str = ""

    def __post_init__(self):
        if self.Lk is not None and len(self.Lk) == 1 and self.K != 1:
            object.__setattr__(self, "Lk", tuple(self.Lk) * self.K)
        object.__setattr__(self, "es_n0_db", tuple(float(x) for x in self.es_n0_db))
        self.validate()

    @property
    def streams(self) -> tuple[int, ...]:
        return self.Lk if self.Lk is not None else (1,) * self.K

    @property
    def K_v(self) -> int:
        return sum(self.streams)

    @property
    def cp_length(self) -> int:
        return self.L_h if self.N_cp is None else self.N_cp

    def allocation(self) -> StreamAllocation:
        shifts = ()
        if self.shifts is not None:
            shifts = tuple(self.shifts[:n] for n in self.streams)
        return StreamAllocation(self.L, self.streams, shifts)

    @property
    def profile(self) -> str:
        return self.allocation().profile()

    def validate(self) -> None:
        def need(cond, fld, msg):
            if not cond:
                raise ConfigError(f"{fld}: {msg}")

        for fld in ("N", "L", "M", "K", "L_h"):
            need(getattr(self, fld) >= 1, fld, f"must be >= 1, got {getattr(self, fld)}")
        need(self.N % self.L == 0, "N", f"N not divisible by L (N={self.N}, L={self.L})")
        need(self.L_h <= self.N, "L_h", f"channel length {self.L_h} exceeds N={self.N}")
        need(self.cp_length >= self.L_h - 1, "N_cp",
             f"CP length {self.cp_length} shorter than channel memory L_h-1={self.L_h - 1}")
        need(self.cp_length < self.N, "N_cp", f"CP length {self.cp_length} must be < N={self.N}")
        need(self.mode in MODES, "mode", f"must be one of {MODES}, got {self.mode!r}")
        need(self.pdp in ("uniform", "exponential"), "pdp", f"unknown shape {self.pdp!r}")
        need(self.alphabet == "qpsk", "alphabet", f"unsupported alphabet {self.alphabet!r}")
        need(self.unbias in ("diagonal", "scalar", "none"), "unbias", f"unknown policy {self.unbias!r}")
        need(len(self.es_n0_db) > 0, "es_n0_db", "sweep must not be empty")
        need(all(b > a for a, b in zip(self.es_n0_db, self.es_n0_db[1:])), "es_n0_db",
             "sweep must be strictly increasing")
        need(self.trials >= 1, "trials", f"must be >= 1, got {self.trials}")
        need(self.threads >= 1, "threads", f"must be >= 1, got {self.threads}")
        need(self.seed >= 0, "seed", "must be non-negative")
        if self.Lk is not None:
            need(len(self.Lk) == self.K, "Lk", f"{len(self.Lk)} entries for K={self.K} UEs")
            need(all(1 <= n <= self.L for n in self.Lk), "Lk", f"every L_k must be in [1, {self.L}]")
        if self.mode != "scm-multi":
            need(all(n == 1 for n in self.streams), "Lk", f"mode {self.mode} requires L_k = 1")
            need(self.shifts is None or self.shifts[0] == 0, "shifts",
                 f"mode {self.mode} requires a zero shift")
        if self.shifts is not None:
            need(len(self.shifts) >= max(self.streams), "shifts",
                 f"pattern {self.shifts} shorter than the largest L_k")
            need(len(set(self.shifts)) == len(self.shifts), "shifts", "shifts must be distinct")
            need(all(0 <= s < self.L for s in self.shifts), "shifts", f"shifts must be in [0, {self.L - 1}]")
        need(self.K_v < self.M * self.L, "K",
             f"K_v ({self.K_v}) must be < ML ({self.M * self.L})")
        if self.mode == "ofdm-baseline":
            need(self.K % self.L == 0, "K", f"K ({self.K}) must be divisible by L ({self.L}) for ofdm-baseline")
            need(self.K // self.L < self.M, "K", f"K/L ({self.K // self.L}) must be < M ({self.M})")
        if self.zc_root:
            from math import gcd
            need(gcd(self.zc_root, self.N) == 1, "zc_root",
                 f"root {self.zc_root} is not coprime with N={self.N}")

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["Lk"] = list(self.streams)
        return d

    def to_text(self) -> str:
        """Config in the ``key = value`` file format; parses back to ``self``."""
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None or (f.name == "name" and not v):
                continue
            if isinstance(v, tuple):
                v = ",".join(_fmt(x) for x in v)
            lines.append(f"{f.name} = {_fmt(v)}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


_INT_FIELDS = {"N", "L", "M", "K", "L_h", "N_cp", "zc_root", "trials", "seed", "threads"}
_FLOAT_FIELDS = {"pdp_decay"}
_INT_TUPLE_FIELDS = {"Lk", "shifts"}
_FLOAT_TUPLE_FIELDS = {"es_n0_db"}
_ALIASES = {"n_cp": "N_cp", "lh": "L_h", "l_h": "L_h", "es_n0": "es_n0_db", "root": "zc_root",
            "L_k": "Lk", "lk": "Lk"}


def _convert(key: str, raw: Any) -> Any:
    if raw is None:
        return None
    if not isinstance(raw, str):
        if key in _INT_TUPLE_FIELDS | _FLOAT_TUPLE_FIELDS and not isinstance(raw, (list, tuple)):
            raw = (raw,)
        if isinstance(raw, list):
            raw = tuple(raw)
        return raw
    text = raw.strip()
    try:
        if key in _INT_FIELDS:
            return int(text)
        if key in _FLOAT_FIELDS:
            return float(text)
        if key in _INT_TUPLE_FIELDS:
            return tuple(int(x) for x in text.replace(" ", "").split(",") if x)
        if key in _FLOAT_TUPLE_FIELDS:
            return tuple(float(x) for x in text.replace(" ", "").split(",") if x)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r}") from None
    return text


def read_config_text(text: str, source: str = "<config>") -> dict:
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[_normalize_key(key, f"{source}:{lineno}")] = value
    return values


def _normalize_key(key: str, where: str = "") -> str:
    key = _ALIASES.get(key, key)
    known = {f.name for f in dataclasses.fields(SimConfig)}
    if key not in known:
        prefix = f"{where}: " if where else ""
        raise ConfigError(f"{prefix}{key}: unknown config key")
    return key


def parse_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None,
                 base: SimConfig | Mapping[str, Any] | None = None) -> SimConfig:
    """Build a validated :class:`SimConfig`.

    Values are layered: ``base`` (defaults if omitted), then the file at
    ``path``, then ``overrides`` (typically CLI flags; ``None`` values are ignored).
    """
    values: dict[str, Any] = {}
    if isinstance(base, SimConfig):
        values.update({f.name: getattr(base, f.name) for f in dataclasses.fields(base)})
    elif base is not None:
        values.update({_normalize_key(k): v for k, v in base.items()})
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config: file {str(p)!r} does not exist")
        values.update(read_config_text(p.read_text(), str(p)))
    for k, v in (overrides or {}).items():
        if v is not None:
            values[_normalize_key(k)] = v
    converted = {k: _convert(k, v) for k, v in values.items()}
    try:
        return SimConfig(**converted)
    except TypeError as exc:
        raise ConfigError(f"config: {exc}") from None


# name -> (description, list of per-curve settings)
_FIG2 = dict(N=1024, L=8, M=64, L_h=32)
_SMALL = dict(N=256, L=4, M=16, L_h=16)
PRESETS: dict[str, tuple[str, list[dict]]] = {
    "fig2": ("single-stream gain, M=64, L=8, K in {32, 64, 128}",
             [dict(_FIG2, K=k, mode="scm-single") for k in (32, 64, 128)]),
    "fig4": ("multi-stream gain, M=64, L=8, K=32, L_k in {2, 3, 4}",
             [dict(_FIG2, K=32, Lk=(n,), mode="scm-multi") for n in (2, 3, 4)]),
    "fig2-small": ("desk-scale single-stream, M=16, L=4, K in {8, 16, 32}",
                   [dict(_SMALL, K=k, mode="scm-single") for k in (8, 16, 32)]),
    "fig4-small": ("desk-scale multi-stream, M=16, L=4, K=8, L_k in {2, 3, 4}",
                   [dict(_SMALL, K=8, Lk=(n,), mode="scm-multi") for n in (2, 3, 4)]),
    "example-16db": ("worked example M=64, K=32, L=4, L_k=3 (asymptote 40, about 16 dB)",
                     [dict(N=1024, L=4, M=64, L_h=32, K=32, Lk=(3,), mode="scm-multi")]),
    "asymptote-small": ("M=16, L=4, K=8 at 30 dB (asymptote 14)",
                        [dict(_SMALL, K=8, mode="scm-single", es_n0_db=(30.0,))]),
    "ofdm-small": ("DFT-precoded OFDM vs single-stream SCM, M=16, K=8, L=4",
                   [dict(_SMALL, K=8, mode="ofdm-baseline"), dict(_SMALL, K=8, mode="scm-single")]),
}


def preset(name: str, **overrides) -> list[SimConfig]:
    """Validated configs (one per curve) of a named preset."""
    if name not in PRESETS:
        raise ConfigError(f"preset: unknown preset {name!r}; choose from {sorted(PRESETS)}")
    _, curves = PRESETS[name]
    return [parse_config(base=dict(c, name=name), overrides=overrides) for c in curves]


def list_presets() -> str:
    lines = []
    for name, (desc, curves) in PRESETS.items():
        lines.append(f"{name}: {desc}")
        for c in curves:
            cfg = parse_config(base=c)
            lines.append(f"    mode={cfg.mode} N={cfg.N} L={cfg.L} M={cfg.M} K={cfg.K} "
                         f"Lk={cfg.profile} L_h={cfg.L_h} K_v={cfg.K_v}")
    return "\n".join(lines)
