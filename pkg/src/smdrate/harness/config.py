"""Experiment configuration: flat ``key = value`` text or a JSON object.

Text format, one setting per line; ``#`` starts a comment::

    bench = phase-retrieval
    geometry = euclidean
    n = 10
    m = 30
    n_grid = 100, 1000, 10000
    trials = 50
    seed = 2024
    schedule = constant
    c = auto

Unknown keys and malformed values raise :class:`ConfigError` with the line
number. CLI flags override file values through :func:`apply_overrides`.
"""
import json
from dataclasses import asdict, dataclass, fields, replace

from ..benchmarks import BENCHMARKS, DEFAULT_GEOMETRY, SUPPORTED_GEOMETRIES
from ..errors import ConfigError
from ..objective import BOUNDED_MOMENT, SRC


@dataclass(frozen=True)
class ExperimentConfig:
    bench: str = "phase-retrieval"
    geometry: str = ""
    n: int = 10
    m: int = 30
    lam: float = 0.05
    sigma: float = 0.5
    radius: float = 0.0
    instance_seed: int = 0
    oracle_mode: str = BOUNDED_MOMENT
    schedule: str = "constant"
    c: str = "auto"
    n_grid: tuple = (100, 1000, 10000)
    trials: int = 50
    seed: int = 2024
    rho_hat_factor: float = 2.0
    workers: int = 1
    backend: str = "auto"
    check_slope: bool = True
    slope_low: float = -0.75
    slope_high: float = -0.25
    max_failure_rate: float = 0.05
    out_dir: str = ""

    def __post_init__(self):
        if self.bench not in BENCHMARKS:
            raise ConfigError(f"unknown bench {self.bench!r}; choose from {', '.join(BENCHMARKS)}")
        if not self.geometry:
            object.__setattr__(self, "geometry", DEFAULT_GEOMETRY[self.bench])
        if self.geometry not in SUPPORTED_GEOMETRIES[self.bench]:
            raise ConfigError(f"{self.bench} does not support geometry {self.geometry!r}")
        if self.oracle_mode not in (BOUNDED_MOMENT, SRC):
            raise ConfigError(f"oracle_mode must be {BOUNDED_MOMENT} or {SRC}")
        if self.schedule not in ("constant", "sqrt-decay"):
            raise ConfigError("schedule must be constant or sqrt-decay")
        if self.c != "auto":
            try:
                if not float(self.c) > 0:
                    raise ValueError
            except ValueError:
                raise ConfigError(f"c must be 'auto' or a positive number, got {self.c!r}") from None
        if not self.n_grid or any(N < 1 for N in self.n_grid):
            raise ConfigError("n_grid needs positive integers")
        if self.trials < 2:
            raise ConfigError("trials must be >= 2")
        if self.rho_hat_factor <= 1.0:
            raise ConfigError("rho_hat_factor must exceed 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.backend not in ("auto", "kernel", "python"):
            raise ConfigError("backend must be auto, kernel or python")

    def instance_kwargs(self):
        kw = dict(n=self.n, m=self.m, seed=self.instance_seed, geometry=self.geometry,
                  lam=self.lam, sigma=self.sigma, oracle_mode=self.oracle_mode)
        if self.radius > 0:
            kw["radius"] = self.radius
        return kw

    def as_dict(self):
        d = asdict(self)
        d["n_grid"] = list(self.n_grid)
        return d


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _convert(key, raw):
    """Parse a raw value (string from text, or JSON scalar/list) for ``key``."""
    ftype = _FIELDS[key].type
    if key == "n_grid":
        items = raw if isinstance(raw, list) else [s for s in str(raw).replace(",", " ").split()]
        vals = [int(float(v)) for v in items]
        if any(float(v) != int(float(v)) for v in items):
            raise ValueError("n_grid entries must be integers")
        return tuple(sorted(set(vals)))
    if ftype in (bool, "bool"):
        if isinstance(raw, bool):
            return raw
        s = str(raw).strip().lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if ftype in (int, "int"):
        if isinstance(raw, bool):
            raise ValueError("expected an integer")
        v = float(raw)
        if v != int(v):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(v)
    if ftype in (float, "float"):
        return float(raw)
    return str(raw).strip()


def parse_text(text, source="<config>"):
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ConfigError(f"expected 'key = value', got {s!r}", lineno, source)
        key, val = (p.strip() for p in s.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}", lineno, source)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno, source)
        try:
            values[key] = _convert(key, val)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", lineno, source) from None
    return values


def _json_line(text, key):
    needle = f'"{key}"'
    for lineno, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return lineno
    return None


def parse_json(text, source="<config>"):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, exc.lineno, source) from None
    if not isinstance(doc, dict):
        raise ConfigError("JSON config must be an object", 1, source)
    values = {}
    for key, raw in doc.items():
        k = key.replace("-", "_")
        if k not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}", _json_line(text, key), source)
        try:
            values[k] = _convert(k, raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}", _json_line(text, key), source) from None
    return values


def build_config(values, source="<config>"):
    try:
        return ExperimentConfig(**values)
    except ConfigError as exc:
        if exc.source is None:
            exc.source = source
        raise


def load_config(path, overrides=None):
    """Read a config file (JSON when it starts with '{') and apply overrides."""
    with open(path) as fh:
        text = fh.read()
    values = parse_json(text, path) if text.lstrip().startswith("{") else parse_text(text, path)
    if overrides:
        values.update(_parse_overrides(overrides))
    return build_config(values, path)


def _parse_overrides(overrides):
    out = {}
    for key, raw in overrides.items():
        if raw is None:
            continue
        k = key.replace("-", "_")
        if k not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}", source="<cli>")
        try:
            out[k] = raw if not isinstance(raw, str) else _convert(k, raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", source="<cli>") from None
    return out


def apply_overrides(cfg, overrides):
    return replace(cfg, **_parse_overrides(overrides))
