"""Campaign configuration: sectioned key-value text files, strict validation,
command-line overrides, and a deterministic serializer whose output re-parses
to an equal configuration.

Sections and keys (all optional, defaults in parentheses):

  [solver]        n (32), alpha (1e-2), gamma (1.0), dt (1e-3), t_end (10.0),
                  sample_every (100), seed (0), cfl_max (0.5)
  [scenario]      forcing (zero), init (zero)
  [output]        directory (runs)
  [certificates]  run (dissipative,energy,variational), phi_seed (0),
                  phi_count (1), cq (certificate default),
                  dissipative_tol / energy_tol / variational_tol (library
                  defaults; overrides replace the computed tolerance)
  [sweep]         alphas (1e-1,1e-2,1e-3), init_rule (fixed)
  [semicontinuity] t_start (t_end/2), window_len (3), stride (1)

Unknown sections or keys are rejected with the offending name.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, replace

from .certificates import CQ_DEFAULT
from .dynamics import SolverParams
from .limits import INIT_RULES
from .scenarios import (FORCING_KINDS, INIT_KINDS, ScenarioError,
                        parse_scenario_id)

CERTIFICATE_NAMES = ("dissipative", "energy", "variational")

_SCHEMA = {
    "solver": ("n", "alpha", "gamma", "dt", "t_end", "sample_every", "seed", "cfl_max"),
    "scenario": ("forcing", "init"),
    "output": ("directory",),
    "certificates": ("run", "phi_seed", "phi_count", "cq",
                     "dissipative_tol", "energy_tol", "variational_tol"),
    "sweep": ("alphas", "init_rule"),
    "semicontinuity": ("t_start", "window_len", "stride"),
}


class ConfigError(ValueError):
    """Malformed configuration: syntax, unknown key, or invalid value."""


@dataclass
class RunConfig:
    params: SolverParams = field(default_factory=SolverParams)
    out_dir: str = "runs"
    certificates: tuple = CERTIFICATE_NAMES
    phi_seed: int = 0
    phi_count: int = 1
    cq: float = CQ_DEFAULT
    tol_overrides: tuple = ()           # pairs (certificate_name, tolerance)
    sweep_alphas: tuple = (1e-1, 1e-2, 1e-3)
    sweep_init_rule: str = "fixed"
    semi_t_start: float | None = None
    semi_window_len: int = 3
    semi_stride: int = 1

    def tolerance_for(self, name: str):
        for k, v in self.tol_overrides:
            if k == name:
                return v
        return None


def _to_int(section, key, raw):
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from None
    if v != int(v):
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}")
    return int(v)


def _to_float(section, key, raw):
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"[{section}] {key}: expected a finite number, got {raw!r}")
    return v


def parse_config(text: str) -> RunConfig:
    """Parse configuration text; reject unknown sections/keys and bad values."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"config syntax error: {e}") from None

    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]; expected one of "
                              f"{sorted(_SCHEMA)}")
        for key in cp[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"[{section}] unknown key {key!r}; expected one of "
                                  f"{sorted(_SCHEMA[section])}")

    def get(section, key, default=None):
        if cp.has_section(section) and key in cp[section]:
            return cp[section][key]
        return default

    p = SolverParams()
    kw = {}
    for key, conv in (("n", _to_int), ("alpha", _to_float), ("gamma", _to_float),
                      ("dt", _to_float), ("t_end", _to_float),
                      ("sample_every", _to_int), ("seed", _to_int),
                      ("cfl_max", _to_float)):
        raw = get("solver", key)
        if raw is not None:
            kw[key] = conv("solver", key, raw)
    forcing = get("scenario", "forcing", "zero")
    init = get("scenario", "init", "zero")
    for label, sid, kinds in (("forcing", forcing, FORCING_KINDS),
                              ("init", init, INIT_KINDS)):
        try:
            name, _args = parse_scenario_id(sid)
        except ScenarioError as e:
            raise ConfigError(f"[scenario] {label}: {e}") from None
        if name not in kinds:
            raise ConfigError(f"[scenario] {label}: unknown kind {name!r}; "
                              f"expected one of {kinds}")
    try:
        p = replace(p, forcing_id=forcing, init_id=init, **kw)
        p.n_steps()
    except ValueError as e:
        raise ConfigError(f"[solver] {e}") from None

    certs_raw = get("certificates", "run", ",".join(CERTIFICATE_NAMES))
    certs = tuple(c.strip() for c in certs_raw.split(",") if c.strip())
    for c in certs:
        if c not in CERTIFICATE_NAMES:
            raise ConfigError(f"[certificates] run: unknown certificate {c!r}; "
                              f"expected among {CERTIFICATE_NAMES}")
    tol_overrides = []
    for c in CERTIFICATE_NAMES:
        raw = get("certificates", f"{c}_tol")
        if raw is not None:
            tol_overrides.append((c, _to_float("certificates", f"{c}_tol", raw)))

    alphas_raw = get("sweep", "alphas", "1e-1,1e-2,1e-3")
    try:
        alphas = tuple(float(a) for a in alphas_raw.split(",") if a.strip())
    except ValueError:
        raise ConfigError(f"[sweep] alphas: expected comma-separated numbers, "
                          f"got {alphas_raw!r}") from None
    if not alphas or any(a <= 0 for a in alphas) \
            or any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise ConfigError("[sweep] alphas must be positive and strictly decreasing")
    init_rule = get("sweep", "init_rule", "fixed")
    if init_rule not in INIT_RULES:
        raise ConfigError(f"[sweep] init_rule must be one of {INIT_RULES}, "
                          f"got {init_rule!r}")

    semi_t_start_raw = get("semicontinuity", "t_start")
    cfg = RunConfig(
        params=p,
        out_dir=get("output", "directory", "runs"),
        certificates=certs,
        phi_seed=_to_int("certificates", "phi_seed", get("certificates", "phi_seed", "0")),
        phi_count=_to_int("certificates", "phi_count", get("certificates", "phi_count", "1")),
        cq=_to_float("certificates", "cq", get("certificates", "cq", repr(CQ_DEFAULT))),
        tol_overrides=tuple(tol_overrides),
        sweep_alphas=alphas,
        sweep_init_rule=init_rule,
        semi_t_start=(None if semi_t_start_raw is None
                      else _to_float("semicontinuity", "t_start", semi_t_start_raw)),
        semi_window_len=_to_int("semicontinuity", "window_len",
                                get("semicontinuity", "window_len", "3")),
        semi_stride=_to_int("semicontinuity", "stride",
                            get("semicontinuity", "stride", "1")),
    )
    if cfg.phi_count < 1:
        raise ConfigError("[certificates] phi_count must be >= 1")
    if cfg.semi_window_len < 1 or cfg.semi_stride < 1:
        raise ConfigError("[semicontinuity] window_len and stride must be >= 1")
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path!r}: {e.strerror}") from None
    return parse_config(text)


def apply_overrides(text: str, overrides) -> str:
    """Apply --set section.key=value pairs to config text (pre-parse)."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"config syntax error: {e}") from None
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        dotted, value = item.split("=", 1)
        if "." not in dotted:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        section, key = dotted.split(".", 1)
        section, key = section.strip(), key.strip()
        if section not in _SCHEMA or key not in _SCHEMA.get(section, ()):
            raise ConfigError(f"--set: unknown key [{section}] {key!r}")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, value.strip())
    out = io.StringIO()
    cp.write(out)
    return out.getvalue()


def serialize_config(cfg: RunConfig) -> str:
    """Deterministic text form; parse_config(serialize_config(c)) == c."""
    p = cfg.params
    lines = [
        "[solver]",
        f"n = {p.n}",
        f"alpha = {p.alpha!r}",
        f"gamma = {p.gamma!r}",
        f"dt = {p.dt!r}",
        f"t_end = {p.t_end!r}",
        f"sample_every = {p.sample_every}",
        f"seed = {p.seed}",
        f"cfl_max = {p.cfl_max!r}",
        "",
        "[scenario]",
        f"forcing = {p.forcing_id}",
        f"init = {p.init_id}",
        "",
        "[output]",
        f"directory = {cfg.out_dir}",
        "",
        "[certificates]",
        f"run = {','.join(cfg.certificates)}",
        f"phi_seed = {cfg.phi_seed}",
        f"phi_count = {cfg.phi_count}",
        f"cq = {cfg.cq!r}",
    ]
    for name, tol in cfg.tol_overrides:
        lines.append(f"{name}_tol = {tol!r}")
    lines += [
        "",
        "[sweep]",
        f"alphas = {','.join(repr(a) for a in cfg.sweep_alphas)}",
        f"init_rule = {cfg.sweep_init_rule}",
        "",
        "[semicontinuity]",
        f"window_len = {cfg.semi_window_len}",
        f"stride = {cfg.semi_stride}",
    ]
    if cfg.semi_t_start is not None:
        lines.append(f"t_start = {cfg.semi_t_start!r}")
    return "\n".join(lines) + "\n"
