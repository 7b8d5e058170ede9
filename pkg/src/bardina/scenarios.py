"""Scenario library: canonical forcings and initial data addressed by id
strings of the form name or name(arg1,arg2,...).

Forcings: zero | kolmogorov(s,A) | random_divfree(kmax,A,seed)
Initial data: zero | shear(A) | taylor_green(A) | random_divfree(kmax,A,seed)
              | from_checkpoint(path)

Every generated field is divergence-free at the stated resolution; random
generation is bit-deterministic in the seed. Trigonometric scenarios are
assembled directly in spectral space so their coefficients are exact.
"""

from __future__ import annotations

import re

import numpy as np

from . import spectral
from .dynamics import load_checkpoint
from .spectral import SpectralField

FORCING_KINDS = ("zero", "kolmogorov", "random_divfree")
INIT_KINDS = ("zero", "shear", "taylor_green", "random_divfree", "from_checkpoint")

_ID_RE = re.compile(r"\s*([a-z_]+)\s*(?:\((.*)\))?\s*\Z", re.DOTALL)


class ScenarioError(ValueError):
    """Malformed or unresolvable scenario id."""


def parse_scenario_id(text: str):
    """Split an id string into (name, [raw argument strings])."""
    m = _ID_RE.match(text)
    if not m:
        raise ScenarioError(f"malformed scenario id {text!r}")
    name, raw = m.group(1), m.group(2)
    if raw is None:
        return name, []
    if name == "from_checkpoint":
        # the single argument is a path, taken verbatim (commas and all)
        return name, [raw.strip()]
    args = [a.strip() for a in raw.split(",")] if raw.strip() else []
    return name, args


def format_scenario_id(name: str, args=()) -> str:
    if not args:
        return name
    return f"{name}({','.join(str(a) for a in args)})"


def _num(s: str, what: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise ScenarioError(f"{what}: expected a number, got {s!r}") from None


def _int(s: str, what: str) -> int:
    v = _num(s, what)
    if v != int(v):
        raise ScenarioError(f"{what}: expected an integer, got {s!r}")
    return int(v)


def _arity(name: str, args, n_expected: int):
    if len(args) != n_expected:
        raise ScenarioError(f"{name} takes {n_expected} argument(s), got {len(args)}")


def shear_field(n: int, amplitude: float) -> SpectralField:
    """u = (A sin(x2), 0, 0); a stationary single-mode shear."""
    c = np.zeros((3, n, n, n // 2 + 1), dtype=np.complex128)
    c[0, 0, 1, 0] = -0.5j * amplitude
    c[0, 0, -1 % n, 0] = 0.5j * amplitude
    return SpectralField(c)


def taylor_green_field(n: int, amplitude: float) -> SpectralField:
    """u = A (sin x1 cos x2 cos x3, -cos x1 sin x2 cos x3, 0), exact in
    spectral space: eight corner modes at |k_i| = 1."""
    if n < 4:
        raise ScenarioError("taylor_green needs resolution n >= 4")
    c = np.zeros((3, n, n, n // 2 + 1), dtype=np.complex128)
    for sx in (1, -1):
        for sy in (1, -1):
            c[0, sx % n, sy % n, 1] = -0.125j * amplitude * sx
            c[1, sx % n, sy % n, 1] = 0.125j * amplitude * sy
    return SpectralField(c)


def kolmogorov_forcing(n: int, s: int, amplitude: float) -> SpectralField:
    """g = (0, A sin(s x1), 0); divergence-free since g is x1-independent in
    the x1 component."""
    if not (1 <= s < n // 2):
        raise ScenarioError(f"kolmogorov wavenumber s = {s} not resolvable at n = {n}")
    c = np.zeros((3, n, n, n // 2 + 1), dtype=np.complex128)
    c[1, s, 0, 0] = -0.5j * amplitude
    c[1, -s % n, 0, 0] = 0.5j * amplitude
    return SpectralField(c)


def build_forcing(forcing_id: str, n: int) -> SpectralField:
    name, args = parse_scenario_id(forcing_id)
    if name == "zero":
        _arity(name, args, 0)
        return SpectralField.zeros(n)
    if name == "kolmogorov":
        _arity(name, args, 2)
        return kolmogorov_forcing(n, _int(args[0], "kolmogorov wavenumber"),
                                  _num(args[1], "kolmogorov amplitude"))
    if name == "random_divfree":
        _arity(name, args, 3)
        return spectral.random_divfree(n, _int(args[0], "random_divfree kmax"),
                                       _num(args[1], "random_divfree amplitude"),
                                       seed=_int(args[2], "random_divfree seed"))
    raise ScenarioError(f"unknown forcing {name!r}; expected one of {FORCING_KINDS}")


def build_initial(init_id: str, n: int) -> SpectralField:
    name, args = parse_scenario_id(init_id)
    if name == "zero":
        _arity(name, args, 0)
        return SpectralField.zeros(n)
    if name == "shear":
        _arity(name, args, 1)
        return shear_field(n, _num(args[0], "shear amplitude"))
    if name == "taylor_green":
        _arity(name, args, 1)
        return taylor_green_field(n, _num(args[0], "taylor_green amplitude"))
    if name == "random_divfree":
        _arity(name, args, 3)
        return spectral.random_divfree(n, _int(args[0], "random_divfree kmax"),
                                       _num(args[1], "random_divfree amplitude"),
                                       seed=_int(args[2], "random_divfree seed"))
    if name == "from_checkpoint":
        _arity(name, args, 1)
        field, _meta = load_checkpoint(args[0])
        if field.n != n:
            raise spectral.ResolutionMismatchError(
                f"checkpoint resolution {field.n} does not match requested n = {n}")
        return field
    raise ScenarioError(f"unknown initial datum {name!r}; expected one of {INIT_KINDS}")


def rescale_l2(field: SpectralField, target_norm: float) -> SpectralField:
    """Scale a nonzero field to a prescribed L2 norm."""
    cur = spectral.norm(field, "l2")
    if cur == 0.0:
        raise ValueError("cannot rescale the zero field")
    return SpectralField(field.coeffs * (target_norm / cur))
