"""Run configuration: an INI-style key-value file mapped onto dataclasses.

Example::

    [nonlinearity]
    p = 3
    a3 = 1.0                  # constant profile
    a2 = poly: 0, 1           # a_2(x) = x ; also sin: ..., cos: ..., joined by ';'
    s_star = auto             # or +1 / -1
    rho = inf

    [cutoffs]
    N = auto
    J = 48
    L0 = 8
    p_max = 2

Every value can be overridden from the environment with
``RESWAVE_<SECTION>__<KEY>`` (e.g. ``RESWAVE_CUTOFFS__J=64``).
"""

from __future__ import annotations

import configparser
import math
import os
import re
from dataclasses import dataclass, field as dc_field

from .errors import ConfigError, ValidationError
from .nash_moser import NashMoserSchedule
from .nonlinearity import CoeffProfile, Nonlinearity

ENV_PREFIX = "RESWAVE_"

__all__ = ["RunConfig", "load_config", "parse_config", "parse_profile", "ENV_PREFIX"]

_KNOWN = {
    "nonlinearity": None,  # p, s_star, rho, a<k>
    "cutoffs": {"n", "j", "l0", "p_max"},
    "norms": {"sigma_bar", "s", "sigma_q2"},
    "schedule": {"gamma0", "delta0"},
    "diophantine": {"gamma", "tau"},
    "tolerances": {"q2_tol", "q1_tol", "neumann_tol", "residual_tol"},
    "sweep": {"deltas"},
    "solve": {"delta"},
    "cantor": {"etas", "n_samples", "k_max", "m"},
    "eigcheck": {"a0", "eps", "j", "k"},
    "output": {"dir", "seed"},
}


def parse_profile(text):
    """'1.5' | 'poly: 0, 1' | 'sin: 1, 0; cos: 0.5' -> CoeffProfile."""
    parts = {"sin": (), "cos": (), "poly": ()}
    text = text.strip()
    if ":" not in text:
        return CoeffProfile.constant(float(text))
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        kind, _, vals = chunk.partition(":")
        kind = kind.strip().lower()
        if kind not in parts:
            raise ValueError(f"unknown profile kind {kind!r} (expected sin, cos or poly)")
        parts[kind] = tuple(float(v) for v in vals.split(",") if v.strip())
    return CoeffProfile(**parts)


def _floats(text):
    return [float(v) for v in re.split(r"[,\s]+", text.strip()) if v]


@dataclass(frozen=True)
class RunConfig:
    nl: Nonlinearity
    s_star_auto: bool = True
    N: int | None = None  # None: auto
    J: int = 48
    L0: int = 8
    p_max: int = 2
    sigma_bar: float = 0.2
    s: float = 1.0
    sigma_q2: float = 0.1
    gamma0: float = 0.04
    delta0: float = 0.15
    gamma: float = 1e-3
    tau: float = 1.5
    q2_tol: float = 1e-13
    q1_tol: float = 1e-12
    neumann_tol: float = 1e-13
    residual_tol: float = 1e-8
    deltas: tuple = ()
    delta: float | None = None
    etas: tuple = (0.2, 0.1, 0.05)
    n_samples: int = 100_000
    K_max: int = 200
    M: float | None = None  # None: from the delta = 0 critical point
    eig_a0: CoeffProfile = dc_field(default_factory=lambda: CoeffProfile.constant(1.0))
    eig_eps: float = 0.02
    eig_J: int = 200
    eig_k: tuple = (1, 2, 3)
    out_dir: str = "out"
    seed: int = 0

    @property
    def L(self):
        return self.L0 * 2**self.p_max

    def schedule(self):
        return NashMoserSchedule(
            L0=self.L0,
            sigma_bar=self.sigma_bar,
            gamma0=self.gamma0,
            gamma=self.gamma,
            tau=self.tau,
            p_max=self.p_max,
            delta0=self.delta0,
            s=self.s,
        )

    def to_dict(self):
        return {
            "p": self.nl.p,
            "coeffs": {str(k): v.to_dict() for k, v in self.nl.coeffs.items()},
            "s_star": self.nl.s_star,
            "s_star_auto": self.s_star_auto,
            "rho": self.nl.rho if math.isfinite(self.nl.rho) else "inf",
            "N": self.N if self.N is not None else "auto",
            "J": self.J,
            "L0": self.L0,
            "p_max": self.p_max,
            "sigma_bar": self.sigma_bar,
            "s": self.s,
            "gamma0": self.gamma0,
            "delta0": self.delta0,
            "gamma": self.gamma,
            "tau": self.tau,
            "seed": self.seed,
        }


def _line_index(text):
    """(section, key) -> 1-based line number in the raw text."""
    idx, section = {}, None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            idx[(section, None)] = n
        elif section and "=" in line and not line.startswith(("#", ";")):
            idx[(section, line.split("=", 1)[0].strip().lower())] = n
    return idx


def parse_config(text, env=None, base_dir="."):
    env = os.environ if env is None else env
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("cannot parse configuration: key outside any [section]", exc.lineno) from None
    except configparser.ParsingError as exc:
        errors = getattr(exc, "errors", None)
        line = errors[0][0] if errors else None
        raise ConfigError(f"cannot parse configuration: {str(exc).splitlines()[0]}", line) from None
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}", getattr(exc, "lineno", None)) from None
    lines = _line_index(text)

    for k, v in sorted(env.items()):
        if k.startswith(ENV_PREFIX) and "__" in k[len(ENV_PREFIX):]:
            sec, key = k[len(ENV_PREFIX):].lower().split("__", 1)
            if not cp.has_section(sec):
                cp.add_section(sec)
            cp.set(sec, key, v)

    for sec in cp.sections():
        if sec not in _KNOWN:
            raise ConfigError(f"unknown section [{sec}]", lines.get((sec, None)))
        allowed = _KNOWN[sec]
        for key in cp[sec]:
            if allowed is not None and key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", lines.get((sec, key)))
            if allowed is None and key not in ("p", "s_star", "rho") and not re.fullmatch(r"a\d+", key):
                raise ConfigError(f"unknown key {key!r} in [{sec}]", lines.get((sec, key)))

    def get(sec, key, conv, default):
        if not cp.has_option(sec, key):
            return default
        raw = cp.get(sec, key).strip()
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value {raw!r} for {key}: {exc}", lines.get((sec, key))) from None

    def validated(fn, sec, key=None):
        try:
            return fn()
        except ValidationError as exc:
            raise ValidationError(str(exc), lines.get((sec, key))) from None

    if not cp.has_section("nonlinearity") or not cp.has_option("nonlinearity", "p"):
        raise ConfigError("[nonlinearity] with key p is required", lines.get(("nonlinearity", None)))
    p = get("nonlinearity", "p", int, None)
    coeffs = {}
    for key in cp["nonlinearity"]:
        if re.fullmatch(r"a\d+", key):
            coeffs[int(key[1:])] = get("nonlinearity", key, parse_profile, None)
    s_raw = get("nonlinearity", "s_star", str, "auto").lower()
    s_auto = s_raw == "auto"
    if not s_auto and s_raw not in ("1", "+1", "-1"):
        raise ConfigError("s_star must be auto, +1 or -1", lines.get(("nonlinearity", "s_star")))
    s_star = 1 if s_auto else int(s_raw)
    rho = get("nonlinearity", "rho", float, math.inf)
    if p not in coeffs:
        raise ValidationError(f"coefficient a{p} (the leading term) is missing", lines.get(("nonlinearity", "p")))
    nl = validated(lambda: Nonlinearity(p, coeffs, rho=rho, s_star=s_star), "nonlinearity", f"a{p}")

    N_raw = get("cutoffs", "n", str, "auto")
    N = None if N_raw.lower() == "auto" else get("cutoffs", "n", int, None)
    kw = dict(
        nl=nl,
        s_star_auto=s_auto,
        N=N,
        J=get("cutoffs", "j", int, 48),
        L0=get("cutoffs", "l0", int, 8),
        p_max=get("cutoffs", "p_max", int, 2),
        sigma_bar=get("norms", "sigma_bar", float, 0.2),
        s=get("norms", "s", float, 1.0),
        sigma_q2=get("norms", "sigma_q2", float, 0.1),
        gamma0=get("schedule", "gamma0", float, 0.04),
        delta0=get("schedule", "delta0", float, 0.15),
        gamma=get("diophantine", "gamma", float, 1e-3),
        tau=get("diophantine", "tau", float, 1.5),
        q2_tol=get("tolerances", "q2_tol", float, 1e-13),
        q1_tol=get("tolerances", "q1_tol", float, 1e-12),
        neumann_tol=get("tolerances", "neumann_tol", float, 1e-13),
        residual_tol=get("tolerances", "residual_tol", float, 1e-8),
        deltas=tuple(get("sweep", "deltas", _floats, [])),
        delta=get("solve", "delta", float, None),
        etas=tuple(get("cantor", "etas", _floats, [0.2, 0.1, 0.05])),
        n_samples=get("cantor", "n_samples", int, 100_000),
        K_max=get("cantor", "k_max", int, 200),
        M=get("cantor", "m", lambda v: None if v.lower() == "auto" else float(v), None),
        eig_a0=get("eigcheck", "a0", parse_profile, CoeffProfile.constant(1.0)),
        eig_eps=get("eigcheck", "eps", float, 0.02),
        eig_J=get("eigcheck", "j", int, 200),
        eig_k=tuple(int(v) for v in get("eigcheck", "k", _floats, [1, 2, 3])),
        out_dir=os.path.join(base_dir, get("output", "dir", str, "out")),
        seed=get("output", "seed", int, 0),
    )
    cfg = RunConfig(**kw)
    validated(cfg.schedule, "schedule", "gamma0")
    if cfg.N is not None and not 1 <= cfg.N <= cfg.L:
        raise ValidationError("N must satisfy 1 <= N <= L0 * 2^p_max", lines.get(("cutoffs", "n")))
    if cfg.J <= cfg.L:
        raise ValidationError("J must exceed the final time cutoff L0 * 2^p_max", lines.get(("cutoffs", "j")))
    for d in cfg.deltas + ((cfg.delta,) if cfg.delta is not None else ()):
        if not 0 <= d <= cfg.delta0:
            key = ("solve", "delta") if d == cfg.delta else ("sweep", "deltas")
            raise ValidationError(f"delta = {d} outside [0, delta0 = {cfg.delta0}]", lines.get(key))
    return cfg


def load_config(path, env=None):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, env=env, base_dir=".")
