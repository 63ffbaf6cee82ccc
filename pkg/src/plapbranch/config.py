"""TOML run configuration: problem data from a named catalogue, mesh, sweep."""
from dataclasses import dataclass, field
from pathlib import Path
import sys

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .mesh import build_interval, build_radial
from .problem import (
    Constant, ConstantKernel, CrossoverKernel, DistancePower, PowerKernel,
    ProblemError, ProblemSpec, ShiftedPowerKernel, TabulatedKernel,
    TabulatedPotential,
)


class ConfigError(ValueError):
    pass


@dataclass
class Sweep:
    alpha_min: float = 1e-3
    alpha_max: float = 1e3
    K: int = 24


@dataclass
class RunConfig:
    spec: ProblemSpec
    mesh: object
    sweep: Sweep = field(default_factory=Sweep)
    ladder_tol: float = 1e-6
    newton_tol: float = 1e-10
    out_dir: Path = Path("out")
    fmt: str = "csv"
    seed: int = 0
    invert_barriers: bool = False
    alpha: float = 1.0
    source: Path = None
    raw: dict = field(default_factory=dict)


_SECTIONS = {
    "problem": {"p", "delta", "beta", "r", "a", "b", "g", "theta1", "theta2"},
    "mesh": {"kind", "M", "a", "b", "R", "N"},
    "sweep": {"alpha_min", "alpha_max", "K"},
    "tolerances": {"ladder_tol", "newton_tol"},
    "output": {"dir", "format"},
    "verify": {"seed"},
    "barriers": {"invert"},
    "solve": {"alpha"},
}


def _number(sec, key, value, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{sec}.{key} must be a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"{sec}.{key} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def _load_table(path, base, ncols=2):
    p = Path(path)
    if not p.is_absolute() and base is not None:
        p = base / p
    try:
        data = np.loadtxt(p, delimiter=",", comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read tabulated data {p}: {exc}") from None
    if data.shape[1] < ncols or data.shape[0] < 2:
        raise ConfigError(f"tabulated data {p} needs >= 2 rows of {ncols} columns")
    return data, str(path)


def _params(sec, d, allowed):
    extra = set(d) - allowed - {"kind"}
    if extra:
        raise ConfigError(f"{sec}: unknown keys {sorted(extra)} (allowed: {sorted(allowed)})")
    return {k: _number(sec, k, v) for k, v in d.items() if k != "kind"}


def _potential(sec, d, base):
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError(f"{sec} needs a 'kind' key (constant, distance_power, tabulated)")
    kind = d["kind"]
    if kind == "constant":
        return Constant(**_params(sec, d, {"value"}))
    if kind == "distance_power":
        kw = _params(sec, d, {"s", "coef"})
        if "s" not in kw:
            raise ConfigError(f"{sec}: distance_power needs 's'")
        return DistancePower(**kw)
    if kind == "tabulated":
        if set(d) - {"kind", "file"} or "file" not in d:
            raise ConfigError(f"{sec}: tabulated potential takes exactly 'file'")
        data, src = _load_table(d["file"], base)
        return TabulatedPotential(tuple(data[:, 0]), tuple(data[:, 1]), src)
    raise ConfigError(f"{sec}.kind {kind!r} is not in the potential catalogue "
                      "(constant, distance_power, tabulated)")


def _kernel(sec, d, base):
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError(f"{sec} needs a 'kind' key "
                          "(constant, power, shifted_power, crossover, tabulated)")
    kind = d["kind"]
    if kind == "constant":
        return ConstantKernel(**_params(sec, d, {"value"}))
    if kind == "power":
        kw = _params(sec, d, {"theta", "coef"})
        if "theta" not in kw:
            raise ConfigError(f"{sec}: power kernel needs 'theta'")
        return PowerKernel(**kw)
    if kind == "shifted_power":
        kw = _params(sec, d, {"theta"})
        if "theta" not in kw:
            raise ConfigError(f"{sec}: shifted_power kernel needs 'theta'")
        return ShiftedPowerKernel(**kw)
    if kind == "crossover":
        kw = _params(sec, d, {"theta_zero", "theta_inf"})
        if set(kw) != {"theta_zero", "theta_inf"}:
            raise ConfigError(f"{sec}: crossover kernel needs 'theta_zero' and 'theta_inf'")
        return CrossoverKernel(**kw)
    if kind == "tabulated":
        if set(d) - {"kind", "file"} or "file" not in d:
            raise ConfigError(f"{sec}: tabulated kernel takes exactly 'file'")
        data, src = _load_table(d["file"], base)
        if np.any(data[:, :2] <= 0):
            raise ConfigError(f"{sec}: tabulated kernel needs positive t and g values")
        return TabulatedKernel(tuple(data[:, 0]), tuple(data[:, 1]), src)
    raise ConfigError(f"{sec}.kind {kind!r} is not in the kernel catalogue "
                      "(constant, power, shifted_power, crossover, tabulated)")


def _mesh(d):
    kind = d.get("kind", "interval")
    M = _number("mesh", "M", d.get("M", 256), int)
    try:
        if kind == "interval":
            extra = set(d) - {"kind", "M", "a", "b"}
            if extra:
                raise ConfigError(f"mesh: keys {sorted(extra)} do not apply to an interval")
            return build_interval(_number("mesh", "a", d.get("a", 0.0)),
                                  _number("mesh", "b", d.get("b", 1.0)), M)
        if kind == "radial":
            extra = set(d) - {"kind", "M", "R", "N"}
            if extra:
                raise ConfigError(f"mesh: keys {sorted(extra)} do not apply to a radial ball")
            return build_radial(_number("mesh", "R", d.get("R", 1.0)),
                                _number("mesh", "N", d.get("N", 3), int), M)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"mesh: {exc}") from None
    raise ConfigError(f"mesh.kind {kind!r} must be 'interval' or 'radial'")


def from_dict(raw, base=None):
    """Build and validate a RunConfig; raises ConfigError with the violated constraint."""
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")
    for sec, keys in _SECTIONS.items():
        extra = set(raw.get(sec, {})) - keys
        if extra:
            raise ConfigError(f"[{sec}] unknown keys {sorted(extra)} (allowed: {sorted(keys)})")
    pr = raw.get("problem")
    if not pr:
        raise ConfigError("missing [problem] section")
    for key in ("p", "delta", "beta"):
        if key not in pr:
            raise ConfigError(f"problem.{key} is required")
    kw = {k: _number("problem", k, pr[k]) for k in ("p", "delta", "beta", "r") if k in pr}
    for k in ("theta1", "theta2"):
        if k in pr:
            kw[k] = _number("problem", k, pr[k])
    if "a" in pr:
        kw["a"] = _potential("problem.a", pr["a"], base)
    if "b" in pr:
        kw["b"] = _potential("problem.b", pr["b"], base)
    if "g" in pr:
        kw["g"] = _kernel("problem.g", pr["g"], base)
    mesh = _mesh(raw.get("mesh", {}))
    try:
        spec = ProblemSpec(**kw)
        spec.validate(mesh)
    except ProblemError as exc:
        raise ConfigError(str(exc)) from None

    sw = raw.get("sweep", {})
    sweep = Sweep(_number("sweep", "alpha_min", sw.get("alpha_min", 1e-3)),
                  _number("sweep", "alpha_max", sw.get("alpha_max", 1e3)),
                  _number("sweep", "K", sw.get("K", 24), int))
    if not 0 < sweep.alpha_min < sweep.alpha_max:
        raise ConfigError("sweep must satisfy 0 < alpha_min < alpha_max")
    if sweep.K < 16:
        raise ConfigError(f"sweep.K must be at least 16, got {sweep.K}")
    tol = raw.get("tolerances", {})
    ladder_tol = _number("tolerances", "ladder_tol", tol.get("ladder_tol", 1e-6))
    newton_tol = _number("tolerances", "newton_tol", tol.get("newton_tol", 1e-10))
    if not (ladder_tol > 0 and newton_tol > 0):
        raise ConfigError("tolerances must be positive")
    out = raw.get("output", {})
    fmt = out.get("format", "csv")
    if fmt != "csv":
        raise ConfigError(f"output.format {fmt!r} is not supported (csv)")
    seed = _number("verify", "seed", raw.get("verify", {}).get("seed", 0), int)
    invert = raw.get("barriers", {}).get("invert", False)
    if not isinstance(invert, bool):
        raise ConfigError("barriers.invert must be true or false")
    alpha = _number("solve", "alpha", raw.get("solve", {}).get("alpha", 1.0))
    if not alpha > 0:
        raise ConfigError("solve.alpha must be positive")
    return RunConfig(spec, mesh, sweep, ladder_tol, newton_tol, Path(out.get("dir", "out")),
                     fmt, seed, invert, alpha, None, raw)


def load(path):
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: malformed TOML: {exc}") from None
    cfg = from_dict(raw, base=path.parent)
    cfg.source = path
    return cfg
