"""Experiment configuration: flat ``key = value`` files with dotted keys.

Example::

    # noise levels
    noise.r = 0.02
    pm.epsilon = 0.01
    input.amplitude = 1.0
    model.library = 1, x1, x2, x1^2, x1^3

Values are parsed as Python literals where possible (numbers, tuples,
booleans, ``None``); anything else is kept as a string. Keys not present get
the defaults below.
"""
import ast
from dataclasses import dataclass

from .errors import ConfigError
import numpy as np

from .models import DUFFING_LIBRARY, FunctionLibrary

OBSERVERS = ("classical", "joint", "joint_no_pass2")

# Benchmark defaults. Keys in METHOD_VALUES come from the method description;
# the rest are free choices and are tagged as such in reports.
DEFAULTS = {
    "model.name": "duffing",
    "model.p": (-1.0, 3.0, 0.1),
    "model.library": ", ".join(DUFFING_LIBRARY),
    "model.x0_true": (1.0, 0.0),
    "model.x0_est": (2.0, 1.0),
    "model.theta0": 1e-3,
    "model.p0_std_x": (1.0, 1.0),
    "model.p0_std_theta": "prior",
    "time.dt": 0.01,
    "time.t_end": 10.0,
    "input.amplitude": 1.0,
    "input.omega": 1.0,
    "input.phase": 0.0,
    "noise.q_x": (1e-4, 1e-4),
    "noise.q_theta": 1e-2,
    "noise.r": 1e-2,
    "seed": 0,
    "ut.alpha": 1e-3,
    "ut.beta": 2.0,
    "ut.unscaled_pass2": False,
    "horseshoe.tau0": 0.1,
    "horseshoe.a": 4.5,
    "horseshoe.b": 1.5,
    "horseshoe.xi": None,
    "horseshoe.n_samples": 1_000_000,
    "horseshoe.seed": 0,
    "horseshoe.per_step": False,
    "pm.epsilon": 0.01,
    "pm.r_pm": 1.2,
    "pm.process_noise": True,
    "observer": "joint",
    "compare.observers": ", ".join(OBSERVERS),
    "analysis.burn_in": 2.0,
    "analysis.threshold": 0.95,
    "analysis.sparsity_fraction": 0.1,
    "output_dir": "out",
}

METHOD_VALUES = {
    "model.p",
    "model.library",
    "model.x0_true",
    "model.x0_est",
    "ut.alpha",
    "ut.beta",
    "horseshoe.tau0",
    "horseshoe.a",
    "horseshoe.b",
    "analysis.burn_in",
    "analysis.threshold",
}


def parse_value(text):
    text = text.strip()
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_config_text(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(key, "unknown configuration key")
        out[key] = parse_value(value)
    return out


def format_value(v):
    if isinstance(v, str):
        return v
    return repr(v)


def _floats(key, v, n=None):
    try:
        vals = tuple(float(a) for a in (v if isinstance(v, (tuple, list)) else (v,)))
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected numbers, got {v!r}") from None
    if n is not None and len(vals) == 1 and n > 1:
        vals = vals * n
    if n is not None and len(vals) != n:
        raise ConfigError(key, f"expected {n} values, got {len(vals)}")
    return vals


def _names(key, v):
    if isinstance(v, str):
        items = [s.strip() for s in v.split(",")]
    elif isinstance(v, (tuple, list)):
        items = [str(s).strip() for s in v]
    else:
        raise ConfigError(key, f"expected a comma-separated list, got {v!r}")
    return tuple(s for s in items if s)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated view of the merged key/value settings (``values``)."""

    values: dict

    @classmethod
    def from_dict(cls, overrides=None):
        values = dict(DEFAULTS)
        for k, v in (overrides or {}).items():
            if k not in DEFAULTS:
                raise ConfigError(k, "unknown configuration key")
            values[k] = v
        cfg = cls(values)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path, **overrides):
        with open(path, encoding="utf-8") as fh:
            vals = parse_config_text(fh.read())
        vals.update(overrides)
        return cls.from_dict(vals)

    def replace(self, **dotted):
        merged = dict(self.values)
        merged.update({k.replace("__", "."): v for k, v in dotted.items()})
        return ExperimentConfig.from_dict(merged)

    def with_values(self, mapping):
        merged = dict(self.values)
        merged.update(mapping)
        return ExperimentConfig.from_dict(merged)

    def __getitem__(self, key):
        return self.values[key]

    def validate(self):
        v = self.values
        if v["model.name"] != "duffing":
            raise ConfigError("model.name", "only the 'duffing' model is available")
        _floats("model.p", v["model.p"], 3)
        _floats("model.x0_true", v["model.x0_true"], 2)
        _floats("model.x0_est", v["model.x0_est"], 2)
        if not self.library_names:
            raise ConfigError("model.library", "library must not be empty")
        try:
            FunctionLibrary.from_names(self.library_names)(np.zeros(2), 0.0)
        except ValueError as exc:
            raise ConfigError("model.library", str(exc)) from None
        except IndexError:
            raise ConfigError("model.library", "a term refers to a state beyond x2") from None
        dt, t_end = float(v["time.dt"]), float(v["time.t_end"])
        if not dt > 0:
            raise ConfigError("time.dt", "must be positive")
        if not t_end > dt:
            raise ConfigError("time.t_end", "must exceed time.dt")
        n = round(t_end / dt)
        if abs(n * dt - t_end) > 1e-9 * t_end:
            raise ConfigError("time.dt", "must divide time.t_end")
        for key in ("noise.q_x", "noise.q_theta", "noise.r", "model.p0_std_x"):
            if any(a < 0 for a in _floats(key, v[key])):
                raise ConfigError(key, "standard deviations must be >= 0")
        if v["model.p0_std_theta"] != "prior" and any(a < 0 for a in _floats("model.p0_std_theta", v["model.p0_std_theta"])):
            raise ConfigError("model.p0_std_theta", "must be 'prior' or nonnegative numbers")
        if not 0 < float(v["ut.alpha"]) <= 1:
            raise ConfigError("ut.alpha", "must lie in (0, 1]")
        for key in ("horseshoe.tau0", "horseshoe.a", "horseshoe.b", "pm.epsilon", "pm.r_pm"):
            if not float(v[key]) > 0:
                raise ConfigError(key, "must be positive")
        if int(v["horseshoe.n_samples"]) < 1:
            raise ConfigError("horseshoe.n_samples", "must be positive")
        if v["observer"] not in OBSERVERS:
            raise ConfigError("observer", f"must be one of {', '.join(OBSERVERS)}")
        for name in self.compare_observers:
            if name not in OBSERVERS:
                raise ConfigError("compare.observers", f"unknown observer {name!r}")
        if not 0 < float(v["analysis.threshold"]) <= 1:
            raise ConfigError("analysis.threshold", "must lie in (0, 1]")
        if float(v["analysis.burn_in"]) < 0:
            raise ConfigError("analysis.burn_in", "must be >= 0")
        try:
            int(v["seed"])
        except (TypeError, ValueError):
            raise ConfigError("seed", "must be an integer") from None

    @property
    def library_names(self):
        return _names("model.library", self.values["model.library"])

    @property
    def compare_observers(self):
        return _names("compare.observers", self.values["compare.observers"])

    def floats(self, key, n=None):
        return _floats(key, self.values[key], n)

    def dump(self, skip=()):
        """Effective configuration as ``key = value`` text, values fixed by the method left untagged."""
        lines = []
        for key in DEFAULTS:
            if key in skip:
                continue
            if key in METHOD_VALUES:
                tag = ""
            elif self.values[key] == DEFAULTS[key]:
                tag = "  # benchmark default, left open by the method"
            else:
                tag = "  # user setting"
            lines.append(f"{key} = {format_value(self.values[key])}{tag}")
        return "\n".join(lines) + "\n"
