"""Line-oriented ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored.  Every key is optional; missing
keys take the defaults of :class:`~nskw.dynamics.SimConfig`,
:class:`~nskw.constitutive.StressModel`, :class:`~nskw.constitutive.PressureLaw`,
:class:`~nskw.dynamics.InitialCondition` and :class:`ExperimentSpec`.
"""
from dataclasses import dataclass, field

from ..constitutive import PressureLaw, StressModel
from ..dynamics import InitialCondition, SimConfig
from ..errors import ConfigError

EXPERIMENTS = ("run", "energy_budget", "weak_strong", "vanish", "lemma_suite")


@dataclass(frozen=True)
class ExperimentSpec:
    """A simulation config plus the parameters of one experiment kind."""

    kind: str = "run"
    config: SimConfig = field(default_factory=SimConfig)
    refine: int = 4
    deltas: tuple = (1e-2, 5e-3, 2.5e-3)
    eps_list: tuple = (1e-2, 1e-3, 1e-4)
    samples: int = 10_000

    def __post_init__(self):
        if self.kind not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
        if self.refine not in (2, 4):
            raise ConfigError("refine must be 2 or 4")
        if not self.deltas or any(not d > 0 for d in self.deltas):
            raise ConfigError("deltas must be positive")
        e = self.eps_list
        if not e or any(x < 0 for x in e) or any(a <= b for a, b in zip(e, e[1:])):
            raise ConfigError("eps list must be nonnegative and strictly decreasing")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")


def _bool(s):
    low = s.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


# key -> (target section, field name, parser)
_KEYS = {
    "experiment": ("spec", "kind", str),
    "refine": ("spec", "refine", int),
    "deltas": ("spec", "deltas", _floats),
    "eps_list": ("spec", "eps_list", _floats),
    "samples": ("spec", "samples", int),
    "d": ("sim", "d", int),
    "n": ("sim", "n", int),
    "kappa": ("sim", "kappa", float),
    "eps": ("sim", "eps", float),
    "nu": ("sim", "nu", float),
    "q": ("sim", "q", float),
    "dt": ("sim", "dt", float),
    "t_end": ("sim", "t_end", float),
    "rho_min": ("sim", "rho_min", float),
    "output_every": ("sim", "output_every", int),
    "integrator": ("sim", "integrator", str),
    "dealias": ("sim", "dealias", _bool),
    "seed": ("sim", "seed", int),
    "stress": ("stress", "kind", str),
    "mu": ("stress", "mu", float),
    "p": ("stress", "p", float),
    "delta": ("stress", "delta", float),
    "mu0": ("stress", "mu0", float),
    "mu1": ("stress", "mu1", float),
    "a_p": ("pressure", "a_p", float),
    "gamma": ("pressure", "gamma", float),
    "rho_bar": ("pressure", "rho_bar", float),
    "profile": ("ic", "profile", str),
    "rho_mean": ("ic", "rho_mean", float),
    "rho_amp": ("ic", "rho_amp", float),
    "u_amp": ("ic", "u_amp", float),
    "modes": ("ic", "modes", int),
}


def parse_text(text):
    """Parse configuration text into an :class:`ExperimentSpec`."""
    parts = {"spec": {}, "sim": {}, "stress": {}, "pressure": {}, "ic": {}}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})", line=lineno)
        seen[key] = lineno
        section, name, conv = _KEYS[key]
        try:
            parts[section][name] = conv(value)
        except ValueError:
            raise ConfigError(f"invalid value for {key}: {value!r}", line=lineno) from None
    # the initial-condition seed follows the run seed
    if "seed" in parts["sim"]:
        parts["ic"]["seed"] = parts["sim"]["seed"]
    try:
        sim = SimConfig(
            stress=StressModel(**parts["stress"]),
            pressure=PressureLaw(**parts["pressure"]),
            ic=InitialCondition(**parts["ic"]),
            **parts["sim"],
        )
        return ExperimentSpec(config=sim, **parts["spec"])
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(path):
    """Read and validate a configuration file."""
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read())


def format_config(spec):
    """Serialize ``spec`` so that :func:`parse_text` reproduces it exactly."""
    if isinstance(spec, SimConfig):
        spec = ExperimentSpec(config=spec)
    sources = {"spec": spec, "sim": spec.config, "stress": spec.config.stress,
               "pressure": spec.config.pressure, "ic": spec.config.ic}
    lines = []
    for key, (section, name, _) in _KEYS.items():
        value = getattr(sources[section], name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        elif isinstance(value, tuple):
            text = ", ".join(repr(float(v)) for v in value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def config_keys():
    return tuple(_KEYS)


__all__ = ["ExperimentSpec", "parse_config", "parse_text", "format_config", "config_keys",
           "EXPERIMENTS"]
