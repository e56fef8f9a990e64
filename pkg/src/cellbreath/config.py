"""INI run configuration: typed schema, strict parsing, canonical dumping.

A resolved config dumps to a canonical INI text.  Outputs embed that text as
``# ``-prefixed header lines, and :func:`load_config` accepts such a file
directly, so any output can be replayed.
"""

import configparser
from dataclasses import dataclass, field, fields

from .exceptions import ConfigError
from .markov_channel import TransitionMatrix
from .scheduler_core import BreathingPattern
from .simulator import POLICIES
from .whittle_index import SearchParams

SCENARIOS = ("asymmetric", "fixed-pattern", "rmab-v", "two-cell")
_DEFAULT_POLICY = {"asymmetric": "asymmetric", "fixed-pattern": "fixed-pattern", "rmab-v": "index",
                   "two-cell": "greedy"}


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _ints(text):
    return tuple(int(t) for t in _list(text))


def _opt_float(text):
    return None if text.strip().lower() in ("", "stationary") else float(text)


def _dump(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if value is None:
        return "stationary"
    if isinstance(value, float):
        return repr(value)
    return str(value)


# (section, key) -> (attribute, parser)
_SCHEMA = {
    ("run", "seed"): ("seed", int),
    ("run", "scenario"): ("scenario", str),
    ("run", "policies"): ("policies", _list),
    ("run", "horizon"): ("horizon", int),
    ("run", "episodes"): ("episodes", int),
    ("run", "traces"): ("traces", _bool),
    ("chain", "p"): ("p", float),
    ("chain", "r"): ("r", float),
    ("users", "near"): ("n_near", int),
    ("users", "far"): ("n_far", int),
    ("users", "initial"): ("initial", _opt_float),
    ("pattern", "pattern"): ("pattern", str),
    ("whittle", "horizon"): ("index_horizon", int),
    ("whittle", "grid_step"): ("grid_step", float),
    ("whittle", "tol"): ("tol", float),
    ("whittle", "wide"): ("wide", _bool),
    ("whittle", "shortcut"): ("shortcut", _bool),
    ("whittle", "points"): ("points", int),
    ("whittle", "region"): ("region", str),
    ("dp", "horizon"): ("dp_horizon", int),
    ("dp", "max_nodes"): ("max_nodes", int),
    ("dp", "greedy_check"): ("greedy_check", _bool),
    ("condition", "users"): ("cond_users", int),
    ("condition", "horizon"): ("cond_horizon", int),
    ("condition", "gaps"): ("cond_gaps", _ints),
}


@dataclass
class RunConfig:
    seed: int = None
    scenario: str = "asymmetric"
    policies: tuple = ()
    horizon: int = 20
    episodes: int = 1000
    traces: bool = False
    p: float = 0.8
    r: float = 0.2
    n_near: int = 2
    n_far: int = 2
    initial: float = None
    pattern: str = "1F,1N"
    index_horizon: int = 5
    grid_step: float = 1e-3
    tol: float = 1e-9
    wide: bool = False
    shortcut: bool = False
    points: int = 21
    region: str = "full"
    dp_horizon: int = 3
    max_nodes: int = 10**7
    greedy_check: bool = True
    cond_users: int = 3
    cond_horizon: int = 5
    cond_gaps: tuple = field(default=())

    def validate(self):
        if self.seed is None:
            raise ConfigError("run.seed", "required (no implicit seeding)")
        if self.scenario not in SCENARIOS:
            raise ConfigError("run.scenario", f"must be one of {SCENARIOS}")
        if not self.policies:
            self.policies = (_DEFAULT_POLICY[self.scenario],)
        for pol in self.policies:
            if pol not in POLICIES:
                raise ConfigError("run.policies", f"unknown policy {pol!r}")
        for attr, key in (("horizon", "run.horizon"), ("episodes", "run.episodes"),
                          ("n_near", "users.near"), ("n_far", "users.far"),
                          ("index_horizon", "whittle.horizon"), ("points", "whittle.points"),
                          ("dp_horizon", "dp.horizon"), ("max_nodes", "dp.max_nodes"),
                          ("cond_users", "condition.users"), ("cond_horizon", "condition.horizon")):
            if getattr(self, attr) < 1:
                raise ConfigError(key, "must be >= 1")
        try:
            self.chain()
        except ValueError as exc:
            raise ConfigError("chain", str(exc)) from None
        if self.initial is not None and not 0 <= self.initial <= 1:
            raise ConfigError("users.initial", "must be a probability or 'stationary'")
        try:
            self.breathing()
        except ValueError as exc:
            raise ConfigError("pattern.pattern", str(exc)) from None
        try:
            self.search()
        except ValueError as exc:
            raise ConfigError("whittle", str(exc)) from None
        if self.region not in ("full", "reachable"):
            raise ConfigError("whittle.region", "must be 'full' or 'reachable'")
        if "index" in self.policies and self.n_near != self.n_far:
            raise ConfigError("users.far", "index policy needs near == far for permanent pairing")
        if self.cond_gaps and len(self.cond_gaps) != self.cond_horizon - 1:
            raise ConfigError("condition.gaps", f"need {self.cond_horizon - 1} gaps")
        if any(g < 1 for g in self.cond_gaps):
            raise ConfigError("condition.gaps", "gaps must be >= 1")
        return self

    def chain(self):
        return TransitionMatrix(self.p, self.r)

    def breathing(self):
        return BreathingPattern.parse(self.pattern)

    def search(self):
        return SearchParams(grid_step=self.grid_step, tol=self.tol, wide=self.wide)

    def to_ini(self):
        by_attr = {attr: key for key, (attr, _) in _SCHEMA.items()}
        sections = {}
        for f in fields(self):
            section, key = by_attr[f.name]
            sections.setdefault(section, []).append(f"{key} = {_dump(getattr(self, f.name))}")
        return "\n".join(f"[{s}]\n" + "\n".join(lines) + "\n" for s, lines in sections.items())


def parse_config(text):
    """Parse INI text into a validated :class:`RunConfig`."""
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__",
                                       inline_comment_prefixes=(";",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", f"unparseable: {exc}") from None
    cfg = RunConfig()
    known_sections = {s for s, _ in _SCHEMA}
    for section in parser.sections():
        if section not in known_sections:
            raise ConfigError(section, "unknown section")
        for key, raw in parser.items(section):
            if (section, key) not in _SCHEMA:
                raise ConfigError(f"{section}.{key}", "unknown key")
            attr, conv = _SCHEMA[(section, key)]
            try:
                setattr(cfg, attr, conv(raw))
            except ValueError as exc:
                raise ConfigError(f"{section}.{key}", f"bad value {raw!r} ({exc})") from None
    return cfg.validate()


def embedded_text(text):
    """Config text, unwrapping a ``# ``-prefixed header block when present."""
    lines = text.splitlines()
    if lines and lines[0].startswith("#"):
        block = []
        for line in lines:
            if not line.startswith("#"):
                break
            block.append(line[2:] if line.startswith("# ") else line[1:])
        return "\n".join(block)
    return text


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    return parse_config(embedded_text(text))


def header_block(cfg):
    return "".join(f"# {line}\n" for line in cfg.to_ini().splitlines())
