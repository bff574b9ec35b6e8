"""Plain-text run configuration.

The format is line oriented::

    # c-drift on the half-line
    [problem]
    kind = half_line
    a = "1"
    V = "-2*r"
    r0 = 0
    R_max = 60

    [bounds]
    methods = [thm12, eq17]

Sections are ``[problem]``, ``[quadrature]``, ``[bounds]``, ``[oracle]`` and
``[output]``.  A value is a quoted expression in ``r``, a built-in family
call such as ``one_plus_r2_pow(p=2)``, a number, ``true``/``false``, a bare
word, or a bracketed comma-separated list of these.  ``#`` starts a comment
outside quotes.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from . import expr as _expr
from .profile import (
    FAMILIES,
    DirectRadial,
    ExpressionFunction,
    HalfLine,
    IsotropicEuclidean,
    Problem,
    RadialFunction,
    family,
)
from .quad import QuadratureSettings

__all__ = [
    "ConfigError",
    "ExprValue",
    "FamilyValue",
    "ProblemConfig",
    "BoundsConfig",
    "OracleConfig",
    "OutputConfig",
    "RunConfig",
    "ALL_METHODS",
    "parse_config",
    "load_config",
    "to_function",
]

ALL_METHODS = ("thm12", "thm31", "eq16", "eq13", "eq27", "eq28", "eq12", "eq17", "thm32",
               "cor13a", "cor13b", "cor14")
KINDS = ("half_line", "isotropic", "direct")
SECTIONS = ("problem", "quadrature", "bounds", "oracle", "output")


class ConfigError(ValueError):
    """Invalid configuration; carries the line number and/or field name."""

    def __init__(self, message: str, line: Optional[int] = None, field_name: Optional[str] = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field_name is not None:
            where.append(f"field {field_name!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.field_name = field_name


@dataclass(frozen=True)
class ExprValue:
    text: str
    tree: Any

    def canonical(self) -> str:
        return _expr.unparse(self.tree)


@dataclass(frozen=True)
class FamilyValue:
    name: str
    params: tuple

    def canonical(self) -> str:
        args = ",".join(f"{k}={float(v)!r}" for k, v in sorted(self.params))
        return f"{self.name}({args})"


FunctionSpec = Any  # ExprValue | FamilyValue | float


def to_function(spec: FunctionSpec, smoothness: str = "C2") -> RadialFunction:
    """Build a :class:`RadialFunction` from a parsed config value."""
    if isinstance(spec, ExprValue):
        return ExpressionFunction(spec.tree, smoothness=smoothness, text=spec.text)
    if isinstance(spec, FamilyValue):
        return family(spec.name, **dict(spec.params))
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return family("const", c=float(spec))
    raise TypeError(f"not a function specification: {spec!r}")


@dataclass(frozen=True)
class ProblemConfig:
    kind: str = "half_line"
    d: int = 1
    a: FunctionSpec = 1.0
    V: FunctionSpec = 0.0
    gamma: Optional[FunctionSpec] = None
    alpha: Optional[FunctionSpec] = None
    beta: Optional[FunctionSpec] = None
    mu_density: Optional[FunctionSpec] = None
    r0: float = 0.0
    R_max: float = 60.0

    def build(self) -> Problem:
        if self.kind == "half_line":
            variant = HalfLine(to_function(self.a), to_function(self.V))
        elif self.kind == "isotropic":
            variant = IsotropicEuclidean(self.d, to_function(self.a), to_function(self.V))
        else:
            beta = self.beta if self.beta is not None else self.alpha
            variant = DirectRadial(to_function(self.gamma), to_function(self.alpha), to_function(beta),
                                   to_function(self.mu_density), self.d)
        return Problem(variant, self.r0, self.R_max)


@dataclass(frozen=True)
class BoundsConfig:
    methods: Optional[tuple] = None  # None: every method applicable to the problem
    test_functions: tuple = ("exponential",)
    theta_min: float = 0.01
    theta_max: float = 4.0
    budget: int = 40
    K: Optional[float] = None
    pole: bool = False
    eps: float = 0.5
    eq13_r: Optional[float] = None
    R_grid: int = 32

    def enabled(self, method: str) -> bool:
        return self.methods is None or method in self.methods


@dataclass(frozen=True)
class OracleConfig:
    enabled: bool = True
    n: int = 4096
    R_max: Optional[float] = None
    doubling_check: bool = True
    grid: str = "uniform"


@dataclass(frozen=True)
class OutputConfig:
    format: str = "text"
    out: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    quadrature: QuadratureSettings = field(default_factory=QuadratureSettings)
    bounds: BoundsConfig = field(default_factory=BoundsConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    source: Optional[str] = None

    def settings(self) -> QuadratureSettings:
        """Quadrature settings with the tail horizon defaulting to ``R_max``."""
        if self.quadrature.tail_horizon is None:
            return replace(self.quadrature, tail_horizon=self.problem.R_max)
        return self.quadrature

    def canonical(self) -> dict:
        """Semantic content of the run (output location excluded)."""

        def norm(v):
            if isinstance(v, (ExprValue, FamilyValue)):
                return {"fn": v.canonical()}
            if isinstance(v, bool) or v is None or isinstance(v, str):
                return v
            if isinstance(v, int):
                return v
            if isinstance(v, float):
                return repr(v)
            if isinstance(v, (tuple, list)):
                return [norm(x) for x in v]
            if isinstance(v, dict):
                return {k: norm(x) for k, x in sorted(v.items())}
            raise TypeError(f"cannot canonicalize {v!r}")

        def section(obj):
            return {k: norm(getattr(obj, k)) for k in obj.__dataclass_fields__}

        problem = section(self.problem)
        # fields that the chosen problem kind ignores carry no meaning
        if self.problem.kind == "direct":
            for k in ("a", "V"):
                problem.pop(k)
        else:
            for k in ("gamma", "alpha", "beta", "mu_density"):
                problem.pop(k)
        if self.problem.kind == "half_line":
            problem.pop("d")
        return {
            "problem": problem,
            "quadrature": section(self.settings()),
            "bounds": section(self.bounds),
            "oracle": section(self.oracle),
        }

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------------------
# parsing

_NUMBER = re.compile(r"^[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?$|^[+-]?inf$")
_WORD = re.compile(r"^[A-Za-z_][A-Za-z_0-9]*$")
_CALL = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)\s*\((.*)\)$", re.S)


def _strip_comment(line: str) -> str:
    quoted = False
    for i, ch in enumerate(line):
        if ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            return line[:i]
    return line


def _split_top(text: str, sep: str = ",") -> list:
    parts, depth, quoted, cur = [], 0, False, []
    for ch in text:
        if ch == '"':
            quoted = not quoted
        elif not quoted and ch in "([":
            depth += 1
        elif not quoted and ch in ")]":
            depth -= 1
        if ch == sep and depth == 0 and not quoted:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts]


def _parse_value(raw: str, line: int, key: str):
    text = raw.strip()
    if not text:
        raise ConfigError("missing value", line, key)
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        if not inner:
            return ()
        return tuple(_parse_value(p, line, key) for p in _split_top(inner))
    if text.startswith('"'):
        if len(text) < 2 or not text.endswith('"') or text.count('"') != 2:
            raise ConfigError("unterminated or malformed quoted expression", line, key)
        body = text[1:-1]
        try:
            return ExprValue(body, _expr.parse(body))
        except _expr.ParseError as exc:
            raise ConfigError(f"bad expression: {exc}", line, key) from None
    if _NUMBER.match(text):
        return float(text)
    if text in ("true", "false"):
        return text == "true"
    if text == "none":
        return None
    m = _CALL.match(text)
    if m:
        name, args = m.group(1), m.group(2).strip()
        if name not in FAMILIES:
            raise ConfigError(f"unknown family {name!r}", line, key)
        params = []
        for item in _split_top(args) if args else []:
            if "=" not in item:
                raise ConfigError(f"family argument {item!r} must be name=value", line, key)
            k, v = (s.strip() for s in item.split("=", 1))
            if k not in FAMILIES[name][0]:
                raise ConfigError(f"family {name!r} has no parameter {k!r}", line, key)
            if not _NUMBER.match(v):
                raise ConfigError(f"family parameter {k!r} must be a number", line, key)
            params.append((k, float(v)))
        return FamilyValue(name, tuple(sorted(params)))
    if _WORD.match(text):
        return text
    raise ConfigError(f"cannot parse value {text!r}", line, key)


def _read_sections(text: str) -> dict:
    sections: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("["):
            m = re.fullmatch(r"\[\s*([A-Za-z_]+)\s*\]", line)
            if not m:
                raise ConfigError(f"malformed section header {line!r}", lineno)
            current = m.group(1)
            if current not in SECTIONS:
                raise ConfigError(f"unknown section [{current}]", lineno)
            if current in sections:
                raise ConfigError(f"duplicate section [{current}]", lineno)
            sections[current] = {}
            continue
        if current is None:
            raise ConfigError("key outside of any section", lineno)
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not _WORD.match(key):
            raise ConfigError(f"invalid key {key!r}", lineno)
        if key in sections[current]:
            raise ConfigError("duplicate key", lineno, key)
        if current == "output" and key == "out":
            # a filesystem path, optionally quoted
            sections[current][key] = (value.strip().strip('"'), lineno)
            continue
        sections[current][key] = (_parse_value(value, lineno, key), lineno)
    return sections


def _take(section: dict, key: str, kind: str, default, *, minimum=None, positive=False, choices=None):
    if key not in section:
        return default
    value, line = section.pop(key)
    if kind == "float":
        if not isinstance(value, float):
            raise ConfigError("expected a number", line, key)
    elif kind == "int":
        if not isinstance(value, float) or value != int(value):
            raise ConfigError("expected an integer", line, key)
        value = int(value)
    elif kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError("expected true or false", line, key)
    elif kind == "word":
        if not isinstance(value, str):
            raise ConfigError("expected a bare word", line, key)
    elif kind == "function":
        if not isinstance(value, (ExprValue, FamilyValue, float)):
            raise ConfigError("expected a quoted expression, family call or number", line, key)
    elif kind == "opt_float":
        if value is not None and not isinstance(value, float):
            raise ConfigError("expected a number", line, key)
    if choices is not None and value not in choices:
        raise ConfigError(f"must be one of {list(choices)}", line, key)
    if minimum is not None and value is not None and value < minimum:
        raise ConfigError(f"must be >= {minimum}", line, key)
    if positive and value is not None and not value > 0:
        raise ConfigError("must be positive", line, key)
    return value


def _reject_leftovers(name: str, section: dict):
    for key, (_, line) in section.items():
        raise ConfigError(f"unknown key in [{name}]", line, key)


def parse_config(text: str, source: Optional[str] = None) -> RunConfig:
    """Parse configuration text; see the module docstring for the format."""
    sections = _read_sections(text)
    p = sections.get("problem", {})
    if "problem" not in sections:
        raise ConfigError("missing [problem] section")
    kind = _take(p, "kind", "word", "half_line", choices=KINDS)
    prob = ProblemConfig(
        kind=kind,
        d=_take(p, "d", "int", 1, minimum=1),
        a=_take(p, "a", "function", 1.0),
        V=_take(p, "V", "function", 0.0),
        gamma=_take(p, "gamma", "function", None),
        alpha=_take(p, "alpha", "function", None),
        beta=_take(p, "beta", "function", None),
        mu_density=_take(p, "mu_density", "function", None),
        r0=_take(p, "r0", "float", 0.0 if kind == "half_line" else 1.0, minimum=0.0),
        R_max=_take(p, "R_max", "float", 60.0, positive=True),
    )
    _reject_leftovers("problem", p)
    if kind == "half_line" and prob.d != 1:
        raise ConfigError("half-line problems have d = 1", field_name="d")
    if kind == "direct":
        for name in ("gamma", "alpha", "mu_density"):
            if getattr(prob, name) is None:
                raise ConfigError("required for direct problems", field_name=name)
    if not prob.r0 < prob.R_max:
        raise ConfigError("r0 must be smaller than R_max", field_name="r0")

    q = sections.get("quadrature", {})
    try:
        quad = QuadratureSettings(
            rel_tol=_take(q, "rel_tol", "float", 1e-9, positive=True),
            abs_tol=_take(q, "abs_tol", "float", 1e-12, positive=True),
            max_subdivisions=_take(q, "max_subdivisions", "int", 2**16, minimum=16),
            tail_horizon=_take(q, "tail_horizon", "opt_float", None, positive=True),
            divergence_threshold=_take(q, "divergence_threshold", "float", 1e12, positive=True),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    _reject_leftovers("quadrature", q)

    b = sections.get("bounds", {})
    methods = None
    if "methods" in b:
        value, line = b.pop("methods")
        items = value if isinstance(value, tuple) else (value,)
        for m in items:
            if m not in ALL_METHODS:
                raise ConfigError(f"unknown method {m!r}; known: {list(ALL_METHODS)}", line, "methods")
        methods = tuple(items)
    tests = ("exponential",)
    if "test_function" in b:
        value, line = b.pop("test_function")
        items = value if isinstance(value, tuple) else (value,)
        for t in items:
            if not (t in ("exponential", "sqrt") or isinstance(t, (ExprValue, FamilyValue))):
                raise ConfigError("test functions are 'exponential', 'sqrt', a family call or an expression",
                                  line, "test_function")
        tests = tuple(items)
    bounds = BoundsConfig(
        methods=methods,
        test_functions=tests,
        theta_min=_take(b, "theta_min", "float", 0.01, positive=True),
        theta_max=_take(b, "theta_max", "float", 4.0, positive=True),
        budget=_take(b, "budget", "int", 40, minimum=8),
        K=_take(b, "K", "opt_float", None, minimum=0.0),
        pole=_take(b, "pole", "bool", False),
        eps=_take(b, "eps", "float", 0.5, positive=True),
        eq13_r=_take(b, "eq13_r", "opt_float", None, positive=True),
        R_grid=_take(b, "R_grid", "int", 32, minimum=2),
    )
    _reject_leftovers("bounds", b)
    if not bounds.theta_min < bounds.theta_max:
        raise ConfigError("theta_min must be smaller than theta_max", field_name="theta_min")

    o = sections.get("oracle", {})
    oracle = OracleConfig(
        enabled=_take(o, "enabled", "bool", True),
        n=_take(o, "n", "int", 4096, minimum=32),
        R_max=_take(o, "R_max", "opt_float", None, positive=True),
        doubling_check=_take(o, "doubling_check", "bool", True),
        grid=_take(o, "grid", "word", "uniform", choices=("uniform", "geometric")),
    )
    _reject_leftovers("oracle", o)

    out = sections.get("output", {})
    output = OutputConfig(
        format=_take(out, "format", "word", "text", choices=("text", "csv", "plotdata")),
        out=out.pop("out", (None, 0))[0] or None,
    )
    _reject_leftovers("output", out)
    return RunConfig(prob, quad, bounds, oracle, output, source)


def load_config(path) -> RunConfig:
    """Read and validate a configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def config_summary(config: RunConfig) -> dict:
    """Flat, JSON-friendly view used in report provenance."""
    data = config.canonical()
    data["output"] = asdict(config.output)
    return data
