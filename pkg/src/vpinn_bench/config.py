"""
Experiment configuration files.

An experiment is described by a sectioned ``key = value`` file::

    [problem]
    tag = "sine-modal"
    frequency = 6.597344572538566  # 2.1 pi

    [network]
    depth = 1
    width = 5
    activation = "sine"

    [loss]
    form = "v2"
    tau = 5.0
    test_functions = 5
    analytic = True

    [run]
    seeds = (0, 1, 2)
    max_iters = 50000

An optional ``[sweep]`` section lists the default axes of ``vpinn-bench sweep``
as dotted field names with tuples of values::

    [sweep]
    network.width = (5, 10, 18)
    loss.test_functions = (5, 10, 18)

Values are Python literals (bare words are accepted for text values). Every
problem found while reading a file is collected as a ``ConfigIssue`` and the
whole list is raised at once as ``ExperimentConfigError``. Summary files
written by the runner append ``[result]`` and ``[seed.<n>]`` sections, which
are skipped here, so a summary reads back as the configuration it came from.
"""

import ast
import collections
import configparser
import re
from dataclasses import dataclass, field
from typing import Optional, Tuple

from vpinn_bench.basis import MAX_DEGREE, BasisKind
from vpinn_bench.diffprop import Activation
from vpinn_bench.errors import ConfigurationError, VpinnError
from vpinn_bench.problems import Operator, make_problem
from vpinn_bench.quadrature import MAX_ORDER, RuleKind
from vpinn_bench.training import InitPolicy, InitScheme, LossConfig, LossForm, NetworkSpec

ConfigIssue = collections.namedtuple("ConfigIssue", "source message field")

REQUIRED = object()

AXIS_ALIASES = {
    "N": "network.width",
    "K": "loss.test_functions",
    "tau": "loss.tau",
    "L": "network.depth",
}

SKIPPED_SECTIONS = re.compile(r"^(result|seed\..*)$")


class ExperimentConfigError(VpinnError):
    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(f"{i.source}: {i.field}: {i.message}" for i in self.issues))


def _int_or_pair(value):
    if isinstance(value, int) and not isinstance(value, bool):
        return value
    if (
        isinstance(value, tuple)
        and len(value) == 2
        and all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        return value
    raise TypeError("expected an integer or a pair of integers")


def _int_tuple(value):
    if isinstance(value, int) and not isinstance(value, bool):
        return (value,)
    if isinstance(value, (tuple, list)) and all(
        isinstance(v, int) and not isinstance(v, bool) for v in value
    ):
        return tuple(value)
    raise TypeError("expected a tuple of integers")


def _typed(kind):
    def check(value):
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            return float(value)
        if kind is int and isinstance(value, bool):
            raise TypeError("expected int, got bool")
        if not isinstance(value, kind):
            raise TypeError(f"expected {kind.__name__}, got {type(value).__name__}")
        return value

    return check


_str, _int, _float, _bool = _typed(str), _typed(int), _typed(float), _typed(bool)

SCHEMA = {
    "problem": {
        "tag": (_str, REQUIRED),
        "operator": (_str, None),
        "amplitude": (_float, None),
        "frequency": (_float, None),
        "steepness": (_float, None),
        "layer_width": (_float, None),
    },
    "network": {
        "depth": (_int, 1),
        "width": (_int, REQUIRED),
        "activation": (_str, Activation.SINE.value),
    },
    "loss": {
        "form": (_str, REQUIRED),
        "tau": (_float, REQUIRED),
        "basis": (_str, BasisKind.SINE.value),
        "test_functions": (_int_or_pair, 5),
        "quadrature": (_str, RuleKind.GAUSS_LEGENDRE.value),
        "quadrature_order": (_int_or_pair, 100),
        "penalizing_points": (_int, 1000),
        "boundary_points_per_edge": (_int, 80),
        "analytic": (_bool, False),
    },
    "init": {
        "scheme": (_str, InitScheme.XAVIER_WIDENED.value),
        "widening": (_float, 10.0),
    },
    "run": {
        "seeds": (_int_tuple, (0,)),
        "max_iters": (_int, 50000),
        "learning_rate": (_float, 1e-3),
        "record_every": (_int, 100),
        "output_dir": (_str, "results"),
    },
}


@dataclass(frozen=True)
class ProblemSection:
    tag: str
    operator: Optional[str] = None
    amplitude: Optional[float] = None
    frequency: Optional[float] = None
    steepness: Optional[float] = None
    layer_width: Optional[float] = None

    def build(self, check=True):
        return make_problem(
            self.tag,
            self.operator,
            self.amplitude,
            self.frequency,
            self.steepness,
            self.layer_width,
            check=check,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSection
    network: NetworkSpec
    loss: LossConfig
    init: InitPolicy
    seeds: Tuple[int, ...]
    max_iters: int
    learning_rate: float
    record_every: int
    output_dir: str
    sweep: Tuple[Tuple[str, tuple], ...] = ()
    source: str = field(default="<config>", compare=False)


def _line_numbers(text):
    """Map (section, key) and (section, None) to 1-based line numbers."""
    lines = {}
    section = None
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        header = re.match(r"^\[(.+)\]$", stripped)
        if header:
            section = header.group(1).strip()
            lines.setdefault((section, None), number)
            continue
        key = re.match(r"^([^=:]+?)\s*[=:]", stripped)
        if key and section is not None:
            lines.setdefault((section, key.group(1).strip().lower()), number)
    return lines


def parse_value(raw):
    """A Python literal, or the text itself when it is a bare word."""
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        if re.fullmatch(r"[A-Za-z_][\w.\-/]*", raw):
            return raw
        raise


def parse_config(text, source="<config>"):
    """Parse configuration text into an ExperimentConfig.

    Raises:
      ExperimentConfigError: listing every problem found.
    """
    lines = _line_numbers(text)

    def where(section=None, key=None):
        number = lines.get((section, key)) or lines.get((section, None))
        return f"{source}:{number}" if number else source

    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#",), default_section="__defaults__"
    )
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        number = getattr(e, "lineno", None)
        if number is None and getattr(e, "errors", None):
            number = e.errors[0][0]
        raise ExperimentConfigError(
            [ConfigIssue(f"{source}:{number}" if number else source, str(e).splitlines()[0], "syntax")]
        ) from None

    issues = []
    mapping = {}
    sweep = []
    for section in parser.sections():
        if SKIPPED_SECTIONS.match(section):
            continue
        if section == "sweep":
            for key, raw in parser.items(section):
                axis = _sweep_axis(key, raw, where("sweep", key), issues)
                if axis:
                    sweep.append(axis)
            continue
        if section not in SCHEMA:
            issues.append(ConfigIssue(where(section), f"unknown section [{section}]", section))
            continue
        mapping[section] = {}
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                issues.append(ConfigIssue(where(section, key), "unknown key", f"{section}.{key}"))
                continue
            try:
                mapping[section][key] = parse_value(raw)
            except (ValueError, SyntaxError):
                issues.append(
                    ConfigIssue(where(section, key), f"cannot parse value {raw!r}", f"{section}.{key}")
                )
    return _build(mapping, issues, where, source, tuple(sweep))


def _sweep_axis(key, raw, location, issues):
    key = {alias.lower(): alias for alias in AXIS_ALIASES}.get(key, key)
    try:
        name = resolve_axis(key)
        values = parse_value(raw)
    except ExperimentConfigError:
        issues.append(ConfigIssue(location, "unknown sweep axis", f"sweep.{key}"))
        return None
    except (ValueError, SyntaxError):
        issues.append(ConfigIssue(location, f"cannot parse value {raw!r}", f"sweep.{key}"))
        return None
    if not isinstance(values, (tuple, list)) or not values:
        issues.append(ConfigIssue(location, "expected a non-empty tuple of values", f"sweep.{key}"))
        return None
    return name, tuple(values)


def load_config(path):
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read(), source=str(path))


def _build(mapping, issues, where, source, sweep=()):
    """Type-check, fill defaults, validate invariants and build the config."""
    values = {}
    for section, keys in SCHEMA.items():
        given = mapping.get(section, {})
        for key, (check, default) in keys.items():
            name = f"{section}.{key}"
            if key not in given:
                if default is REQUIRED:
                    issues.append(ConfigIssue(where(section), "missing required key", name))
                values[name] = default
                continue
            try:
                values[name] = check(given[key])
            except TypeError as e:
                issues.append(ConfigIssue(where(section, key), str(e), name))
                values[name] = default

    def problem(name, message):
        section, key = name.split(".", 1)
        issues.append(ConfigIssue(where(section, key), message, name))

    _validate(values, problem)
    if issues:
        raise ExperimentConfigError(issues)

    try:
        return ExperimentConfig(
            ProblemSection(**{k: values[f"problem.{k}"] for k in SCHEMA["problem"]}),
            NetworkSpec(values["network.depth"], values["network.width"], values["network.activation"]),
            LossConfig(**{k: values[f"loss.{k}"] for k in SCHEMA["loss"]}),
            InitPolicy(values["init.scheme"], values["init.widening"]),
            values["run.seeds"],
            values["run.max_iters"],
            values["run.learning_rate"],
            values["run.record_every"],
            values["run.output_dir"],
            sweep,
            source=source,
        )
    except (ConfigurationError, ValueError) as e:
        raise ExperimentConfigError([ConfigIssue(source, str(e), "config")]) from None


def _enum_value(enum, value):
    try:
        enum(value)
        return True
    except ValueError:
        return False


def _validate(values, problem):
    def choice(name, enum):
        value = values[name]
        if value is not None and value is not REQUIRED and not _enum_value(enum, value):
            problem(name, f"{value!r} is not one of {', '.join(e.value for e in enum)}")
            return False
        return value is not None and value is not REQUIRED

    def at_least(name, bound, strict=False):
        value = values[name]
        if value is None or value is REQUIRED:
            return
        counts = value if isinstance(value, tuple) else (value,)
        if any(v <= bound if strict else v < bound for v in counts):
            relation = ">" if strict else ">="
            problem(name, f"must be {relation} {bound}, got {value!r}")

    for name in (
        "network.depth",
        "network.width",
        "loss.test_functions",
        "loss.penalizing_points",
        "run.record_every",
    ):
        at_least(name, 1)
    at_least("loss.boundary_points_per_edge", 2)
    at_least("loss.quadrature_order", 2)
    at_least("run.max_iters", 0)
    at_least("loss.tau", 0, strict=True)
    at_least("run.learning_rate", 0, strict=True)
    at_least("init.widening", 1)
    if not values["run.seeds"]:
        problem("run.seeds", "need at least one seed")

    activation_ok = choice("network.activation", Activation)
    form_ok = choice("loss.form", LossForm)
    basis = BasisKind(values["loss.basis"]) if choice("loss.basis", BasisKind) else None
    choice("loss.quadrature", RuleKind)
    choice("init.scheme", InitScheme)

    dim = operator = None
    if values["problem.tag"] not in (None, REQUIRED):
        try:
            spec = make_problem(values["problem.tag"], values["problem.operator"], check=False)
            dim, operator = spec.dim, spec.operator
        except ConfigurationError as e:
            problem("problem.operator" if values["problem.operator"] else "problem.tag", str(e))

    form = LossForm(values["loss.form"]) if form_ok else None
    if dim == 2 and form in (LossForm.V3, LossForm.PROJECTION):
        problem("loss.form", f"form {form.value} is only available for 1D problems")
    if values["loss.analytic"]:
        shallow_sine = (
            activation_ok
            and values["network.depth"] == 1
            and Activation(values["network.activation"]) is Activation.SINE
        )
        if not shallow_sine or dim == 2:
            problem("loss.analytic", "the analytic path needs a depth-1 sine network on a 1D problem")
        if form is LossForm.STRONG:
            problem("loss.analytic", "the analytic path applies to variational forms only")
        if basis is BasisKind.LEGENDRE:
            if form in (LossForm.V3, LossForm.PROJECTION):
                problem("loss.analytic", f"no closed form for {form.value} with Legendre tests")
            if operator is Operator.BURGERS_1D:
                problem("loss.analytic", "no closed-form Burgers residual for Legendre tests")

    for name in ("loss.test_functions", "loss.quadrature_order"):
        if dim == 1 and isinstance(values[name], tuple):
            problem(name, f"a pair of counts needs a 2D problem, got {values[name]!r}")
    given = values["loss.test_functions"]
    counts = given if isinstance(given, tuple) else (given,)
    if any(k > MAX_DEGREE for k in counts):
        problem("loss.test_functions", f"at most {MAX_DEGREE} test functions, got {given!r}")
    elif basis is BasisKind.LEGENDRE and any(k + 1 > MAX_DEGREE for k in counts):
        problem(
            "loss.test_functions",
            f"Legendre tests P_(k+1) - P_(k-1) need degree <= {MAX_DEGREE}, so at most {MAX_DEGREE - 1}",
        )
    orders = values["loss.quadrature_order"]
    if any(q > MAX_ORDER for q in (orders if isinstance(orders, tuple) else (orders,))):
        problem("loss.quadrature_order", f"quadrature order exceeds {MAX_ORDER}, got {orders!r}")


def _mapping(config):
    p, n, l, i = config.problem, config.network, config.loss, config.init
    return {
        "problem": {k: getattr(p, k) for k in SCHEMA["problem"] if getattr(p, k) is not None},
        "network": {"depth": n.depth, "width": n.width, "activation": n.activation.value},
        "loss": {
            "form": l.form.value,
            "tau": l.tau,
            "basis": l.basis.value,
            "test_functions": l.test_functions,
            "quadrature": l.quadrature.value,
            "quadrature_order": l.quadrature_order,
            "penalizing_points": l.penalizing_points,
            "boundary_points_per_edge": l.boundary_points_per_edge,
            "analytic": l.analytic,
        },
        "init": {"scheme": i.scheme.value, "widening": i.widening},
        "run": {
            "seeds": tuple(config.seeds),
            "max_iters": config.max_iters,
            "learning_rate": config.learning_rate,
            "record_every": config.record_every,
            "output_dir": config.output_dir,
        },
    }


def dump_config(config):
    """Canonical text of a configuration; parse_config reads it back unchanged."""
    out = []
    for section, keys in _mapping(config).items():
        out.append(f"[{section}]")
        out.extend(f"{key} = {value!r}" for key, value in keys.items())
        out.append("")
    if config.sweep:
        out.append("[sweep]")
        out.extend(f"{name} = {values!r}" for name, values in config.sweep)
        out.append("")
    return "\n".join(out)


def resolve_axis(name):
    """Dotted field name for a sweep axis, accepting the short aliases."""
    dotted = AXIS_ALIASES.get(name, name)
    section, _, key = dotted.partition(".")
    if key not in SCHEMA.get(section, {}):
        raise ExperimentConfigError([ConfigIssue("--axis", f"unknown sweep axis {name!r}", name)])
    return dotted


def override(config, changes):
    """A copy of ``config`` with dotted fields replaced, validated like a file."""
    mapping = _mapping(config)
    for name, value in changes.items():
        section, key = resolve_axis(name).split(".")
        mapping[section][key] = value
    source = f"{config.source} ({', '.join(f'{k}={v!r}' for k, v in changes.items())})"
    return _build(mapping, [], lambda section=None, key=None: source, source, config.sweep)
