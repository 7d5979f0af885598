"""Plain-text run configuration (INI dialect).

Layout::

    [alphabets]
    U1 = 0 1            ; symbol names, whitespace separated
    ...

    [Q]                 ; one section per table
    rows = U1
    cols = U2
    0 = 0.005 0.045     ; row key = row symbols, values follow column symbols
    1 = 0.095 0.855

    [W]   rows = X1 X2, cols = Y, one line per (x1, x2) pair
    [d1]  rows = U1, cols = X1
    [d2]  rows = U2, cols = X2

    [constraints]  D1, D2
    [search]       t1_size, t2_size, mode, step, budget, refine, seed, formula
    [simulation]   n, epsilon, mu, nu, r1, r2, trials, estimator_samples, codebook_cap
    [output]       prefix
"""

from __future__ import annotations

import configparser
import itertools
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ParseError, ValidationError
from .probcore import EmbeddingProblem, alphabet, make_conditional, make_pmf
from .search import CardinalityCaps, SearchStrategy

AXES = ("U1", "U2", "X1", "X2", "Y")
TABLES = {"Q": (("U1",), ("U2",)), "W": (("X1", "X2"), ("Y",)),
          "d1": (("U1",), ("X1",)), "d2": (("U2",), ("X2",))}
TASKS = ("region-inner", "region-outer", "simulate", "example", "info")


@dataclass
class SearchSettings:
    t1_size: int = 2
    t2_size: int = 2
    mode: str = "exhaustive-grid"
    step: float = 0.1
    budget: int = 10_000
    refine: int = 100
    seed: int = 0
    formula: str = "general"

    def strategy(self) -> SearchStrategy:
        return SearchStrategy(mode=self.mode, grid_step=self.step, sample_budget=self.budget,
                              refine_steps=self.refine, seed=self.seed)

    def caps(self) -> CardinalityCaps:
        return CardinalityCaps(self.t1_size, self.t2_size)


@dataclass
class SimulationSettings:
    n: int = 12
    epsilon: float = 0.3
    mu: float = 0.1
    nu: float = 0.1
    r1: float = 0.05
    r2: float = 0.05
    trials: int = 100
    estimator_samples: int = 200
    codebook_cap: int = 2**20


@dataclass
class RunConfig:
    alphabets: dict
    tables: dict
    D1: float
    D2: float
    search: SearchSettings = field(default_factory=SearchSettings)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    task: str | None = None
    prefix: str = "out"

    def __post_init__(self):
        self._problem = None

    def __eq__(self, other):
        if not isinstance(other, RunConfig):
            return NotImplemented
        return (self.alphabets == other.alphabets
                and self.tables.keys() == other.tables.keys()
                and all(np.array_equal(self.tables[k], other.tables[k]) for k in self.tables)
                and (self.D1, self.D2, self.search, self.simulation, self.task, self.prefix)
                == (other.D1, other.D2, other.search, other.simulation, other.task, other.prefix))

    @property
    def problem(self) -> EmbeddingProblem:
        if self._problem is None:
            self._problem = build_problem(self)
        return self._problem


def _alpha(cfg: RunConfig, name: str):
    return alphabet(name, cfg.alphabets[name])


def build_problem(cfg: RunConfig) -> EmbeddingProblem:
    def labelled(name, fn):
        try:
            return fn()
        except ValidationError as exc:
            raise ValidationError(f"[{name}] {exc}", field=exc.field or name) from None

    q = cfg.tables["Q"]
    Q = labelled("Q", lambda: make_pmf([_alpha(cfg, "U1"), _alpha(cfg, "U2")], q))
    W = labelled("W", lambda: make_conditional(
        [_alpha(cfg, "X1"), _alpha(cfg, "X2")], [_alpha(cfg, "Y")], cfg.tables["W"]))
    return labelled("constraints", lambda: EmbeddingProblem(
        Q, W, cfg.tables["d1"], cfg.tables["d2"], cfg.D1, cfg.D2))


# ---------------------------------------------------------------------------
# parsing


def _section_line(text: str, section: str) -> int | None:
    for i, line in enumerate(text.splitlines(), 1):
        if line.strip() == f"[{section}]":
            return i
    return None


def _parser() -> configparser.ConfigParser:
    p = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    p.optionxform = str
    return p


def _number(raw: str, where: str, kind=float):
    try:
        return kind(raw)
    except ValueError:
        raise ValidationError(f"{where}: {raw!r} is not a valid {kind.__name__}",
                              field=where) from None


def _read_table(sec, name: str, alphabets: dict) -> np.ndarray:
    row_axes, col_axes = TABLES[name]
    for key, want in (("rows", row_axes), ("cols", col_axes)):
        got = tuple(sec.get(key, "").split())
        if got != want:
            raise ValidationError(f"[{name}] {key} must be {' '.join(want)}, got {' '.join(got)!r}",
                                  field=name)
    cols = alphabets[col_axes[0]]
    shape = tuple(len(alphabets[a]) for a in row_axes) + (len(cols),)
    table = np.full(shape, np.nan)
    for key, raw in sec.items():
        if key in ("rows", "cols"):
            continue
        syms = key.split()
        if len(syms) != len(row_axes):
            raise ValidationError(f"[{name}] row key {key!r} needs {len(row_axes)} symbols",
                                  field=name)
        try:
            idx = tuple(alphabets[a].index(s) for a, s in zip(row_axes, syms))
        except ValueError:
            raise ValidationError(f"[{name}] unknown symbol in row key {key!r}", field=name) from None
        values = [_number(v, name) for v in raw.split()]
        if len(values) != len(cols):
            raise ValidationError(f"[{name}] row {key!r} has {len(values)} entries, "
                                  f"expected {len(cols)}", field=name)
        table[idx] = values
    if np.isnan(table).any():
        missing = [" ".join(alphabets[a][i] for a, i in zip(row_axes, ix))
                   for ix in itertools.product(*(range(s) for s in shape[:-1]))
                   if np.isnan(table[ix]).any()]
        raise ValidationError(f"[{name}] missing rows: {', '.join(missing)}", field=name)
    return table


def _read_settings(parser, section: str, cls):
    obj = cls()
    if not parser.has_section(section):
        return obj
    known = {f.name: f for f in fields(cls)}
    updates = {}
    for key, raw in parser[section].items():
        if key not in known:
            raise ValidationError(f"[{section}] unknown key {key!r}", field=key)
        kind = type(getattr(obj, key))
        updates[key] = raw.strip() if kind is str else _number(raw, key, kind)
    return replace(obj, **updates)


def parse_config(text: str) -> RunConfig:
    parser = _parser()
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError(f"line {exc.lineno}: expected a [section] header", line=exc.lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ParseError(f"line {exc.lineno}: {exc.message}", line=exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ParseError(f"line {line}: cannot parse {exc.errors[0][1].strip()!r}", line=line) from None

    if not parser.has_section("alphabets"):
        raise ValidationError("missing [alphabets] section", field="alphabets")
    alphabets = {}
    for name in AXES:
        syms = tuple(parser["alphabets"].get(name, "").split())
        if not syms:
            raise ValidationError(f"alphabet {name} is not defined", field=name)
        if len(set(syms)) != len(syms):
            raise ValidationError(f"alphabet {name} repeats a symbol", field=name)
        alphabets[name] = syms
    extra = set(parser["alphabets"]) - set(AXES)
    if extra:
        raise ValidationError(f"unknown alphabets: {', '.join(sorted(extra))}", field="alphabets")

    tables = {}
    for name in TABLES:
        if not parser.has_section(name):
            raise ValidationError(f"missing [{name}] section", field=name)
        try:
            tables[name] = _read_table(parser[name], name, alphabets)
        except ValidationError as exc:
            line = _section_line(text, name)
            exc.args = (f"{exc.args[0]} (section starts at line {line})",)
            raise

    cons = parser["constraints"] if parser.has_section("constraints") else {}
    levels = {}
    for key in ("D1", "D2"):
        if key not in cons:
            raise ValidationError(f"[constraints] {key} is required", field=key)
        levels[key] = _number(cons[key], key)

    task = None
    prefix = "out"
    if parser.has_section("output"):
        prefix = parser["output"].get("prefix", prefix).strip()
        task = parser["output"].get("task")
        if task is not None and task.strip() not in TASKS:
            raise ValidationError(f"unknown task {task!r}", field="task")
        task = task.strip() if task else None

    cfg = RunConfig(alphabets, tables, levels["D1"], levels["D2"],
                    _read_settings(parser, "search", SearchSettings),
                    _read_settings(parser, "simulation", SimulationSettings),
                    task, prefix)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> RunConfig:
    cfg.problem  # noqa: B018  builds and validates the problem
    s = cfg.search
    try:
        s.caps()
        s.strategy()
    except ValidationError as exc:
        raise ValidationError(f"[search] {exc}", field=exc.field or "search") from None
    if s.formula not in ("general", "independent"):
        raise ValidationError("formula must be general or independent", field="formula")
    m = cfg.simulation
    for key in ("n", "trials", "estimator_samples", "codebook_cap"):
        if getattr(m, key) < 1:
            raise ValidationError(f"{key} must be >= 1", field=key)
    if not 0 < m.epsilon < 1:
        raise ValidationError("epsilon must lie in (0, 1)", field="epsilon")
    for key in ("mu", "nu"):
        if not 0 < getattr(m, key) <= 1:
            raise ValidationError(f"{key} must lie in (0, 1]", field=key)
    for key in ("r1", "r2"):
        if getattr(m, key) < 0:
            raise ValidationError(f"{key} must be >= 0", field=key)
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------
# writing


def dump_config(cfg: RunConfig) -> str:
    out = ["[alphabets]"]
    out += [f"{name} = {' '.join(cfg.alphabets[name])}" for name in AXES]
    for name, (row_axes, col_axes) in TABLES.items():
        table = cfg.tables[name]
        out += ["", f"[{name}]", f"rows = {' '.join(row_axes)}", f"cols = {' '.join(col_axes)}"]
        for ix in itertools.product(*(range(s) for s in table.shape[:-1])):
            key = " ".join(cfg.alphabets[a][i] for a, i in zip(row_axes, ix))
            out.append(f"{key} = {' '.join(repr(float(v)) for v in table[ix])}")
    out += ["", "[constraints]", f"D1 = {cfg.D1!r}", f"D2 = {cfg.D2!r}"]
    for section, obj in (("search", cfg.search), ("simulation", cfg.simulation)):
        out += ["", f"[{section}]"]
        out += [f"{f.name} = {getattr(obj, f.name)!r}".replace("'", "") for f in fields(obj)]
    out += ["", "[output]", f"prefix = {cfg.prefix}"]
    if cfg.task:
        out.append(f"task = {cfg.task}")
    return "\n".join(out) + "\n"


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg))


def from_problem(problem: EmbeddingProblem, **settings) -> RunConfig:
    alphabets = {a: tuple(str(s) for s in getattr(problem, a).symbols) for a in AXES}
    tables = {"Q": np.array(problem.Q.weights), "W": np.array(problem.W.table),
              "d1": np.array(problem.d1, dtype=float), "d2": np.array(problem.d2, dtype=float)}
    return RunConfig(alphabets, tables, float(problem.D1), float(problem.D2), **settings)


def example_config() -> RunConfig:
    """Binary example: skewed independent covertexts, modulo-2 additive attack
    with flip probability 0.02, Hamming distortion, levels (0.45, 0.4)."""
    from .problems import example_problem

    return validate(from_problem(example_problem(), search=SearchSettings(step=0.1)))
