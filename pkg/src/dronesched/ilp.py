"""Binary ILP model of the scheduling problem, LP-format writer, and checker.

Variables, for node ``n``, ``m``, agent ``a`` and time ``t``:

* ``fd_n_t``     demand cell (n, t) is covered by some agent
* ``ep_n_a_t``   agent a hovers over n at t
* ``k_n_m_a_t``  agent a is in transit from n to m at t
* ``st_n_m_a_t`` agent a departs n towards m at t

Every ``|x_d - x_{d-1}|`` term is linearized with a binary pair ``p, q``:
``p - q = x_d - x_{d-1}``, ``p + q <= 1``, and the absolute value is
``p + q``. This is exact because differences of binaries lie in {-1, 0, 1}.

Two modes are built. ``repaired`` uses the motion rules of
:mod:`dronesched.schedule` (values outside ``0 .. horizon - 1`` count as 0 in
the change sums, transit windows are ``t+1 .. t+cost``) and accepts exactly
the valid schedules. ``literal`` keeps the original index ranges as written,
for side-by-side comparison; under it no agent can ever leave a node.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from .instance import Instance
from .schedule import Hover, Schedule, Transit

REPAIRED = "repaired"
LITERAL = "literal"
MODES = (REPAIRED, LITERAL)
DEFAULT_MU = Fraction(1, 10**6)
MAX_VARIABLES = 5_000_000

GROUP_INFO = {
    "con1": "agent hovers over its initial node at t=0",
    "con2": "agent hovers over its final node at the last time step",
    "con3": "agent hovers over at most one node per time step",
    "con4": "agent is on at most one edge per time step",
    "con5": "agent either hovers or is in transit at each time step",
    "con7": "agent starts at most one trip per time step",
    "con9": "leaving a node's hover implies transit on an edge out of that node",
    "con10": "entering a node's hover implies transit on an edge into that node",
    "con12": "per edge, changes of the departure indicator equal changes of the transit indicator",
    "con13": "total hover changes equal total departure-indicator changes",
    "con6": "a demand cell counts as covered only if some agent hovers there",
    "con11": "leaving a node's hover implies a departure from that node",
    "con8": "per agent, total transit steps equal the summed durations of its trips",
    "con14": "a departure is followed by transit on that edge for the trip duration",
    "orig": "a trip can only start while hovering over its origin (repair row)",
    "self": "no transit or departure on a node's self-edge",
    "absk": "linearization of a transit-indicator change",
    "absst": "linearization of a departure-indicator change",
    "absep": "linearization of a hover-indicator change",
}


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Row:
    name: str
    terms: tuple[tuple[Fraction | int, str], ...]
    sense: str  # "<=", "=", ">="
    rhs: Fraction | int


@dataclass(frozen=True)
class AbsPair:
    p: str
    q: str
    plus: str | None  # x_d (None when the index is virtual)
    minus: str | None  # x_{d-1}


@dataclass(frozen=True)
class LpModel:
    variables: tuple[str, ...]
    rows: tuple[Row, ...]
    objective: tuple[tuple[Fraction | int, str], ...]
    sense: str = "maximize"
    mode: str | None = None
    mu: Fraction | None = None
    shape: tuple[int, int, int] | None = field(default=None, compare=False)
    abs_pairs: tuple[AbsPair, ...] = field(default=(), compare=False)

    def row(self, name: str) -> Row:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)


@dataclass(frozen=True)
class Assignment:
    valuation: dict[str, int]

    def __getitem__(self, name: str) -> int:
        return self.valuation[name]


@dataclass(frozen=True)
class Evaluation:
    feasible: bool
    violations: tuple[str, ...]
    objective: Fraction


def as_fraction(mu) -> Fraction:
    if isinstance(mu, Fraction):
        return mu
    if isinstance(mu, float):
        return Fraction(repr(mu))
    return Fraction(mu)


def fd(n, t):
    return f"fd_{n}_{t}"


def ep(n, a, t):
    return f"ep_{n}_{a}_{t}"


def kv(n, m, a, t):
    return f"k_{n}_{m}_{a}_{t}"


def stv(n, m, a, t):
    return f"st_{n}_{m}_{a}_{t}"


def variable_counts(n: int, a: int, h: int, mode: str = REPAIRED) -> dict[str, int]:
    """Closed-form variable counts, by family."""
    edges = n * (n - 1)
    diffs = h + 1 if mode == REPAIRED else h - 1
    return {
        "fd": n * h,
        "ep": n * a * h,
        "k": n * n * a * h,
        "st": n * n * a * h,
        "absk": 2 * edges * a * diffs,
        "absst": 2 * edges * a * diffs,
        "absep": 2 * n * a * (h - 1),
    }


def row_counts(n: int, a: int, h: int, mode: str = REPAIRED) -> dict[str, int]:
    """Closed-form row counts, by constraint group."""
    edges = n * (n - 1)
    diffs = h + 1 if mode == REPAIRED else h - 1
    counts = {
        "con1": a,
        "con2": a,
        "con3": a * h,
        "con4": a * h,
        "con5": a * h,
        "con7": a * h,
        "con9": n * a * (h - 1),
        "con10": n * a * (h - 1),
        "con11": n * a * (h - 1),
        "con12": edges * a,
        "con13": 1,
        "con6": n * h,
        "con8": a,
        "self": n * a * h,
        "absk": 2 * edges * a * diffs,
        "absst": 2 * edges * a * diffs,
        "absep": 2 * n * a * (h - 1),
    }
    if mode == REPAIRED:
        counts["con14"] = edges * a * h
        counts["orig"] = edges * a * h
    else:
        counts["con14"] = None  # depends on the travel times
    return counts


def row_group(name: str) -> str:
    return name.split("_", 1)[0]


class _Builder:
    def __init__(self):
        self.variables: list[str] = []
        self.rows: list[Row] = []
        self.abs_pairs: list[AbsPair] = []

    def var(self, name):
        self.variables.append(name)

    def add(self, name, terms, sense, rhs):
        terms = tuple((c, v) for c, v in terms if c != 0)
        self.rows.append(Row(name, terms, sense, rhs))

    def abs_pair(self, prefix, idx, plus, minus) -> list[tuple[int, str]]:
        p, q = f"{prefix}_p_{idx}", f"{prefix}_q_{idx}"
        self.var(p)
        self.var(q)
        terms = [(1, p), (-1, q)]
        if plus is not None:
            terms.append((-1, plus))
        if minus is not None:
            terms.append((1, minus))
        self.add(f"{prefix}_def_{idx}", terms, "=", 0)
        self.add(f"{prefix}_one_{idx}", [(1, p), (1, q)], "<=", 1)
        self.abs_pairs.append(AbsPair(p, q, plus, minus))
        return [(1, p), (1, q)]


def build_ilp(inst: Instance, mu=DEFAULT_MU, mode: str = REPAIRED,
              max_variables: int = MAX_VARIABLES) -> LpModel:
    if mode not in MODES:
        raise ModelError(f"unknown mode {mode!r}; expected one of {MODES}")
    mu = as_fraction(mu)
    N, A, H = inst.n_nodes, inst.n_agents, inst.horizon
    if mu <= 0:
        raise ModelError(f"mu must be positive, got {mu}")
    if mode == REPAIRED and A and mu >= Fraction(1, A * (H - 1)):
        raise ModelError(
            f"mu={mu} too large: the movement penalty could outweigh one covered cell "
            f"(need mu < 1/{A * (H - 1)})"
        )
    n_vars = sum(variable_counts(N, A, H, mode).values())
    if n_vars > max_variables:
        raise ModelError(f"model would have {n_vars} variables (limit {max_variables})")

    repaired = mode == REPAIRED
    nodes, agents, times = range(N), range(A), range(H)
    edges = [(n, m) for n in nodes for m in nodes if n != m]
    c = inst.travel
    b = _Builder()

    for n in nodes:
        for t in times:
            b.var(fd(n, t))
    for n in nodes:
        for a in agents:
            for t in times:
                b.var(ep(n, a, t))
    for name in (kv, stv):
        for n in nodes:
            for m in nodes:
                for a in agents:
                    for t in times:
                        b.var(name(n, m, a, t))

    for a, spec in enumerate(inst.agents):
        b.add(f"con1_a{a}", [(1, ep(spec.init_node, a, 0))], "=", 1)
    for a, spec in enumerate(inst.agents):
        b.add(f"con2_a{a}", [(1, ep(spec.fin_node, a, H - 1))], "=", 1)
    for a in agents:
        for t in times:
            b.add(f"con3_a{a}_t{t}", [(1, ep(n, a, t)) for n in nodes], "<=", 1)
    for a in agents:
        for t in times:
            b.add(f"con4_a{a}_t{t}", [(1, kv(n, m, a, t)) for n, m in edges], "<=", 1)
    for a in agents:
        for t in times:
            terms = [(1, kv(n, m, a, t)) for n, m in edges] + [(1, ep(n, a, t)) for n in nodes]
            b.add(f"con5_a{a}_t{t}", terms, "=", 1)
    for a in agents:
        for t in times:
            b.add(f"con7_a{a}_t{t}", [(1, stv(n, m, a, t)) for n, m in edges], "<=", 1)

    for n in nodes:
        for a in agents:
            for t in range(H - 1):
                kt = t + 1 if repaired else t
                terms = [(1, ep(n, a, t)), (-1, ep(n, a, t + 1))]
                terms += [(-1, kv(n, m, a, kt)) for m in nodes if m != n]
                b.add(f"con9_n{n}_a{a}_t{t}", terms, "<=", 0)
    for n in nodes:
        for a in agents:
            for t in range(1, H):
                terms = [(1, ep(n, a, t)), (-1, ep(n, a, t - 1))]
                if repaired:
                    terms += [(-1, kv(m, n, a, t - 1)) for m in nodes if m != n]
                else:
                    terms += [(-1, kv(n, m, a, t)) for m in nodes if m != n]
                b.add(f"con10_n{n}_a{a}_t{t}", terms, "<=", 0)
    for n in nodes:
        for a in agents:
            for t in range(H - 1):
                terms = [(1, ep(n, a, t)), (-1, ep(n, a, t + 1))]
                terms += [(-1, stv(n, m, a, t)) for m in nodes if m != n]
                b.add(f"con11_n{n}_a{a}_t{t}", terms, "<=", 0)

    # change indicators; repaired mode pads with virtual zeros at -1 and H
    diff_range = range(0, H + 1) if repaired else range(1, H)

    def at(name_fn, idx, d):
        return name_fn(*idx, d) if 0 <= d < H else None

    absk_terms: dict[tuple, list] = {}
    absst_terms: dict[tuple, list] = {}
    for (prefix, fn, store) in (("absk", kv, absk_terms), ("absst", stv, absst_terms)):
        for n, m in edges:
            for a in agents:
                acc = store.setdefault((n, m, a), [])
                for d in diff_range:
                    acc += b.abs_pair(prefix, f"{n}_{m}_{a}_{d}",
                                      at(fn, (n, m, a), d), at(fn, (n, m, a), d - 1))
    absep_terms = []
    for n in nodes:
        for a in agents:
            for d in range(1, H):
                absep_terms += b.abs_pair("absep", f"{n}_{a}_{d}", ep(n, a, d), ep(n, a, d - 1))

    for n, m in edges:
        for a in agents:
            terms = absst_terms[(n, m, a)] + [(-cf, v) for cf, v in absk_terms[(n, m, a)]]
            b.add(f"con12_n{n}_m{m}_a{a}", terms, "=", 0)
    terms = list(absep_terms)
    for key in absst_terms:
        terms += [(-cf, v) for cf, v in absst_terms[key]]
    b.add("con13", terms, "=", 0)

    for n in nodes:
        for t in times:
            b.add(f"con6_n{n}_t{t}", [(1, fd(n, t))] + [(-1, ep(n, a, t)) for a in agents], "<=", 0)
    for a in agents:
        terms = [(1, kv(n, m, a, t)) for n, m in edges for t in times]
        terms += [(-c[n][m], stv(n, m, a, t)) for n, m in edges for t in times]
        b.add(f"con8_a{a}", terms, "=", 0)
    for n, m in edges:
        for a in agents:
            for t in times:
                if repaired:
                    window = range(t + 1, min(t + c[n][m], H - 1) + 1)
                else:
                    if not t + c[n][m] + 1 < H - 1:
                        continue
                    window = range(t, t + c[n][m] + 2)
                terms = [(1, kv(n, m, a, tt)) for tt in window] + [(-c[n][m], stv(n, m, a, t))]
                b.add(f"con14_n{n}_m{m}_a{a}_t{t}", terms, ">=", 0)
    if repaired:
        for n, m in edges:
            for a in agents:
                for t in times:
                    b.add(f"orig_n{n}_m{m}_a{a}_t{t}",
                          [(1, stv(n, m, a, t)), (-1, ep(n, a, t))], "<=", 0)
    for n in nodes:
        for a in agents:
            for t in times:
                b.add(f"self_n{n}_a{a}_t{t}", [(1, kv(n, n, a, t)), (1, stv(n, n, a, t))], "=", 0)

    objective = [(1, fd(n, t)) for n, t in inst.demand_points()]
    for key in absk_terms:
        objective += [(-mu * cf, v) for cf, v in absk_terms[key]]

    return LpModel(
        variables=tuple(b.variables),
        rows=tuple(b.rows),
        objective=tuple(objective),
        mode=mode,
        mu=mu,
        shape=(N, A, H),
        abs_pairs=tuple(b.abs_pairs),
    )


# ---------------------------------------------------------------- LP text

def _fmt(x) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    den, e2, e5 = x.denominator, 0, 0
    while den % 2 == 0:
        den //= 2
        e2 += 1
    while den % 5 == 0:
        den //= 5
        e5 += 1
    if den != 1:
        return repr(float(x))
    e = max(e2, e5)
    scaled = abs(x.numerator) * (10**e // x.denominator)
    digits = str(scaled).rjust(e + 1, "0")
    s = f"{digits[:-e]}.{digits[-e:]}".rstrip("0")
    return ("-" if x < 0 else "") + s


def _expr_lines(terms, head="", tail="", width=78, indent="   ") -> list[str]:
    parts = []
    for i, (cf, v) in enumerate(terms):
        cf = Fraction(cf)
        sign = "-" if cf < 0 else "+"
        mag = abs(cf)
        body = v if mag == 1 else f"{_fmt(mag)} {v}"
        if i == 0:
            parts.append(body if sign == "+" else f"- {body}")
        else:
            parts.append(f"{sign} {body}")
    if tail:
        parts.append(tail)
    lines, cur = [], head
    for p in parts:
        if cur.strip() and len(cur) + 1 + len(p) > width:
            lines.append(cur)
            cur = indent + p
        else:
            cur = f"{cur} {p}" if cur else p
    lines.append(cur)
    return lines


def write_lp(model: LpModel) -> str:
    """CPLEX LP text; byte-identical for identical models."""
    out = []
    if model.mode is not None:
        out.append(f"\\ mode={model.mode} mu={_fmt(model.mu)}")
    out.append("Maximize" if model.sense == "maximize" else "Minimize")
    obj = list(model.objective) or [(0, model.variables[0])]
    out += _expr_lines(obj, head=" obj:")
    out.append("Subject To")
    for r in model.rows:
        terms = list(r.terms) or [(0, model.variables[0])]
        out += _expr_lines(terms, head=f" {r.name}:", tail=f"{r.sense} {_fmt(r.rhs)}")
    out.append("Binary")
    line = ""
    for v in model.variables:
        if line and len(line) + 1 + len(v) > 78:
            out.append(line)
            line = ""
        line = f"{line} {v}"
    if line:
        out.append(line)
    out.append("End")
    return "\n".join(out) + "\n"


def _parse_expr(text: str) -> list[tuple[Fraction, str]]:
    terms = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = re.match(r"\s*([+-])?\s*(?:(\d[0-9.eE+-]*)\s+)?([A-Za-z_][A-Za-z0-9_]*)", text[pos:])
        if not m:
            raise ModelError(f"cannot parse LP expression near {text[pos:pos + 30]!r}")
        sign, coef, var = m.groups()
        value = Fraction(coef) if coef else Fraction(1)
        if sign == "-":
            value = -value
        terms.append((value, var))
        pos += m.end()
    return terms


def read_lp(text: str) -> LpModel:
    """Parse the subset of LP format produced by :func:`write_lp`."""
    mode = mu = None
    section = None
    chunks: dict[str, list[str]] = {"obj": [], "rows": [], "bin": []}
    sense = "maximize"
    for raw in text.splitlines():
        line = raw.rstrip()
        if line.startswith("\\"):
            m = re.match(r"\\ mode=(\w+) mu=(\S+)", line)
            if m:
                mode, mu = m.group(1), Fraction(m.group(2))
            continue
        key = line.strip().lower()
        if key in ("maximize", "minimize"):
            section, sense = "obj", key
            continue
        if key == "subject to":
            section = "rows"
            continue
        if key == "binary":
            section = "bin"
            continue
        if key == "end":
            section = None
            continue
        if not line.strip():
            continue
        if section is None:
            raise ModelError(f"content outside any section: {line!r}")
        if section in ("obj", "rows") and not line.startswith("   ") and ":" in line:
            chunks[section].append(line.strip())
        elif section in ("obj", "rows"):
            chunks[section][-1] += " " + line.strip()
        else:
            chunks["bin"].append(line.strip())

    def split_named(s):
        name, body = s.split(":", 1)
        return name.strip(), body

    objective = ()
    if chunks["obj"]:
        _, body = split_named(chunks["obj"][0])
        objective = tuple((c, v) for c, v in _parse_expr(body) if c != 0)
    rows = []
    for s in chunks["rows"]:
        name, body = split_named(s)
        m = re.match(r"(.*?)\s*(<=|>=|=)\s*(\S+)\s*$", body)
        if not m:
            raise ModelError(f"cannot parse row {name!r}")
        lhs, op, rhs = m.groups()
        terms = tuple((c, v) for c, v in _parse_expr(lhs) if c != 0)
        rows.append(Row(name, _simplify(terms), op, _simplify_num(Fraction(rhs))))
    variables = tuple(v for line in chunks["bin"] for v in line.split())
    return LpModel(
        variables=variables,
        rows=tuple(rows),
        objective=tuple((_simplify_num(c), v) for c, v in objective),
        sense=sense,
        mode=mode,
        mu=mu,
    )


def _simplify_num(x: Fraction):
    return int(x) if x.denominator == 1 else x


def _simplify(terms):
    return tuple((_simplify_num(Fraction(c)), v) for c, v in terms)


def mapping_text(model: LpModel) -> str:
    """Sidecar listing: row name, constraint group, and what the group enforces."""
    lines = [f"# mode={model.mode} mu={_fmt(model.mu) if model.mu is not None else ''}"]
    for r in model.rows:
        g = row_group(r.name)
        lines.append(f"{r.name}\t{g}\t{GROUP_INFO.get(g, '')}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- evaluation

def assignment_from_schedule(inst: Instance, schedule: Schedule, model: LpModel) -> Assignment:
    """0/1 valuation of ``model``'s variables read off a schedule.

    The schedule is transcribed as is, without validation, so an invalid
    schedule yields an assignment that :func:`evaluate_assignment` rejects.
    """
    N, A, H = inst.n_nodes, inst.n_agents, inst.horizon
    if model.shape is not None and model.shape != (N, A, H):
        raise ModelError(f"model shape {model.shape} does not match instance {(N, A, H)}")
    if len(schedule.trajectories) != A:
        raise ModelError("schedule agent count does not match instance")
    val = dict.fromkeys(model.variables, 0)
    hovered = set()
    for a, traj in enumerate(schedule.trajectories):
        for t, s in enumerate(traj):
            if isinstance(s, Hover):
                val[ep(s.node, a, t)] = 1
                hovered.add((s.node, t))
            elif isinstance(s, Transit):
                val[kv(s.origin, s.dest, a, t)] = 1
                if s.step == 1 and t >= 1:
                    val[stv(s.origin, s.dest, a, t - 1)] = 1
    for n, t in inst.demand_points():
        if (n, t) in hovered:
            val[fd(n, t)] = 1
    for pair in model.abs_pairs:
        diff = (val[pair.plus] if pair.plus else 0) - (val[pair.minus] if pair.minus else 0)
        val[pair.p] = int(diff > 0)
        val[pair.q] = int(diff < 0)
    missing = set(val) - set(model.variables)
    if missing:
        raise ModelError(f"schedule references variables absent from the model: {sorted(missing)[:5]}")
    return Assignment(val)


def _holds(lhs, sense, rhs) -> bool:
    if sense == "<=":
        return lhs <= rhs
    if sense == ">=":
        return lhs >= rhs
    return lhs == rhs


def evaluate_assignment(model: LpModel, assignment: Assignment | dict) -> Evaluation:
    val = assignment.valuation if isinstance(assignment, Assignment) else assignment
    missing = [v for v in model.variables if v not in val]
    if missing:
        raise ModelError(f"assignment is not total; missing {len(missing)} variables, e.g. {missing[0]}")
    violations = tuple(
        r.name
        for r in model.rows
        if not _holds(sum(Fraction(c) * val[v] for c, v in r.terms), r.sense, r.rhs)
    )
    objective = sum((Fraction(c) * val[v] for c, v in model.objective), Fraction(0))
    return Evaluation(not violations, violations, objective)
