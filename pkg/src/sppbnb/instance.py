"""Set partitioning instances: data model, random generator, text file format.

An instance is a 0-1 cost matrix stored column-wise: each variable (column)
covers an ascending set of item ids and carries a nonnegative integer cost.
The row index is always derived from the columns, never stored independently.

Instance files are plain UTF-8 text::

    # name: I8-12-0.3-7          (optional comment lines, '#' prefix)
    8 12                         (m_items n_vars)
    4 2 0 1                      (cost k item_1 ... item_k, ascending items)
    ...                          (one line per variable, n_vars lines)

Random instances follow the I<m>-<n>-<p>-<seed> family: every (variable,
item) pair is included independently with probability p, empty columns are
redrawn, and uncovered items are optionally repaired with max-cost singleton
columns.  All randomness comes from a fixed 64-bit LCG so that equal
parameters produce byte-identical files on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

_LCG_MULT = 6364136223846793005
_LCG_INC = 1442695040888963407
_MASK64 = (1 << 64) - 1


class Lcg64:
    """Bit-portable 64-bit linear congruential generator.

    state' = state * 6364136223846793005 + 1442695040888963407  (mod 2^64).
    Uniform doubles use the top 53 bits of the new state; bounded integers
    use the top 32 bits reduced by modulo.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state * _LCG_MULT + _LCG_INC) & _MASK64
        return self.state

    def next_unit(self) -> float:
        """Uniform float in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def next_int(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], inclusive."""
        return lo + (self.next_u64() >> 32) % (hi - lo + 1)


class InstanceFormatError(ValueError):
    """Malformed instance text; message carries the offending line number."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


def _derive_rows(m_items: int, columns: tuple[tuple[int, ...], ...]) -> tuple[tuple[int, ...], ...]:
    rows: list[list[int]] = [[] for _ in range(m_items)]
    for var, col in enumerate(columns):
        for item in col:
            rows[item].append(var)
    return tuple(tuple(r) for r in rows)


@dataclass(frozen=True)
class SppInstance:
    """A set partitioning instance (columns over items, integer costs)."""

    m_items: int
    n_vars: int
    cost: tuple[int, ...]
    columns: tuple[tuple[int, ...], ...]
    rows: tuple[tuple[int, ...], ...]
    name: str = "unnamed"

    @staticmethod
    def build(m_items: int, cost, columns, name: str = "unnamed") -> "SppInstance":
        """Construct with the row index derived and all invariants checked."""
        cost = tuple(int(c) for c in cost)
        columns = tuple(tuple(int(i) for i in col) for col in columns)
        inst = SppInstance(
            m_items=m_items,
            n_vars=len(columns),
            cost=cost,
            columns=columns,
            rows=_derive_rows(m_items, columns),
            name=name,
        )
        # Uncovered items make the instance infeasible, not malformed.
        problems = [p for p in validate(inst) if "uncovered" not in p]
        if problems:
            raise ValueError("invalid instance: " + "; ".join(problems))
        return inst


@dataclass(frozen=True)
class GeneratorParams:
    """Parameters of the random instance family."""

    m_items: int
    n_vars: int
    p: float
    seed: int
    ensure_coverage: bool = True
    cost_range: tuple[int, int] = (1, 100)

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {self.p}")
        lo, hi = self.cost_range
        if lo < 0 or hi < lo:
            raise ValueError(f"cost_range must be nonempty with min >= 0, got {self.cost_range}")
        if self.m_items < 1:
            raise ValueError("m_items must be >= 1")
        if self.n_vars < 0:
            raise ValueError("n_vars must be >= 0")

    @property
    def name(self) -> str:
        return f"I{self.m_items}-{self.n_vars}-{self.p:g}-{self.seed}"


def parse_name(name: str) -> tuple[int, int, float, int | None]:
    """Split an instance name I<m>-<n>-<p>[-<seed>] into its fields."""
    base = name[1:] if name.startswith("I") else name
    parts = base.split("-")
    if len(parts) not in (3, 4):
        raise ValueError(f"not an instance name: {name!r}")
    m, n, p = int(parts[0]), int(parts[1]), float(parts[2])
    seed = int(parts[3]) if len(parts) == 4 else None
    return m, n, p, seed


def generate(params: GeneratorParams) -> SppInstance:
    """Generate a random instance, deterministically for a given seed.

    Draw order is part of the contract: for each variable, item membership
    draws come first (redrawing the whole column while empty), then the cost
    draw.  Repair columns, if any, are appended after all n_vars columns in
    ascending item order with cost = max(cost_range).
    """
    if params.p == 0.0 and params.n_vars > 0:
        raise ValueError("p=0 cannot produce nonempty columns (empty columns are redrawn)")
    rng = Lcg64(params.seed)
    lo, hi = params.cost_range
    columns: list[tuple[int, ...]] = []
    costs: list[int] = []
    for _ in range(params.n_vars):
        while True:
            col = tuple(j for j in range(params.m_items) if rng.next_unit() < params.p)
            if col:
                break
        columns.append(col)
        costs.append(rng.next_int(lo, hi))
    if params.ensure_coverage:
        covered = set()
        for col in columns:
            covered.update(col)
        for j in range(params.m_items):
            if j not in covered:
                columns.append((j,))
                costs.append(hi)
    return SppInstance.build(params.m_items, costs, columns, name=params.name)


def validate(inst: SppInstance) -> list[str]:
    """Return a report of violated invariants; empty means valid.

    Uncovered items are reported as well since they make the instance
    infeasible as a partitioning problem.
    """
    report: list[str] = []
    if inst.n_vars != len(inst.columns):
        report.append(f"n_vars={inst.n_vars} but {len(inst.columns)} columns stored")
    if len(inst.cost) != len(inst.columns):
        report.append(f"{len(inst.cost)} costs for {len(inst.columns)} columns")
    for var, col in enumerate(inst.columns):
        if not col:
            report.append(f"column {var} is empty")
            continue
        if any(col[i] >= col[i + 1] for i in range(len(col) - 1)):
            report.append(f"column {var} is not strictly ascending")
        if col[0] < 0 or col[-1] >= inst.m_items:
            report.append(f"column {var} has item id outside [0, {inst.m_items})")
    for var, c in enumerate(inst.cost):
        if c < 0:
            report.append(f"cost of variable {var} is negative ({c})")
    if inst.rows != _derive_rows(inst.m_items, inst.columns):
        report.append("rows index is not the transpose of columns")
    covered = {item for col in inst.columns for item in col}
    for j in range(inst.m_items):
        if j not in covered:
            report.append(f"item {j} is uncovered (instance infeasible)")
    return report


def serialize(inst: SppInstance) -> str:
    """Render the canonical text form (fixed whitespace, ascending items)."""
    problems = validate(inst)
    # Uncovered items are a feasibility diagnosis, not a format defect.
    structural = [p for p in problems if "uncovered" not in p]
    if structural:
        raise ValueError("cannot serialize invalid instance: " + "; ".join(structural))
    lines = [f"# name: {inst.name}", f"{inst.m_items} {inst.n_vars}"]
    for var in range(inst.n_vars):
        col = inst.columns[var]
        lines.append(f"{inst.cost[var]} {len(col)} " + " ".join(str(i) for i in col))
    return "\n".join(lines) + "\n"


def parse(text: str) -> SppInstance:
    """Parse instance text, rebuilding the row index and checking invariants."""
    name = "unnamed"
    header: tuple[int, int] | None = None
    header_line = 0
    costs: list[int] = []
    columns: list[tuple[int, ...]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("name:"):
                name = body[len("name:"):].strip()
            continue
        fields = line.split()
        if header is None:
            if len(fields) != 2:
                raise InstanceFormatError(line_no, f"expected '<m_items> <n_vars>', got {line!r}")
            try:
                header = (int(fields[0]), int(fields[1]))
            except ValueError:
                raise InstanceFormatError(line_no, f"non-integer header field in {line!r}") from None
            if header[0] < 1 or header[1] < 0:
                raise InstanceFormatError(line_no, f"header counts out of range: {line!r}")
            header_line = line_no
            continue
        m_items, n_vars = header
        if len(columns) >= n_vars:
            raise InstanceFormatError(line_no, f"more than {n_vars} column lines")
        try:
            values = [int(f) for f in fields]
        except ValueError:
            raise InstanceFormatError(line_no, f"non-integer field in {line!r}") from None
        if len(values) < 2:
            raise InstanceFormatError(line_no, "expected '<cost> <k> <items...>'")
        cost, k, items = values[0], values[1], values[2:]
        if cost < 0:
            raise InstanceFormatError(line_no, f"negative cost {cost}")
        if k != len(items):
            raise InstanceFormatError(line_no, f"declared {k} items but found {len(items)}")
        if k == 0:
            raise InstanceFormatError(line_no, "empty column")
        for a, b in zip(items, items[1:]):
            if a == b:
                raise InstanceFormatError(line_no, f"duplicate item {a} in column")
            if a > b:
                raise InstanceFormatError(line_no, "items not in ascending order")
        if items[0] < 0 or items[-1] >= m_items:
            raise InstanceFormatError(line_no, f"item id outside [0, {m_items})")
        costs.append(cost)
        columns.append(tuple(items))
    if header is None:
        raise InstanceFormatError(1, "missing header line")
    if len(columns) != header[1]:
        raise InstanceFormatError(
            header_line, f"header declares {header[1]} columns, found {len(columns)}"
        )
    return SppInstance.build(header[0], costs, columns, name=name)
