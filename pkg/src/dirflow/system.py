"""The four-block causal feedback loop and its exact unrolling.

Loop wiring (block -> output signal, loop input, exogenous input)::

    S1: e(i) = S1(u^{i-d1(i)}, r^i)
    S2: x(i) = S2(e^{i-d2(i)}, p^i)
    S3: y(i) = S3(x^{i-d3(i)}, s^i)
    S4: u(i) = S4(y^{i-d4(i)}, q^i)

Blocks are explicit lookup tables keyed by ``(time, input_prefix,
exogenous_prefix)``. A prefix of non-positive length is the empty tuple.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .dist import DistributionError, JointTable, VariableId, product, with_columns

EXOGENOUS = ("r", "p", "s", "q")
INTERNAL = ("e", "x", "y", "u")
SIGNALS = EXOGENOUS + INTERNAL
BLOCKS = ("S1", "S2", "S3", "S4")

#: block -> (output, loop input, exogenous input)
WIRING = {
    "S1": ("e", "u", "r"),
    "S2": ("x", "e", "p"),
    "S3": ("y", "x", "s"),
    "S4": ("u", "y", "q"),
}
#: internal signal -> block producing it
PRODUCER = {out: b for b, (out, _, _) in WIRING.items()}
#: exogenous signal -> block it enters
ENTRY = {exo: b for b, (_, _, exo) in WIRING.items()}

_PRIORITY = {s: n for n, s in enumerate(INTERNAL)}


class SpecError(ValueError):
    """A system description is malformed or not well posed."""


class InvalidSpecError(SpecError):
    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class BlockLookupError(SpecError):
    def __init__(self, block: str, time: int, input_prefix: tuple, exo_prefix: tuple):
        self.block, self.time = block, time
        self.input_prefix, self.exo_prefix = input_prefix, exo_prefix
        super().__init__(f"block {block} has no entry at time {time} for input prefix "
                         f"{list(input_prefix)} and exogenous prefix {list(exo_prefix)}")


@dataclass(frozen=True)
class DelaySchedule:
    """Per-time delays ``d(1..k)``; ``values[i-1]`` is d(i)."""

    values: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if any(v < 0 for v in self.values):
            raise SpecError(f"negative delay in schedule {list(self.values)}")

    @classmethod
    def constant(cls, d: int, horizon: int) -> "DelaySchedule":
        return cls((d,) * horizon)

    @classmethod
    def coerce(cls, value, horizon: int) -> "DelaySchedule":
        if isinstance(value, DelaySchedule):
            sched = value
        elif isinstance(value, (int, np.integer)):
            sched = cls.constant(int(value), horizon)
        else:
            sched = cls(tuple(value))
        if len(sched) != horizon:
            raise SpecError(f"delay schedule has {len(sched)} entries, horizon is {horizon}")
        return sched

    def __call__(self, i: int) -> int:
        if not 1 <= i <= len(self.values):
            raise SpecError(f"delay schedule undefined at time {i}")
        return self.values[i - 1]

    def __len__(self) -> int:
        return len(self.values)

    def prefix_len(self, i: int) -> int:
        """Length of the prefix seen at time i, ``max(0, i - d(i))``."""
        return max(0, i - self(i))


@dataclass(frozen=True)
class CausalBlock:
    """A deterministic causal map stored as an explicit truth table."""

    name: str
    table: Mapping[tuple[int, tuple, tuple], int]

    def __post_init__(self):
        if self.name not in WIRING:
            raise SpecError(f"unknown block {self.name!r}")
        object.__setattr__(self, "table", {
            (int(i), tuple(int(a) for a in inp), tuple(int(a) for a in exo)): int(out)
            for (i, inp, exo), out in self.table.items()})

    @property
    def output(self) -> str:
        return WIRING[self.name][0]

    @property
    def input(self) -> str:
        return WIRING[self.name][1]

    @property
    def exogenous(self) -> str:
        return WIRING[self.name][2]

    def __call__(self, i: int, input_prefix: tuple, exo_prefix: tuple) -> int:
        key = (i, tuple(input_prefix), tuple(exo_prefix))
        try:
            return self.table[key]
        except KeyError:
            raise BlockLookupError(self.name, i, key[1], key[2]) from None

    @classmethod
    def from_function(cls, name: str, fn: Callable[[int, tuple, tuple], int], horizon: int,
                      alphabets: Mapping[str, Sequence[int]], delay: "DelaySchedule") -> "CausalBlock":
        """Tabulate ``fn(i, input_prefix, exo_prefix)`` over every possible prefix."""
        _, inp, exo = WIRING[name]
        table = {}
        for i in range(1, horizon + 1):
            n_in = delay.prefix_len(i)
            for ip in itertools.product(*(range(a) for a in alphabets[inp][:n_in])):
                for xp in itertools.product(*(range(a) for a in alphabets[exo][:i])):
                    table[(i, ip, xp)] = int(fn(i, ip, xp))
        return cls(name, table)


@dataclass(frozen=True)
class ExogenousSpec:
    """Mutually independent groups of exogenous signals and their joint tables.

    ``partition`` is a tuple of signal-name tuples; ``joints[g]`` is a
    JointTable over ``(signal, t)`` for every signal of group ``g`` and
    ``t = 1..k``.
    """

    partition: tuple[tuple[str, ...], ...]
    joints: tuple[JointTable, ...]

    def __post_init__(self):
        part = tuple(tuple(g) for g in self.partition)
        object.__setattr__(self, "partition", part)
        object.__setattr__(self, "joints", tuple(self.joints))
        flat = [s for g in part for s in g]
        if sorted(flat) != sorted(EXOGENOUS):
            raise SpecError(f"partition {partition_str(part)} must cover r,p,s,q exactly once")
        if len(self.joints) != len(part):
            raise SpecError("one joint table is required per partition group")
        for g, t in zip(part, self.joints):
            if {v.signal for v in t.variables} != set(g):
                raise SpecError(f"joint for group {''.join(g)} has variables of other signals")

    def group_of(self, signal: str) -> int:
        for n, g in enumerate(self.partition):
            if signal in g:
                return n
        raise SpecError(f"{signal!r} is not exogenous")

    def joint(self) -> JointTable:
        return product(*self.joints)


def partition_str(partition) -> str:
    return "|".join("".join(g) for g in partition)


def parse_partition(text: str) -> tuple[tuple[str, ...], ...]:
    """``"s|r|pq"`` -> ``(("s",), ("r",), ("p", "q"))``."""
    groups = tuple(tuple(g.strip()) for g in text.split("|"))
    flat = [s for g in groups for s in g]
    if any(not g for g in groups) or sorted(flat) != sorted(EXOGENOUS):
        raise SpecError(f"invalid partition {text!r}: groups of r,p,s,q separated by '|', each signal once")
    return groups


@dataclass(frozen=True)
class SystemSpec:
    horizon: int
    alphabets: Mapping[str, tuple[int, ...]]
    delays: Mapping[str, DelaySchedule]
    blocks: Mapping[str, CausalBlock]
    exogenous: ExogenousSpec
    name: str = field(default="", compare=False)

    def __post_init__(self):
        k = int(self.horizon)
        if k < 1:
            raise SpecError("horizon must be >= 1")
        alph = {}
        for s in SIGNALS:
            a = self.alphabets.get(s, 2)
            a = (int(a),) * k if isinstance(a, (int, np.integer)) else tuple(int(v) for v in a)
            if len(a) != k or any(v < 1 for v in a):
                raise SpecError(f"alphabet of {s} must have {k} sizes >= 1")
            alph[s] = a
        unknown = set(self.alphabets) - set(SIGNALS)
        if unknown:
            raise SpecError(f"unknown signals {sorted(unknown)}")
        delays = {b: DelaySchedule.coerce(self.delays[b], k) for b in BLOCKS}
        if set(self.blocks) != set(BLOCKS):
            raise SpecError("exactly the blocks S1..S4 are required")
        object.__setattr__(self, "horizon", k)
        object.__setattr__(self, "alphabets", alph)
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "blocks", dict(self.blocks))

    def delay(self, block: str) -> DelaySchedule:
        return self.delays[block]


def _exo_vars(signal: str, horizon: int) -> list[VariableId]:
    return [VariableId(signal, t) for t in range(1, horizon + 1)]


def evaluation_order(spec: SystemSpec, i: int) -> tuple[str, ...]:
    """Order in which e(i), x(i), y(i), u(i) can be computed.

    Samples are released level by level (all currently computable ones
    together), each level sorted by the fixed priority e, x, y, u.
    """
    preds = {out: set() for out in INTERNAL}
    for b, (out, inp, _) in WIRING.items():
        if spec.delays[b](i) == 0:
            preds[out].add(inp)
    order: list[str] = []
    remaining = set(INTERNAL)
    while remaining:
        level = sorted((s for s in remaining if not preds[s] & remaining), key=_PRIORITY.get)
        if not level:
            raise SpecError(f"loop delay 0 at time {i}: instantaneous cycle")
        order.extend(level)
        remaining -= set(level)
    return tuple(order)


def _simulate(spec: SystemSpec, exo: JointTable, strict: bool, violations: list | None = None,
              orders: Mapping[int, Sequence[str]] | None = None) -> np.ndarray | None:
    """Compute internal columns (signal-major, time-minor) for every support point."""
    k = spec.horizon
    n = len(exo)
    cols: dict[tuple[str, int], np.ndarray] = {}
    for s in EXOGENOUS:
        for t in range(1, k + 1):
            cols[(s, t)] = exo.points[:, exo.column(VariableId(s, t))]
    failed = False
    for i in range(1, k + 1):
        order = orders[i] if orders else evaluation_order(spec, i)
        for out in order:
            block = spec.blocks[PRODUCER[out]]
            _, inp, ex = WIRING[block.name]
            n_in = spec.delays[block.name].prefix_len(i)
            keys = [cols[(inp, t)] for t in range(1, n_in + 1)] + [cols[(ex, t)] for t in range(1, i + 1)]
            if keys:
                stacked = np.stack(keys, axis=1)
                uniq, inv = np.unique(stacked, axis=0, return_inverse=True)
                inv = inv.reshape(-1)
            else:
                uniq, inv = np.zeros((1, 0), dtype=np.int64), np.zeros(n, dtype=np.int64)
            mapped = np.empty(len(uniq), dtype=np.int64)
            for j, row in enumerate(uniq):
                row = tuple(int(v) for v in row)
                key = (i, row[:n_in], row[n_in:])
                val = block.table.get(key)
                if val is None:
                    if strict:
                        raise BlockLookupError(block.name, i, key[1], key[2])
                    violations.append(str(BlockLookupError(block.name, i, key[1], key[2])))
                    failed, val = True, 0
                elif not 0 <= val < spec.alphabets[out][i - 1]:
                    msg = (f"block {block.name} output {val} at time {i} outside alphabet of "
                           f"{out} (size {spec.alphabets[out][i - 1]})")
                    if strict:
                        raise SpecError(msg)
                    violations.append(msg)
                    failed, val = True, 0
                mapped[j] = val
            cols[(out, i)] = mapped[inv]
    if failed:
        return None
    return np.stack([cols[(s, t)] for s in INTERNAL for t in range(1, k + 1)], axis=1).reshape(n, 4 * k)


def validate(spec: SystemSpec) -> list[str]:
    """Return every well-posedness violation; an empty list means the spec is usable."""
    violations = []
    for i in range(1, spec.horizon + 1):
        if sum(spec.delays[b](i) for b in BLOCKS) < 1:
            violations.append(f"loop delay 0 at time {i}: d1+d2+d3+d4 must be >= 1")
    for g, joint in zip(spec.exogenous.partition, spec.exogenous.joints):
        want = {VariableId(s, t) for s in g for t in range(1, spec.horizon + 1)}
        if set(joint.variables) != want:
            violations.append(f"joint of group {''.join(g)} must cover times 1..{spec.horizon}")
            continue
        for v in joint.variables:
            if joint.alphabet(v) != spec.alphabets[v.signal][v.time - 1]:
                violations.append(f"alphabet of {v} in group joint disagrees with signal alphabet")
    if violations:
        return violations
    sim_violations: list[str] = []
    _simulate(spec, spec.exogenous.joint(), strict=False, violations=sim_violations)
    return violations + sim_violations


def _check(spec: SystemSpec) -> None:
    problems = validate(spec)
    if problems:
        raise InvalidSpecError(problems)


class TrajectoryDistribution:
    """Exact joint law of all signal sequences of a loop (or of any named signals).

    ``table`` holds ``VariableId(signal, t)`` for ``t = 1..horizon`` of every
    signal in ``signals``. ``spec`` is ``None`` for free-standing joints.
    """

    def __init__(self, table: JointTable, horizon: int, spec: SystemSpec | None = None,
                 signals: Sequence[str] | None = None):
        self.table = table
        self.horizon = int(horizon)
        self.spec = spec
        if signals is None:
            signals = list(dict.fromkeys(v.signal for v in table.variables))
        self.signals = tuple(signals)
        for s in self.signals:
            for t in range(1, self.horizon + 1):
                if VariableId(s, t) not in table:
                    raise DistributionError(f"table lacks {s}({t})")

    @classmethod
    def from_table(cls, table: JointTable) -> "TrajectoryDistribution":
        times = {}
        for v in table.variables:
            times.setdefault(v.signal, set()).add(v.time)
        horizons = {max(ts) for ts in times.values()}
        if len(horizons) != 1:
            raise DistributionError("all signals need the same horizon")
        k = horizons.pop()
        return cls(table, k)

    def seq(self, signal: str, upto: int | None = None) -> list[VariableId]:
        """Variables ``signal(1..upto)``; empty for ``upto <= 0``."""
        if signal not in self.signals:
            raise DistributionError(f"unknown signal {signal!r}")
        upto = self.horizon if upto is None else min(upto, self.horizon)
        return [VariableId(signal, t) for t in range(1, upto + 1)]

    def seqs(self, signals: Iterable[str], upto: int | None = None) -> list[VariableId]:
        return [v for s in signals for v in self.seq(s, upto)]

    def column(self, signal: str) -> np.ndarray:
        """Per-support-point sequence of ``signal`` as an ``(n, horizon)`` array."""
        return self.table.points[:, [self.table.column(v) for v in self.seq(signal)]]

    def __repr__(self) -> str:
        return f"TrajectoryDistribution(k={self.horizon}, signals={''.join(self.signals)}, support={len(self.table)})"


def unroll(spec: SystemSpec, orders: Mapping[int, Sequence[str]] | None = None) -> TrajectoryDistribution:
    """Enumerate every exogenous outcome and propagate it through the loop.

    ``orders`` optionally overrides :func:`evaluation_order` per time (used to
    show that every valid order gives the same trajectories).
    """
    _check(spec)
    exo = spec.exogenous.joint()
    internal = _simulate(spec, exo, strict=True, orders=orders)
    k = spec.horizon
    ivars = [VariableId(s, t) for s in INTERNAL for t in range(1, k + 1)]
    ialph = [spec.alphabets[s][t - 1] for s in INTERNAL for t in range(1, k + 1)]
    joint = with_columns(exo, ivars, ialph, internal)
    # canonical column order: r,p,s,q,e,x,y,u each over 1..k
    wanted = [VariableId(s, t) for s in SIGNALS for t in range(1, k + 1)]
    cols = [joint.column(v) for v in wanted]
    table = JointTable._from_arrays(wanted, [joint.alphabets[c] for c in cols],
                                    np.ascontiguousarray(joint.points[:, cols]), joint.weights,
                                    joint.normalizer)
    return TrajectoryDistribution(table, k, spec, SIGNALS)


def prepend_zero(traj: TrajectoryDistribution, signal: str, name: str | None = None) -> TrajectoryDistribution:
    """Add the derived signal ``0*signal^{k-1}``: z(1)=0 and z(i)=signal(i-1)."""
    name = name or f"z{signal}"
    if name in traj.signals:
        raise DistributionError(f"signal name {name!r} already in use")
    src = traj.column(signal)
    k = traj.horizon
    derived = np.zeros((len(traj.table), k), dtype=np.int64)
    derived[:, 1:] = src[:, :-1]
    alph = [1] + [traj.table.alphabet(VariableId(signal, t)) for t in range(1, k)]
    table = with_columns(traj.table, [VariableId(name, t) for t in range(1, k + 1)], alph, derived)
    return TrajectoryDistribution(table, k, traj.spec, traj.signals + (name,))
