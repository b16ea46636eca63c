"""Sequence-level information measures on a :class:`TrajectoryDistribution`.

All directed-information variants reduce to one grouped-source form::

    sum_{i=1..k} I(dst(i); U_s src_s^{i - d_s(i)} | dst^{i-1}, conditioning at step i)

where a full-sequence conditioning signal contributes its whole sequence and a
causal one contributes its prefix up to ``i - delay(i)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .dist import DistributionError, VariableId, cond_entropy, cond_mutual_info
from .system import (INTERNAL, PRODUCER, WIRING, DelaySchedule, SpecError, SystemSpec,
                     TrajectoryDistribution)

CAUSAL = "causal"
FULL = "full"

_LOOP = ("e", "x", "y", "u")


@dataclass(frozen=True)
class SourceTerm:
    signal: str
    delay: DelaySchedule | int = 0


@dataclass(frozen=True)
class ConditioningTerm:
    signal: str
    mode: str = CAUSAL
    delay: DelaySchedule | int = 0

    def __post_init__(self):
        if self.mode not in (CAUSAL, FULL):
            raise ValueError(f"conditioning mode must be {CAUSAL!r} or {FULL!r}")
        if isinstance(self.delay, int) and self.delay < 0:
            raise ValueError("conditioning delay must be >= 0")


def _schedule(delay, horizon: int) -> DelaySchedule:
    try:
        return DelaySchedule.coerce(delay, horizon)
    except SpecError as err:
        raise DistributionError(str(err)) from None


def _names(signals) -> list[str]:
    return [signals] if isinstance(signals, str) else list(signals)


def seq_mutual_info(traj: TrajectoryDistribution, A, B, given=()) -> float:
    """I(A^k; B^k | given^k) between groups of full sequences.

    A and B may share signals (``I(x;x) = H(x)``); neither may meet ``given``.
    """
    a, b, c = _names(A), _names(B), _names(given)
    if set(a) & set(c) or set(b) & set(c):
        raise DistributionError("signal groups overlap the conditioning set")
    if set(a) & set(b):
        ta, tb, tc = traj.seqs(a), traj.seqs(b), traj.seqs(c)
        h = lambda vs: cond_entropy(traj.table, list(dict.fromkeys(vs)), tc)
        return h(ta) + h(tb) - h(ta + tb)
    return cond_mutual_info(traj.table, traj.seqs(a), traj.seqs(b), traj.seqs(c))


def seq_entropy(traj: TrajectoryDistribution, A, given=()) -> float:
    a, c = _names(A), _names(given)
    if set(a) & set(c):
        raise DistributionError("signal groups overlap")
    return cond_entropy(traj.table, traj.seqs(a), traj.seqs(c))


def directed_info(traj: TrajectoryDistribution, dst: str, sources: Sequence[SourceTerm],
                  cond: Sequence[ConditioningTerm] = ()) -> float:
    """Delay-aware directed information from grouped ``sources`` to ``dst``."""
    k = traj.horizon
    src_names = [s.signal for s in sources]
    cond_names = [c.signal for c in cond]
    if dst in src_names or dst in cond_names:
        raise DistributionError(f"destination {dst!r} also appears among sources/conditioning")
    if len(set(src_names) | set(cond_names)) != len(src_names) + len(cond_names):
        raise DistributionError("a signal appears twice among sources/conditioning")
    if not sources:
        raise DistributionError("directed information needs at least one source")
    src_sched = [(s.signal, _schedule(s.delay, k)) for s in sources]
    cond_sched = [(c.signal, c.mode, _schedule(c.delay, k)) for c in cond]
    traj.seq(dst)
    total = 0.0
    for i in range(1, k + 1):
        A = [VariableId(dst, i)]
        B = [v for name, d in src_sched for v in traj.seq(name, d.prefix_len(i))]
        C = traj.seq(dst, i - 1)
        for name, mode, d in cond_sched:
            C += traj.seq(name) if mode == FULL else traj.seq(name, d.prefix_len(i))
        if B:
            total += cond_mutual_info(traj.table, A, B, C)
    return total


def massey_directed_info(traj: TrajectoryDistribution, src: str, dst: str) -> float:
    """Zero-delay directed information sum_i I(dst(i); src^i | dst^{i-1})."""
    return directed_info(traj, dst, [SourceTerm(src, 0)])


def forward_path(src: str, dst: str) -> list[str]:
    """Blocks crossed going forward around the loop from ``src`` to ``dst``."""
    if src == dst:
        raise SpecError("source and destination coincide")
    if src not in INTERNAL or dst not in INTERNAL:
        raise SpecError(f"forward paths join internal signals, got {src!r} -> {dst!r}")
    path, cur = [], src
    while cur != dst:
        nxt = _LOOP[(_LOOP.index(cur) + 1) % 4]
        path.append(PRODUCER[nxt])
        cur = nxt
    return path


def effective_delay(spec: SystemSpec, src: str, dst: str) -> DelaySchedule:
    """Composite per-time delay from ``src`` to ``dst`` along the forward path.

    At time i the path reaches back to ``src^{m(i)}`` with ``m`` obtained by
    walking the blocks from ``dst`` backwards; each block with delay d maps a
    reach ``m`` to ``max_{j <= m} (j - d(j))`` (and the last block to
    ``i - d(i)``). The schedule is ``i - m(i)``; ``m(i) <= 0`` means the empty
    prefix. For delays where ``j - d(j)`` is nondecreasing this equals the
    plain composition, e.g. ``d3(i) + d2(i - d3(i))`` for e -> y.
    """
    path = forward_path(src, dst)
    k = spec.horizon
    values = []
    for i in range(1, k + 1):
        reach = i
        for n, block in enumerate(reversed(path)):
            d = spec.delays[block]
            if reach <= 0:
                break
            if n == 0:
                reach = i - d(i)
            else:
                reach = max(j - d(j) for j in range(1, reach + 1))
        values.append(i - max(reach, 0))
    return DelaySchedule(tuple(values))


def entry_delay(spec: SystemSpec, exo: str, dst: str) -> DelaySchedule:
    """Delay from an exogenous signal to ``dst``: it acts through the block it enters."""
    out = next(o for b, (o, _, x) in WIRING.items() if x == exo)
    if out == dst:
        return DelaySchedule.constant(0, spec.horizon)
    return effective_delay(spec, out, dst)


def loop_delay(spec: SystemSpec, src: str, dst: str) -> DelaySchedule:
    return entry_delay(spec, src, dst) if src not in INTERNAL else effective_delay(spec, src, dst)


def sources(signals: Iterable[str], delay) -> list[SourceTerm]:
    return [SourceTerm(s, delay) for s in signals]
