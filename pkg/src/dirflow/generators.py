"""Seeded construction of random loops and the canned example systems.

Randomness comes from numpy's PCG64 bit generator seeded with the config
seed, and every table is filled in a fixed enumeration order, so identical
configs give identical specs on every platform.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .dist import JointTable, VariableId
from .system import (BLOCKS, EXOGENOUS, SIGNALS, WIRING, CausalBlock, DelaySchedule,
                     ExogenousSpec, InvalidSpecError, SpecError, SystemSpec, parse_partition,
                     validate)

STYLES = ("random-table", "xor", "summing-node", "constant")


@dataclass(frozen=True)
class GeneratorConfig:
    """Recipe for :func:`random_system`.

    ``delays`` is ``"random"`` (each d_b(i) drawn from ``0..max_delay`` and
    repaired to satisfy the loop constraint), ``"zero"``, or a mapping
    block -> constant or per-time list. ``deterministic`` signals get a point
    mass at 0; ``memoryless`` groups (given as in the partition, e.g. ``"qs"``)
    are i.i.d. across time.
    """

    seed: int = 0
    horizon: int = 2
    alphabet: int | Mapping[str, int] = 2
    delays: str | Mapping[str, object] = "random"
    partition: str = "s|r|p|q"
    style: str = "random-table"
    max_weight: int = 16
    max_delay: int = 1
    deterministic: tuple[str, ...] = ()
    memoryless: tuple[str, ...] = ()

    def __post_init__(self):
        if self.horizon < 1:
            raise SpecError("horizon must be >= 1")
        sizes = self.alphabet.values() if isinstance(self.alphabet, Mapping) else [self.alphabet]
        if any(int(a) < 1 for a in sizes):
            raise SpecError("alphabet sizes must be >= 1")
        if self.style not in STYLES:
            raise SpecError(f"unknown block style {self.style!r}; expected one of {', '.join(STYLES)}")
        if self.max_weight < 1:
            raise SpecError("max_weight must be >= 1")
        parse_partition(self.partition)
        object.__setattr__(self, "deterministic", tuple(self.deterministic))
        object.__setattr__(self, "memoryless", tuple(self.memoryless))

    def with_seed(self, seed: int) -> "GeneratorConfig":
        return replace(self, seed=seed)

    def alphabet_of(self, signal: str) -> int:
        if isinstance(self.alphabet, Mapping):
            return int(self.alphabet.get(signal, 2))
        return int(self.alphabet)


def _sample_delays(cfg: GeneratorConfig, rng: np.random.Generator) -> dict[str, DelaySchedule]:
    k = cfg.horizon
    if isinstance(cfg.delays, Mapping):
        return {b: DelaySchedule.coerce(cfg.delays.get(b, 0), k) for b in BLOCKS}
    if cfg.delays == "zero":
        return {b: DelaySchedule.constant(0, k) for b in BLOCKS}
    if cfg.delays != "random":
        raise SpecError(f"unknown delay pattern {cfg.delays!r}")
    free = [b for b in BLOCKS if not (cfg.style == "summing-node" and b == "S4")]
    vals = {b: [0] * k for b in BLOCKS}
    for i in range(k):
        for b in free:
            vals[b][i] = int(rng.integers(0, cfg.max_delay + 1))
        if sum(vals[b][i] for b in BLOCKS) == 0:
            vals[free[int(rng.integers(0, len(free)))]][i] = 1
    return {b: DelaySchedule(tuple(v)) for b, v in vals.items()}


def _group_joint(group, cfg: GeneratorConfig, alph, rng) -> JointTable:
    k = cfg.horizon
    varlist = [VariableId(s, t) for s in group for t in range(1, k + 1)]
    sizes = [alph[v.signal][v.time - 1] for v in varlist]
    fixed = {s for s in group if s in cfg.deterministic}
    if "".join(group) in cfg.memoryless or set(group) <= set(cfg.memoryless):
        live = [s for s in group if s not in fixed]
        step_sizes = [alph[s][0] for s in live]
        step = {pt: int(rng.integers(1, cfg.max_weight + 1))
                for pt in itertools.product(*(range(a) for a in step_sizes))}
        support = {}
        for combo in itertools.product(step.items(), repeat=k):
            w = 1
            by_sig = {s: [0] * k for s in group}
            for t, (pt, wt) in enumerate(combo):
                w *= wt
                for s, sym in zip(live, pt):
                    by_sig[s][t] = sym
            support[tuple(by_sig[v.signal][v.time - 1] for v in varlist)] = w
        return JointTable(varlist, sizes, support)
    ranges = [range(1) if v.signal in fixed else range(a) for v, a in zip(varlist, sizes)]
    support = {pt: int(rng.integers(1, cfg.max_weight + 1)) for pt in itertools.product(*ranges)}
    return JointTable(varlist, sizes, support)


def _last(prefix: tuple) -> int:
    return prefix[-1] if prefix else 0


def _block(name: str, cfg: GeneratorConfig, alph, delay: DelaySchedule, rng) -> CausalBlock:
    out = WIRING[name][0]
    k = cfg.horizon
    style = cfg.style
    if style == "summing-node" and name == "S4":
        style = "xor"
    elif style == "summing-node":
        style = "random-table"
    if style == "constant":
        fn = lambda i, ip, xp: 0
    elif style == "xor":
        fn = lambda i, ip, xp: (_last(ip) + xp[-1]) % alph[out][i - 1]
    else:
        fn = lambda i, ip, xp: int(rng.integers(0, alph[out][i - 1]))
    return CausalBlock.from_function(name, fn, k, alph, delay)


def random_system(cfg: GeneratorConfig) -> SystemSpec:
    """Deterministic function of ``cfg``; raises InvalidSpecError if the result is not well posed."""
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    k = cfg.horizon
    alph = {s: (cfg.alphabet_of(s),) * k for s in SIGNALS}
    if cfg.style == "summing-node":
        m = alph["y"][0]
        for s in ("y", "q", "u"):
            alph[s] = (m,) * k
    partition = parse_partition(cfg.partition)
    delays = _sample_delays(cfg, rng)
    joints = tuple(_group_joint(g, cfg, alph, rng) for g in partition)
    if cfg.style == "xor":
        # modular sums need every signal on one common alphabet
        m = cfg.alphabet_of("y")
        if any(a != (m,) * k for a in alph.values()):
            raise SpecError("xor style needs one common alphabet size")
    blocks = {b: _block(b, cfg, alph, delays[b], rng) for b in BLOCKS}
    spec = SystemSpec(k, alph, delays, blocks, ExogenousSpec(partition, joints),
                      name=f"random-{cfg.style}-seed{cfg.seed}")
    problems = validate(spec)
    if problems:
        raise InvalidSpecError(problems)
    return spec


# ------------------------------------------------------------------ fixtures
def _uniform(signal: str, k: int, m: int = 2) -> JointTable:
    varlist = [VariableId(signal, t) for t in range(1, k + 1)]
    return JointTable(varlist, [m] * k, {pt: 1 for pt in itertools.product(range(m), repeat=k)})


def _iid(signal: str, k: int, weights) -> JointTable:
    varlist = [VariableId(signal, t) for t in range(1, k + 1)]
    support = {}
    for pt in itertools.product(range(len(weights)), repeat=k):
        w = 1
        for sym in pt:
            w *= weights[sym]
        if w:
            support[pt] = w
    return JointTable(varlist, [len(weights)] * k, support)


def _constant(signal: str, k: int, m: int = 2) -> JointTable:
    return JointTable.point_mass([VariableId(signal, t) for t in range(1, k + 1)], [m] * k, (0,) * k)


def _assemble(name, k, alph, delays, fns, exo: Mapping[str, JointTable]) -> SystemSpec:
    delays = {b: DelaySchedule.coerce(delays.get(b, 0), k) for b in BLOCKS}
    alph = {s: (alph.get(s, 2),) * k for s in SIGNALS}
    blocks = {b: CausalBlock.from_function(b, fns[b], k, alph, delays[b]) for b in BLOCKS}
    partition = tuple((s,) for s in EXOGENOUS)
    return SystemSpec(k, alph, delays, blocks,
                      ExogenousSpec(partition, tuple(exo[s] for s in EXOGENOUS)), name=name)


def xor_loop(k: int = 2, s_table: JointTable | None = None) -> SystemSpec:
    """e = r + u(i-1), x = e + p, y = x + s, u = y + q over GF(2), all noise uniform."""
    fn = lambda i, ip, xp: (_last(ip) + xp[-1]) % 2
    exo = {s: _uniform(s, k) for s in EXOGENOUS}
    if s_table is not None:
        exo["s"] = s_table
    return _assemble("xor-loop", k, {}, {"S1": 1}, dict.fromkeys(BLOCKS, fn), exo)


def summing_node_loop(k: int = 2, m: int = 3) -> SystemSpec:
    """Mod-m loop whose feedback block is the adder u(i) = y(i) + q(i); r is absent (constant)."""
    add = lambda i, ip, xp: (_last(ip) + xp[-1]) % m
    fns = {"S1": lambda i, ip, xp: (2 * _last(ip)) % m,
           "S2": lambda i, ip, xp: (_last(ip) + xp[-1] * xp[0]) % m,
           "S3": add, "S4": add}
    exo = {"r": _constant("r", k, m), "p": _iid("p", k, [1, 2, 3]),
           "s": _iid("s", k, [4, 1, 1]), "q": _iid("q", k, [2, 1, 1])}
    return _assemble("summing-node", k, dict.fromkeys(SIGNALS, m), {"S1": 1}, fns, exo)


def perfect_instantaneous_feedback(k: int = 3) -> SystemSpec:
    """Forward channel y(i) = x(i-1) + s(i) (delay 1) with x(i) = y(i) fed back instantly."""
    copy = lambda i, ip, xp: _last(ip) if len(ip) == i else 0
    fns = {"S1": copy, "S2": copy, "S4": copy,
           "S3": lambda i, ip, xp: (_last(ip) + xp[-1]) % 2}
    exo = {"r": _constant("r", k), "p": _constant("p", k), "q": _constant("q", k),
           "s": _iid("s", k, [3, 1])}
    return _assemble("perfect-instantaneous-feedback", k, {}, {"S3": 1}, fns, exo)


def strictly_causal_feedback(k: int = 3) -> SystemSpec:
    """Instantaneous forward channel y(i) = x(i) + s(i) with x(i) = y(i-1)."""
    copy = lambda i, ip, xp: ip[-1] if len(ip) == i else 0
    shift = lambda i, ip, xp: ip[-1] if len(ip) == i - 1 and ip else 0
    fns = {"S1": copy, "S2": copy, "S4": shift,
           "S3": lambda i, ip, xp: (ip[-1] + xp[-1]) % 2}
    exo = {"r": _constant("r", k), "p": _constant("p", k), "q": _constant("q", k),
           "s": _iid("s", k, [3, 1])}
    return _assemble("strictly-causal-feedback", k, {}, {"S4": 1}, fns, exo)


def uniform_noise_wash(k: int = 2) -> SystemSpec:
    """y = x + s with s i.i.d. uniform; the rest of the loop mixes biased r, p, q."""
    fn = lambda i, ip, xp: (_last(ip) + xp[-1]) % 2
    fns = dict.fromkeys(BLOCKS, fn)
    fns["S2"] = lambda i, ip, xp: (_last(ip) * xp[-1] + xp[0]) % 2
    exo = {"r": _iid("r", k, [3, 1]), "p": _iid("p", k, [1, 2]),
           "s": _uniform("s", k), "q": _iid("q", k, [5, 3])}
    return _assemble("uniform-noise-wash", k, {}, {"S1": 1}, fns, exo)


def two_block_loop(k: int = 2, seed: int = 7) -> SystemSpec:
    """Random loop with p and s constant, i.e. the two-block loop y = F(r, u), u = G(q, y)."""
    cfg = GeneratorConfig(seed=seed, horizon=k, partition="r|q|p|s", deterministic=("p", "s"))
    return replace(random_system(cfg), name="two-block")


CANNED = {
    "xor-loop": xor_loop,
    "summing-node": summing_node_loop,
    "perfect-instantaneous-feedback": perfect_instantaneous_feedback,
    "strictly-causal-feedback": strictly_causal_feedback,
    "uniform-noise-wash": uniform_noise_wash,
    "two-block": two_block_loop,
}


def canned_examples() -> dict[str, SystemSpec]:
    """Every fixture at its default horizon; ``CANNED[name](k)`` rebuilds one at another."""
    return {name: build() for name, build in CANNED.items()}
