"""JSON serialization of :class:`SystemSpec`.

Layout::

    {
      "horizon": 2,
      "name": "xor-loop",
      "signals": {"r": [2, 2], ...},            # alphabet size per time
      "delays": {"s1": [1, 1], ...},           # per-time list or a constant
      "blocks": {"s1": [[time, [input prefix], [exogenous prefix], output], ...], ...},
      "exogenous": {
        "partition": "s|r|p|q",
        "tables": [[[symbols...], "weight"], ...]   # one list per group
      }
    }

A group table assigns symbols to ``(signal, t)`` for each signal of the
group in partition order and ``t = 1..k``. Weights are decimal strings so
large integers survive any JSON reader. Unknown fields are rejected.
``dumps`` is canonical: equal specs give byte-identical text.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .dist import DistributionError, JointTable, VariableId
from .system import (BLOCKS, SIGNALS, CausalBlock, ExogenousSpec, SpecError, SystemSpec,
                     parse_partition, partition_str)

_TOP = {"horizon", "name", "signals", "delays", "blocks", "exogenous"}
_REQUIRED = _TOP - {"name"}
_EXO = {"partition", "tables"}


class SpecFileError(SpecError):
    pass


def _group_vars(group, k: int) -> list[VariableId]:
    return [VariableId(s, t) for s in group for t in range(1, k + 1)]


def to_dict(spec: SystemSpec) -> dict:
    k = spec.horizon
    tables = []
    for group, joint in zip(spec.exogenous.partition, spec.exogenous.joints):
        order = [joint.variables.index(v) for v in _group_vars(group, k)]
        rows = sorted((tuple(pt[n] for n in order), w) for pt, w in joint.support.items())
        tables.append([[list(pt), str(w)] for pt, w in rows])
    out = {"horizon": k}
    if spec.name:
        out["name"] = spec.name
    out["signals"] = {s: list(spec.alphabets[s]) for s in SIGNALS}
    out["delays"] = {b.lower(): list(spec.delays[b].values) for b in BLOCKS}
    out["blocks"] = {b.lower(): [[i, list(ip), list(xp), o]
                                 for (i, ip, xp), o in sorted(spec.blocks[b].table.items())]
                     for b in BLOCKS}
    out["exogenous"] = {"partition": partition_str(spec.exogenous.partition), "tables": tables}
    return out


def _reject_unknown(obj, allowed, where: str):
    if not isinstance(obj, dict):
        raise SpecFileError(f"{where}: expected an object")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise SpecFileError(f"{where}: unknown field(s) {', '.join(extra)}")


def _need(obj, keys, where):
    missing = sorted(set(keys) - set(obj))
    if missing:
        raise SpecFileError(f"{where}: missing field(s) {', '.join(missing)}")


def from_dict(data: dict) -> SystemSpec:
    _reject_unknown(data, _TOP, "spec")
    _need(data, _REQUIRED, "spec")
    k = data["horizon"]
    if not isinstance(k, int) or k < 1:
        raise SpecFileError("horizon must be a positive integer")
    _reject_unknown(data["signals"], SIGNALS, "signals")
    _reject_unknown(data["delays"], [b.lower() for b in BLOCKS], "delays")
    _need(data["delays"], [b.lower() for b in BLOCKS], "delays")
    _reject_unknown(data["blocks"], [b.lower() for b in BLOCKS], "blocks")
    _need(data["blocks"], [b.lower() for b in BLOCKS], "blocks")
    exo = data["exogenous"]
    _reject_unknown(exo, _EXO, "exogenous")
    _need(exo, _EXO, "exogenous")
    try:
        alph = {s: data["signals"].get(s, 2) for s in SIGNALS}
        partition = parse_partition(exo["partition"])
        if len(exo["tables"]) != len(partition):
            raise SpecFileError(f"exogenous: {len(partition)} groups but {len(exo['tables'])} tables")
        norm = {s: (a,) * k if isinstance(a, int) else tuple(a) for s, a in alph.items()}
        for s, a in norm.items():
            if len(a) != k:
                raise SpecFileError(f"signals: {s} needs {k} alphabet sizes, got {len(a)}")
        joints = []
        for group, rows in zip(partition, exo["tables"]):
            vars_ = _group_vars(group, k)
            sizes = [norm[v.signal][v.time - 1] for v in vars_]
            support = {}
            for row in rows:
                if len(row) != 2:
                    raise SpecFileError("exogenous rows are [symbols, weight]")
                pt, w = row
                if not isinstance(w, str) or not w.strip().isdigit():
                    raise SpecFileError(f"exogenous weight {w!r} must be a decimal string")
                pt = tuple(pt)
                if pt in support:
                    raise SpecFileError(f"exogenous group {''.join(group)}: duplicate row {list(pt)}")
                support[pt] = int(w)
            joints.append(JointTable(vars_, sizes, support))
        blocks = {}
        for b in BLOCKS:
            table = {}
            for row in data["blocks"][b.lower()]:
                if len(row) != 4:
                    raise SpecFileError(f"block {b}: rows are [time, input-prefix, exogenous-prefix, output]")
                i, ip, xp, o = row
                key = (i, tuple(ip), tuple(xp))
                if key in table:
                    raise SpecFileError(f"block {b}: duplicate row for time {i}, prefixes {ip}, {xp}")
                table[key] = o
            blocks[b] = CausalBlock(b, table)
        delays = {b: data["delays"][b.lower()] for b in BLOCKS}
        return SystemSpec(k, alph, delays, blocks, ExogenousSpec(partition, joints), data.get("name", ""))
    except (DistributionError, TypeError, ValueError) as err:
        if isinstance(err, SpecFileError):
            raise
        raise SpecFileError(str(err)) from None


def _encode(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(key)}: {_encode(v, indent + 1)}" for key, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, list) and obj and all(isinstance(v, (list, dict)) for v in obj):
        items = [pad + (json.dumps(v, separators=(", ", ": ")) if isinstance(v, list)
                        and not any(isinstance(w, list) and w and isinstance(w[0], list) for w in v)
                        else _encode(v, indent + 1)) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + "  " * indent + "]"
    return json.dumps(obj, separators=(", ", ": "))


def dumps(spec: SystemSpec) -> str:
    return _encode(to_dict(spec)) + "\n"


def loads(text: str) -> SystemSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise SpecFileError(f"invalid JSON at line {err.lineno}, column {err.colno}: {err.msg}") from None
    return from_dict(data)


def load(path) -> SystemSpec:
    return loads(Path(path).read_text())


def dump(spec: SystemSpec, path) -> None:
    Path(path).write_text(dumps(spec))


def spec_hash(spec: SystemSpec) -> str:
    return hashlib.sha256(dumps(spec).encode()).hexdigest()
