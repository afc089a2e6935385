"""Exact symbolic simulation of GCH states.

A GCH state is a tensor product of computational-basis qubits (C),
Hadamard-basis qubits (H) and GHZ factors (G) of the form
``(|y> + p|~y>)/sqrt(2)`` with ``p`` in {+1, -1}.  The family is closed under
CNOT on compatible pairs, under X and Z everywhere, under H on C/H qubits,
and under single-qubit projective measurement in the C or H basis.

Two representations are provided:

* :class:`GchState` - an immutable, canonical value (used for equality,
  serialization, and as the public currency of the package);
* :class:`GchRegister` - a mutable working copy used when applying long gate
  sequences.  A register must only ever be touched by one caller at a time.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from itertools import product
from math import comb
from typing import Iterable, Iterator, NamedTuple, Union

from qowf.errors import (
    CompatibilityError,
    InvalidArgumentsError,
    InvalidSizeError,
    ParseError,
    ResourceLimitError,
    UnsupportedGateError,
)

ENUMERATION_LIMIT = 8

PLUS_ONLY = "plus-only"
EXTENDED = "extended"


@dataclass(frozen=True)
class CBit:
    value: int


@dataclass(frozen=True)
class HSign:
    sign: int


@dataclass(frozen=True)
class GhzMember:
    group: int


Descriptor = Union[CBit, HSign, GhzMember]


@dataclass(frozen=True)
class GhzGroup:
    """``(|labels> + phase |~labels>)/sqrt(2)`` over ``members`` (ascending)."""

    members: tuple[int, ...]
    labels: tuple[int, ...]
    phase: int = 1


class Gate(NamedTuple):
    """A gate on explicit positions: ``Gate("CNOT", (c, t))``, ``Gate("X", (p,))``."""

    name: str
    qubits: tuple[int, ...]


@dataclass(frozen=True)
class GchState:
    """Canonical GCH state value.

    Canonical form: groups are ordered by their lowest member and numbered
    0, 1, ... in that order; each group's lowest member carries label 0.
    Equality of two values is equality of the states up to global phase.
    """

    n: int
    qubits: tuple[Descriptor, ...]
    groups: tuple[GhzGroup, ...] = ()

    def __post_init__(self):
        if self.n < 1 or len(self.qubits) != self.n:
            raise InvalidArgumentsError("qubit descriptor count must equal n >= 1")
        seen: dict[int, list[int]] = {}
        for pos, d in enumerate(self.qubits):
            if isinstance(d, CBit):
                if d.value not in (0, 1):
                    raise InvalidArgumentsError(f"bad bit at {pos}")
            elif isinstance(d, HSign):
                if d.sign not in (1, -1):
                    raise InvalidArgumentsError(f"bad sign at {pos}")
            elif isinstance(d, GhzMember):
                seen.setdefault(d.group, []).append(pos)
            else:
                raise InvalidArgumentsError(f"unknown descriptor at {pos}")
        if sorted(seen) != list(range(len(self.groups))):
            raise InvalidArgumentsError("group ids must be 0..len(groups)-1")
        last_low = -1
        for gid, g in enumerate(self.groups):
            if len(g.members) < 2 or len(g.labels) != len(g.members):
                raise InvalidArgumentsError(f"group {gid} needs >= 2 members with labels")
            if list(g.members) != seen[gid]:
                raise InvalidArgumentsError(f"group {gid} members disagree with descriptors")
            if g.labels[0] != 0 or any(b not in (0, 1) for b in g.labels):
                raise InvalidArgumentsError(f"group {gid} labels not canonical")
            if g.phase not in (1, -1):
                raise InvalidArgumentsError(f"group {gid} phase must be +1 or -1")
            if g.members[0] <= last_low:
                raise InvalidArgumentsError("groups must be ordered by lowest member")
            last_low = g.members[0]

    def tag(self, pos: int) -> str:
        d = self.qubits[pos]
        return "C" if isinstance(d, CBit) else "H" if isinstance(d, HSign) else "G"

    def group_of(self, pos: int) -> GhzGroup | None:
        d = self.qubits[pos]
        return self.groups[d.group] if isinstance(d, GhzMember) else None

    def register(self) -> "GchRegister":
        return GchRegister.from_state(self)

    def __str__(self) -> str:
        return encode_state(self)


def gch_state(
    n: int,
    *,
    bits: dict[int, int] | None = None,
    signs: dict[int, int] | None = None,
    groups: Iterable[tuple] = (),
) -> GchState:
    """Build a canonical state from loose parts.

    ``groups`` holds ``(members, labels)`` or ``(members, labels, phase)``
    tuples; labels may be given in either complementary form.
    """
    reg = GchRegister(n)
    covered: set[int] = set()
    for pos, bit in (bits or {}).items():
        reg.kind[pos], reg.val[pos] = "C", int(bit)
        covered.add(pos)
    for pos, sign in (signs or {}).items():
        reg.kind[pos], reg.val[pos] = "H", 0 if sign == 1 else 1
        covered.add(pos)
    for spec in groups:
        members, labels = list(spec[0]), list(spec[1])
        phase = spec[2] if len(spec) > 2 else 1
        if len(members) < 2 or len(labels) != len(members):
            raise InvalidArgumentsError("a group needs >= 2 members and one label each")
        key = reg.new_group(phase)
        for pos, lab in zip(members, labels):
            reg.kind[pos], reg.val[pos], reg.gid[pos] = "G", int(lab), key
            reg.members[key].append(pos)
        covered.update(members)
    total = len(bits or {}) + len(signs or {}) + sum(len(reg.members[k]) for k in reg.members)
    if covered != set(range(n)) or total != n:
        raise InvalidArgumentsError("every position needs exactly one descriptor")
    return reg.freeze()


class GchRegister:
    """Mutable GCH state used for in-place gate application.

    Per position: ``kind`` is "C", "H" or "G"; ``val`` holds the bit (C),
    the sign bit with 1 meaning minus (H), or the branch label (G).  Labels
    are not kept canonical here; :meth:`freeze` normalizes them.
    """

    __slots__ = ("n", "kind", "val", "gid", "members", "phase", "_next")

    def __init__(self, n: int):
        self.n = n
        self.kind = ["C"] * n
        self.val = [0] * n
        self.gid = [-1] * n
        self.members: dict[int, list[int]] = {}
        self.phase: dict[int, int] = {}
        self._next = 0

    @classmethod
    def from_state(cls, state: GchState) -> "GchRegister":
        reg = cls(state.n)
        for pos, d in enumerate(state.qubits):
            if isinstance(d, CBit):
                reg.val[pos] = d.value
            elif isinstance(d, HSign):
                reg.kind[pos] = "H"
                reg.val[pos] = 0 if d.sign == 1 else 1
        for gid, g in enumerate(state.groups):
            reg.members[gid] = list(g.members)
            reg.phase[gid] = 0 if g.phase == 1 else 1
            for pos, lab in zip(g.members, g.labels):
                reg.kind[pos], reg.val[pos], reg.gid[pos] = "G", lab, gid
        reg._next = len(state.groups)
        return reg

    def copy(self) -> "GchRegister":
        reg = GchRegister.__new__(GchRegister)
        reg.n = self.n
        reg.kind = self.kind[:]
        reg.val = self.val[:]
        reg.gid = self.gid[:]
        reg.members = {k: v[:] for k, v in self.members.items()}
        reg.phase = dict(self.phase)
        reg._next = self._next
        return reg

    def new_group(self, phase: int = 1) -> int:
        key = self._next
        self._next += 1
        self.members[key] = []
        self.phase[key] = 0 if phase == 1 else 1
        return key

    def freeze(self) -> GchState:
        order = sorted(self.members, key=lambda k: min(self.members[k]))
        ids = {k: i for i, k in enumerate(order)}
        groups = []
        for k in order:
            mem = sorted(self.members[k])
            flip = self.val[mem[0]]
            groups.append(
                GhzGroup(tuple(mem), tuple(self.val[p] ^ flip for p in mem), -1 if self.phase[k] else 1)
            )
        qubits: list[Descriptor] = []
        for pos in range(self.n):
            k = self.kind[pos]
            if k == "C":
                qubits.append(CBit(self.val[pos]))
            elif k == "H":
                qubits.append(HSign(-1 if self.val[pos] else 1))
            else:
                qubits.append(GhzMember(ids[self.gid[pos]]))
        return GchState(self.n, tuple(qubits), tuple(groups))

    # -- legality -------------------------------------------------------

    def compatible(self, control: int, target: int) -> bool:
        kc, kt = self.kind[control], self.kind[target]
        if kc == "G" and kt == "G":
            return self.gid[control] == self.gid[target]
        return not (kc == "H" and kt == "G")

    # -- gates ----------------------------------------------------------

    def _leave_group(self, pos: int) -> None:
        """Drop ``pos`` from its group; a lone survivor turns into an H qubit."""
        key = self.gid[pos]
        mem = self.members[key]
        mem.remove(pos)
        self.gid[pos] = -1
        if len(mem) == 1:
            last = mem[0]
            # (|y> + p|~y>)/sqrt2 on one qubit is |+> or |-> up to global phase
            self.kind[last], self.val[last], self.gid[last] = "H", self.phase[key], -1
            del self.members[key], self.phase[key]

    def cnot(self, control: int, target: int) -> None:
        kc, kt = self.kind[control], self.kind[target]
        val = self.val
        if kc == "C":
            if kt == "C":
                val[target] ^= val[control]
            elif kt == "G" and val[control]:
                val[target] ^= 1
            # C control on an H target is at most a global phase
        elif kc == "H":
            if kt == "H":
                val[control] ^= val[target]
            elif kt == "C":
                key = self.new_group(-1 if val[control] else 1)
                for pos, lab in ((control, 0), (target, val[target])):
                    self.kind[pos], self.val[pos], self.gid[pos] = "G", lab, key
                    self.members[key].append(pos)
            else:
                raise CompatibilityError(f"CNOT({control},{target}): H control on a GHZ target")
        else:
            key = self.gid[control]
            if kt == "C":
                val[target] ^= val[control]
                self.kind[target], self.gid[target] = "G", key
                self.members[key].append(target)
            elif kt == "H":
                self.phase[key] ^= val[target]
            elif self.gid[target] == key:
                bit = val[target] ^ val[control]
                self._leave_group(target)
                self.kind[target], val[target] = "C", bit
            else:
                raise CompatibilityError(f"CNOT({control},{target}): different GHZ groups")

    def x(self, pos: int) -> None:
        if self.kind[pos] != "H":
            self.val[pos] ^= 1

    def z(self, pos: int) -> None:
        k = self.kind[pos]
        if k == "H":
            self.val[pos] ^= 1
        elif k == "G":
            self.phase[self.gid[pos]] ^= 1

    def h(self, pos: int) -> None:
        k = self.kind[pos]
        if k == "G":
            raise UnsupportedGateError(f"H on GHZ member {pos} leaves the GCH family")
        self.kind[pos] = "H" if k == "C" else "C"

    def apply(self, gate: Gate) -> None:
        if gate.name == "CNOT":
            self.cnot(*gate.qubits)
        elif gate.name in ("X", "Z", "H"):
            getattr(self, gate.name.lower())(gate.qubits[0])
        else:
            raise UnsupportedGateError(f"unknown gate {gate.name!r}")

    # -- measurement ----------------------------------------------------

    def measure(self, pos: int, basis: str, rng: random.Random) -> str:
        """Projective measurement; returns one of "0", "1", "+", "-"."""
        k = self.kind[pos]
        if basis == "C":
            if k == "C":
                return str(self.val[pos])
            if k == "H":
                bit = rng.getrandbits(1)
                self.kind[pos], self.val[pos] = "C", bit
                return str(bit)
            key = self.gid[pos]
            flip = rng.getrandbits(1)
            out = self.val[pos] ^ flip
            for m in self.members.pop(key):
                self.kind[m], self.val[m], self.gid[m] = "C", self.val[m] ^ flip, -1
            del self.phase[key]
            return str(out)
        if basis == "H":
            if k == "H":
                return "-" if self.val[pos] else "+"
            if k == "C":
                bit = rng.getrandbits(1)
                self.kind[pos], self.val[pos] = "H", bit
                return "-" if bit else "+"
            key = self.gid[pos]
            bit = rng.getrandbits(1)
            self.phase[key] ^= bit
            self._leave_group(pos)
            self.kind[pos], self.val[pos] = "H", bit
            return "-" if bit else "+"
        raise InvalidArgumentsError(f"basis must be 'C' or 'H', got {basis!r}")


# ---------------------------------------------------------------------------
# value-level operations


def _check_pos(state: GchState, *positions: int) -> None:
    for p in positions:
        if not 0 <= p < state.n:
            raise InvalidArgumentsError(f"position {p} out of range for n={state.n}")


def is_compatible(state: GchState, control: int, target: int) -> bool:
    _check_pos(state, control, target)
    if control == target:
        raise InvalidArgumentsError("control and target must differ")
    tc, tt = state.tag(control), state.tag(target)
    if tc == "G" and tt == "G":
        return state.qubits[control] == state.qubits[target]
    return not (tc == "H" and tt == "G")


def apply_cnot(state: GchState, control: int, target: int) -> GchState:
    if not is_compatible(state, control, target):
        raise CompatibilityError(f"({control},{target}) is not a compatible pair")
    reg = state.register()
    reg.cnot(control, target)
    return reg.freeze()


def apply_single(state: GchState, gate: str, pos: int) -> GchState:
    _check_pos(state, pos)
    if gate not in ("X", "Z", "H"):
        raise UnsupportedGateError(f"unknown single-qubit gate {gate!r}")
    reg = state.register()
    reg.apply(Gate(gate, (pos,)))
    return reg.freeze()


def apply_gate(state: GchState, gate: Gate) -> GchState:
    if gate.name == "CNOT":
        return apply_cnot(state, *gate.qubits)
    return apply_single(state, gate.name, gate.qubits[0])


def measure(state: GchState, pos: int, basis: str, rng: random.Random) -> tuple[str, GchState]:
    _check_pos(state, pos)
    reg = state.register()
    outcome = reg.measure(pos, basis, rng)
    return outcome, reg.freeze()


def canonical_equal(a: GchState, b: GchState) -> bool:
    if a.n != b.n:
        raise InvalidArgumentsError(f"size mismatch: {a.n} vs {b.n}")
    return a == b


# ---------------------------------------------------------------------------
# sampling and enumeration


def _partition_counts(n: int, even_only: bool) -> list[int]:
    """counts[m] = number of set partitions of m items into allowed blocks."""
    counts = [1] + [0] * n
    for m in range(1, n + 1):
        counts[m] = sum(
            comb(m - 1, k - 1) * counts[m - k]
            for k in range(1, m + 1)
            if k == 1 or not (even_only and k % 2)
        )
    return counts


def random_partition(n: int, rng: random.Random, even_only: bool = False) -> list[list[int]]:
    """Uniform set partition of ``range(n)``; blocks of size > 1 even if flagged."""
    counts = _partition_counts(n, even_only)
    rest = list(range(n))
    blocks = []
    while rest:
        m = len(rest)
        r = rng.randrange(counts[m])
        for k in range(1, m + 1):
            if k > 1 and even_only and k % 2:
                continue
            w = comb(m - 1, k - 1) * counts[m - k]
            if r < w:
                break
            r -= w
        head, tail = rest[0], rest[1:]
        chosen = rng.sample(tail, k - 1)
        blocks.append([head, *chosen])
        rest = [p for p in tail if p not in chosen]
    return blocks


def random_gch_state(n: int, even_ghz_only: bool = False, rng: random.Random | None = None) -> GchState:
    """Sample a GCH state with +1 GHZ phases.

    The partition into GHZ groups and singletons is uniform over set
    partitions; singleton bases/values and group labels are then uniform.
    """
    if n < 2:
        raise InvalidSizeError(f"n must be >= 2, got {n}")
    if even_ghz_only and n % 2:
        raise InvalidSizeError("even_ghz_only needs even n")
    rng = rng if rng is not None else random.Random()
    bits, signs, groups = {}, {}, []
    for block in random_partition(n, rng, even_ghz_only):
        if len(block) == 1:
            p = block[0]
            if rng.getrandbits(1):
                signs[p] = rng.choice((1, -1))
            else:
                bits[p] = rng.getrandbits(1)
        else:
            groups.append((block, [rng.getrandbits(1) for _ in block]))
    return gch_state(n, bits=bits, signs=signs, groups=groups)


def _set_partitions(items: list[int]) -> Iterator[list[list[int]]]:
    if not items:
        yield []
        return
    head, tail = items[0], items[1:]
    for rest in _set_partitions(tail):
        yield [[head], *rest]
        for i in range(len(rest)):
            yield [*rest[:i], [head, *rest[i]], *rest[i + 1:]]


def enumerate_gch_states(n: int, phase_mode: str = PLUS_ONLY) -> Iterator[GchState]:
    """Every distinct n-qubit GCH state exactly once, in a fixed order."""
    if n < 2:
        raise InvalidSizeError(f"n must be >= 2, got {n}")
    if n > ENUMERATION_LIMIT:
        raise ResourceLimitError(f"enumeration is capped at n={ENUMERATION_LIMIT}")
    if phase_mode not in (PLUS_ONLY, EXTENDED):
        raise InvalidArgumentsError(f"unknown phase mode {phase_mode!r}")
    phases = (1,) if phase_mode == PLUS_ONLY else (1, -1)
    singles = [("C", 0), ("C", 1), ("H", 1), ("H", -1)]
    for blocks in _set_partitions(list(range(n))):
        blocks = sorted(sorted(b) for b in blocks)
        options = []
        for b in blocks:
            if len(b) == 1:
                options.append(singles)
            else:
                options.append(
                    [((0, *rest), ph) for rest in product((0, 1), repeat=len(b) - 1) for ph in phases]
                )
        for choice in product(*options):
            bits, signs, groups = {}, {}, []
            for b, opt in zip(blocks, choice):
                if len(b) == 1:
                    (bits if opt[0] == "C" else signs)[b[0]] = opt[1]
                else:
                    groups.append((b, opt[0], opt[1]))
            yield gch_state(n, bits=bits, signs=signs, groups=groups)


# ---------------------------------------------------------------------------
# canonical text codec


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def state_to_obj(state: GchState) -> dict:
    qubits = []
    for d in state.qubits:
        if isinstance(d, CBit):
            qubits.append({"t": "C", "v": d.value})
        elif isinstance(d, HSign):
            qubits.append({"t": "H", "s": "+" if d.sign == 1 else "-"})
        else:
            qubits.append({"t": "G", "g": d.group})
    groups = [
        {"g": i, "members": list(g.members), "labels": list(g.labels), "phase": "+" if g.phase == 1 else "-"}
        for i, g in enumerate(state.groups)
    ]
    return {"n": state.n, "qubits": qubits, "groups": groups}


def encode_state(state: GchState) -> str:
    return _dumps(state_to_obj(state))


def _need(obj, key, kind, field):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(field, "missing")
    value = obj[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ParseError(field, "expected integer")
    if kind is not int and not isinstance(value, kind):
        raise ParseError(field, f"expected {kind.__name__}")
    return value


def state_from_obj(obj) -> GchState:
    n = _need(obj, "n", int, "n")
    if n < 1:
        raise ParseError("n", "must be positive")
    qubits = _need(obj, "qubits", list, "qubits")
    groups = _need(obj, "groups", list, "groups")
    if len(qubits) != n:
        raise ParseError("qubits", f"expected {n} entries, got {len(qubits)}")
    bits, signs, referenced = {}, {}, {}
    for pos, q in enumerate(qubits):
        field = f"qubits[{pos}]"
        t = _need(q, "t", str, f"{field}.t")
        if t == "C":
            v = _need(q, "v", int, f"{field}.v")
            if v not in (0, 1):
                raise ParseError(f"{field}.v", "must be 0 or 1")
            bits[pos] = v
        elif t == "H":
            s = _need(q, "s", str, f"{field}.s")
            if s not in ("+", "-"):
                raise ParseError(f"{field}.s", "must be '+' or '-'")
            signs[pos] = 1 if s == "+" else -1
        elif t == "G":
            referenced.setdefault(_need(q, "g", int, f"{field}.g"), []).append(pos)
        else:
            raise ParseError(f"{field}.t", f"unknown tag {t!r}")
    parts, declared = [], set()
    for i, g in enumerate(groups):
        field = f"groups[{i}]"
        gid = _need(g, "g", int, f"{field}.g")
        members = _need(g, "members", list, f"{field}.members")
        labels = _need(g, "labels", list, f"{field}.labels")
        phase = _need(g, "phase", str, f"{field}.phase")
        if gid in declared:
            raise ParseError(f"{field}.g", f"duplicate group id {gid}")
        declared.add(gid)
        if len(members) < 2:
            raise ParseError(f"{field}.members", "a GHZ group needs at least 2 members")
        if sorted(members) != referenced.get(gid):
            raise ParseError(f"{field}.members", "does not match the qubit descriptors")
        if list(members) != sorted(members):
            raise ParseError(f"{field}.members", "must be ascending")
        if len(labels) != len(members) or any(b not in (0, 1) or isinstance(b, bool) for b in labels):
            raise ParseError(f"{field}.labels", "one 0/1 label per member required")
        if phase not in ("+", "-"):
            raise ParseError(f"{field}.phase", "must be '+' or '-'")
        parts.append((members, labels, 1 if phase == "+" else -1))
    if set(referenced) != declared:
        raise ParseError("groups", "group ids referenced by qubits are not all declared")
    return gch_state(n, bits=bits, signs=signs, groups=parts)


def decode_state(text: str) -> GchState:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("state", f"invalid JSON: {exc}") from exc
    return state_from_obj(obj)
