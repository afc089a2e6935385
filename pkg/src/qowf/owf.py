"""Quantum-to-classical one-way function over GCH states.

Evaluation builds, per iteration, a CNOT schedule under the pair discipline
(each unordered pair used at most once before the closing gates, at most
twice overall with the second use role-flipped), reads the classical symbols
of the marked qubits after the termination gate, and undoes the schedule.
Verification replays the published gates, measures, and undoes them again.

States handed to :func:`verify` and :func:`deterministic_image` may be
arbitrary: whenever a published CNOT is incompatible with the current
symbolic state, the computation continues on the dense backend.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple, Sequence, Union

from qowf.dense import DENSE_LIMIT, DenseVector, dense_apply, dense_measure, outcome_probabilities, to_statevector
from qowf.errors import ConstructionError, FormatError, InvalidSizeError, ParseError, ResourceLimitError
from qowf.gch import Gate, GchRegister, GchState

SYMBOLS = {"C": ("0", "1"), "H": ("+", "-")}
DETERMINISTIC_TOL = 1e-9

AnyState = Union[GchState, DenseVector]


class CnotSpec(NamedTuple):
    control: int
    target: int


class MeasureSpec(NamedTuple):
    pos: int
    basis: str


@dataclass(frozen=True)
class GateOp:
    """One layer of CNOTs on pairwise-disjoint positions."""

    cnots: tuple[CnotSpec, ...]

    def __post_init__(self):
        if not self.cnots:
            raise FormatError("a gate operation needs at least one CNOT")
        used: set[int] = set()
        for c, t in self.cnots:
            if c == t:
                raise FormatError(f"CNOT({c},{t}) has equal control and target")
            if c in used or t in used:
                raise FormatError("CNOTs within a gate operation must be disjoint")
            used.update((c, t))


@dataclass(frozen=True)
class IterationDescription:
    """Published part of one OWF unitary: gate schedule plus measurement spec."""

    gates: tuple[GateOp, ...]
    measure: tuple[MeasureSpec, ...]

    def cnots(self):
        return [c for g in self.gates for c in g.cnots]


@dataclass(frozen=True)
class OwfDescription:
    n: int
    iters: tuple[IterationDescription, ...]


@dataclass(frozen=True)
class OwfImage:
    segments: tuple[str, ...]


@dataclass
class PairLedger:
    """CNOT usage per unordered pair plus per-position saturation."""

    n: int
    usage: dict[tuple[int, int], tuple[int, CnotSpec]] = field(default_factory=dict)
    saturated: list[bool] = field(default_factory=list)

    def __post_init__(self):
        if not self.saturated:
            self.saturated = [False] * self.n

    def count(self, a: int, b: int) -> int:
        entry = self.usage.get((min(a, b), max(a, b)))
        return entry[0] if entry else 0

    def all_saturated(self) -> bool:
        return all(self.saturated)

    def cf_orientation(self, a: int, b: int, rng: random.Random) -> CnotSpec:
        """Role assignment for a CF operation on the pair {a, b}."""
        entry = self.usage.get((min(a, b), max(a, b)))
        if entry is None:
            return CnotSpec(a, b) if rng.getrandbits(1) else CnotSpec(b, a)
        if entry[0] >= 2:
            raise ConstructionError(f"pair {{{a},{b}}} already used twice")
        first = entry[1]
        return CnotSpec(first.target, first.control)

    def record(self, cnot: CnotSpec, cf: bool = False) -> None:
        key = (min(cnot), max(cnot))
        entry = self.usage.get(key)
        if entry is None:
            self.usage[key] = (1, cnot)
        elif not cf:
            raise ConstructionError(f"pair {key} reused outside a CF operation")
        elif entry[0] >= 2 or entry[1] != CnotSpec(cnot.target, cnot.control):
            raise ConstructionError(f"illegal CF operation {cnot} after {entry}")
        else:
            self.usage[key] = (2, entry[1])
        self.saturated[cnot.control] = self.saturated[cnot.target] = True


@dataclass(frozen=True)
class UnitaryRecord:
    """Evaluator-side secret for one iteration, hidden CNOT included."""

    gates: tuple[GateOp, ...]
    phase1_gates: int
    hidden_cnot: CnotSpec
    marks: tuple[int, ...]
    measurement: tuple[MeasureSpec, ...]
    symbols: str
    ledger: PairLedger

    @property
    def termination(self) -> GateOp:
        return self.gates[-1]

    def published(self, keep_hidden: bool = False) -> IterationDescription:
        gates = list(self.gates)
        if not keep_hidden:
            final = tuple(c for c in gates[-1].cnots if c != self.hidden_cnot)
            gates[-1] = GateOp(final)
        return IterationDescription(tuple(gates), self.measurement)


class Evaluation(NamedTuple):
    description: OwfDescription
    image: OwfImage
    state: GchState
    records: tuple[UnitaryRecord, ...]


class VerifyResult(NamedTuple):
    accepted: bool
    state: AnyState
    observed: OwfImage


# ---------------------------------------------------------------------------
# construction


def _pack_gate(reg: GchRegister, ledger: PairLedger, rng: random.Random) -> list[CnotSpec]:
    """Random maximal set of disjoint, unused, compatible pairs."""
    sat = ledger.saturated
    pairs = [p for p in combinations(range(reg.n), 2) if ledger.count(*p) == 0]
    rng.shuffle(pairs)
    pairs.sort(key=lambda p: sat[p[0]] + sat[p[1]])
    busy: set[int] = set()
    chosen = []
    for a, b in pairs:
        if a in busy or b in busy:
            continue
        options = [o for o in ((a, b), (b, a)) if reg.compatible(*o)]
        if not options:
            continue
        chosen.append(CnotSpec(*rng.choice(options)))
        busy.update((a, b))
    return chosen


def _apply_layer(reg: GchRegister, ledger: PairLedger, cnots: Sequence[CnotSpec], cf: bool) -> GateOp:
    for c in cnots:
        if not reg.compatible(*c):
            raise ConstructionError(f"{c} incompatible during construction")
    for c in cnots:
        reg.cnot(*c)
        ledger.record(c, cf=cf)
    return GateOp(tuple(cnots))


def _matching(positions: list[int], ledger: PairLedger, rng: random.Random) -> list[tuple[int, int]]:
    """Random perfect matching avoiding pairs that were already used twice."""
    for _ in range(1000):
        order = positions[:]
        rng.shuffle(order)
        pairs = list(zip(order[::2], order[1::2]))
        if all(ledger.count(a, b) < 2 for a, b in pairs):
            return pairs
    raise ConstructionError(f"no CNOT-once perfect matching of {positions}")


def build_owf_unitary(
    state: GchState, rng: random.Random, extra_rounds: int = 0
) -> tuple[UnitaryRecord, IterationDescription, str, GchState]:
    """Construct one OWF unitary for ``state``.

    Returns the secret record, its published description, the image segment
    and the restored input state.
    """
    n = state.n
    if n % 2 or n < 4:
        raise InvalidSizeError(f"OWF needs an even n >= 4, got {n}")
    reg = state.register()
    ledger = PairLedger(n)
    gates: list[GateOp] = []

    extra = extra_rounds
    while not ledger.all_saturated() or extra > 0:
        if ledger.all_saturated():
            extra -= 1
        cnots = _pack_gate(reg, ledger, rng)
        if not cnots:
            if ledger.all_saturated():
                break
            raise ConstructionError("no compatible unused pair for an unsaturated position")
        gates.append(_apply_layer(reg, ledger, cnots, cf=False))
    phase1 = len(gates)

    # make every GHZ group even
    odd = [sorted(m) for m in reg.members.values() if len(m) % 2]
    fixes = [ledger.cf_orientation(*rng.sample(m, 2), rng) for m in sorted(odd)]
    if fixes:
        gates.append(_apply_layer(reg, ledger, fixes, cf=True))

    # termination
    term: list[CnotSpec] = []
    marks: list[int] = []
    for mem in sorted(sorted(m) for m in reg.members.values()):
        for a, b in _matching(mem, ledger, rng):
            spec = ledger.cf_orientation(a, b, rng)
            term.append(spec)
            marks.append(spec.control if len(mem) == 2 else spec.target)
    cs = [p for p in range(n) if reg.kind[p] == "C"]
    hs = [p for p in range(n) if reg.kind[p] == "H"]
    if len(cs) % 2:
        mixed = [(c, h) for c in cs for h in hs if ledger.count(c, h) < 2]
        if not mixed:
            raise ConstructionError("no CNOT-once C-H pair for termination")
        c, h = rng.choice(mixed)
        term.append(ledger.cf_orientation(c, h, rng))
        cs.remove(c)
        hs.remove(h)
    for group, mark_target in ((cs, True), (hs, False)):
        for a, b in _matching(group, ledger, rng):
            spec = ledger.cf_orientation(a, b, rng)
            term.append(spec)
            marks.append(spec.target if mark_target else spec.control)
    gates.append(_apply_layer(reg, ledger, term, cf=True))
    if len(term) != n // 2:
        raise ConstructionError("termination must hold n/2 CNOTs")

    for p in marks:
        if reg.kind[p] == "G":
            raise ConstructionError(f"marked position {p} is still entangled")
    measured = sorted(rng.sample(marks, n // 2 - 1))
    measurement = tuple(MeasureSpec(p, reg.kind[p]) for p in measured)
    symbols = "".join(SYMBOLS[reg.kind[p]][reg.val[p]] for p in measured)
    hidden = [c for c in term if c.control not in measured and c.target not in measured]
    if len(hidden) != 1:
        raise ConstructionError(f"expected exactly one unmeasured termination CNOT, got {hidden}")

    for gate in reversed(gates):
        for c in reversed(gate.cnots):
            reg.cnot(*c)
    restored = reg.freeze()
    if restored != state:
        raise ConstructionError("inverse schedule failed to restore the input state")

    record = UnitaryRecord(tuple(gates), phase1, hidden[0], tuple(sorted(marks)), measurement, symbols, ledger)
    return record, record.published(), symbols, restored


def evaluate(
    state: GchState,
    iterations: int | None = None,
    rng: random.Random | None = None,
    keep_hidden: bool = False,
    extra_rounds: int = 0,
) -> Evaluation:
    """Evaluate the OWF: ``iterations`` (default n) independent unitaries."""
    rng = rng if rng is not None else random.Random()
    iterations = state.n if iterations is None else iterations
    if iterations < 1:
        raise InvalidSizeError("need at least one iteration")
    records, parts, segments = [], [], []
    current = state
    for _ in range(iterations):
        record, _, segment, current = build_owf_unitary(current, rng, extra_rounds)
        records.append(record)
        parts.append(record.published(keep_hidden))
        segments.append(segment)
    return Evaluation(OwfDescription(state.n, tuple(parts)), OwfImage(tuple(segments)), current, tuple(records))


# ---------------------------------------------------------------------------
# replay on arbitrary states


class _Runner:
    """Applies CNOTs symbolically and falls back to dense vectors when needed."""

    def __init__(self, state: AnyState):
        if isinstance(state, GchState):
            self.reg: GchRegister | None = state.register()
            self.vec: DenseVector | None = None
        else:
            self.reg, self.vec = None, state

    def _densify(self) -> None:
        if self.reg.n > DENSE_LIMIT:
            raise ResourceLimitError("state left the GCH family beyond the dense backend limit")
        self.vec = to_statevector(self.reg.freeze())
        self.reg = None

    def cnot(self, c: int, t: int) -> None:
        if self.reg is not None:
            if self.reg.compatible(c, t):
                self.reg.cnot(c, t)
                return
            self._densify()
        self.vec = dense_apply(self.vec, Gate("CNOT", (c, t)))

    def measure(self, pos: int, basis: str, rng: random.Random) -> str:
        if self.reg is not None:
            return self.reg.measure(pos, basis, rng)
        symbol, self.vec = dense_measure(self.vec, pos, basis, rng)
        return symbol

    def deterministic_symbol(self, pos: int, basis: str) -> str | None:
        if self.reg is not None:
            if self.reg.kind[pos] != basis:
                return None
            return SYMBOLS[basis][self.reg.val[pos]]
        p0, p1 = outcome_probabilities(self.vec, pos, basis)
        if p1 <= DETERMINISTIC_TOL:
            return SYMBOLS[basis][0]
        if p0 <= DETERMINISTIC_TOL:
            return SYMBOLS[basis][1]
        return None

    def result(self) -> AnyState:
        return self.reg.freeze() if self.reg is not None else self.vec


def check_consistency(description: OwfDescription, image: OwfImage | None = None, n: int | None = None) -> None:
    """Raise :class:`FormatError` unless description (and image) are well formed."""
    if n is not None and description.n != n:
        raise FormatError(f"description is for n={description.n}, state has n={n}")
    for l, it in enumerate(description.iters):
        positions = [m.pos for m in it.measure]
        if len(set(positions)) != len(positions):
            raise FormatError(f"iteration {l}: repeated measurement position")
        for m in it.measure:
            if not 0 <= m.pos < description.n or m.basis not in SYMBOLS:
                raise FormatError(f"iteration {l}: bad measurement {m}")
        for c in it.cnots():
            if not (0 <= c.control < description.n and 0 <= c.target < description.n):
                raise FormatError(f"iteration {l}: CNOT {c} out of range")
    if image is None:
        return
    if len(image.segments) != len(description.iters):
        raise FormatError(
            f"image has {len(image.segments)} segments, description has {len(description.iters)} iterations"
        )
    for l, (seg, it) in enumerate(zip(image.segments, description.iters)):
        if len(seg) != len(it.measure):
            raise FormatError(f"segment {l}: length {len(seg)} != {len(it.measure)} measured positions")
        for s, m in zip(seg, it.measure):
            if s not in SYMBOLS[m.basis]:
                raise FormatError(f"segment {l}: symbol {s!r} not in basis {m.basis}")


def verify(
    state: AnyState,
    description: OwfDescription,
    image: OwfImage,
    rng: random.Random,
    early_abort: bool = False,
) -> VerifyResult:
    """Replay, measure in ascending position order, undo; accept iff C' = C."""
    check_consistency(description, image, state.n)
    runner = _Runner(state)
    observed = []
    for it, expected in zip(description.iters, image.segments):
        cnots = it.cnots()
        for c in cnots:
            runner.cnot(*c)
        seg = "".join(runner.measure(m.pos, m.basis, rng) for m in sorted(it.measure))
        # report in the published order, which is ascending for generated descriptions
        by_pos = dict(zip(sorted(m.pos for m in it.measure), seg))
        seg = "".join(by_pos[m.pos] for m in it.measure)
        for c in reversed(cnots):
            runner.cnot(*c)
        observed.append(seg)
        if early_abort and seg != expected:
            break
    observed_image = OwfImage(tuple(observed))
    accepted = observed_image.segments == image.segments
    return VerifyResult(accepted, runner.result(), observed_image)


def replay(state: AnyState, cnots: Sequence[CnotSpec]) -> AnyState:
    """Apply ``cnots`` in order to any state, leaving the GCH family if forced to."""
    runner = _Runner(state)
    for c in cnots:
        runner.cnot(*c)
    return runner.result()


def undo(state: AnyState, iteration: IterationDescription) -> AnyState:
    """Apply the inverse of an iteration's published gates."""
    return replay(state, list(reversed(iteration.cnots())))


def deterministic_image(state: AnyState, iteration: IterationDescription) -> str | None:
    """Image segment if every measured qubit is already in its recorded basis."""
    runner = _Runner(state)
    for c in iteration.cnots():
        runner.cnot(*c)
    out = []
    for m in iteration.measure:
        s = runner.deterministic_symbol(m.pos, m.basis)
        if s is None:
            return None
        out.append(s)
    return "".join(out)


def cnot_count(obj) -> int:
    """Total CNOTs in a description, an iteration, a record, or a sequence of records."""
    if isinstance(obj, OwfDescription):
        return sum(len(it.cnots()) for it in obj.iters)
    if isinstance(obj, IterationDescription):
        return len(obj.cnots())
    if isinstance(obj, UnitaryRecord):
        return sum(len(g.cnots) for g in obj.gates)
    return sum(cnot_count(x) for x in obj)


def cnot_bound(n: int) -> int:
    return n * (n * (n - 1) // 2 + n)


# ---------------------------------------------------------------------------
# canonical codecs


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def description_to_obj(desc: OwfDescription) -> dict:
    return {
        "n": desc.n,
        "iters": [
            {
                "gates": [[{"c": c.control, "t": c.target} for c in g.cnots] for g in it.gates],
                "measure": [{"pos": m.pos, "basis": m.basis} for m in it.measure],
            }
            for it in desc.iters
        ],
    }


def encode_description(desc: OwfDescription) -> str:
    return _dumps(description_to_obj(desc))


def image_to_obj(image: OwfImage) -> dict:
    return {"segments": list(image.segments)}


def encode_image(image: OwfImage) -> str:
    return _dumps(image_to_obj(image))


def _int(obj, key, field):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(field, "missing")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(field, "expected integer")
    return v


def _list(obj, key, field):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(field, "missing")
    if not isinstance(obj[key], list):
        raise ParseError(field, "expected list")
    return obj[key]


def description_from_obj(obj) -> OwfDescription:
    n = _int(obj, "n", "n")
    iters = []
    for l, it in enumerate(_list(obj, "iters", "iters")):
        gates = []
        for g, layer in enumerate(_list(it, "gates", f"iters[{l}].gates")):
            if not isinstance(layer, list):
                raise ParseError(f"iters[{l}].gates[{g}]", "expected list")
            cnots = tuple(
                CnotSpec(_int(c, "c", f"iters[{l}].gates[{g}][{i}].c"), _int(c, "t", f"iters[{l}].gates[{g}][{i}].t"))
                for i, c in enumerate(layer)
            )
            try:
                gates.append(GateOp(cnots))
            except FormatError as exc:
                raise ParseError(f"iters[{l}].gates[{g}]", str(exc)) from exc
        measure = []
        for i, m in enumerate(_list(it, "measure", f"iters[{l}].measure")):
            pos = _int(m, "pos", f"iters[{l}].measure[{i}].pos")
            basis = m.get("basis")
            if basis not in SYMBOLS:
                raise ParseError(f"iters[{l}].measure[{i}].basis", "must be 'C' or 'H'")
            measure.append(MeasureSpec(pos, basis))
        iters.append(IterationDescription(tuple(gates), tuple(measure)))
    desc = OwfDescription(n, tuple(iters))
    try:
        check_consistency(desc)
    except FormatError as exc:
        raise ParseError("iters", str(exc)) from exc
    return desc


def decode_description(text: str) -> OwfDescription:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("description", f"invalid JSON: {exc}") from exc
    return description_from_obj(obj)


def image_from_obj(obj, description: OwfDescription | None = None) -> OwfImage:
    segments = _list(obj, "segments", "segments")
    for i, s in enumerate(segments):
        if not isinstance(s, str) or any(ch not in "01+-" for ch in s):
            raise ParseError(f"segments[{i}]", "symbols must be drawn from 0, 1, +, -")
    image = OwfImage(tuple(segments))
    if description is not None:
        try:
            check_consistency(description, image)
        except FormatError as exc:
            raise ParseError("segments", str(exc)) from exc
    return image


def decode_image(text: str, description: OwfDescription | None = None) -> OwfImage:
    """Parse an image; with ``description`` also enforce lengths and alphabets."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("image", f"invalid JSON: {exc}") from exc
    return image_from_obj(obj, description)
