"""Quantum currency notes and two-miner quantum bitcoins.

Quantum parts are simulator values (:class:`~qowf.gch.GchState`, or a dense
vector once a forged state has been driven out of the GCH family).  Notes and
coins are mutable holders: verification physically acts on the carried state,
so the holder's state is replaced by the post-verification state.

Signed messages are the UTF-8 canonical encodings joined by U+2016.
"""

from __future__ import annotations

import base64
import json
import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from qowf.dense import DenseVector, dense_apply, to_statevector, vectors_equal_up_to_phase
from qowf.errors import (
    CompatibilityError,
    FormatError,
    InvalidArgumentsError,
    InvalidSizeError,
    LedgerError,
    ParseError,
    ProtocolAbort,
    UnsupportedGateError,
)
from qowf.gch import Gate, GchState, encode_state, random_gch_state, state_from_obj, state_to_obj
from qowf.owf import (
    OwfDescription,
    OwfImage,
    check_consistency,
    description_from_obj,
    description_to_obj,
    encode_description,
    encode_image,
    evaluate,
    image_from_obj,
    image_to_obj,
    verify,
)

SEPARATOR = "‖"
UNIVERSAL_SAFE = "universal-safe"
STRUCTURE_AWARE = "structure-aware"


class SignatureScheme(Protocol):
    def keygen(self, rng: random.Random) -> tuple[bytes, bytes]: ...

    def sign(self, private_key: bytes, message: bytes) -> bytes: ...

    def verify_sig(self, public_key: bytes, message: bytes, signature: bytes) -> bool: ...


class Ed25519Scheme:
    """Ed25519 with keys derived from the caller's rng, so runs are reproducible."""

    def keygen(self, rng: random.Random) -> tuple[bytes, bytes]:
        seed = rng.getrandbits(256).to_bytes(32, "big")
        pub = Ed25519PrivateKey.from_private_bytes(seed).public_key()
        return seed, pub.public_bytes(Encoding.Raw, PublicFormat.Raw)

    def sign(self, private_key: bytes, message: bytes) -> bytes:
        return Ed25519PrivateKey.from_private_bytes(private_key).sign(message)

    def verify_sig(self, public_key: bytes, message: bytes, signature: bytes) -> bool:
        try:
            Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        except (InvalidSignature, ValueError):
            return False
        return True


DEFAULT_SCHEME = Ed25519Scheme()


def signed_message(*parts: str) -> bytes:
    return SEPARATOR.join(parts).encode("utf-8")


def b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def unb64(text, field: str) -> bytes:
    if not isinstance(text, str):
        raise ParseError(field, "expected base64 string")
    try:
        return base64.b64decode(text, validate=True)
    except ValueError as exc:
        raise ParseError(field, "invalid base64") from exc


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _loads(text: str, what: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(what, f"invalid JSON: {exc}") from exc


def _field(obj, key, what):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"{what}.{key}", "missing")
    return obj[key]


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    step: str | None = None
    reason: str = "accepted"

    def __bool__(self) -> bool:
        return self.accepted


def _reject(step: str, reason: str) -> Verdict:
    return Verdict(False, step, reason)


# ---------------------------------------------------------------------------
# gate programs


@dataclass(frozen=True)
class GateProgram:
    ops: tuple[Gate, ...]
    mode: str = UNIVERSAL_SAFE

    def __post_init__(self):
        if self.mode not in (UNIVERSAL_SAFE, STRUCTURE_AWARE):
            raise InvalidArgumentsError(f"unknown gate-program mode {self.mode!r}")
        if self.mode == UNIVERSAL_SAFE and any(g.name not in ("X", "Z") for g in self.ops):
            raise InvalidArgumentsError("universal-safe programs may only hold X and Z")

    def inverse(self) -> "GateProgram":
        # every op used here is self-inverse
        return GateProgram(tuple(reversed(self.ops)), self.mode)


def program_to_obj(program: GateProgram) -> dict:
    return {"mode": program.mode, "ops": [{"g": g.name, "q": list(g.qubits)} for g in program.ops]}


def encode_program(program: GateProgram) -> str:
    return _dumps(program_to_obj(program))


def program_from_obj(obj) -> GateProgram:
    mode = _field(obj, "mode", "G")
    ops = _field(obj, "ops", "G")
    if not isinstance(ops, list):
        raise ParseError("G.ops", "expected list")
    gates = []
    for i, op in enumerate(ops):
        name, qubits = _field(op, "g", f"G.ops[{i}]"), _field(op, "q", f"G.ops[{i}]")
        arity = {"X": 1, "Z": 1, "H": 1, "CNOT": 2}.get(name)
        if arity is None:
            raise ParseError(f"G.ops[{i}].g", f"unknown gate {name!r}")
        if (
            not isinstance(qubits, list)
            or len(qubits) != arity
            or any(isinstance(q, bool) or not isinstance(q, int) or q < 0 for q in qubits)
        ):
            raise ParseError(f"G.ops[{i}].q", f"{name} needs {arity} non-negative positions")
        gates.append(Gate(name, tuple(qubits)))
    try:
        return GateProgram(tuple(gates), mode)
    except InvalidArgumentsError as exc:
        raise ParseError("G.mode", str(exc)) from exc


def random_gate_program(
    n: int,
    length: int | None = None,
    mode: str = UNIVERSAL_SAFE,
    rng: random.Random | None = None,
    state: GchState | None = None,
) -> GateProgram:
    """Random program; structure-aware mode consults ``state`` to stay legal."""
    rng = rng if rng is not None else random.Random()
    length = 4 * n if length is None else length
    if mode == UNIVERSAL_SAFE:
        return GateProgram(tuple(Gate(rng.choice("XZ"), (rng.randrange(n),)) for _ in range(length)), mode)
    if mode != STRUCTURE_AWARE:
        raise InvalidArgumentsError(f"unknown gate-program mode {mode!r}")
    if state is None:
        raise InvalidArgumentsError("structure-aware programs need the state")
    reg = state.register()
    ops = []
    while len(ops) < length:
        kind = rng.choice(("X", "Z", "H", "CNOT"))
        if kind == "CNOT":
            c, t = rng.sample(range(n), 2)
            if not reg.compatible(c, t):
                continue
            gate = Gate("CNOT", (c, t))
        else:
            p = rng.randrange(n)
            if kind == "H" and reg.kind[p] == "G":
                continue
            gate = Gate(kind, (p,))
        reg.apply(gate)
        ops.append(gate)
    return GateProgram(tuple(ops), mode)


def apply_program(state: GchState | DenseVector, program: GateProgram) -> GchState | DenseVector:
    """Apply ``program``; leaves the symbolic representation only if forced to."""
    if isinstance(state, GchState):
        reg = state.register()
        for i, g in enumerate(program.ops):
            if any(q >= state.n for q in g.qubits):
                raise InvalidArgumentsError(f"gate {g} out of range")
            if g.name == "CNOT" and not reg.compatible(*g.qubits):
                break
            try:
                reg.apply(g)
            except (UnsupportedGateError, CompatibilityError):
                break
        else:
            return reg.freeze()
        vec = to_statevector(reg.freeze())
        rest = program.ops[i:]
    else:
        vec, rest = state, program.ops
    for g in rest:
        vec = dense_apply(vec, g)
    return vec


def states_match(a: GchState | DenseVector, b: GchState | DenseVector) -> bool:
    if isinstance(a, GchState) and isinstance(b, GchState):
        return a == b
    va = a if isinstance(a, DenseVector) else to_statevector(a)
    vb = b if isinstance(b, DenseVector) else to_statevector(b)
    return vectors_equal_up_to_phase(va, vb)


# ---------------------------------------------------------------------------
# currency notes


@dataclass
class CurrencyNote:
    state: GchState | DenseVector | None
    denomination: str
    image: OwfImage
    description: OwfDescription
    signature: bytes

    def message(self) -> bytes:
        return signed_message(self.denomination, encode_image(self.image), encode_description(self.description))


def mint_note(
    private_key: bytes,
    denomination: str,
    n: int,
    rng: random.Random,
    scheme: SignatureScheme = DEFAULT_SCHEME,
    iterations: int | None = None,
) -> CurrencyNote:
    if n % 2 or n < 4:
        raise InvalidSizeError(f"notes need an even n >= 4, got {n}")
    psi = random_gch_state(n, even_ghz_only=True, rng=rng)
    ev = evaluate(psi, iterations, rng)
    note = CurrencyNote(psi, denomination, ev.image, ev.description, b"")
    note.signature = scheme.sign(private_key, note.message())
    return note


def _note_form(note: CurrencyNote) -> str | None:
    if not isinstance(note.denomination, str):
        return "denomination is not a string"
    if not isinstance(note.signature, bytes):
        return "signature is not bytes"
    if not isinstance(note.state, (GchState, DenseVector)):
        return "quantum state missing"
    if not isinstance(note.image, OwfImage) or not isinstance(note.description, OwfDescription):
        return "classical parts malformed"
    try:
        check_consistency(note.description, note.image, note.state.n)
    except FormatError as exc:
        return str(exc)
    return None


def verify_note(
    note: CurrencyNote,
    public_key: bytes,
    rng: random.Random,
    scheme: SignatureScheme = DEFAULT_SCHEME,
) -> Verdict:
    problem = _note_form(note)
    if problem:
        return _reject("form", problem)
    if not scheme.verify_sig(public_key, note.message(), note.signature):
        return _reject("signature", "bank signature does not match (M||L||F)")
    result = verify(note.state, note.description, note.image, rng)
    note.state = result.state
    if not result.accepted:
        return _reject("owf", "OWF image verification failed")
    return Verdict(True)


def note_to_obj(note: CurrencyNote, include_state: bool = False) -> dict:
    obj = {
        "denom": note.denomination,
        "L": image_to_obj(note.image),
        "F": description_to_obj(note.description),
        "sig": b64(note.signature),
    }
    if include_state:
        if not isinstance(note.state, GchState):
            raise InvalidArgumentsError("only GCH states can be serialized")
        obj["state"] = state_to_obj(note.state)
    return obj


def encode_note(note: CurrencyNote, include_state: bool = False) -> str:
    return _dumps(note_to_obj(note, include_state))


def decode_note(text: str) -> CurrencyNote:
    obj = _loads(text, "note")
    denom = _field(obj, "denom", "note")
    if not isinstance(denom, str):
        raise ParseError("note.denom", "expected string")
    desc = description_from_obj(_field(obj, "F", "note"))
    image = image_from_obj(_field(obj, "L", "note"), desc)
    sig = unb64(_field(obj, "sig", "note"), "note.sig")
    state = state_from_obj(obj["state"]) if "state" in obj else None
    extra = set(obj) - {"denom", "F", "L", "sig", "state"}
    if extra:
        raise ParseError("note", f"unexpected fields {sorted(extra)}")
    return CurrencyNote(state, denom, image, desc, sig)


# ---------------------------------------------------------------------------
# ledger


@dataclass(frozen=True)
class LedgerEntry:
    serial: str
    kpub: bytes
    kstarpub: bytes

    def to_line(self) -> str:
        return _dumps({"serial": self.serial, "kpub": b64(self.kpub), "kstarpub": b64(self.kstarpub)})

    @classmethod
    def from_line(cls, line: str) -> "LedgerEntry":
        obj = _loads(line, "ledger")
        serial = _field(obj, "serial", "ledger")
        if not isinstance(serial, str):
            raise ParseError("ledger.serial", "expected string")
        return cls(serial, unb64(_field(obj, "kpub", "ledger"), "ledger.kpub"),
                   unb64(_field(obj, "kstarpub", "ledger"), "ledger.kstarpub"))


class Ledger:
    """Serial registry: private until published, append-only once public.

    With a ``path``, every publication is appended to that file as JSON lines.
    One writer, many readers.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, LedgerEntry] = {}
        self._published: list[str] = []

    @classmethod
    def load(cls, path: str | Path) -> "Ledger":
        ledger = cls(path)
        p = Path(path)
        if p.exists():
            for i, line in enumerate(p.read_text(encoding="utf-8").splitlines()):
                if not line.strip():
                    continue
                entry = LedgerEntry.from_line(line)
                if entry.serial in ledger._entries:
                    raise ParseError(f"ledger line {i}", f"duplicate serial {entry.serial!r}")
                ledger._entries[entry.serial] = entry
                ledger._published.append(entry.serial)
        return ledger

    def __contains__(self, serial: str) -> bool:
        return serial in self._entries

    def record(self, entry: LedgerEntry) -> None:
        if entry.serial in self._entries:
            raise LedgerError(f"serial {entry.serial!r} already exists")
        self._entries[entry.serial] = entry

    def pending(self) -> list[LedgerEntry]:
        return [e for s, e in self._entries.items() if s not in self._published]

    def is_published(self, serial: str) -> bool:
        return serial in self._published

    def lookup(self, serial: str) -> LedgerEntry | None:
        return self._entries[serial] if serial in self._published else None

    def publish(self, serials: Iterable[str]) -> None:
        batch = list(serials)
        for s in batch:
            if s not in self._entries:
                raise LedgerError(f"unknown serial {s!r}")
            if s in self._published:
                raise LedgerError(f"serial {s!r} already published")
        if len(set(batch)) != len(batch):
            raise LedgerError("batch repeats a serial")
        lines = [self._entries[s].to_line() + "\n" for s in batch]
        if self.path is not None:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.writelines(lines)
        self._published.extend(batch)

    def published_text(self) -> str:
        return "".join(self._entries[s].to_line() + "\n" for s in self._published)


def publish_ledger(ledger: Ledger, batch: Iterable[LedgerEntry | str]) -> None:
    ledger.publish(e.serial if isinstance(e, LedgerEntry) else e for e in batch)


# ---------------------------------------------------------------------------
# in-process actors


@dataclass
class Message:
    sender: str
    receiver: str
    kind: str
    payload: dict
    quantum: dict[str, GchState] = field(default_factory=dict)

    def record(self) -> dict:
        """Log form: classical payload verbatim, quantum parts only as opaque handles."""
        return {
            "from": self.sender,
            "to": self.receiver,
            "kind": self.kind,
            "payload": self.payload,
            "quantum": {k: f"<{v.n}-qubit state>" for k, v in self.quantum.items()},
        }


class Channel:
    """Ordered, reliable in-process message link with a full transcript."""

    def __init__(self):
        self._queues: dict[str, deque[Message]] = {}
        self.log: list[dict] = []

    def send(self, msg: Message) -> None:
        self._queues.setdefault(msg.receiver, deque()).append(msg)
        self.log.append(msg.record())

    def receive(self, receiver: str, kind: str) -> Message:
        queue = self._queues.get(receiver)
        if not queue:
            raise ProtocolAbort(f"{receiver} expected {kind!r} but the channel is empty")
        msg = queue.popleft()
        if msg.kind != kind:
            raise ProtocolAbort(f"{receiver} expected {kind!r}, got {msg.kind!r}")
        return msg


class Actor:
    def __init__(self, name: str, channel: Channel, rng: random.Random, scheme: SignatureScheme = DEFAULT_SCHEME):
        self.name = name
        self.channel = channel
        self.rng = rng
        self.scheme = scheme

    @property
    def transcript(self) -> list[dict]:
        """Every channel record this actor sent or received."""
        return [r for r in self.channel.log if self.name in (r["from"], r["to"])]

    def send(self, to: "Actor", kind: str, payload: dict | None = None, **quantum: GchState) -> None:
        self.channel.send(Message(self.name, to.name, kind, payload or {}, quantum))


@dataclass
class CoinToken1:
    serial: str
    program: GateProgram
    starred_state: GchState | DenseVector
    sig1: bytes

    def message(self) -> bytes:
        return signed_message(self.serial, encode_program(self.program))


@dataclass
class CoinToken2:
    state: GchState | DenseVector
    image: OwfImage
    description: OwfDescription
    sig2: bytes

    def message(self) -> bytes:
        return signed_message(encode_description(self.description), encode_image(self.image))


@dataclass
class Bitcoin:
    part1: CoinToken1
    part2: CoinToken2


class Bob(Actor):
    """Prepares |K>, evaluates the OWF on it and signs (F||L) with K*."""

    def start(self, alice: "Alice", n: int) -> None:
        self.kstar_priv, self.kstar_pub = self.scheme.keygen(self.rng)
        self.send(alice, "kstar_pub", {"kstarpub": b64(self.kstar_pub)})
        # two copies of the same classical preparation
        self.k_state = random_gch_state(n, even_ghz_only=True, rng=self.rng)
        self.send(alice, "state_copy", state=self.k_state)

    def finish(self, alice: "Alice") -> None:
        ev = evaluate(self.k_state, rng=self.rng)
        token = CoinToken2(ev.state, ev.image, ev.description, b"")
        token.sig2 = self.scheme.sign(self.kstar_priv, token.message())
        self.send(
            alice,
            "token2",
            {"L": image_to_obj(token.image), "F": description_to_obj(token.description), "sig2": b64(token.sig2)},
            state=token.state,
        )


class Alice(Actor):
    """Randomizes her copy of |K> with a gate program, tags and signs it, keeps the ledger."""

    def __init__(self, *args, ledger: Ledger, **kwargs):
        super().__init__(*args, **kwargs)
        self.ledger = ledger
        self.k_priv, self.k_pub = self.scheme.keygen(self.rng)

    def randomize(self, serial: str, mode: str, length: int | None = None) -> CoinToken1:
        self.kstar_pub = unb64(self.channel.receive(self.name, "kstar_pub").payload["kstarpub"], "kstarpub")
        copy = self.channel.receive(self.name, "state_copy").quantum["state"]
        program = random_gate_program(copy.n, length, mode, self.rng, state=copy if mode == STRUCTURE_AWARE else None)
        token = CoinToken1(serial, program, apply_program(copy, program), b"")
        token.sig1 = self.scheme.sign(self.k_priv, token.message())
        return token

    def assemble(self, token1: CoinToken1) -> tuple[Bitcoin, LedgerEntry]:
        msg = self.channel.receive(self.name, "token2")
        desc = description_from_obj(msg.payload["F"])
        token2 = CoinToken2(
            msg.quantum["state"], image_from_obj(msg.payload["L"], desc), desc, unb64(msg.payload["sig2"], "sig2")
        )
        entry = LedgerEntry(token1.serial, self.k_pub, self.kstar_pub)
        self.ledger.record(entry)
        return Bitcoin(token1, token2), entry


def mint_bitcoin(
    alice: Alice, bob: Bob, n: int, serial: str, mode: str = UNIVERSAL_SAFE, length: int | None = None
) -> tuple[Bitcoin, LedgerEntry]:
    """Run the two-miner minting protocol; the entry stays unpublished."""
    if n % 2 or n < 4:
        raise InvalidSizeError(f"coins need an even n >= 4, got {n}")
    if serial in alice.ledger:
        raise LedgerError(f"serial {serial!r} already used")
    bob.start(alice, n)
    token1 = alice.randomize(serial, mode, length)
    bob.finish(alice)
    return alice.assemble(token1)


def _coin_form(coin: Bitcoin) -> str | None:
    p1, p2 = getattr(coin, "part1", None), getattr(coin, "part2", None)
    if not isinstance(p1, CoinToken1) or not isinstance(p2, CoinToken2):
        return "coin is not ($1, $2)"
    if not isinstance(p1.serial, str) or not isinstance(p1.program, GateProgram) or not isinstance(p1.sig1, bytes):
        return "$1 malformed"
    if not isinstance(p2.sig2, bytes) or not isinstance(p2.image, OwfImage):
        return "$2 malformed"
    for s in (p1.starred_state, p2.state):
        if not isinstance(s, (GchState, DenseVector)):
            return "quantum state missing"
    if p1.starred_state.n != p2.state.n:
        return "state sizes differ"
    if any(q >= p2.state.n for g in p1.program.ops for q in g.qubits):
        return "gate program addresses a missing qubit"
    try:
        check_consistency(p2.description, p2.image, p2.state.n)
    except FormatError as exc:
        return str(exc)
    return None


def verify_bitcoin(
    coin: Bitcoin, ledger: Ledger, rng: random.Random, scheme: SignatureScheme = DEFAULT_SCHEME
) -> Verdict:
    problem = _coin_form(coin)
    if problem:
        return _reject("form", problem)
    p1, p2 = coin.part1, coin.part2
    entry = ledger.lookup(p1.serial)
    if entry is None:
        return _reject("ledger", f"serial {p1.serial!r} unknown or unpublished")
    if not scheme.verify_sig(entry.kstarpub, p2.message(), p2.sig2):
        return _reject("signature", "sig2 does not match (F||L)")
    if not scheme.verify_sig(entry.kpub, p1.message(), p1.sig1):
        return _reject("signature", "sig1 does not match (S_r||G)")
    result = verify(p2.state, p2.description, p2.image, rng)
    p2.state = result.state
    if not result.accepted:
        return _reject("owf", "OWF image verification failed")
    k_prime = apply_program(p2.state, p1.program)
    same = states_match(k_prime, p1.starred_state)
    p2.state = apply_program(k_prime, p1.program.inverse())
    if not same:
        return _reject("comparison", "G|K> differs from |K*>")
    return Verdict(True)


def coin_to_obj(coin: Bitcoin) -> dict:
    p1, p2 = coin.part1, coin.part2
    for s in (p1.starred_state, p2.state):
        if not isinstance(s, GchState):
            raise InvalidArgumentsError("only GCH states can be serialized")
    return {
        "part1": {
            "serial": p1.serial,
            "G": program_to_obj(p1.program),
            "kstar": state_to_obj(p1.starred_state),
            "sig1": b64(p1.sig1),
        },
        "part2": {
            "state": state_to_obj(p2.state),
            "L": image_to_obj(p2.image),
            "F": description_to_obj(p2.description),
            "sig2": b64(p2.sig2),
        },
    }


def encode_coin(coin: Bitcoin) -> str:
    return _dumps(coin_to_obj(coin))


def decode_coin(text: str) -> Bitcoin:
    obj = _loads(text, "coin")
    p1, p2 = _field(obj, "part1", "coin"), _field(obj, "part2", "coin")
    serial = _field(p1, "serial", "part1")
    if not isinstance(serial, str):
        raise ParseError("part1.serial", "expected string")
    desc = description_from_obj(_field(p2, "F", "part2"))
    return Bitcoin(
        CoinToken1(
            serial,
            program_from_obj(_field(p1, "G", "part1")),
            state_from_obj(_field(p1, "kstar", "part1")),
            unb64(_field(p1, "sig1", "part1"), "part1.sig1"),
        ),
        CoinToken2(
            state_from_obj(_field(p2, "state", "part2")),
            image_from_obj(_field(p2, "L", "part2"), desc),
            desc,
            unb64(_field(p2, "sig2", "part2"), "part2.sig2"),
        ),
    )


def key_to_text(public_key: bytes) -> str:
    return _dumps({"kpub": b64(public_key)})


def key_from_text(text: str) -> bytes:
    return unb64(_field(_loads(text, "key"), "kpub", "key"), "key.kpub")


def state_description_leaks(transcript: list[dict], state: GchState) -> bool:
    """True if the canonical text of ``state`` appears anywhere in a transcript."""
    return encode_state(state) in _dumps(transcript)
