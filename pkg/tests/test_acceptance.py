"""Exit criteria, each run at its stated size and tolerance.

Every test records one line through the ``criterion`` fixture; the terminal
summary prints one PASS/FAIL line per criterion.
"""

import json
import math
import random
import time
from dataclasses import replace

import numpy as np
import pytest

from qowf.attacks import census, forgery_bound, image_census, non_gch_probe, random_guess_forgery
from qowf.gch import Gate, decode_state, encode_state, random_gch_state
from qowf.money import (
    DEFAULT_SCHEME,
    Alice,
    Bob,
    Channel,
    GateProgram,
    Ledger,
    LedgerEntry,
    decode_coin,
    decode_note,
    encode_coin,
    encode_note,
    mint_bitcoin,
    mint_note,
    verify_bitcoin,
    verify_note,
)
from qowf.owf import (
    CnotSpec,
    GateOp,
    OwfImage,
    cnot_bound,
    cnot_count,
    decode_description,
    decode_image,
    encode_description,
    encode_image,
    evaluate,
    verify,
)
from tests.helpers import audit_record, differential_case

pytestmark = pytest.mark.acceptance

FLIP = {"0": "1", "1": "0", "+": "-", "-": "+"}


def _coin_actors(seed, ledger=None):
    root = random.Random(seed)
    ledger = Ledger() if ledger is None else ledger
    channel = Channel()
    alice = Alice("alice", channel, random.Random(root.getrandbits(64)), ledger=ledger)
    bob = Bob("bob", channel, random.Random(root.getrandbits(64)))
    return alice, bob, ledger


# 1 -------------------------------------------------------------------------


def test_c1_oracle_equivalence(criterion):
    start = time.perf_counter()
    rng = random.Random(1)
    counts, failures = {}, []
    for op in ("CNOT", "X", "Z", "H", "measure"):
        for _ in range(1000):
            f = differential_case(op, rng, (2, 10))
            if f:
                failures.append(f)
        counts[op] = 1000
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60
    criterion("1", ok, f"{sum(counts.values())} cases over n=2..10, {len(failures)} mismatches, {elapsed:.1f}s (<60s)")
    assert not failures, failures[:3]
    assert elapsed < 60


# 2 -------------------------------------------------------------------------


def test_c2_completeness(criterion):
    root = random.Random(2)
    runs = bad = 0
    for n in (4, 6, 8, 10, 12):
        for _ in range(100):
            rng = random.Random(root.getrandbits(64))
            psi = random_gch_state(n, even_ghz_only=True, rng=rng)
            ev = evaluate(psi, rng=rng)
            state = psi
            for _ in range(10):
                res = verify(state, ev.description, ev.image, rng)
                if not res.accepted or res.state != psi or res.observed != ev.image:
                    bad += 1
                    break
                state = res.state
            runs += 1
    ok = runs == 500 and bad == 0
    criterion("2", ok, f"{runs} runs x10 verifications, {bad} failures")
    assert ok


# 3 -------------------------------------------------------------------------


def test_c3_gate_count_and_schedule(criterion):
    root = random.Random(3)
    over, violations, runs = 0, [], 0
    for n in (4, 6, 8, 10, 12):
        for _ in range(60):
            rng = random.Random(root.getrandbits(64))
            psi = random_gch_state(n, even_ghz_only=bool(rng.getrandbits(1)), rng=rng)
            ev = evaluate(psi, rng=rng)
            over += cnot_count(ev.records) > cnot_bound(n)
            for rec in ev.records:
                violations += audit_record(rec, psi)
            runs += 1
    spots = cnot_bound(4) == 40 and cnot_bound(6) == 126
    ok = over == 0 and not violations and spots
    criterion("3", ok, f"{runs} full evaluations, {over} over budget, {len(violations)} schedule violations, "
                       f"bound(4)={cnot_bound(4)} bound(6)={cnot_bound(6)}")
    assert ok, violations[:3]


# 4 and 5 ------------------------------------------------------------------

CENSUS_SEEDS = range(20)


@pytest.fixture(scope="module")
def censuses():
    out = {}
    for n in (4, 6):
        start = time.perf_counter()
        reports = [census(n, s) for s in CENSUS_SEEDS]
        out[n] = (reports, time.perf_counter() - start)
    return out


def test_c4_image_census(criterion, censuses):
    details, ok = [], True
    for n, want in ((4, 2), (6, 4)):
        reports, elapsed = censuses[n]
        sizes = sorted({len(r.extended) for r, _ in reports})
        complete = all(r.complete and len(r.extended) == want for r, _ in reports)
        distinct = len({r.description for r, _ in reports})
        plus_short = sum(not r.plus_only_complete for r, _ in reports)
        ok &= complete and len(reports) >= 20
        details.append(f"n={n}: image-set sizes {sizes} over {len(reports)} F_l ({distinct} distinct, "
                       f"{plus_short} short in plus-only mode), {elapsed:.0f}s")
    _, elapsed6 = censuses[6]
    ok &= elapsed6 < 300
    criterion("4", ok, "; ".join(details) + " (n=6 <300s)")
    assert ok


def test_c5_preimage_census(criterion, censuses):
    details, ok = [], True
    for n, floor in ((4, 4), (6, 8)):
        reports, _ = censuses[n]
        low = min(p.preimages for _, p in reports)
        ok &= low >= floor and all(p.genuine_counted for _, p in reports)
        details.append(f"n={n}: min preimages {low} (need >= {floor})")
    criterion("5", ok, "; ".join(details))
    assert ok


# 6 -------------------------------------------------------------------------


def test_c6_forgery_bound(criterion):
    trials, details, ok = 10_000, [], True
    for n in (4, 6):
        stats = random_guess_forgery(n, trials, seed=6)
        bound = forgery_bound(n)
        limit = bound + 3 * math.sqrt(bound * (1 - bound) / trials)
        passed = stats.deterministic_rate <= limit
        ok &= passed and stats.deterministic_pass <= stats.empirical_accept
        details.append(
            f"n={n}: deterministic_pass {stats.deterministic_rate:.4f} vs bound+3sigma {limit:.5f}"
            f" (accept {stats.accept_rate:.4f})"
        )
    criterion("6", ok, "; ".join(details))
    assert ok


# 7 -------------------------------------------------------------------------


def test_c7_non_gch_probe(criterion):
    report = non_gch_probe(4, 1000, seed=7, inject_control=True)
    ok = report.deterministic_pass == 0 and report.control_pass
    criterion("7", ok, f"{report.deterministic_pass}/1000 Haar states matched, control leg {report.control_pass}")
    assert ok


# 8 -------------------------------------------------------------------------


def _one_byte(text: str) -> str:
    return text[:-1] + chr(ord(text[-1]) ^ 1)


def _flip_image(image):
    seg = image.segments[0]
    return OwfImage((FLIP[seg[0]] + seg[1:],) + image.segments[1:])


def _flip_description(desc):
    it = desc.iters[0]
    c = it.gates[0].cnots[0]
    gates = (GateOp((CnotSpec(c.target, c.control),) + it.gates[0].cnots[1:]),) + it.gates[1:]
    return replace(desc, iters=(replace(it, gates=gates),) + desc.iters[1:])


def _flip_sig(sig: bytes) -> bytes:
    return bytes([sig[0] ^ 1]) + sig[1:]


def test_c8_protocol_roundtrips(criterion):
    failures = []
    rng = random.Random(8)
    priv, pub = DEFAULT_SCHEME.keygen(rng)
    note = mint_note(priv, "100", 6, rng)
    if not verify_note(note, pub, rng):
        failures.append("honest note rejected")
    note_tampers = {
        "denomination": replace(note, denomination=_one_byte(note.denomination)),
        "L": replace(note, image=_flip_image(note.image)),
        "F": replace(note, description=_flip_description(note.description)),
        "signature": replace(note, signature=_flip_sig(note.signature)),
    }
    for name, bad in note_tampers.items():
        v = verify_note(bad, pub, rng)
        if v or v.step != "signature":
            failures.append(f"note {name}: {v}")

    alice, bob, ledger = _coin_actors(80)
    coin, _ = mint_bitcoin(alice, bob, 6, "S-01")
    other, _ = mint_bitcoin(alice, bob, 6, "S-02")
    unpublished = verify_bitcoin(coin, ledger, rng)
    if unpublished or unpublished.step != "ledger":
        failures.append(f"unpublished serial: {unpublished}")
    ledger.publish(["S-01", "S-02"])
    if not verify_bitcoin(coin, ledger, rng):
        failures.append("honest coin rejected")
    p1, p2 = coin.part1, coin.part2
    coin_tampers = {
        "S_r": (replace(coin, part1=replace(p1, serial="S-02")), "signature"),
        "S_r unknown": (replace(coin, part1=replace(p1, serial="S-0X")), "ledger"),
        "G": (replace(coin, part1=replace(p1, program=GateProgram(p1.program.ops + (Gate("X", (0,)),)))), "signature"),
        "sig1": (replace(coin, part1=replace(p1, sig1=_flip_sig(p1.sig1))), "signature"),
        "sig2": (replace(coin, part2=replace(p2, sig2=_flip_sig(p2.sig2))), "signature"),
        "L": (replace(coin, part2=replace(p2, image=_flip_image(p2.image))), "signature"),
        "F": (replace(coin, part2=replace(p2, description=_flip_description(p2.description))), "signature"),
    }
    for name, (bad, step) in coin_tampers.items():
        v = verify_bitcoin(bad, ledger, rng)
        if v or v.step != step:
            failures.append(f"coin {name}: {v}")
    ok = not failures
    criterion("8", ok, f"honest note+coin accept, {len(note_tampers) + len(coin_tampers)} tampers and unpublished serial "
                       f"reject at their steps ({len(failures)} failures)")
    assert ok, failures


def test_c8_swapped_state_rejection(criterion):
    trials = 1000
    root = random.Random(88)
    priv, pub = DEFAULT_SCHEME.keygen(root)
    note_rejects = 0
    for _ in range(trials):
        rng = random.Random(root.getrandbits(64))
        note = mint_note(priv, "1", 6, rng)
        note.state = random_gch_state(6, rng=rng)
        note_rejects += not verify_note(note, pub, rng)
    coin_rejects = 0
    for i in range(trials):
        rng = random.Random(root.getrandbits(64))
        alice, bob, ledger = _coin_actors(rng.getrandbits(64))
        coin, _ = mint_bitcoin(alice, bob, 6, f"S{i}")
        ledger.publish([f"S{i}"])
        coin.part2.state = random_gch_state(6, rng=rng)
        coin_rejects += not verify_bitcoin(coin, ledger, rng)
    ok = note_rejects >= 0.99 * trials and coin_rejects >= 0.99 * trials
    criterion("8", ok, f"swapped random state n=6: notes rejected {note_rejects}/{trials}, "
                       f"coins rejected {coin_rejects}/{trials} (need >= 99%)")
    assert ok


# 9 -------------------------------------------------------------------------


def test_c9_serialization(criterion, tmp_path):
    mismatches = []
    rng = random.Random(9)
    for n in (2, 5, 8, 11):
        s = random_gch_state(n, rng=rng)
        if encode_state(decode_state(encode_state(s))) != encode_state(s):
            mismatches.append("state")
    psi = random_gch_state(8, even_ghz_only=True, rng=rng)
    ev = evaluate(psi, rng=rng)
    d, i = encode_description(ev.description), encode_image(ev.image)
    if encode_description(decode_description(d)) != d:
        mismatches.append("description")
    if encode_image(decode_image(i, ev.description)) != i:
        mismatches.append("image")
    priv, _ = DEFAULT_SCHEME.keygen(rng)
    note = mint_note(priv, "50", 6, rng)
    for include in (False, True):
        text = encode_note(note, include_state=include)
        if encode_note(decode_note(text), include_state=include) != text:
            mismatches.append("note")
    ledger_path = tmp_path / "ledger.jsonl"
    alice, bob, ledger = _coin_actors(9, Ledger(ledger_path))
    coin, _ = mint_bitcoin(alice, bob, 6, "S-9")
    mint_bitcoin(alice, bob, 6, "S-10")
    ledger.publish(["S-9", "S-10"])
    text = encode_coin(coin)
    if encode_coin(decode_coin(text)) != text:
        mismatches.append("coin")
    raw = ledger_path.read_text(encoding="utf-8")
    if Ledger.load(ledger_path).published_text() != raw or any(
        LedgerEntry.from_line(line).to_line() != line for line in raw.splitlines()
    ):
        mismatches.append("ledger")

    sizes = {}
    for n in (4, 8):
        vals = []
        for seed in range(10):
            r = random.Random(seed)
            ev = evaluate(random_gch_state(n, even_ghz_only=True, rng=r), rng=r)
            vals.append(len(encode_description(ev.description)))
        sizes[n] = np.mean(vals)
    ratio = sizes[8] / sizes[4]
    ok = not mismatches and 8 / 4 <= ratio <= 8 * 4
    criterion("9", ok, f"roundtrips: {len(mismatches)} mismatches; description size ratio n=8/n=4 = {ratio:.2f} "
                       f"(cubic 8, allowed [2, 32])")
    assert ok, mismatches


# 10 ------------------------------------------------------------------------


def _artifacts(seed):
    rng = random.Random(seed)
    psi = random_gch_state(8, rng=rng)
    ev = evaluate(psi, rng=rng)
    verdict = verify(random_gch_state(8, rng=rng), ev.description, ev.image, rng)
    alice, bob, ledger = _coin_actors(seed)
    coin, entry = mint_bitcoin(alice, bob, 6, "S")
    ledger.publish(["S"])
    return "\n".join([
        encode_description(ev.description),
        encode_image(ev.image),
        json.dumps([verdict.accepted, list(verdict.observed.segments)]),
        encode_coin(coin),
        entry.to_line(),
        str(verify_bitcoin(coin, ledger, random.Random(seed))),
        random_guess_forgery(4, 300, seed).to_json(),
        non_gch_probe(4, 50, seed).to_json(),
        image_census(4, seed).to_json(),
    ])


def test_c10_determinism(criterion):
    same = all(_artifacts(s) == _artifacts(s) for s in (10, 11))
    differs = _artifacts(10) != _artifacts(11)
    ok = same and differs
    criterion("10", ok, f"repeat runs byte-identical: {same}; different seeds differ: {differs}")
    assert ok
