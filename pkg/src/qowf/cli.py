"""Command-line front end.

Exit codes: 0 accept/success, 1 reject, 2 usage error, 3 parse/format error.
Secret state files are written separately from the public (F, C) files; the
verify commands read the state file as the stand-in for the quantum channel.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from qowf import attacks
from qowf.errors import FormatError, LedgerError, ParseError, QowfError
from qowf.gch import decode_state, encode_state, random_gch_state
from qowf.money import (
    DEFAULT_SCHEME,
    STRUCTURE_AWARE,
    UNIVERSAL_SAFE,
    Alice,
    Bob,
    Channel,
    Ledger,
    LedgerEntry,
    decode_coin,
    decode_note,
    encode_coin,
    encode_note,
    key_from_text,
    key_to_text,
    mint_bitcoin,
    mint_note,
    verify_bitcoin,
    verify_note,
)
from qowf.owf import decode_description, decode_image, encode_description, encode_image, evaluate, verify

EXIT_ACCEPT, EXIT_REJECT, EXIT_USAGE, EXIT_PARSE = 0, 1, 2, 3


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text + "\n", encoding="utf-8")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_state(args) -> int:
    state = random_gch_state(args.n, args.even, random.Random(args.seed))
    text = encode_state(state)
    if args.out:
        _write(Path(args.out), text)
    else:
        print(text)
    return EXIT_ACCEPT


def cmd_owf_eval(args) -> int:
    rng = random.Random(args.seed)
    state = decode_state(_read(args.state)) if args.state else random_gch_state(args.n, rng=rng)
    ev = evaluate(state, args.iterations, rng, keep_hidden=args.keep_hidden)
    out = _out_dir(args)
    _write(out / "state.json", encode_state(ev.state))
    _write(out / "description.json", encode_description(ev.description))
    _write(out / "image.json", encode_image(ev.image))
    print(encode_image(ev.image))
    return EXIT_ACCEPT


def cmd_owf_verify(args) -> int:
    state = decode_state(_read(args.state))
    desc = decode_description(_read(args.desc))
    image = decode_image(_read(args.image), desc)
    result = verify(state, desc, image, random.Random(args.seed))
    print(json.dumps({"observed": list(result.observed.segments), "accepted": result.accepted}, sort_keys=True))
    return EXIT_ACCEPT if result.accepted else EXIT_REJECT


def cmd_mint_note(args) -> int:
    rng = random.Random(args.seed)
    priv, pub = DEFAULT_SCHEME.keygen(rng)
    note = mint_note(priv, args.denom, args.n, rng, iterations=args.iterations)
    out = _out_dir(args)
    _write(out / "note.json", encode_note(note))
    _write(out / "note_secret.json", encode_note(note, include_state=True))
    _write(out / "bank_pub.json", key_to_text(pub))
    return EXIT_ACCEPT


def cmd_verify_note(args) -> int:
    note = decode_note(_read(args.note))
    if args.state:
        note.state = decode_state(_read(args.state))
    if note.state is None:
        raise ParseError("note.state", "no quantum state supplied (use --state or a secret note file)")
    verdict = verify_note(note, key_from_text(_read(args.pub)), random.Random(args.seed))
    print(json.dumps({"accepted": verdict.accepted, "step": verdict.step, "reason": verdict.reason}, sort_keys=True))
    return EXIT_ACCEPT if verdict else EXIT_REJECT


def cmd_mint_coin(args) -> int:
    pending_path = Path(args.pending)
    ledger = Ledger.load(args.ledger) if args.ledger else Ledger()
    for line in pending_path.read_text(encoding="utf-8").splitlines() if pending_path.exists() else []:
        if line.strip():
            ledger.record(LedgerEntry.from_line(line))
    root = random.Random(args.seed)
    channel = Channel()
    alice = Alice("alice", channel, random.Random(root.getrandbits(64)), ledger=ledger)
    bob = Bob("bob", channel, random.Random(root.getrandbits(64)))
    coin, entry = mint_bitcoin(alice, bob, args.n, args.serial, args.mode)
    _write(Path(args.out), encode_coin(coin))
    with pending_path.open("a", encoding="utf-8") as fh:
        fh.write(entry.to_line() + "\n")
    return EXIT_ACCEPT


def cmd_ledger_publish(args) -> int:
    ledger = Ledger.load(args.ledger)
    batch = []
    for line in _read(args.pending).splitlines():
        if line.strip():
            entry = LedgerEntry.from_line(line)
            if args.serial and entry.serial not in args.serial:
                continue
            ledger.record(entry)
            batch.append(entry.serial)
    ledger.publish(batch)
    print(json.dumps({"published": batch}))
    return EXIT_ACCEPT


def cmd_verify_coin(args) -> int:
    coin = decode_coin(_read(args.coin))
    ledger = Ledger.load(args.ledger)
    verdict = verify_bitcoin(coin, ledger, random.Random(args.seed))
    print(json.dumps({"accepted": verdict.accepted, "step": verdict.step, "reason": verdict.reason}, sort_keys=True))
    return EXIT_ACCEPT if verdict else EXIT_REJECT


def cmd_attack(args) -> int:
    if args.mode == "forgery":
        report = attacks.random_guess_forgery(args.n, args.trials, args.seed, iterations=args.iterations)
    elif args.mode == "image-census":
        report = attacks.image_census(args.n, args.seed)
    elif args.mode == "preimage-census":
        report = attacks.preimage_census(args.n, args.seed)
    else:
        report = attacks.non_gch_probe(args.n, args.trials, args.seed)
    text = report.to_json()
    if args.out:
        _write(Path(args.out), text)
    print(text)
    return EXIT_ACCEPT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qowf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-state", help="sample a random GCH state")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--even", action="store_true", help="only even-sized GHZ groups")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_state)

    p = sub.add_parser("owf-eval", help="evaluate the OWF; writes state.json, description.json, image.json")
    p.add_argument("--n", type=int)
    p.add_argument("--state", help="input state file (default: random state of size --n)")
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--iterations", type=int)
    p.add_argument("--keep-hidden", action="store_true", help="publish the hidden termination CNOT too")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_owf_eval)

    p = sub.add_parser("owf-verify", help="verify a state against (F, C)")
    p.add_argument("--state", required=True)
    p.add_argument("--desc", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--seed", type=_seed, default=0)
    p.set_defaults(func=cmd_owf_verify)

    p = sub.add_parser("mint-note", help="mint a currency note; writes note.json, note_secret.json, bank_pub.json")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--denom", required=True)
    p.add_argument("--iterations", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mint_note)

    p = sub.add_parser("verify-note", help="verify a currency note")
    p.add_argument("--note", required=True)
    p.add_argument("--pub", required=True)
    p.add_argument("--state", help="quantum state file if the note file carries none")
    p.add_argument("--seed", type=_seed, default=0)
    p.set_defaults(func=cmd_verify_note)

    p = sub.add_parser("mint-coin", help="two-miner bitcoin mint; appends the entry to the pending file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--serial", required=True)
    p.add_argument("--mode", choices=(UNIVERSAL_SAFE, STRUCTURE_AWARE), default=UNIVERSAL_SAFE)
    p.add_argument("--pending", required=True, help="miner's unpublished entries (JSON lines)")
    p.add_argument("--ledger", help="public ledger, checked for serial reuse")
    p.add_argument("--out", required=True, help="coin file")
    p.set_defaults(func=cmd_mint_coin)

    p = sub.add_parser("ledger-publish", help="append pending entries to the public ledger")
    p.add_argument("--pending", required=True)
    p.add_argument("--ledger", required=True)
    p.add_argument("--serial", action="append", help="publish only these serials")
    p.set_defaults(func=cmd_ledger_publish)

    p = sub.add_parser("verify-coin", help="verify a quantum bitcoin against the public ledger")
    p.add_argument("--coin", required=True)
    p.add_argument("--ledger", required=True)
    p.add_argument("--seed", type=_seed, default=0)
    p.set_defaults(func=cmd_verify_coin)

    p = sub.add_parser("attack", help="run a security experiment")
    p.add_argument("--mode", required=True, choices=("forgery", "image-census", "preimage-census", "non-gch"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--iterations", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_attack)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_ACCEPT
    if args.command == "owf-eval" and not args.state and args.n is None:
        parser.print_usage(sys.stderr)
        print("owf-eval: one of --n or --state is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ParseError, FormatError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LedgerError as exc:
        print(f"ledger error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except QowfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
