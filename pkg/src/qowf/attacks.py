"""Desk-scale security experiments: forgery by random guessing, image and
preimage censuses over the full GCH family, and the non-GCH probe.

Every experiment is a pure function of its seed.  Per-trial randomness is
derived from a root ``random.Random(seed)`` so trials could be split across
workers and merged by summation without changing results.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np

from qowf.dense import haar_random, to_statevector
from qowf.errors import InvalidArgumentsError, InvalidSizeError, ResourceLimitError
from qowf.gch import EXTENDED, PLUS_ONLY, GchState, enumerate_gch_states, gch_state, random_gch_state
from qowf.owf import (
    SYMBOLS,
    IterationDescription,
    OwfDescription,
    OwfImage,
    build_owf_unitary,
    deterministic_image,
    encode_description,
    evaluate,
    undo,
    verify,
)

CENSUS_SIZES = (4, 6)
PROBE_LIMIT = 10


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def forgery_bound(n: int, iterations: int | None = None) -> float:
    iterations = n if iterations is None else iterations
    return (1 / 2 ** (n // 2 - 1)) ** (iterations - 1)


@dataclass
class ForgeryStats:
    experiment: str
    n: int
    trials: int
    deterministic_pass: int
    empirical_accept: int
    bound: float
    seed: int
    # candidates that fell outside the GCH family while inverting the guess
    left_family: int = field(default=0, compare=False)

    @property
    def deterministic_rate(self) -> float:
        return self.deterministic_pass / self.trials if self.trials else 0.0

    @property
    def accept_rate(self) -> float:
        return self.empirical_accept / self.trials if self.trials else 0.0

    def to_json(self) -> str:
        obj = asdict(self)
        del obj["left_family"]
        return _dumps(obj)

    @classmethod
    def from_json(cls, text: str) -> "ForgeryStats":
        return cls(**json.loads(text))


@lru_cache(maxsize=None)
def gch_family(n: int, phase_mode: str = EXTENDED) -> tuple[GchState, ...]:
    return tuple(enumerate_gch_states(n, phase_mode))


def _embed(local: GchState, positions: list[int], fixed: dict[int, str], n: int) -> GchState:
    """Place ``local`` on ``positions`` and the symbols in ``fixed`` elsewhere."""
    bits, signs, groups = {}, {}, []
    for pos, sym in fixed.items():
        if sym in "01":
            bits[pos] = int(sym)
        else:
            signs[pos] = 1 if sym == "+" else -1
    for i, d in enumerate(local.qubits):
        tag = local.tag(i)
        if tag == "C":
            bits[positions[i]] = d.value
        elif tag == "H":
            signs[positions[i]] = d.sign
    for g in local.groups:
        groups.append(([positions[m] for m in g.members], g.labels, g.phase))
    return gch_state(n, bits=bits, signs=signs, groups=groups)


def forge_candidate(n: int, iteration: IterationDescription, segment: str, rng: random.Random):
    """Adversary's guess for one published iteration, pulled back through its gates."""
    measured = {m.pos: s for m, s in zip(iteration.measure, segment)}
    free = [p for p in range(n) if p not in measured]
    family = gch_family(len(free), EXTENDED)
    guess = _embed(family[rng.randrange(len(family))], free, measured, n)
    return undo(guess, iteration)


def random_guess_forgery(
    n: int,
    trials: int,
    seed: int,
    adversary: str = "random",
    iterations: int | None = None,
) -> ForgeryStats:
    """Success of forging by guessing the unrevealed qubits of one iteration.

    ``adversary="genuine"`` hands back the honest state and serves as a sanity leg.
    """
    if n % 2 or n < 4:
        raise InvalidSizeError(f"forgery experiment needs an even n >= 4, got {n}")
    if adversary not in ("random", "genuine"):
        raise InvalidArgumentsError(f"unknown adversary {adversary!r}")
    root = random.Random(seed)
    det = acc = left = 0
    for _ in range(trials):
        rng = random.Random(root.getrandbits(64))
        psi = random_gch_state(n, rng=rng)
        ev = evaluate(psi, iterations, rng)
        desc, image = ev.description, ev.image
        if adversary == "genuine":
            phi = psi
        else:
            j = rng.randrange(len(desc.iters))
            phi = forge_candidate(n, desc.iters[j], image.segments[j], rng)
        left += not isinstance(phi, GchState)
        det_ok = all(deterministic_image(phi, it) == seg for it, seg in zip(desc.iters, image.segments))
        acc_ok = verify(phi, desc, image, rng).accepted
        det += det_ok
        acc += acc_ok
    return ForgeryStats(
        "forgery" if adversary == "random" else "forgery-genuine",
        n, trials, det, acc, forgery_bound(n, iterations), seed, left,
    )


# ---------------------------------------------------------------------------
# censuses


def basis_consistent_strings(iteration: IterationDescription) -> set[str]:
    return {"".join(s) for s in product(*(SYMBOLS[m.basis] for m in iteration.measure))}


def _fixed_iteration(n: int, seed: int):
    if n not in CENSUS_SIZES:
        raise ResourceLimitError(f"censuses run only for n in {CENSUS_SIZES}, got {n}")
    rng = random.Random(seed)
    psi = random_gch_state(n, rng=rng)
    _, iteration, segment, _ = build_owf_unitary(psi, rng)
    return psi, iteration, segment


def _images(iteration: IterationDescription, states) -> list[str | None]:
    return [deterministic_image(s, iteration) for s in states]


@dataclass
class ImageCensus:
    n: int
    seed: int
    description: str
    bases: str
    plus_only: list[str]
    extended: list[str]
    expected: int
    consistent: list[str]

    @property
    def complete(self) -> bool:
        """Images over the full family (both group phases) are exactly the basis-consistent strings."""
        return set(self.extended) == set(self.consistent) and len(self.extended) == self.expected

    @property
    def plus_only_complete(self) -> bool:
        return set(self.plus_only) == set(self.consistent)

    def to_json(self) -> str:
        obj = asdict(self)
        obj["experiment"] = "image-census"
        obj["plus_only_count"] = len(self.plus_only)
        obj["extended_count"] = len(self.extended)
        obj["complete"] = self.complete
        return _dumps(obj)


def _census_data(n: int, seed: int):
    psi, iteration, segment = _fixed_iteration(n, seed)
    family = gch_family(n, EXTENDED)
    return psi, iteration, segment, family, _images(iteration, family)


def _image_report(n, seed, iteration, family, images) -> ImageCensus:
    ext = {im for im in images if im is not None}
    plus = {
        im for im, s in zip(images, family)
        if im is not None and all(g.phase == 1 for g in s.groups)
    }
    return ImageCensus(
        n, seed,
        encode_description_iteration(n, iteration),
        "".join(m.basis for m in iteration.measure),
        sorted(plus), sorted(ext),
        2 ** (n // 2 - 1),
        sorted(basis_consistent_strings(iteration)),
    )


def image_census(n: int, seed: int) -> ImageCensus:
    """All deterministic images one fixed iteration can produce over the GCH family."""
    _, iteration, _, family, images = _census_data(n, seed)
    return _image_report(n, seed, iteration, family, images)


def encode_description_iteration(n: int, iteration: IterationDescription) -> str:
    return encode_description(OwfDescription(n, (iteration,)))


@dataclass
class PreimageCensus:
    n: int
    seed: int
    segment: str
    preimages: int
    plus_only_preimages: int
    threshold: int
    genuine_counted: bool

    def to_json(self) -> str:
        obj = asdict(self)
        obj["experiment"] = "preimage-census"
        return _dumps(obj)


def _preimage_report(n, seed, psi, segment, family, images) -> PreimageCensus:
    hits = [s for s, im in zip(family, images) if im == segment]
    plus = sum(all(g.phase == 1 for g in s.groups) for s in hits)
    return PreimageCensus(n, seed, segment, len(hits), plus, 2 ** (n // 2), psi in set(hits))


def preimage_census(n: int, seed: int) -> PreimageCensus:
    """Count GCH states whose deterministic image under a fixed iteration matches."""
    psi, _, segment, family, images = _census_data(n, seed)
    return _preimage_report(n, seed, psi, segment, family, images)


def census(n: int, seed: int) -> tuple[ImageCensus, PreimageCensus]:
    """Both censuses for the same fixed iteration from a single enumeration pass."""
    psi, iteration, segment, family, images = _census_data(n, seed)
    return (
        _image_report(n, seed, iteration, family, images),
        _preimage_report(n, seed, psi, segment, family, images),
    )


# ---------------------------------------------------------------------------
# non-GCH probe


@dataclass
class ProbeReport:
    n: int
    trials: int
    deterministic_pass: int
    empirical_accept: int
    seed: int
    control_pass: bool | None = None

    @property
    def rate(self) -> float:
        return self.deterministic_pass / self.trials if self.trials else 0.0

    def to_stats(self) -> ForgeryStats:
        return ForgeryStats("non-gch", self.n, self.trials, self.deterministic_pass, self.empirical_accept, 0.0, self.seed)

    def to_json(self) -> str:
        return self.to_stats().to_json()


def non_gch_probe(n: int, trials: int, seed: int, inject_control: bool = False) -> ProbeReport:
    """Haar-random states against one published iteration, on the dense backend.

    With ``inject_control`` the honest input is also checked and must pass.
    """
    if n > PROBE_LIMIT:
        raise ResourceLimitError(f"probe is limited to n <= {PROBE_LIMIT}")
    if n % 2 or n < 4:
        raise InvalidSizeError(f"probe needs an even n >= 4, got {n}")
    rng = random.Random(seed)
    psi = random_gch_state(n, rng=rng)
    record, iteration, segment, _ = build_owf_unitary(psi, rng)
    desc, image = OwfDescription(n, (iteration,)), OwfImage((segment,))
    nprng = np.random.default_rng(rng.getrandbits(64))
    det = acc = 0
    for _ in range(trials):
        vec = haar_random(n, nprng)
        det += deterministic_image(vec, iteration) == segment
        acc += verify(vec, desc, image, rng).accepted
    control = None
    if inject_control:
        control = deterministic_image(to_statevector(psi), iteration) == segment
    return ProbeReport(n, trials, det, acc, seed, control)
