"""Brute-force statevector backend.

Amplitudes are indexed with position 0 as the most significant bit.  This
module never consults the symbolic update rules of :mod:`qowf.gch`; states are
expanded straight from their defining tensor-product formula, so it can serve
as an independent oracle.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from qowf.errors import InvalidArgumentsError, ResourceLimitError, UnsupportedGateError
from qowf.gch import CBit, Gate, GchState, HSign

DENSE_LIMIT = 14
NORM_TOL = 1e-9
EQUAL_TOL = 1e-9

_SQRT_HALF = np.sqrt(0.5)


@dataclass(frozen=True, eq=False)
class DenseVector:
    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (2**self.n,):
            raise InvalidArgumentsError(f"expected {2**self.n} amplitudes")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n)


def _guard(n: int) -> None:
    if n > DENSE_LIMIT:
        raise ResourceLimitError(f"dense backend is limited to n <= {DENSE_LIMIT}, got {n}")


def basis_vector(bits: str) -> DenseVector:
    n = len(bits)
    _guard(n)
    amps = np.zeros(2**n, dtype=complex)
    amps[int(bits, 2)] = 1.0
    return DenseVector(n, amps)


def to_statevector(state: GchState) -> DenseVector:
    n = state.n
    _guard(n)
    idx = np.arange(2**n)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    amps = np.ones(2**n, dtype=complex)
    for pos, d in enumerate(state.qubits):
        if isinstance(d, CBit):
            amps *= bits[:, pos] == d.value
        elif isinstance(d, HSign):
            amps *= np.where(bits[:, pos] == 1, d.sign, 1) * _SQRT_HALF
    for g in state.groups:
        cols = bits[:, list(g.members)]
        y = np.array(g.labels)
        on_y = np.all(cols == y, axis=1)
        on_ybar = np.all(cols == 1 - y, axis=1)
        amps *= (on_y + g.phase * on_ybar) * _SQRT_HALF
    return DenseVector(n, amps)


def _axis(n: int, pos: int) -> int:
    if not 0 <= pos < n:
        raise InvalidArgumentsError(f"position {pos} out of range for n={n}")
    return pos


def dense_apply(vec: DenseVector, gate: Gate) -> DenseVector:
    n = vec.n
    psi = vec.tensor().copy()
    if gate.name == "CNOT":
        c, t = (_axis(n, q) for q in gate.qubits)
        if c == t:
            raise InvalidArgumentsError("control and target must differ")
        sel = [slice(None)] * n
        sel[c] = 1
        sub = psi[tuple(sel)]
        psi[tuple(sel)] = np.flip(sub, axis=t - (t > c))
    elif gate.name == "X":
        psi = np.flip(psi, axis=_axis(n, gate.qubits[0])).copy()
    elif gate.name == "Z":
        sel = [slice(None)] * n
        sel[_axis(n, gate.qubits[0])] = 1
        psi[tuple(sel)] *= -1
    elif gate.name == "H":
        p = _axis(n, gate.qubits[0])
        a0, a1 = np.take(psi, 0, axis=p), np.take(psi, 1, axis=p)
        psi = np.stack(((a0 + a1) * _SQRT_HALF, (a0 - a1) * _SQRT_HALF), axis=p)
    else:
        raise UnsupportedGateError(f"unknown gate {gate.name!r}")
    return DenseVector(n, psi.reshape(-1))


def outcome_probabilities(vec: DenseVector, pos: int, basis: str) -> tuple[float, float]:
    """Born probabilities of ("0", "1") for basis C or ("+", "-") for basis H."""
    if basis == "H":
        vec = dense_apply(vec, Gate("H", (pos,)))
    elif basis != "C":
        raise InvalidArgumentsError(f"basis must be 'C' or 'H', got {basis!r}")
    psi = vec.tensor()
    p0 = float(np.sum(np.abs(np.take(psi, 0, axis=_axis(vec.n, pos))) ** 2))
    p1 = float(np.sum(np.abs(np.take(psi, 1, axis=pos)) ** 2))
    return p0, p1


def project(vec: DenseVector, pos: int, basis: str, symbol: str) -> tuple[float, DenseVector | None]:
    """Probability of ``symbol`` and the renormalized post-measurement vector."""
    bit = {"0": 0, "1": 1, "+": 0, "-": 1}[symbol]
    work = dense_apply(vec, Gate("H", (pos,))) if basis == "H" else vec
    psi = work.tensor().copy()
    sel = [slice(None)] * vec.n
    sel[_axis(vec.n, pos)] = 1 - bit
    psi[tuple(sel)] = 0
    prob = float(np.sum(np.abs(psi) ** 2))
    if prob < 1e-15:
        return 0.0, None
    out = DenseVector(vec.n, psi.reshape(-1) / np.sqrt(prob))
    if basis == "H":
        out = dense_apply(out, Gate("H", (pos,)))
    return prob, out


def dense_measure(vec: DenseVector, pos: int, basis: str, rng: random.Random) -> tuple[str, DenseVector]:
    symbols = ("0", "1") if basis == "C" else ("+", "-")
    p0, _ = outcome_probabilities(vec, pos, basis)
    p0 /= vec.norm**2
    if p0 > 1 - 1e-12:
        pick = 0
    elif p0 < 1e-12:
        pick = 1
    else:
        pick = 0 if rng.random() < p0 else 1
    _, out = project(vec, pos, basis, symbols[pick])
    return symbols[pick], out


def vectors_equal_up_to_phase(a: DenseVector, b: DenseVector, tol: float = EQUAL_TOL) -> bool:
    if a.n != b.n:
        raise InvalidArgumentsError(f"size mismatch: {a.n} vs {b.n}")
    return abs(np.vdot(a.amplitudes, b.amplitudes)) >= 1 - tol


def haar_random(n: int, rng: np.random.Generator) -> DenseVector:
    _guard(n)
    amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return DenseVector(n, amps / np.linalg.norm(amps))
