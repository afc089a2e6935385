"""Record auditing shared by the unit and acceptance suites."""


from qowf.gch import GchRegister
from qowf.owf import SYMBOLS, cnot_bound, cnot_count


def audit_record(record, state):
    """Return a list of invariant violations for one UnitaryRecord built from ``state``."""
    n = state.n
    problems = []
    usage: dict[tuple[int, int], list] = {}

    def key(c):
        return (min(c), max(c))

    for gate in record.gates[: record.phase1_gates]:
        for c in gate.cnots:
            usage.setdefault(key(c), []).append(c)
    if any(len(v) > 1 for v in usage.values()):
        problems.append("pair reused during the saturation phase")
    saturated = {q for k in usage for q in k}
    if saturated != set(range(n)):
        problems.append(f"unsaturated positions after saturation phase: {set(range(n)) - saturated}")

    for gate in record.gates[record.phase1_gates:]:
        for c in gate.cnots:
            prior = usage.get(key(c), [])
            if len(prior) > 1:
                problems.append(f"CF on pair {key(c)} already used twice")
            elif prior and (prior[0].control, prior[0].target) != (c.target, c.control):
                problems.append(f"CF on {c} does not flip roles of {prior[0]}")
            usage.setdefault(key(c), []).append(c)
    if len(record.gates) - record.phase1_gates not in (1, 2):
        problems.append("expected an optional parity gate plus a termination gate")

    term = record.termination.cnots
    covered = sorted(q for c in term for q in c)
    if covered != list(range(n)):
        problems.append("termination does not partition the positions")
    if len(record.marks) not in (n // 2, n // 2 - 1):
        problems.append(f"{len(record.marks)} marks")
    measured = [m.pos for m in record.measurement]
    if len(measured) != n // 2 - 1 or measured != sorted(measured) or not set(measured) <= set(record.marks):
        problems.append("measurement positions are not n/2-1 sorted marks")
    hidden = [c for c in term if c.control not in measured and c.target not in measured]
    if hidden != [record.hidden_cnot]:
        problems.append(f"hidden CNOTs {hidden}")

    reg = GchRegister.from_state(state)
    for gate in record.gates:
        for c in gate.cnots:
            if not reg.compatible(*c):
                problems.append(f"incompatible {c}")
                return problems
            reg.cnot(*c)
    for m, s in zip(record.measurement, record.symbols):
        if reg.kind[m.pos] != m.basis or SYMBOLS[m.basis][reg.val[m.pos]] != s:
            problems.append(f"measured position {m.pos} not in basis {m.basis} with symbol {s}")

    if cnot_count(record) > cnot_bound(n) // n:
        problems.append("iteration exceeds its share of the CNOT budget")
    if cnot_count(record.published()) != cnot_count(record) - 1:
        problems.append("published iteration must drop exactly one CNOT")
    return problems


def random_state(n, rng, phases=True):
    """Random GCH state with random labels and, optionally, random group phases."""
    from qowf.gch import gch_state, random_gch_state

    base = random_gch_state(n, rng=rng)
    bits = {p: d.value for p, d in enumerate(base.qubits) if base.tag(p) == "C"}
    signs = {p: d.sign for p, d in enumerate(base.qubits) if base.tag(p) == "H"}
    groups = [
        (g.members, [rng.getrandbits(1) for _ in g.members], rng.choice((1, -1)) if phases else 1)
        for g in base.groups
    ]
    return gch_state(n, bits=bits, signs=signs, groups=groups)


def differential_case(op, rng, n_range=(2, 10)):
    """One randomized symbolic-vs-dense comparison; returns None on agreement, else a message."""
    from qowf.dense import dense_apply, outcome_probabilities, project, to_statevector, vectors_equal_up_to_phase
    from qowf.gch import Gate, apply_cnot, apply_single, is_compatible, measure

    n = rng.randint(*n_range)
    state = random_state(n, rng)
    vec = to_statevector(state)
    if op == "CNOT":
        pairs = [(c, t) for c in range(n) for t in range(n) if c != t and is_compatible(state, c, t)]
        c, t = rng.choice(pairs)
        got = to_statevector(apply_cnot(state, c, t))
        want = dense_apply(vec, Gate("CNOT", (c, t)))
        return None if vectors_equal_up_to_phase(got, want) else f"CNOT({c},{t}) on {state}"
    if op in ("X", "Z", "H"):
        choices = [p for p in range(n) if op != "H" or state.tag(p) != "G"]
        if not choices:
            return differential_case(op, rng, n_range)
        p = rng.choice(choices)
        got = to_statevector(apply_single(state, op, p))
        want = dense_apply(vec, Gate(op, (p,)))
        return None if vectors_equal_up_to_phase(got, want) else f"{op}({p}) on {state}"
    if op == "measure":
        p, basis = rng.randrange(n), rng.choice("CH")
        outcome, post = measure(state, p, basis, rng)
        prob, want = project(vec, p, basis, outcome)
        if want is None or not vectors_equal_up_to_phase(to_statevector(post), want):
            return f"measure({p},{basis}) -> {outcome} on {state}"
        p0, p1 = outcome_probabilities(vec, p, basis)
        deterministic = state.tag(p) == basis
        if deterministic != (min(p0, p1) < 1e-9):
            return f"determinism mismatch at {p},{basis} on {state}"
        if not deterministic and abs(p0 - 0.5) > 1e-9:
            return f"non-uniform outcome at {p},{basis} on {state}"
        return None
    raise ValueError(op)


def exact_accept_probability(state, description, image):
    """Dense oracle: probability that verify's measurements reproduce ``image`` exactly."""
    from qowf.dense import dense_apply, project, to_statevector
    from qowf.gch import Gate, GchState

    vec = to_statevector(state) if isinstance(state, GchState) else state
    prob = 1.0
    for it, seg in zip(description.iters, image.segments):
        for c in it.cnots():
            vec = dense_apply(vec, Gate("CNOT", tuple(c)))
        for m, s in sorted(zip(it.measure, seg)):
            p, vec = project(vec, m.pos, m.basis, s)
            if vec is None:
                return 0.0
            prob *= p
        for c in reversed(it.cnots()):
            vec = dense_apply(vec, Gate("CNOT", tuple(c)))
    return prob
