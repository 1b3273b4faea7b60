"""Benchmark instance generators.

Three families live here: the linear-size queries whose acyclic
overapproximations blow up exponentially, the tournaments used to show
that overapproximations can fail to exist at every lower width, and a
small corpus of named worked examples shared by the test suite and the
command line tool.
"""

from dataclasses import dataclass
from itertools import combinations

from .model import (
    Atom,
    ConjunctiveQuery,
    Const,
    CqError,
    Database,
    Term,
    Var,
    gaifman,
)

CORPUS_VERSION = 1

# beyond this the doubling family stops being desk-sized (2^17 atoms)
_QPRIME_CAP = 16


def gen_qn(n: int) -> ConjunctiveQuery:
    """Linear-size member of the blowup family.

    The query chains ternary atoms R(x^j_i, x^1_{i+1}, x^2_{i+1}) together
    with their swapped twins, so it has 2 + 4(n-1) atoms but every acyclic
    overapproximation must spell out the full binary tree of choices.
    """
    if n < 1:
        raise CqError("gen_qn requires n >= 1")
    atoms = [
        Atom("R", (Var("x0"), Var("x1_1"), Var("x2_1"))),
        Atom("R", (Var("x0"), Var("x2_1"), Var("x1_1"))),
    ]
    for i in range(1, n):
        a = Var(f"x1_{i + 1}")
        b = Var(f"x2_{i + 1}")
        for j in (1, 2):
            src = Var(f"x{j}_{i}")
            atoms.append(Atom("R", (src, a, b)))
            atoms.append(Atom("R", (src, b, a)))
    return ConjunctiveQuery((), tuple(atoms))


def gen_qn_prime(n: int) -> ConjunctiveQuery:
    """The acyclic overapproximation of gen_qn(n): a full binary tree.

    Variables are indexed by words over {1,2}; the root is y0.  The
    result has 2(2^n - 1) atoms, which is why n is capped.
    """
    if n < 1:
        raise CqError("gen_qn_prime requires n >= 1")
    if n > _QPRIME_CAP:
        raise CqError(f"gen_qn_prime is capped at n <= {_QPRIME_CAP}")
    atoms = [
        Atom("R", (Var("y0"), Var("y1"), Var("y2"))),
        Atom("R", (Var("y0"), Var("y2"), Var("y1"))),
    ]
    words = ["1", "2"]
    for _ in range(1, n):
        nxt = []
        for w in words:
            src = Var(f"y{w}")
            a = Var(f"y{w}1")
            b = Var(f"y{w}2")
            atoms.append(Atom("R", (src, a, b)))
            atoms.append(Atom("R", (src, b, a)))
            nxt.extend((w + "1", w + "2"))
        words = nxt
    return ConjunctiveQuery((), tuple(atoms))


@dataclass(frozen=True)
class Tournament:
    """A directed graph with exactly one orientation per node pair.

    Nodes are 1..size; an edge (i, j) reads "an arc from v_i to v_j".
    """

    size: int
    edges: frozenset

    def __post_init__(self):
        if self.size < 1:
            raise CqError("a tournament needs at least one node")
        seen = set()
        for a, b in self.edges:
            if not (1 <= a <= self.size and 1 <= b <= self.size) or a == b:
                raise CqError(f"edge ({a},{b}) is out of range")
            pair = frozenset((a, b))
            if pair in seen:
                raise CqError(f"both orientations present between v{a} and v{b}")
            seen.add(pair)
        expected = self.size * (self.size - 1) // 2
        if len(seen) != expected:
            raise CqError("some node pair has no edge")

    @property
    def cyclic_base(self) -> bool:
        """Whether v1, v2, v3 induce a directed cycle."""
        if self.size < 3:
            return False
        e = self.edges
        return {(1, 2), (2, 3), (3, 1)} <= e or {(2, 1), (3, 2), (1, 3)} <= e

    def to_query(self) -> ConjunctiveQuery:
        atoms = tuple(
            Atom("E", (Var(f"v{a}"), Var(f"v{b}"))) for a, b in sorted(self.edges)
        )
        return ConjunctiveQuery((), atoms)

    def to_database(self) -> Database:
        facts = tuple(
            Atom("E", (Const(f"v{a}"), Const(f"v{b}"))) for a, b in sorted(self.edges)
        )
        return Database(facts)

    def to_dot(self) -> str:
        lines = ["digraph tournament {"]
        for i in range(1, self.size + 1):
            lines.append(f"  v{i};")
        for a, b in sorted(self.edges):
            lines.append(f"  v{a} -> v{b};")
        lines.append("}")
        return "\n".join(lines)


def conn(g: Tournament, v: int, block: frozenset) -> tuple:
    """Connection signature of node v against the node set `block`.

    Position p holds "#" when v_p is outside the block, 1 when the arc
    runs v -> v_p, and -1 when it runs v_p -> v.
    """
    sig = []
    for p in range(1, g.size + 1):
        if p not in block:
            sig.append("#")
        elif (v, p) in g.edges:
            sig.append(1)
        else:
            sig.append(-1)
    return tuple(sig)


def verify_dagger(g: Tournament) -> bool:
    """Exhaustively check the signature-clash condition on a tournament.

    For every block B with 2 <= |B| <= size-2 and every node v outside
    B, some other outside node must connect to B differently than v.
    Vacuously true on three or fewer nodes.
    """
    nodes = range(1, g.size + 1)
    for width in range(2, g.size - 1):
        for block in combinations(nodes, width):
            bset = frozenset(block)
            outside = [v for v in nodes if v not in bset]
            sigs = {v: conn(g, v, bset) for v in outside}
            for v in outside:
                if all(sigs[u] == sigs[v] for u in outside if u != v):
                    return False
    return True


_DAGGER_BASE_2 = frozenset({(1, 2), (2, 3), (3, 1)})
_DAGGER_BASE_3 = frozenset({(1, 2), (2, 3), (3, 1), (4, 1), (4, 2), (4, 3)})


def gen_dagger(k: int) -> Tournament:
    """Tournament on k+1 nodes satisfying the signature-clash condition.

    k = 2 and k = 3 are hand-picked seeds; larger instances add one node
    at a time, orienting each new edge against the successor arc of the
    node it meets.
    """
    if k < 2:
        raise CqError("gen_dagger requires k >= 2")
    if k == 2:
        return Tournament(3, _DAGGER_BASE_2)
    edges = set(_DAGGER_BASE_3)
    size = 4
    while size < k + 1:
        new = size + 1
        for i in range(1, size + 1):
            succ = i % size + 1
            if (i, succ) in edges:
                edges.add((new, i))
            else:
                edges.add((i, new))
        size = new
    return Tournament(size, frozenset(edges))


def _nonunique_qn(n: int) -> ConjunctiveQuery:
    """The n-th member of the incomparable-approximation family.

    A P_a-path of length n with P_b self-loops pinned to both endpoints;
    those loops keep it from mapping into the hexagon query.
    """
    atoms = [
        Atom("P_a", (Var(f"x{i}"), Var(f"x{i + 1}"))) for i in range(1, n + 1)
    ]
    atoms.append(Atom("P_b", (Var("x1"), Var("x1"))))
    atoms.append(Atom("P_b", (Var(f"x{n + 1}"), Var(f"x{n + 1}"))))
    return ConjunctiveQuery((), tuple(atoms))


def _path(n: int) -> ConjunctiveQuery:
    atoms = tuple(
        Atom("E", (Var(f"x{i}"), Var(f"x{i + 1}"))) for i in range(1, n + 1)
    )
    return ConjunctiveQuery((), atoms)


def corpus() -> dict:
    """Named worked examples, frozen for golden tests and the CLI."""
    fig1_q = ConjunctiveQuery(
        (),
        (
            Atom("P_a", (Var("x"), Var("y"))),
            Atom("P_a", (Var("y"), Var("x"))),
            Atom("P_a", (Var("y"), Var("z"))),
            Atom("P_a", (Var("z"), Var("y"))),
            Atom("P_b", (Var("z"), Var("x"))),
            Atom("P_b", (Var("x"), Var("z"))),
        ),
    )
    fig1_qprime = ConjunctiveQuery(
        (),
        (
            Atom("P_a", (Var("x"), Var("y1"))),
            Atom("P_a", (Var("y1"), Var("x"))),
            Atom("P_a", (Var("y2"), Var("z"))),
            Atom("P_a", (Var("z"), Var("y2"))),
            Atom("P_b", (Var("z"), Var("x"))),
            Atom("P_b", (Var("x"), Var("z"))),
        ),
    )
    triangle = ConjunctiveQuery(
        (),
        (
            Atom("E", (Var("x"), Var("y"))),
            Atom("E", (Var("y"), Var("z"))),
            Atom("E", (Var("z"), Var("x"))),
        ),
    )
    c2 = ConjunctiveQuery(
        (),
        (Atom("E", (Var("x"), Var("y"))), Atom("E", (Var("y"), Var("x")))),
    )
    loop = ConjunctiveQuery((), (Atom("E", (Var("x"), Var("x"))),))
    named = {
        "fig1_q": fig1_q,
        "fig1_qprime": fig1_qprime,
        "fig2_q": triangle,
        "fig2_qprime": gen_dagger(3).to_query(),
        "triangle": triangle,
        "c2": c2,
        "loop": loop,
        "path1": _path(1),
        "path2": _path(2),
        "path3": _path(3),
        "triangle_db": Database(
            (
                Atom("E", (Const("a"), Const("b"))),
                Atom("E", (Const("b"), Const("c"))),
                Atom("E", (Const("c"), Const("a"))),
            )
        ),
        "c2_db": Database(
            (
                Atom("E", (Const("a"), Const("b"))),
                Atom("E", (Const("b"), Const("a"))),
            )
        ),
    }
    for n in (1, 2, 3):
        qn = _nonunique_qn(n)
        named[f"nonunique_q{n}"] = ConjunctiveQuery(
            (), fig1_qprime.atoms + qn.atoms
        )
    return named


def gaifman_dot(q: ConjunctiveQuery) -> str:
    """DOT rendering of the co-occurrence graph of a query's variables."""
    g = gaifman(q)
    lines = ["graph gaifman {"]
    for v in sorted(q.variables, key=lambda t: t.name):
        lines.append(f"  {v.name};")
    for a, b in sorted(g.edges):
        lines.append(f"  {a.name} -- {b.name};")
    lines.append("}")
    return "\n".join(lines)
