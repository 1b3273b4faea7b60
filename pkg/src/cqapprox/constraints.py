"""Dependencies (tgds and egds), the chase, and reasoning under them.

The chase rewrites a query until it satisfies the dependencies: egds
identify variables (finite, unique result, with the witnessing
homomorphism h onto the result), tgds add atoms with fresh nulls in
fair breadth-first rounds up to a depth cap. Containment and
overapproximation evaluation under constraints reduce to homomorphism
and cover-game checks against the chased query; for guarded tgds and a
satisfying database the game can skip the chase entirely.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

from cqapprox.hom import Hom, find_hom
from cqapprox.model import (
    Atom,
    ConjunctiveQuery,
    CqError,
    Database,
    DependencyError,
    ParseError,
    Term,
    Var,
    _make_var,
    _parse_atom,
    _Tokens,
)
from cqapprox.pebble import wins_cover_game


class ChaseDepthWarning(UserWarning):
    """The tgd chase hit its round cap; verdicts use the chase prefix."""


@dataclass(frozen=True)
class Tgd:
    """forall x,y (body -> exists z head), z being the head-only variables."""

    body: tuple[Atom, ...]
    head: tuple[Atom, ...]

    def __post_init__(self):
        if not self.body or not self.head:
            raise DependencyError("a tgd needs a nonempty body and a nonempty head")

    @property
    def body_vars(self) -> frozenset[Term]:
        return frozenset(t for a in self.body for t in a.args)

    @property
    def head_vars(self) -> frozenset[Term]:
        return frozenset(t for a in self.head for t in a.args)

    @property
    def frontier(self) -> frozenset[Term]:
        """Variables shared between body and head."""
        return self.body_vars & self.head_vars

    @property
    def guarded(self) -> bool:
        """Some body atom mentions every body variable."""
        return any(self.body_vars <= a.arg_set for a in self.body)


@dataclass(frozen=True)
class Egd:
    """forall x (body -> y = z) with y, z occurring in the body."""

    body: tuple[Atom, ...]
    eq: tuple[Term, Term]

    def __post_init__(self):
        if not self.body:
            raise DependencyError("an egd needs a nonempty body")
        in_body = {t for a in self.body for t in a.args}
        for t in self.eq:
            if t not in in_body:
                raise DependencyError(f"equated variable {t.name} does not occur in the body")


@dataclass
class ChaseResult:
    query: ConjunctiveQuery
    hom_to_result: Hom
    complete: bool


# --- parsing -------------------------------------------------------------------
#
# One dependency per '.'-terminated statement, '#' comments allowed:
#   R(x,y), S(y,z) -> T(x,z), U(z,w).     head-only variables are existential
#   R(x,y,z), R(x,y2,z2) -> z = z2.


def _parse_one(ts: _Tokens) -> Tgd | Egd:
    body = [_parse_atom(ts, _make_var)]
    while ts.peek() == ",":
        ts.take(",")
        body.append(_parse_atom(ts, _make_var))
    ts.take("->")
    after_next = ts.items[ts.i + 1][0] if ts.i + 1 < len(ts.items) else ""
    if after_next == "=":
        line, col = ts.pos()
        y = _make_var(ts.take(), line, col)
        ts.take("=")
        line, col = ts.pos()
        z = _make_var(ts.take(), line, col)
        ts.take(".")
        try:
            return Egd(tuple(body), (y, z))
        except CqError as err:
            raise ParseError(str(err), line, col) from err
    head = [_parse_atom(ts, _make_var)]
    while ts.peek() == ",":
        ts.take(",")
        head.append(_parse_atom(ts, _make_var))
    ts.take(".")
    return Tgd(tuple(body), tuple(head))


def parse_dependency(text: str) -> Tgd | Egd:
    ts = _Tokens(text)
    dep = _parse_one(ts)
    if ts.peek():
        line, col = ts.pos()
        raise ParseError(f"trailing input {ts.peek()!r}", line, col)
    return dep


def parse_dependencies(text: str) -> tuple:
    """Parse a dependency file: any number of statements."""
    ts = _Tokens(text)
    out = []
    while ts.peek():
        out.append(_parse_one(ts))
    return tuple(out)


# --- satisfaction ----------------------------------------------------------


def _instance_atoms(inst) -> tuple[Atom, ...]:
    if isinstance(inst, ConjunctiveQuery):
        return inst.atoms
    return inst.facts


def _all_homs(body: tuple[Atom, ...], facts) -> list[dict]:
    """Every homomorphism from the body atom list into the fact list."""
    by_rel: dict[str, list[Atom]] = {}
    for f in facts:
        by_rel.setdefault(f.relation, []).append(f)
    out: list[dict] = []

    def walk(i: int, m: dict):
        if i == len(body):
            out.append(dict(m))
            return
        a = body[i]
        for f in by_rel.get(a.relation, ()):
            if len(f.args) != len(a.args):
                continue
            bound = []
            ok = True
            for t, val in zip(a.args, f.args):
                prev = m.get(t)
                if prev is None:
                    m[t] = val
                    bound.append(t)
                elif prev != val:
                    ok = False
                    break
            if ok:
                walk(i + 1, m)
            for t in bound:
                del m[t]

    walk(0, {})
    return out


def _split(deps):
    egds = [d for d in deps if isinstance(d, Egd)]
    tgds = [d for d in deps if isinstance(d, Tgd)]
    if len(egds) + len(tgds) != len(deps):
        raise DependencyError("dependency set may contain only Tgd and Egd values")
    return egds, tgds


def satisfies(inst, deps) -> bool:
    """Does the database (or CQ read as an instance) satisfy every dependency?

    Exhaustive: every tgd trigger must extend to a head witness, every
    egd trigger must already equate its two variables.
    """
    facts = _instance_atoms(inst)
    for dep in deps:
        if isinstance(dep, Egd):
            y, z = dep.eq
            for h in _all_homs(dep.body, facts):
                if h[y] != h[z]:
                    return False
        elif isinstance(dep, Tgd):
            frontier = tuple(sorted(dep.frontier))
            head_q = ConjunctiveQuery(frontier, dep.head)
            seen = set()
            for h in _all_homs(dep.body, facts):
                key = tuple(h[x] for x in frontier)
                if key in seen:
                    continue
                seen.add(key)
                if find_hom(head_q, frontier, inst, key) is None:
                    return False
        else:
            raise DependencyError("dependency set may contain only Tgd and Egd values")
    return True


# --- the chase -----------------------------------------------------------------


def chase_egds(q: ConjunctiveQuery, deps) -> ChaseResult:
    """Chase q with egds to the (finite, unique) fixpoint.

    Variables are identified in place, the smaller term in canonical
    order becoming the representative; free variables are terms like any
    other, so two free positions may merge. Returns the result and the
    surjective homomorphism h with h(q) = result.
    """
    egds, tgds = _split(deps)
    if tgds:
        raise DependencyError("chase_egds accepts equality-generating dependencies only")
    mapping: dict[Term, Term] = {v: v for v in q.variables}
    atoms = list(q.atoms)

    changed = True
    while changed:
        changed = False
        for dep in egds:
            y, z = dep.eq
            for h in _all_homs(dep.body, atoms):
                if h[y] == h[z]:
                    continue
                keep, drop = sorted((h[y], h[z]))
                atoms = [
                    Atom(a.relation, tuple(keep if t == drop else t for t in a.args))
                    for a in atoms
                ]
                seen: set[Atom] = set()
                atoms = [a for a in atoms if not (a in seen or seen.add(a))]
                mapping = {
                    src: (keep if tgt == drop else tgt) for src, tgt in mapping.items()
                }
                changed = True
                break
            if changed:
                break

    head = tuple(mapping[v] for v in q.free_vars)
    result = ConjunctiveQuery(head, tuple(atoms), q.name)
    return ChaseResult(result, Hom(mapping, q, result), True)


def _pending_triggers(atoms: list[Atom], tgds) -> list[tuple[Tgd, dict]]:
    """Triggers with no head witness, one per (tgd, frontier image)."""
    inst = ConjunctiveQuery((), tuple(atoms))
    out = []
    for dep in tgds:
        frontier = tuple(sorted(dep.frontier))
        head_q = ConjunctiveQuery(frontier, dep.head)
        seen = set()
        for h in _all_homs(dep.body, atoms):
            key = tuple(h[x] for x in frontier)
            if key in seen:
                continue
            seen.add(key)
            if find_hom(head_q, frontier, inst, key) is None:
                out.append((dep, dict(zip(frontier, key))))
    return out


def chase_tgds(q: ConjunctiveQuery, deps, max_depth: int = 16) -> ChaseResult:
    """Fair breadth-first tgd chase: each round fires every trigger found
    against the round-start atoms, with fresh nulls _n0, _n1, ... for the
    existential head variables. Stops at a fixpoint (complete) or after
    max_depth rounds (complete=False; the result is a prefix of a valid
    chase sequence)."""
    egds, tgds = _split(deps)
    if egds:
        raise DependencyError("chase_tgds accepts tuple-generating dependencies only")
    if max_depth < 0:
        raise CqError(f"max_depth must be nonnegative, got {max_depth}")

    atoms = list(q.atoms)
    atom_set = set(atoms)
    used_names = {v.name for v in q.variables}
    counter = itertools.count()

    def fresh() -> Var:
        while True:
            name = f"_n{next(counter)}"
            if name not in used_names:
                used_names.add(name)
                return Var(name)

    pending = _pending_triggers(atoms, tgds)
    rounds = 0
    while pending and rounds < max_depth:
        for dep, fmap in pending:
            ext = dict(fmap)
            for zvar in sorted(dep.head_vars - dep.frontier):
                ext[zvar] = fresh()
            for a in dep.head:
                na = Atom(a.relation, tuple(ext[t] for t in a.args))
                if na not in atom_set:
                    atom_set.add(na)
                    atoms.append(na)
        rounds += 1
        pending = _pending_triggers(atoms, tgds)

    result = ConjunctiveQuery(q.free_vars, tuple(atoms), q.name)
    identity = Hom({v: v for v in q.variables}, q, result)
    return ChaseResult(result, identity, not pending)


# --- containment and evaluation under constraints -----------------------------


def contains_under(
    q: ConjunctiveQuery, q2: ConjunctiveQuery, deps, max_depth: int = 16
):
    """q ⊆ q2 over databases satisfying the dependencies.

    Chases q and looks for a homomorphism from q2 into the result
    (anchored at the chased head). Returns True or False on a complete
    chase; on a depth-capped tgd chase a hom into the prefix still
    proves containment (the prefix embeds in the full chase), but its
    absence proves nothing, reported as None.
    """
    egds, tgds = _split(deps)
    if egds and tgds:
        raise DependencyError("dependency set must be all egds or all tgds")
    if egds:
        res = chase_egds(q, deps)
        anchor = res.hom_to_result.tuple_image(q.free_vars)
        return find_hom(q2, q2.free_vars, res.query, anchor) is not None
    if not tgds:
        return find_hom(q2, q2.free_vars, q, q.free_vars) is not None
    res = chase_tgds(q, deps, max_depth)
    hit = find_hom(q2, q2.free_vars, res.query, q.free_vars) is not None
    if res.complete:
        return hit
    return True if hit else None


def eval_overapprox_under(
    q: ConjunctiveQuery,
    deps,
    db: Database,
    a: tuple,
    k: int,
    max_depth: int = 16,
) -> bool:
    """ā in the evaluation of the width-k overapproximation of q under
    the dependencies (which the database must satisfy).

    Egds: cover game from the chased query, anchored at the chased head.
    Guarded tgds: the game runs on q directly, no chase needed. Other
    tgds: the game runs on the chase prefix; when capped, False is still
    definitive (the full chase can only shrink Duplicator's options) and
    True may overshoot, flagged by ChaseDepthWarning.
    """
    egds, tgds = _split(deps)
    if egds and tgds:
        raise DependencyError("dependency set must be all egds or all tgds")
    if not satisfies(db, deps):
        raise CqError("the database does not satisfy the dependencies")
    if egds:
        res = chase_egds(q, deps)
        anchor = res.hom_to_result.tuple_image(q.free_vars)
        return wins_cover_game(res.query, anchor, db, a, k)[0]
    if not tgds or all(d.guarded for d in tgds):
        return wins_cover_game(q, q.free_vars, db, a, k)[0]
    res = chase_tgds(q, deps, max_depth)
    if not res.complete:
        warnings.warn(
            f"tgd chase capped after {max_depth} rounds; verdict computed "
            "on the prefix (False is definitive, True may overapproximate)",
            ChaseDepthWarning,
            stacklevel=2,
        )
    return wins_cover_game(res.query, q.free_vars, db, a, k)[0]
