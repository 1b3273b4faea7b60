"""Homomorphism search, CQ evaluation, containment, and cores.

The search is exact backtracking with full arc consistency: per-atom
support lists are filtered against the candidate sets of every variable
(not just assigned ones) to a fixpoint after each assignment, and the
next variable is always a most-constrained one. On tree-shaped sources
this makes failure detection immediate. Candidate iteration follows
canonical order throughout, so returned witnesses are deterministic.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass

from cqapprox.model import (
    ArityError,
    Atom,
    ConjunctiveQuery,
    Database,
    Term,
)


@dataclass
class Hom:
    """A homomorphism witness: total mapping on the source's terms."""

    mapping: dict[Term, Term]
    source: object
    target: object

    def __call__(self, t: Term) -> Term:
        return self.mapping[t]

    def tuple_image(self, terms) -> tuple[Term, ...]:
        return tuple(self.mapping[t] for t in terms)


def _atoms_of(thing):
    return thing.atoms if isinstance(thing, ConjunctiveQuery) else thing.facts


def _elements_of(thing):
    if isinstance(thing, ConjunctiveQuery):
        return set(thing.variables)
    return set(thing.adom)


def _anchor_map(src_tuple, tgt_tuple):
    if len(src_tuple) != len(tgt_tuple):
        raise ArityError(
            f"anchor tuples differ in length: {len(src_tuple)} vs {len(tgt_tuple)}"
        )
    m: dict[Term, Term] = {}
    for s, t in zip(src_tuple, tgt_tuple):
        if m.get(s, t) != t:
            return None
        m[s] = t
    return m


class _Search:
    """Iterative backtracking over one set of source atoms.

    `base` holds pre-assigned terms (anchors). Every other source term in
    the atoms, plus `extra_vars`, becomes a search variable over the
    target pool.
    """

    def __init__(self, atoms, base, tgt_atoms, pool, extra_vars=()):
        self.ok = True
        self.atoms = list(atoms)
        self.base = dict(base)
        self.pool = sorted(pool)

        rel_index: dict[str, list[Atom]] = {}
        for f in tgt_atoms:
            rel_index.setdefault(f.relation, []).append(f)

        self.vars = sorted(
            ({t for a in self.atoms for t in a.args} | set(extra_vars))
            - set(self.base)
        )
        self.by_var: dict[Term, list[int]] = {v: [] for v in self.vars}
        for i, a in enumerate(self.atoms):
            for v in set(a.args):
                if v in self.by_var:
                    self.by_var[v].append(i)

        # Per-atom supports: target atoms matching the anchored positions and
        # the atom's internal repetition pattern.
        self.supports: list[list[Atom]] = []
        for a in self.atoms:
            fits = []
            for f in rel_index.get(a.relation, ()):
                if self._fits(f, a, self.base):
                    fits.append(f)
            self.supports.append(fits)
            if not fits:
                self.ok = False

        self.candidates: dict[Term, set[Term]] = {}
        for v in self.vars:
            occ = self.by_var[v]
            if not occ:
                self.candidates[v] = set(self.pool)
                continue
            cand: set[Term] | None = None
            for i in occ:
                a = self.atoms[i]
                here = set()
                for p, t in enumerate(a.args):
                    if t == v:
                        here.update(f.args[p] for f in self.supports[i])
                cand = here if cand is None else cand & here
            self.candidates[v] = cand or set()
            if not self.candidates[v]:
                self.ok = False

        self.heap = None
        if self.ok and not self._propagate(
            range(len(self.atoms)), dict(self.base), None
        ):
            self.ok = False

    @staticmethod
    def _fits(fact, atom, assignment):
        seen: dict[Term, Term] = {}
        for p, t in enumerate(atom.args):
            got = fact.args[p]
            want = assignment.get(t)
            if want is not None and got != want:
                return False
            if seen.setdefault(t, got) != got:
                return False
        return True

    def _fits_full(self, fact, atom, assignment):
        seen: dict[Term, Term] = {}
        for p, t in enumerate(atom.args):
            got = fact.args[p]
            want = assignment.get(t)
            if want is not None:
                if got != want:
                    return False
            elif got not in self.candidates[t]:
                return False
            if seen.setdefault(t, got) != got:
                return False
        return True

    def _assign(self, v, val, assignment, trail):
        assignment[v] = val
        return self._propagate(self.by_var[v], assignment, trail)

    def _propagate(self, seed, assignment, trail):
        """Refilter supports against candidate sets to a fixpoint.

        A trail of None means the caller does not need the changes undone
        (initial propagation); failure leaves state inconsistent then.
        """
        dirty = deque(seed)
        queued = set(dirty)
        while dirty:
            i = dirty.popleft()
            queued.discard(i)
            a = self.atoms[i]
            old = self.supports[i]
            new = [f for f in old if self._fits_full(f, a, assignment)]
            if len(new) != len(old):
                if trail is not None:
                    trail.append(("s", i, old))
                self.supports[i] = new
                if not new:
                    return False
            for v2 in set(a.args):
                if v2 in assignment:
                    continue
                here = set()
                for p, t in enumerate(a.args):
                    if t == v2:
                        here.update(f.args[p] for f in new)
                narrowed = self.candidates[v2] & here
                if narrowed != self.candidates[v2]:
                    if trail is not None:
                        trail.append(("c", v2, self.candidates[v2]))
                    self.candidates[v2] = narrowed
                    if self.heap is not None:
                        heapq.heappush(self.heap, (len(narrowed), v2))
                    if not narrowed:
                        return False
                    for j in self.by_var[v2]:
                        if j != i and j not in queued:
                            dirty.append(j)
                            queued.add(j)
        return True

    def _undo(self, trail, mark, assignment, v):
        while len(trail) > mark:
            kind, key, old = trail.pop()
            if kind == "s":
                self.supports[key] = old
            else:
                self.candidates[key] = old
                heapq.heappush(self.heap, (len(old), key))
        assignment.pop(v, None)

    def solutions(self):
        """Yield every total assignment, in canonical order."""
        if not self.ok:
            return
        assignment: dict[Term, Term] = dict(self.base)
        if not self.vars:
            yield dict(assignment)
            return
        trail: list = []
        # frames: (var, remaining values in reverse order, trail mark)
        frames: list[tuple[Term, list[Term], int]] = []
        # most-constrained-first via a lazy heap: entries are (count, var)
        # pushed on every candidate-set change, skipped when out of date
        self.heap = [(len(self.candidates[v]), v) for v in self.vars]
        heapq.heapify(self.heap)

        def open_frame():
            while True:
                if not self.heap:
                    self.heap.extend(
                        (len(self.candidates[u]), u)
                        for u in self.vars
                        if u not in assignment
                    )
                    heapq.heapify(self.heap)
                cnt, v = heapq.heappop(self.heap)
                if v not in assignment and cnt == len(self.candidates[v]):
                    break
            frames.append((v, sorted(self.candidates[v], reverse=True), len(trail)))

        open_frame()
        while frames:
            v, vals, mark = frames[-1]
            self._undo(trail, mark, assignment, v)  # clear the previous attempt
            if not vals:
                frames.pop()
                heapq.heappush(self.heap, (len(self.candidates[v]), v))
                continue
            if not self._assign(v, vals.pop(), assignment, trail):
                continue
            if len(assignment) - len(self.base) == len(self.vars):
                yield dict(assignment)
                continue
            open_frame()


def find_hom(source, src_tuple, target, tgt_tuple) -> Hom | None:
    """A homomorphism source→target with h(src_tuple) = tgt_tuple, or None.

    Disconnected parts of the source are solved independently, and parts
    that are renamings of one another are solved once.
    """
    base = _anchor_map(src_tuple, tgt_tuple)
    if base is None:
        return None
    src_atoms = _atoms_of(source)
    tgt_atoms = _atoms_of(target)
    pool = sorted(_elements_of(target) | set(tgt_tuple))

    mapping: dict[Term, Term] = dict(base)
    solved: dict[tuple, dict] = {}
    for comp_atoms, order in _split_components(src_atoms, base):
        key = _component_key(comp_atoms, order, base)
        hit = solved.get(key)
        if hit is not None:
            mapping.update({v: hit[i] for i, v in enumerate(order)})
            continue
        search = _Search(comp_atoms, base, tgt_atoms, pool)
        sol = next(search.solutions(), None)
        if sol is None:
            return None
        solved[key] = [sol[v] for v in order]
        mapping.update(sol)

    for v in _elements_of(source) - set(mapping):
        if not pool:
            return None
        mapping[v] = pool[0]
    return Hom(mapping, source, target)


def _split_components(atoms, base):
    """Group atoms by connected component of their unanchored terms.

    Yields (atoms, var order) pairs; fully anchored atoms form their own
    singleton groups. Order of unanchored vars is first occurrence in the
    component's sorted atom list, which _component_key relies on.
    """
    parent: dict[Term, Term] = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a in atoms:
        free = [t for t in a.args if t not in base]
        for u, w in zip(free, free[1:]):
            parent[find(u)] = find(w)

    groups: dict[Term | None, list[Atom]] = {}
    for a in atoms:
        free = [t for t in a.args if t not in base]
        rep = find(free[0]) if free else None
        groups.setdefault(rep, []).append(a)

    anchored_only = groups.pop(None, [])
    for a in anchored_only:
        yield [a], []
    for rep in sorted(groups, key=lambda r: groups[r][0]):
        comp = sorted(groups[rep])
        order: list[Term] = []
        seen = set()
        for a in comp:
            for t in a.args:
                if t not in base and t not in seen:
                    seen.add(t)
                    order.append(t)
        yield comp, order


def _component_key(comp_atoms, order, base):
    """Canonical form: unanchored vars numbered by first occurrence,
    anchored vars replaced by their target value."""
    index = {v: i for i, v in enumerate(order)}
    out = []
    for a in comp_atoms:
        sig = tuple(
            ("v", index[t]) if t in index else ("a", base[t]) for t in a.args
        )
        out.append((a.relation, sig))
    return tuple(out)


def evaluate(q: ConjunctiveQuery, db: Database) -> set:
    """q(D): every tuple ā with a homomorphism (D_q, x̄) → (D, ā)."""
    if q.is_boolean:
        return {()} if find_hom(q, (), db, ()) is not None else set()
    adom = sorted(db.adom)
    distinct = sorted(set(q.free_vars))
    cands = []
    for v in distinct:
        occ = [
            (a, p) for a in q.atoms for p, t in enumerate(a.args) if t == v
        ]
        if not occ:
            cands.append(adom)
            continue
        cand = None
        for a, p in occ:
            here = {f.args[p] for f in db.facts if f.relation == a.relation}
            cand = here if cand is None else cand & here
        cands.append(sorted(cand))

    answers = set()
    for combo in _product(cands):
        assign = dict(zip(distinct, combo))
        tgt = tuple(assign[v] for v in q.free_vars)
        if find_hom(q, q.free_vars, db, tgt) is not None:
            answers.add(tgt)
    return answers


def _product(pools):
    if not pools:
        yield ()
        return
    for head in pools[0]:
        for rest in _product(pools[1:]):
            yield (head,) + rest


def contains(q: ConjunctiveQuery, q2: ConjunctiveQuery) -> bool:
    """q ⊆ q2, decided by searching a homomorphism q2 → q over the heads."""
    if len(q.free_vars) != len(q2.free_vars):
        raise ArityError(
            f"head arity mismatch: {len(q.free_vars)} vs {len(q2.free_vars)}"
        )
    return find_hom(q2, q2.free_vars, q, q.free_vars) is not None


def equivalent(q: ConjunctiveQuery, q2: ConjunctiveQuery) -> bool:
    return contains(q, q2) and contains(q2, q)


def core(q: ConjunctiveQuery) -> ConjunctiveQuery:
    """The core of q: a minimal retract, fixing free variables pointwise.

    Strategy: find the first atom (canonical order) whose removal leaves a
    query q still maps into, then jump straight to the image of that
    homomorphism and repeat. A fixpoint admits no proper retraction at all
    (a retraction would miss some atom, making that atom removable), so
    the fixpoint is the core.
    """
    current = q
    shrinking = True
    while shrinking:
        shrinking = False
        for a in current.atoms:
            smaller = current.without_atom(a)
            h = find_hom(current, current.free_vars, smaller, smaller.free_vars)
            if h is None:
                continue
            image = {
                Atom(at.relation, h.tuple_image(at.args)) for at in current.atoms
            }
            current = ConjunctiveQuery(current.free_vars, tuple(image), q.name)
            shrinking = True
            break
    return current


def endomorphisms(q: ConjunctiveQuery) -> list[Hom]:
    """All homomorphisms from q to itself fixing the free variables."""
    base = {v: v for v in q.free_vars}
    search = _Search(q.atoms, base, q.atoms, sorted(q.variables))
    return [Hom(sol, q, q) for sol in search.solutions()]
