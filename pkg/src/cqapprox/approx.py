"""Overapproximation and Δ-approximation logic.

The three decision layers: identify a candidate as the width-k
overapproximation (two cover games), evaluate the overapproximation
directly on a database (one cover game), and semi-decide existence by
unrolling. For Boolean queries over binary schemas the greedy
deletion algorithm both decides existence at width 1 and constructs
the overapproximation.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass

from cqapprox.model import (
    Atom,
    BudgetError,
    ConjunctiveQuery,
    CqError,
    Database,
    PreconditionUnknownError,
    Term,
    Var,
    connected_components,
    disjoint_conjunction,
    gaifman,
)
from cqapprox.hom import Hom, contains, core, endomorphisms, evaluate, find_hom
from cqapprox.pebble import (
    UnrollBudgetWarning,
    WinningFamily,
    constrained_wins_1,
    unroll,
    unroll_size,
    wins_cover_game,
)
from cqapprox.width import (
    TreeDecomposition,
    compute_ghw,
    ghw1_membership,
    validate_decomposition,
)


class ComparabilityWarning(UserWarning):
    """The filter query turned out to be comparable with the base query."""


@dataclass
class OverapproxCertificate:
    """Evidence that `query` is a width-k overapproximation candidate:
    a validating decomposition plus the two game families (candidate
    into the base query and back)."""

    query: ConjunctiveQuery
    k: int
    decomposition: TreeDecomposition
    forward_family: WinningFamily
    backward_family: WinningFamily


@dataclass
class HashQuery:
    """The pasted query q_u # q_v: both one-sided halves of `base`
    renamed apart, joined by bridge atoms over the renamed endpoints."""

    base: ConjunctiveQuery
    u: Term
    v: Term
    result: ConjunctiveQuery
    u_image: Term
    v_image: Term
    hom_to_base: Hom


def _established_in_class(cand: ConjunctiveQuery, k: int, cert) -> bool:
    """Decide cand ∈ GHW(k), or raise when that cannot be settled.

    A supplied decomposition settles it positively when it validates; a
    non-validating one proves nothing, which is reported as the
    precondition being unknown rather than false.
    """
    if cert is not None:
        if validate_decomposition(cand, cert, k):
            return True
        raise PreconditionUnknownError(
            "the supplied decomposition does not validate at width "
            f"{k}; candidate membership is unverified"
        )
    if k == 1:
        return ghw1_membership(cand) is not None
    try:
        return compute_ghw(cand, k) is not None
    except BudgetError as err:
        raise PreconditionUnknownError(
            f"cannot verify membership in GHW({k}): {err}"
        ) from err


def identify_overapprox(
    q: ConjunctiveQuery, cand: ConjunctiveQuery, k: int, cert=None
) -> bool:
    """Is cand the GHW(k)-overapproximation of q?

    True iff cand lies in GHW(k) and the cover game succeeds both ways
    (cand into q and q into cand). A candidate that provably falls
    outside GHW(k) yields False; when membership cannot be settled
    within the size guard, PreconditionUnknownError is raised.
    """
    if not _established_in_class(cand, k, cert):
        return False
    forward = wins_cover_game(cand, cand.free_vars, q, q.free_vars, k)[0]
    if not forward:
        return False
    return wins_cover_game(q, q.free_vars, cand, cand.free_vars, k)[0]


def certify_overapprox(
    q: ConjunctiveQuery, cand: ConjunctiveQuery, k: int, cert=None
) -> OverapproxCertificate | None:
    """identify_overapprox with evidence: None on a negative answer.

    The certificate carries a validating decomposition, so for k > 1 one
    must be supplied; width-1 decompositions are reconstructed here.
    """
    decomposition = cert
    if decomposition is None:
        if k != 1:
            raise PreconditionUnknownError(
                "certificates at width > 1 need a supplied decomposition"
            )
        decomposition = ghw1_membership(cand)
        if decomposition is None:
            return None
    elif not _established_in_class(cand, k, cert):
        return None
    forward_ok, forward = wins_cover_game(cand, cand.free_vars, q, q.free_vars, k)
    if not forward_ok:
        return None
    backward_ok, backward = wins_cover_game(q, q.free_vars, cand, cand.free_vars, k)
    if not backward_ok:
        return None
    return OverapproxCertificate(cand, k, decomposition, forward, backward)


def eval_overapprox(q: ConjunctiveQuery, db: Database, a: tuple, k: int) -> bool:
    """ā in the evaluation of the width-k overapproximation of q.

    This is exactly the cover game q into (D, ā); it is sound for the
    infinitary overapproximation even when no finite one exists.
    """
    return wins_cover_game(q, q.free_vars, db, a, k)[0]


def exists_overapprox(
    q: ConjunctiveQuery, k: int, cmax: int = 8, budget: int = 50_000
) -> ConjunctiveQuery | None:
    """Semi-decide existence of the GHW(k)-overapproximation.

    Tries depths c = 1..cmax: the overapproximation exists iff the cover
    game from q into some unrolling q_c succeeds, and then core(q_c) is
    the overapproximation. Returns None when the budget or cmax runs
    out; None never asserts non-existence.
    """
    if cmax < 1:
        raise CqError(f"cmax must be at least 1, got {cmax}")
    for c in range(1, cmax + 1):
        if budget is not None and unroll_size(q, k, c) > budget:
            warnings.warn(
                f"stopping at depth {c}: unrolling would emit "
                f"{unroll_size(q, k, c)} atoms (budget {budget})",
                UnrollBudgetWarning,
                stacklevel=2,
            )
            return None
        qc = unroll(q, k, c, budget=None)
        if wins_cover_game(q, q.free_vars, qc, qc.free_vars, k)[0]:
            return core(qc)
    return None


# --- the greedy width-1 algorithm (Boolean, binary schema) --------------------


def hash_query(q: ConjunctiveQuery, u: Term, v: Term) -> HashQuery:
    """Paste the two one-sided halves of q at adjacent variables u, v.

    The u-half is q minus every atom mentioning v, renamed z -> z_u; the
    v-half symmetrically. Bridge atoms R(u_u, v_v) and R(v_v, u_u) are
    added exactly when R(u,v), respectively R(v,u), is an atom of q.
    Collapsing both halves back (z_u, z_v -> z) is a homomorphism onto q.
    """
    g = gaifman(q)
    if not g.adjacent(u, v):
        raise CqError(f"{u.name} and {v.name} are not adjacent")

    used: set[str] = set()

    def rename(side: Term) -> dict[Term, Term]:
        out = {}
        for z in sorted(q.variables):
            name = f"{z.name}_{side.name}"
            while name in used:
                name += "_"
            used.add(name)
            out[z] = Var(name)
        return out

    to_u, to_v = rename(u), rename(v)
    atoms: list[Atom] = []
    back: dict[Term, Term] = {}
    for a in q.atoms:
        if v not in a.args:
            atoms.append(Atom(a.relation, tuple(to_u[z] for z in a.args)))
            back.update({to_u[z]: z for z in a.args})
        if u not in a.args:
            atoms.append(Atom(a.relation, tuple(to_v[z] for z in a.args)))
            back.update({to_v[z]: z for z in a.args})
    u_u, v_v = to_u[u], to_v[v]
    for a in q.atoms:
        if len(a.args) > 2 and u in a.args and v in a.args:
            raise CqError(
                "atoms mentioning both endpoints must be binary, got "
                f"{a.relation}/{len(a.args)}"
            )
        if a.args == (u, v):
            atoms.append(Atom(a.relation, (u_u, v_v)))
        if a.args == (v, u):
            atoms.append(Atom(a.relation, (v_v, u_u)))
    back[u_u] = u
    back[v_v] = v
    result = ConjunctiveQuery((), tuple(atoms), q.name)
    hom = Hom(dict(back), result, q)
    return HashQuery(q, u, v, result, u_u, v_v, hom)


def swapping_endomorphism(q: ConjunctiveQuery):
    """The unique non-identity endomorphism of a Boolean connected
    acyclic core, or None. When present it swaps two adjacent variables
    (returned alongside the witness)."""
    if not q.is_boolean:
        raise CqError("swapping endomorphisms are defined for Boolean queries")
    if len(connected_components(q)) != 1:
        raise CqError("query must be connected")
    if ghw1_membership(q) is None:
        raise CqError("query must be acyclic")
    if core(q) != q:
        raise CqError("query must be a core")
    extra = [h for h in endomorphisms(q) if any(h.mapping[x] != x for x in h.mapping)]
    if not extra:
        return None
    if len(extra) > 1:
        raise CqError("more than one non-identity endomorphism; not a core")
    h = extra[0]
    g = gaifman(q)
    for x in sorted(h.mapping):
        y = h.mapping[x]
        if y != x and h.mapping[y] == x and g.adjacent(x, y):
            return h, x, y
    raise CqError("non-identity endomorphism does not swap adjacent variables")


def _minimal_cover_family(comps: list[ConjunctiveQuery]) -> list[ConjunctiveQuery]:
    """An inclusion-minimal subfamily s.t. every component plays into one
    of its members in the 1-cover game. Removal is sound because the
    game relation composes."""
    reps = list(comps)
    changed = True
    while changed:
        changed = False
        for i, p in enumerate(reps):
            rest = reps[:i] + reps[i + 1 :]
            if any(wins_cover_game(p, (), other, (), 1)[0] for other in rest):
                del reps[i]
                changed = True
                break
    for comp in comps:
        assert any(wins_cover_game(comp, (), p, (), 1)[0] for p in reps)
    return reps


def _greedy_connected(p: ConjunctiveQuery) -> ConjunctiveQuery | None:
    """The two-step deletion search on one connected Boolean component."""
    # Step 1: delete atoms the plain game lets go of
    qi = p
    while ghw1_membership(qi) is None:
        for e in qi.atoms:
            smaller = qi.without_atom(e)
            if wins_cover_game(qi, (), smaller, (), 1)[0]:
                assert find_hom(smaller, (), qi, ()) is not None
                qi = smaller
                break
        else:
            break
    if ghw1_membership(qi) is not None:
        return core(qi)

    # Step 2: paste at an adjacent pair, delete under the endpoint guard
    g = gaifman(p)
    for u, v in sorted(g.edges):
        hq = hash_query(p, u, v)
        if not wins_cover_game(p, (), hq.result, (), 1)[0]:
            continue
        guard = {hq.u_image, hq.v_image}
        qi = hq.result
        while ghw1_membership(qi) is None:
            for e in qi.atoms:
                if hq.u_image in e.args and hq.v_image in e.args:
                    continue
                smaller = qi.without_atom(e)
                if constrained_wins_1(qi, guard, smaller, guard):
                    assert find_hom(smaller, (), qi, ()) is not None
                    qi = smaller
                    break
            else:
                break
        if ghw1_membership(qi) is not None:
            return core(qi)
    return None


def greedy_ghw1_overapprox(q: ConjunctiveQuery) -> ConjunctiveQuery | None:
    """Decide and construct the GHW(1)-overapproximation of a Boolean CQ
    over a schema of maximum arity two. None means none exists (this is
    a decision, unlike exists_overapprox's None)."""
    if not q.is_boolean:
        raise CqError("the greedy construction handles Boolean queries only")
    if any(len(a.args) > 2 for a in q.atoms):
        raise CqError("the greedy construction requires maximum arity two")
    comps = connected_components(q)
    if not comps:
        return q
    reps = _minimal_cover_family(comps)
    parts = []
    for p in reps:
        built = _greedy_connected(p)
        if built is None:
            return None
        parts.append(built)
    out = functools.reduce(disjoint_conjunction, parts)
    assert ghw1_membership(out) is not None
    return out


# --- Δ-approximations -----------------------------------------------------


def identify_delta(
    q: ConjunctiveQuery, cand: ConjunctiveQuery, k: int, cert=None
) -> bool:
    """Is cand an incomparable GHW(k)-Δ-approximation of q?

    True iff cand lies in GHW(k), the cover game q into cand succeeds,
    and neither query contains the other.
    """
    if not _established_in_class(cand, k, cert):
        return False
    if not wins_cover_game(q, q.free_vars, cand, cand.free_vars, k)[0]:
        return False
    return not contains(q, cand) and not contains(cand, q)


def eval_delta_filtered(
    q: ConjunctiveQuery,
    q_inc: ConjunctiveQuery,
    db: Database,
    a: tuple,
    k: int,
    cert=None,
) -> bool:
    """ā in the evaluation of the filtered Δ-approximation q* ∧ q_inc:
    the cover game q into (D, ā), intersected with exact membership of ā
    in q_inc(D). Warns when q_inc is comparable with q (the filter then
    adds nothing beyond an over- or under-approximation)."""
    if not _established_in_class(q_inc, k, cert):
        raise CqError(f"filter query is not in GHW({k})")
    if contains(q, q_inc) or contains(q_inc, q):
        warnings.warn(
            "filter query is comparable with the base query",
            ComparabilityWarning,
            stacklevel=2,
        )
    if not wins_cover_game(q, q.free_vars, db, a, k)[0]:
        return False
    return find_hom(q_inc, q_inc.free_vars, db, a) is not None


def symmetric_difference_eval(
    q: ConjunctiveQuery, q2: ConjunctiveQuery, db: Database
) -> set:
    """Symmetric difference of the two result sets over db."""
    if len(q.free_vars) != len(q2.free_vars):
        raise CqError(
            f"head arities differ: {len(q.free_vars)} vs {len(q2.free_vars)}"
        )
    return set(evaluate(q, db)) ^ set(evaluate(q2, db))
