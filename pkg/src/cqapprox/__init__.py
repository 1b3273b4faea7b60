"""Static approximation of conjunctive queries by queries of bounded
generalized hypertreewidth."""

from cqapprox.model import (
    ArityError,
    Atom,
    BudgetError,
    ConjunctiveQuery,
    Const,
    CqError,
    Database,
    DependencyError,
    ParseError,
    PreconditionUnknownError,
    Term,
    Var,
    canonical_database,
    connected_components,
    disjoint_conjunction,
    gaifman,
    instance_as_query,
    parse_database,
    parse_query,
    parse_tuple,
    serialize_database,
    serialize_query,
    serialize_tuple,
)
from cqapprox.hom import (
    Hom,
    contains,
    core,
    endomorphisms,
    equivalent,
    evaluate,
    find_hom,
)
from cqapprox.pebble import (
    KUnion,
    UnrollBudgetWarning,
    WinningFamily,
    constrained_wins_1,
    k_unions,
    unroll,
    unroll_size,
    unroll_with_decomposition,
    wins_bounded,
    wins_cover_game,
)
from cqapprox.width import (
    TreeDecomposition,
    compute_ghw,
    cover_number,
    ghw1_membership,
    parse_decomposition,
    serialize_decomposition,
    validate_decomposition,
)
from cqapprox.approx import (
    ComparabilityWarning,
    HashQuery,
    OverapproxCertificate,
    certify_overapprox,
    eval_delta_filtered,
    eval_overapprox,
    exists_overapprox,
    greedy_ghw1_overapprox,
    hash_query,
    identify_delta,
    identify_overapprox,
    swapping_endomorphism,
    symmetric_difference_eval,
)
from cqapprox.constraints import (
    ChaseDepthWarning,
    ChaseResult,
    Egd,
    Tgd,
    chase_egds,
    chase_tgds,
    contains_under,
    eval_overapprox_under,
    parse_dependencies,
    parse_dependency,
    satisfies,
)
from cqapprox.gen import (
    Tournament,
    conn,
    corpus,
    gaifman_dot,
    gen_dagger,
    gen_qn,
    gen_qn_prime,
    verify_dagger,
)

__all__ = [
    "ArityError",
    "Atom",
    "BudgetError",
    "ChaseDepthWarning",
    "ChaseResult",
    "ComparabilityWarning",
    "ConjunctiveQuery",
    "Const",
    "CqError",
    "Database",
    "DependencyError",
    "Egd",
    "HashQuery",
    "Hom",
    "KUnion",
    "OverapproxCertificate",
    "ParseError",
    "PreconditionUnknownError",
    "Term",
    "Tgd",
    "Tournament",
    "TreeDecomposition",
    "UnrollBudgetWarning",
    "Var",
    "WinningFamily",
    "canonical_database",
    "certify_overapprox",
    "chase_egds",
    "chase_tgds",
    "compute_ghw",
    "conn",
    "connected_components",
    "constrained_wins_1",
    "contains",
    "contains_under",
    "core",
    "corpus",
    "cover_number",
    "disjoint_conjunction",
    "endomorphisms",
    "equivalent",
    "eval_delta_filtered",
    "eval_overapprox",
    "eval_overapprox_under",
    "evaluate",
    "exists_overapprox",
    "find_hom",
    "gaifman",
    "gaifman_dot",
    "gen_dagger",
    "gen_qn",
    "gen_qn_prime",
    "ghw1_membership",
    "greedy_ghw1_overapprox",
    "hash_query",
    "identify_delta",
    "identify_overapprox",
    "instance_as_query",
    "k_unions",
    "parse_database",
    "parse_decomposition",
    "parse_dependencies",
    "parse_dependency",
    "parse_query",
    "parse_tuple",
    "satisfies",
    "serialize_database",
    "serialize_decomposition",
    "serialize_query",
    "serialize_tuple",
    "swapping_endomorphism",
    "symmetric_difference_eval",
    "unroll",
    "unroll_size",
    "unroll_with_decomposition",
    "validate_decomposition",
    "verify_dagger",
    "wins_bounded",
    "wins_cover_game",
]
