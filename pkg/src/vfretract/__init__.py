"""Virtually free groups: certified double embeddings and virtual retractions.

The package builds the fundamental group of a finite graph of finite groups,
embeds it into a double of a finite group through a chain of certified
stages (cone vertex, special multiple HNN, residual-p single HNN, power
trick), and produces independently checkable certificates that finitely
generated subgroups are virtual retracts.
"""

from .double import AmalgamWord, Double, ExtElement
from .errors import (
    BallTooLarge,
    BudgetExceeded,
    CapExceeded,
    HypothesisViolated,
    MalformedWord,
    NotFree,
    NotInKernel,
    NotRetractive,
    NotSurjective,
    SizeMismatch,
    TrivialGenerator,
    VfretractError,
)
from .free import (
    FreeWord,
    SchreierRewriter,
    StallingsGraph,
    commutator,
    cyclic_disjoint,
    fold_subgroup_graph,
    free_reduce,
    graph_rank,
    is_free_basis,
    member_and_rewrite,
    schreier_kernel_basis,
    word_inv,
    word_mul,
    word_pow,
)
from .gog import GogEdge, GogWord, GraphOfGroups, SymQuotient, sym_quotient
from .hnn import HnnWord, MultiHnn
from .perm import (
    CosetAction,
    FiniteGroup,
    FiniteHom,
    Subgroup,
    action_on_cosets,
    closure,
    closure_with_words,
    compose,
    coset_bfs,
    coset_decomposition,
    cyclic_group,
    direct_product,
    elementary_abelian,
    group_from_perm_gens,
    identity_perm,
    intertwine_free_actions,
    invert_perm,
    is_free_action,
    left_transversal,
    p_by_a_check,
    pack_pair,
    right_transversal,
    symmetric_group,
    trivial_group,
    unpack_pair,
    word_inverse,
    word_reduce,
)
from .pipeline import (
    EmbeddingCert,
    ModPSeries,
    SeparatingQuotient,
    VfreePipeline,
    bounded_normal_forms,
    embed_cone,
    embed_double,
    embed_single_hnn,
    embed_vfree_to_double,
    embedding_cert_from_data,
    embedding_certificate,
    p_separating_quotient,
    pingpong_exponent,
    special_s_set,
    to_special_hnn,
    verify_embedding_ball,
    verify_embedding_cert,
)
from .retraction import (
    LrCert,
    RetractionCert,
    SubtreeData,
    invariant_subtree,
    lr_for_vfree,
    membership_H,
    membership_NH,
    nh_reduce,
    verify_certificate,
    verify_lr_certificate,
    virtual_retraction,
)

__version__ = "0.1.0"

__all__ = [
    "AmalgamWord",
    "BallTooLarge",
    "BudgetExceeded",
    "CapExceeded",
    "CosetAction",
    "Double",
    "EmbeddingCert",
    "ExtElement",
    "FiniteGroup",
    "FiniteHom",
    "FreeWord",
    "GogEdge",
    "GogWord",
    "GraphOfGroups",
    "HnnWord",
    "HypothesisViolated",
    "LrCert",
    "MalformedWord",
    "ModPSeries",
    "MultiHnn",
    "NotFree",
    "NotInKernel",
    "NotRetractive",
    "NotSurjective",
    "RetractionCert",
    "SeparatingQuotient",
    "SizeMismatch",
    "StallingsGraph",
    "Subgroup",
    "SubtreeData",
    "SymQuotient",
    "TrivialGenerator",
    "VfreePipeline",
    "VfretractError",
    "SchreierRewriter",
    "action_on_cosets",
    "bounded_normal_forms",
    "closure",
    "closure_with_words",
    "commutator",
    "compose",
    "coset_bfs",
    "coset_decomposition",
    "cyclic_disjoint",
    "cyclic_group",
    "direct_product",
    "elementary_abelian",
    "embed_cone",
    "embed_double",
    "embed_single_hnn",
    "embed_vfree_to_double",
    "embedding_cert_from_data",
    "embedding_certificate",
    "fold_subgroup_graph",
    "free_reduce",
    "graph_rank",
    "group_from_perm_gens",
    "identity_perm",
    "intertwine_free_actions",
    "invariant_subtree",
    "invert_perm",
    "is_free_action",
    "is_free_basis",
    "left_transversal",
    "lr_for_vfree",
    "member_and_rewrite",
    "membership_H",
    "membership_NH",
    "nh_reduce",
    "p_by_a_check",
    "p_separating_quotient",
    "pack_pair",
    "pingpong_exponent",
    "right_transversal",
    "schreier_kernel_basis",
    "special_s_set",
    "sym_quotient",
    "symmetric_group",
    "to_special_hnn",
    "trivial_group",
    "unpack_pair",
    "verify_certificate",
    "verify_embedding_ball",
    "verify_embedding_cert",
    "verify_lr_certificate",
    "virtual_retraction",
    "word_inv",
    "word_inverse",
    "word_mul",
    "word_pow",
    "word_reduce",
]
