"""Exception taxonomy shared by all modules.

CapExceeded / BudgetExceeded map to CLI exit code 3, MalformedWord and
schema problems to exit code 2, failed verification to exit code 1.
"""


class VfretractError(Exception):
    pass


class CapExceeded(VfretractError):
    """A structural size cap was hit (group order, point set, ...)."""


class BudgetExceeded(VfretractError):
    """A search budget was hit (coset count, series depth, exponent cap)."""


class BallTooLarge(BudgetExceeded):
    """A normal-form ball enumeration outgrew its size cap."""


class MalformedWord(VfretractError):
    """A word references unknown names, bad indices, or breaks layout rules."""


class NotFree(VfretractError):
    """An action expected to be free has a nontrivial point stabilizer."""


class SizeMismatch(VfretractError):
    """Two actions that must be intertwined have incompatible orbit data."""


class NotInKernel(VfretractError):
    """A word expected to have trivial retraction image does not."""


class TrivialGenerator(VfretractError):
    """An operation requiring nontrivial words was fed the empty word."""


class HypothesisViolated(VfretractError):
    """A precondition (pairwise cyclic disjointness, ...) fails to hold."""


class NotSurjective(VfretractError):
    """A map expected to be onto is not."""


class NotRetractive(VfretractError):
    """Candidate retraction images do not respect the defining relations."""
