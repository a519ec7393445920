"""Exception types raised across the package."""


class LpebcError(Exception):
    """Base class for all library errors."""


class ChannelError(LpebcError, ValueError):
    pass


class NegativeEntry(ChannelError):
    pass


class NotNormalized(ChannelError):
    pass


class BadShape(ChannelError):
    pass


class IndexOutOfRange(LpebcError, IndexError):
    pass


class EmptySubset(ChannelError):
    pass


class BadPermutation(ChannelError):
    pass


class DivisionByZero(LpebcError, ZeroDivisionError):
    pass


class ShapeMismatch(LpebcError, ValueError):
    pass


class InconsistentSystem(LpebcError):
    pass


class UnderdeterminedSystem(LpebcError):
    def __init__(self, rank, unknowns):
        super().__init__(f"rank {rank} < {unknowns} unknowns")
        self.rank = rank
        self.unknowns = unknowns


class ZeroTail(LpebcError, ValueError):
    pass


class UnreachableLayer(LpebcError, ValueError):
    pass


class NonTermination(LpebcError, RuntimeError):
    pass


class RankDeficient(LpebcError):
    def __init__(self, user, deficiency):
        super().__init__(f"user {user}: {deficiency} unknown packet(s) not determined")
        self.user = user
        self.deficiency = deficiency


class HorizonTooShort(LpebcError, ValueError):
    pass
