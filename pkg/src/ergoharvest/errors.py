"""Exception types shared across the package."""


class HarvestError(Exception):
    """Base class for all package errors."""


class ContractError(HarvestError):
    """An API was called with arguments that violate its contract."""


class DomainError(HarvestError):
    """A mathematical map was evaluated outside its domain."""


class ExtinctionRegimeError(HarvestError):
    """The requested quantity does not exist because the population goes
    extinct almost surely: the only invariant measure is the point mass at
    zero, so no stationary density and no positive yield are available."""
