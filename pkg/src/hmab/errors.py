"""Exception types raised across the package."""


class HmabError(Exception):
    """Base class for computational failures."""


class DegenerateObservation(HmabError):
    """Bayes update requested for an observation of zero probability."""


class NotConverged(HmabError):
    def __init__(self, message, tables=None):
        super().__init__(message)
        self.tables = tables


class NonThresholdPolicy(HmabError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class BracketFailure(HmabError):
    """Subsidy search interval does not bracket the index."""


class DepthTooLarge(HmabError):
    """Stopping-time enumeration would exceed the node budget."""


class EmptyExperiment(HmabError):
    """Experiment configured with zero episodes or no policies."""
