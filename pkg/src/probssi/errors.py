class IdentificationError(RuntimeError):
    """An algorithmic step failed on otherwise well-formed input."""


class RankDeficiencyError(IdentificationError):
    def __init__(self, achieved: int, requested: int, what: str = "covariance"):
        self.achieved = achieved
        self.requested = requested
        super().__init__(
            f"{what} has numerical rank {achieved}, below requested order {requested}"
        )
