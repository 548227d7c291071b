"""Exception types raised by the library."""


class RankDeficiencyError(ValueError):
    """A design column is (numerically) in the span of the preceding ones."""

    def __init__(self, column, ratio):
        self.column = column
        self.ratio = ratio
        super().__init__(
            f"design is rank deficient at column {column} "
            f"(|R_jj| / ||x_j|| = {ratio:.3e})"
        )


class DegenerateTruthError(ValueError):
    """The true mean has no signal in the window between models M0 and M0+1."""


class CapacityError(ValueError):
    """An enumeration would exceed its budget."""

    def __init__(self, count, budget):
        self.count = count
        self.budget = budget
        super().__init__(f"enumeration of {count} points exceeds budget {budget}")


class SolverError(RuntimeError):
    """An iterative solver hit its iteration cap without converging."""

    def __init__(self, message, best=None, kkt_residual=None):
        super().__init__(message)
        self.best = best
        self.kkt_residual = kkt_residual


class RepFailure(RuntimeError):
    """A Monte Carlo replication failed; carries the replication index."""

    def __init__(self, rep_index, cause):
        self.rep_index = rep_index
        self.cause = cause
        super().__init__(f"replication {rep_index} failed: {cause!r}")
