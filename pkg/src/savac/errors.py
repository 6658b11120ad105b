"""Exception hierarchy shared across the package."""


class SavacError(Exception):
    """Base class for every error raised by this package."""


class MeshError(SavacError):
    """Invalid mesh construction or transfer between incompatible meshes."""


class ConfigError(SavacError):
    """Invalid run configuration.

    Carries the complete list of violations; the message joins them into a
    single machine-parseable line.
    """

    def __init__(self, violations):
        self.violations = [str(v) for v in violations]
        joined = "; ".join(self.violations)
        super().__init__(f"{len(self.violations)} config violation(s): {joined}")


class SolverError(SavacError):
    """Linear solver failed to reach its tolerance."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class SingularStepError(SavacError):
    """The scalar reduction of one time step became numerically singular."""


class PathError(SavacError):
    """A single path simulation failed; records the offending step."""

    def __init__(self, step, message):
        super().__init__(f"step {step}: {message}")
        self.step = step


class EnsembleError(SavacError):
    """A Monte Carlo ensemble failed; records the offending sample."""

    def __init__(self, sample_id, message):
        super().__init__(f"sample {sample_id}: {message}")
        self.sample_id = sample_id
