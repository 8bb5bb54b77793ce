"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class DataError(ValueError):
    """Missing or malformed dataset / checkpoint / input rows (CLI exit code 3)."""


class NumericalError(ArithmeticError):
    """A numerical routine failed: non-convergence, singularity, divergence (exit code 4)."""


class EigenConvergenceError(NumericalError):
    def __init__(self, off_norm: float, sweeps: int):
        super().__init__(
            f"Jacobi eigensolver did not converge after {sweeps} sweeps "
            f"(off-diagonal Frobenius norm {off_norm:.3e})"
        )
        self.off_norm = off_norm
        self.sweeps = sweeps


class SingularStiffnessError(NumericalError):
    """Constrained stiffness matrix is not positive definite (rigid-body mode)."""


class TrainingDivergedError(NumericalError):
    def __init__(self, epoch: int, last_finite_epoch: int | None):
        super().__init__(
            f"non-finite loss at epoch {epoch}; last finite epoch: {last_finite_epoch}"
        )
        self.epoch = epoch
        self.last_finite_epoch = last_finite_epoch
