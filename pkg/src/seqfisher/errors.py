"""Shared exception types mapped to CLI exit codes."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (exit code 2)."""


class ContractError(RuntimeError):
    """A numerical contract was violated during a run (exit code 3)."""


class TrajectoryAborted(ContractError):
    """A sampled outcome left a finite-difference replica with vanishing
    probability; the conditional derivative is undefined there."""


class BranchCapExceeded(ContractError):
    """Exact enumeration exceeded the surviving-branch budget. Reduce the
    sequence depth, raise eps_prune, or switch to Monte-Carlo estimation."""
