"""Strict JSON run configuration: schema, defaults, cross-field checks.

Every numeric field is validated against the preconditions of the module it
feeds, before any computation starts; unknown keys are rejected.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .models import (
    FAMILIES,
    LAMBDA_FIELDS,
    MeasurementScheme,
    ModelSpec,
    default_n_max,
    default_tau,
    measurement_scheme,
    model_layout,
)

EXPERIMENTS = (
    "fisher_mc", "fisher_exact", "memory_loss", "rank_collapse",
    "gain", "time_budget", "jc_filter", "wigner",
)

DEFAULT_H = 1e-4
DEFAULT_N_REF = 600
DEFAULT_THRESHOLD = 0.90
DEFAULT_EPS_PRUNE = 1e-12
DEFAULT_BRANCH_CAP = 2_000_000
DEFAULT_FORMAT = "csv"
DEFAULT_WIGNER_POINTS = 81

# experiments that estimate a parameter and hence need lambda / h
LAMBDA_EXPERIMENTS = ("fisher_mc", "fisher_exact", "gain", "time_budget")

_TOP_KEYS = {
    "fisher_mc": {"lambda", "h", "n_seq", "mu_max"},
    "fisher_exact": {"lambda", "h", "n_seq", "eps_prune", "branch_cap"},
    "memory_loss": {"n_seq", "n_traj"},
    "rank_collapse": {"n_seq", "n_traj"},
    "gain": {"lambda", "h", "n_seq", "mu_max", "n_ref", "threshold"},
    "time_budget": {"lambda", "h", "n_seq", "mu_max", "total_time", "t_reset", "t_meas"},
    "jc_filter": {"n_seq", "checkpoints"},
    "wigner": {"n_seq", "grid"},
}
_COMMON_KEYS = {"experiment", "model", "scheme", "base_seed", "threads", "out", "format"}

_REQUIRED_KEYS = {
    "fisher_mc": {"lambda", "n_seq", "mu_max"},
    "fisher_exact": {"lambda", "n_seq"},
    "memory_loss": {"n_seq", "n_traj"},
    "rank_collapse": {"n_seq", "n_traj"},
    "gain": {"lambda", "n_seq", "mu_max"},
    "time_budget": {"lambda", "n_seq", "mu_max", "total_time", "t_reset"},
    "jc_filter": {"n_seq"},
    "wigner": {"n_seq"},
}

_MODEL_KEYS = {
    "heisenberg": {"N", "J", "B", "tau", "lambda_name"},
    "ising": {"N", "J", "B", "tau", "lambda_name"},
    "jaynes_cummings": {"omega", "Omega", "alpha", "n_max", "tau", "lambda_name",
                        "init_fock", "init_atom"},
    "lindblad_chain": {"N", "J", "kappa", "n_th", "tau", "lambda_name"},
    "random_unitary": {"N", "unitary_seed"},
}

_DEFAULT_LAMBDA_NAME = {
    "heisenberg": "B",
    "ising": "B",
    "jaynes_cummings": "Omega",
    "lindblad_chain": "kappa",
}


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run description with defaults applied."""

    experiment: str
    model: ModelSpec
    scheme: MeasurementScheme = None
    lam: float = None
    h: float = DEFAULT_H
    n_seq: int = None
    mu_max: int = None
    n_traj: int = None
    eps_prune: float = DEFAULT_EPS_PRUNE
    branch_cap: int = DEFAULT_BRANCH_CAP
    n_ref: int = DEFAULT_N_REF
    threshold: float = DEFAULT_THRESHOLD
    total_time: float = None
    t_reset: float = None
    t_meas: float = None
    checkpoints: tuple = None
    grid_q_max: float = None
    grid_points: int = DEFAULT_WIGNER_POINTS
    base_seed: int = 0
    threads: int = None
    out: str = None
    format: str = DEFAULT_FORMAT
    raw: dict = field(default=None, repr=False, compare=False)

    def canonical(self):
        """Defaults-filled dict in a fixed key order; echoed into outputs."""
        return _canonical_dict(self)


def _fail(path, message):
    raise ConfigError(f"{path}: {message}")


def _expect_type(value, path, kinds, label):
    if isinstance(value, bool) or not isinstance(value, kinds):
        _fail(path, f"must be {label}")
    return value


def _number(block, key, path, *, required=False, default=None, minimum=None,
            maximum=None, exclusive_min=None, integer=False):
    if key not in block:
        if required:
            _fail(f"{path}{key}", "is required")
        return default
    value = block[key]
    if integer:
        _expect_type(value, f"{path}{key}", int, "an integer")
    else:
        _expect_type(value, f"{path}{key}", (int, float), "a number")
        value = float(value)
    if minimum is not None and value < minimum:
        _fail(f"{path}{key}", f"must be >= {minimum}")
    if exclusive_min is not None and value <= exclusive_min:
        _fail(f"{path}{key}", f"must be > {exclusive_min}")
    if maximum is not None and value > maximum:
        _fail(f"{path}{key}", f"must be <= {maximum}")
    return value


def _check_keys(block, allowed, path):
    unknown = set(block) - allowed
    if unknown:
        name = sorted(unknown)[0]
        _fail(f"{path}{name}", "unknown key (strict schema)")


def _parse_model(block, experiment, lam):
    _expect_type(block, "model", dict, "an object")
    family = block.get("family")
    if family not in FAMILIES:
        _fail("model.family", f"must be one of {', '.join(FAMILIES)}")
    _check_keys(block, _MODEL_KEYS[family] | {"family"}, "model.")

    needs_lambda = experiment in LAMBDA_EXPERIMENTS
    lambda_name = block.get("lambda_name")
    if lambda_name is None and needs_lambda:
        lambda_name = _DEFAULT_LAMBDA_NAME.get(family)
        if lambda_name is None:
            _fail("model.family", f"{family} has no parameter to estimate")
    if lambda_name is not None and lambda_name not in LAMBDA_FIELDS.get(family, ()):
        _fail("model.lambda_name", f"must be one of {LAMBDA_FIELDS[family]}")
    if needs_lambda and lambda_name in block:
        _fail(f"model.{lambda_name}",
              "is the unknown parameter; set the top-level `lambda` instead")

    kwargs = {"family": family, "lambda_name": lambda_name}
    if family in ("heisenberg", "ising", "lindblad_chain"):
        kwargs["N"] = _number(block, "N", "model.", required=True, integer=True, minimum=2)
        kwargs["J"] = _number(block, "J", "model.", required=True, exclusive_min=0.0)
        if family == "lindblad_chain":
            kwargs["kappa"] = _number(block, "kappa", "model.", minimum=0.0)
            kwargs["n_th"] = _number(block, "n_th", "model.", minimum=0.0, default=0.0)
        else:
            kwargs["B"] = _number(block, "B", "model.")
        kwargs["tau"] = _number(block, "tau", "model.", exclusive_min=0.0)
    elif family == "jaynes_cummings":
        kwargs["omega"] = _number(block, "omega", "model.", required=True, exclusive_min=0.0)
        kwargs["Omega"] = _number(block, "Omega", "model.")
        kwargs["alpha"] = _number(block, "alpha", "model.")
        kwargs["n_max"] = _number(block, "n_max", "model.", integer=True, minimum=1)
        kwargs["tau"] = _number(block, "tau", "model.", exclusive_min=0.0)
        kwargs["init_fock"] = _number(block, "init_fock", "model.", integer=True, minimum=0)
        init_atom = block.get("init_atom", "g")
        if init_atom not in ("g", "e"):
            _fail("model.init_atom", "must be 'g' or 'e'")
        kwargs["init_atom"] = init_atom
    elif family == "random_unitary":
        kwargs["N"] = _number(block, "N", "model.", required=True, integer=True, minimum=1)
        kwargs["unitary_seed"] = _number(block, "unitary_seed", "model.",
                                         integer=True, minimum=0, default=0)
        if experiment in LAMBDA_EXPERIMENTS:
            _fail("model.family", "random_unitary has no parameter to estimate")

    # the value of the estimated parameter comes from the top-level lambda
    if needs_lambda and lambda_name is not None:
        kwargs[lambda_name] = lam
    try:
        spec = ModelSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc

    _check_buildable(spec, experiment)
    return spec


def _check_buildable(spec, experiment):
    """Every field the builders will touch must be present and consistent."""
    if spec.family in ("heisenberg", "ising") and spec.B is None:
        _fail("model.B", "is required for this experiment")
    if spec.family == "lindblad_chain" and spec.kappa is None:
        _fail("model.kappa", "is required for this experiment")
    if spec.family == "jaynes_cummings":
        if spec.Omega is None:
            _fail("model.Omega", "is required for this experiment")
        if spec.alpha is None and spec.init_fock is None:
            _fail("model.alpha", "set alpha (or init_fock) for the field preparation")
        layout = model_layout(spec)
        if spec.init_fock is not None and spec.init_fock > layout.local_dims[1] - 1:
            _fail("model.init_fock", "exceeds the Fock truncation n_max")
        if spec.alpha is not None and spec.n_max is not None \
                and spec.n_max < default_n_max(spec.alpha) and spec.init_fock is None:
            # explicit truncation below the tail bound: verify it now
            from .models import coherent_state
            try:
                coherent_state(spec.alpha, spec.n_max)
            except ValueError as exc:
                raise ConfigError(f"model.n_max: {exc}") from exc
    if experiment == "jc_filter" and spec.family != "jaynes_cummings":
        _fail("model.family", "jc_filter requires the jaynes_cummings family")
    if experiment == "wigner" and spec.family != "jaynes_cummings":
        _fail("model.family", "wigner requires the jaynes_cummings family")


def _parse_scheme(block, spec):
    if block is None:
        return None
    _expect_type(block, "scheme", dict, "an object")
    _check_keys(block, {"site", "basis", "vectors"}, "scheme.")
    layout = model_layout(spec)
    site = _number(block, "site", "scheme.", required=True, integer=True, minimum=0)
    if site >= layout.n_sites:
        _fail("scheme.site", f"out of range for {layout.n_sites} sites")
    basis = block.get("basis")
    if basis not in ("sigma_z", "sigma_x", "custom"):
        _fail("scheme.basis", "must be sigma_z, sigma_x, or custom")
    local_dim = layout.local_dims[site]
    vectors = None
    if basis == "custom":
        raw = block.get("vectors")
        if raw is None:
            _fail("scheme.vectors", "custom basis needs explicit vectors")
        try:
            vectors = np.asarray(raw, dtype=float).astype(complex)
        except (TypeError, ValueError):
            _fail("scheme.vectors", "must be a real matrix (list of rows)")
        if vectors.shape != (local_dim, local_dim):
            _fail("scheme.vectors", f"must be a {local_dim}x{local_dim} matrix")
    elif "vectors" in block:
        _fail("scheme.vectors", "only valid with the custom basis")
    try:
        return measurement_scheme(site, basis, local_dim, vectors)
    except ValueError as exc:
        raise ConfigError(f"scheme: {exc}") from exc


def parse_config(data):
    """Validate a decoded JSON document into a RunConfig."""
    _expect_type(data, "config", dict, "an object")
    experiment = data.get("experiment")
    if experiment not in EXPERIMENTS:
        _fail("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    _check_keys(data, _COMMON_KEYS | _TOP_KEYS[experiment], "")
    for key in _REQUIRED_KEYS[experiment]:
        if key not in data:
            _fail(key, "is required")
    if "model" not in data:
        _fail("model", "is required")

    lam = _number(data, "lambda", "", default=None)
    h = _number(data, "h", "", exclusive_min=0.0, default=DEFAULT_H)
    spec = _parse_model(data["model"], experiment, lam)
    scheme = _parse_scheme(data.get("scheme"), spec)

    n_seq = _number(data, "n_seq", "", integer=True, minimum=1,
                    required="n_seq" in _REQUIRED_KEYS[experiment])
    mu_max = _number(data, "mu_max", "", integer=True, minimum=1)
    n_traj = _number(data, "n_traj", "", integer=True, minimum=1)
    n_ref = _number(data, "n_ref", "", integer=True, minimum=1, default=DEFAULT_N_REF)
    threshold = _number(data, "threshold", "", exclusive_min=0.0, maximum=1.0,
                        default=DEFAULT_THRESHOLD)
    eps_prune = _number(data, "eps_prune", "", minimum=0.0, default=DEFAULT_EPS_PRUNE)
    branch_cap = _number(data, "branch_cap", "", integer=True, minimum=1,
                         default=DEFAULT_BRANCH_CAP)
    total_time = _number(data, "total_time", "", exclusive_min=0.0)
    t_reset = _number(data, "t_reset", "", minimum=0.0)
    t_meas = _number(data, "t_meas", "", minimum=0.0)
    if experiment == "time_budget" and t_meas is None:
        t_meas = 10.0 * default_tau(spec)
    if experiment == "gain" and n_seq is not None and n_seq < n_ref:
        _fail("n_seq", f"must be >= n_ref ({n_ref}) for the gain experiment")

    checkpoints = None
    if "checkpoints" in data:
        raw = data["checkpoints"]
        if not isinstance(raw, list) or not all(
                isinstance(c, int) and not isinstance(c, bool) for c in raw):
            _fail("checkpoints", "must be a list of integers")
        if any(c < 0 or c > n_seq for c in raw):
            _fail("checkpoints", "entries must lie in [0, n_seq]")
        checkpoints = tuple(sorted(set(raw)))

    grid_q_max = None
    grid_points = DEFAULT_WIGNER_POINTS
    if "grid" in data:
        block = data["grid"]
        _expect_type(block, "grid", dict, "an object")
        _check_keys(block, {"q_max", "points"}, "grid.")
        grid_q_max = _number(block, "q_max", "grid.", exclusive_min=0.0)
        grid_points = _number(block, "points", "grid.", integer=True, minimum=5,
                              default=DEFAULT_WIGNER_POINTS)

    base_seed = _number(data, "base_seed", "", integer=True, minimum=0, default=0)
    if base_seed > (1 << 64) - 1:
        _fail("base_seed", "must fit in 64 bits")
    threads = _number(data, "threads", "", integer=True, minimum=1)
    out = data.get("out")
    if out is not None:
        _expect_type(out, "out", str, "a string")
    fmt = data.get("format", DEFAULT_FORMAT)
    if fmt not in ("csv", "json"):
        _fail("format", "must be csv or json")

    return RunConfig(
        experiment=experiment, model=spec, scheme=scheme, lam=lam, h=h,
        n_seq=n_seq, mu_max=mu_max, n_traj=n_traj, eps_prune=eps_prune,
        branch_cap=branch_cap, n_ref=n_ref, threshold=threshold,
        total_time=total_time, t_reset=t_reset, t_meas=t_meas,
        checkpoints=checkpoints, grid_q_max=grid_q_max, grid_points=grid_points,
        base_seed=base_seed, threads=threads, out=out, format=fmt, raw=data,
    )


def load_config(path):
    """Read, decode, and validate a JSON run configuration."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config {path} is not valid JSON (line {exc.lineno}, column {exc.colno}): "
            f"{exc.msg}"
        ) from exc
    return parse_config(data)


def _canonical_dict(cfg):
    model = {"family": cfg.model.family}
    for name in ("N", "n_max", "J", "B", "omega", "Omega", "kappa", "n_th",
                 "alpha", "tau", "lambda_name", "init_fock", "unitary_seed"):
        value = getattr(cfg.model, name)
        if value is not None and not (name == "unitary_seed"
                                      and cfg.model.family != "random_unitary"):
            model[name] = value
    if cfg.model.family == "jaynes_cummings" and cfg.model.init_atom != "g":
        model["init_atom"] = cfg.model.init_atom
    doc = {"experiment": cfg.experiment, "model": model}
    if cfg.scheme is not None:
        doc["scheme"] = {"site": cfg.scheme.site, "basis": cfg.scheme.basis}
        if cfg.scheme.basis == "custom":
            doc["scheme"]["vectors"] = [[float(v.real) for v in row]
                                        for row in cfg.scheme.vectors]
    if cfg.experiment in LAMBDA_EXPERIMENTS:
        doc["lambda"] = cfg.lam
        doc["h"] = cfg.h
    doc["n_seq"] = cfg.n_seq
    if cfg.mu_max is not None:
        doc["mu_max"] = cfg.mu_max
    if cfg.n_traj is not None:
        doc["n_traj"] = cfg.n_traj
    if cfg.experiment == "fisher_exact":
        doc["eps_prune"] = cfg.eps_prune
        doc["branch_cap"] = cfg.branch_cap
    if cfg.experiment == "gain":
        doc["n_ref"] = cfg.n_ref
        doc["threshold"] = cfg.threshold
    if cfg.experiment == "time_budget":
        doc["total_time"] = cfg.total_time
        doc["t_reset"] = cfg.t_reset
        doc["t_meas"] = cfg.t_meas
    if cfg.checkpoints is not None:
        doc["checkpoints"] = list(cfg.checkpoints)
    if cfg.experiment == "wigner":
        doc["grid"] = {"points": cfg.grid_points}
        if cfg.grid_q_max is not None:
            doc["grid"]["q_max"] = cfg.grid_q_max
    doc["base_seed"] = cfg.base_seed
    doc["format"] = cfg.format
    return doc
