"""Command-line entry point: one subcommand per experiment, plus validate
and version. Flags override the matching config fields.

Exit codes: 0 success, 2 configuration error, 3 numerical-contract
violation, 4 I/O failure.
"""

import argparse
import sys
import time
from dataclasses import replace

import numpy as np

from . import diagnostics, engine, fisher
from .config import EXPERIMENTS, load_config
from .errors import ConfigError, ContractError
from .io import VERSION, ResultEnvelope, emit, to_csv_bytes, to_json_bytes
from .linalg import partial_trace
from .models import default_tau, model_layout
from .protocol import compile_protocol


def run(cfg):
    """Dispatch a validated RunConfig to its experiment; returns the envelope."""
    started = time.perf_counter()
    counts = {}
    kind = cfg.experiment
    if kind == "fisher_mc":
        payload = fisher.mc_fisher(
            cfg.model, cfg.scheme, lam=cfg.lam, h=cfg.h, n_seq=cfg.n_seq,
            mu_max=cfg.mu_max, base_seed=cfg.base_seed, threads=cfg.threads)
        counts = {"mu_max": cfg.mu_max, "aborted": payload.aborted}
    elif kind == "fisher_exact":
        tree = engine.enumerate_tree(
            cfg.model, cfg.scheme, lam=cfg.lam, h=cfg.h, n_max=cfg.n_seq,
            eps_prune=cfg.eps_prune, branch_cap=cfg.branch_cap)
        payload = fisher.exact_fisher(tree)
        counts = {"pruned_mass": float(tree.deficit[-1]),
                  "degenerate_branches": tree.degenerate}
    elif kind == "memory_loss":
        payload = diagnostics.memory_loss_curve(
            cfg.model, cfg.scheme, n_seq=cfg.n_seq, n_traj=cfg.n_traj,
            seed=cfg.base_seed, threads=cfg.threads)
        counts = {"n_traj": cfg.n_traj,
                  "excluded": payload.metadata.get("excluded", 0)}
    elif kind == "rank_collapse":
        payload = diagnostics.rank_collapse_curve(
            cfg.model, cfg.scheme, n_seq=cfg.n_seq, n_traj=cfg.n_traj,
            seed=cfg.base_seed, threads=cfg.threads)
        counts = {"n_traj": cfg.n_traj}
    elif kind == "gain":
        series = fisher.mc_fisher(
            cfg.model, cfg.scheme, lam=cfg.lam, h=cfg.h, n_seq=cfg.n_seq,
            mu_max=cfg.mu_max, base_seed=cfg.base_seed, threads=cfg.threads)
        payload = fisher.gain_analysis(series, n_ref=cfg.n_ref,
                                       threshold=cfg.threshold)
        counts = {"mu_max": cfg.mu_max, "aborted": series.aborted}
    elif kind == "time_budget":
        series = fisher.mc_fisher(
            cfg.model, cfg.scheme, lam=cfg.lam, h=cfg.h, n_seq=cfg.n_seq,
            mu_max=cfg.mu_max, base_seed=cfg.base_seed, threads=cfg.threads)
        payload = fisher.time_budget_analysis(
            series, cfg.total_time, cfg.t_reset, cfg.t_meas,
            default_tau(cfg.model))
        counts = {"mu_max": cfg.mu_max, "aborted": series.aborted}
    elif kind == "jc_filter":
        payload = diagnostics.jc_filter_snapshot(
            cfg.model, n_seq=cfg.n_seq, seed=cfg.base_seed,
            checkpoints=cfg.checkpoints)
    elif kind == "wigner":
        payload = _wigner_payload(cfg)
    else:  # pragma: no cover - EXPERIMENTS is exhaustive
        raise ConfigError(f"unknown experiment {kind!r}")
    duration = time.perf_counter() - started
    return ResultEnvelope(config=cfg.canonical(), payload=payload,
                          counts=counts, duration_s=duration)


def jc_final_field_state(model, n_seq, seed):
    """Field density matrix after one sampled cavity-model trajectory."""
    protocol = compile_protocol(model)
    uniforms = engine.kernels.trajectory_uniforms(seed, 0, 1, max(n_seq, 1))[0]
    state = protocol.init.copy()
    for n in range(n_seq):
        state = protocol.ops[0] @ state
        dens = state.real ** 2 + state.imag ** 2
        probs = np.bincount(protocol.group, weights=dens, minlength=protocol.n_out)
        u = uniforms[n] * probs.sum()
        sel = min(int(np.searchsorted(np.cumsum(probs), u, side="right")),
                  protocol.n_out - 1)
        state = np.where(protocol.group == sel, state, 0.0) / np.sqrt(probs[sel])
    psi = protocol.state_from_frame(state)
    layout = model_layout(model)
    return partial_trace(np.outer(psi, psi.conj()), layout, keep=1)


def _wigner_payload(cfg):
    rho_field = jc_final_field_state(cfg.model, cfg.n_seq, cfg.base_seed)
    n_fock = rho_field.shape[0]
    q_max = cfg.grid_q_max
    if q_max is None:
        q_max = np.sqrt(2.0 * (n_fock - 1)) + 3.0
    grid = np.linspace(-q_max, q_max, cfg.grid_points)
    return diagnostics.wigner(rho_field, grid, grid)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="seqfisher",
        description="Sequential-measurement sensing simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENTS + ("validate",):
        p = sub.add_parser(kind)
        p.add_argument("--config", required=True, help="JSON run configuration")
        if kind != "validate":
            p.add_argument("--out", default=None, help="output path ('-' = stdout)")
            p.add_argument("--format", default=None, choices=("csv", "json"))
            p.add_argument("--threads", default=None, type=int)
            p.add_argument("--seed", default=None, type=int, help="override base_seed")
    sub.add_parser("version")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.command == "version":
        print(VERSION)
        return 0
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"ok: {args.config} is a valid {cfg.experiment} configuration")
            return 0
        if cfg.experiment != args.command:
            raise ConfigError(
                f"experiment: config declares {cfg.experiment!r} but the "
                f"{args.command!r} subcommand was invoked"
            )
        if args.seed is not None:
            if args.seed < 0 or args.seed > (1 << 64) - 1:
                raise ConfigError("seed: must fit in 64 bits")
            cfg = replace(cfg, base_seed=args.seed)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("threads: must be >= 1")
            cfg = replace(cfg, threads=args.threads)
        if args.format is not None:
            cfg = replace(cfg, format=args.format)
        if args.out is not None:
            cfg = replace(cfg, out=args.out)

        envelope = run(cfg)
        out = cfg.out or "-"
        if out == "-":
            data = to_csv_bytes(envelope) if cfg.format == "csv" \
                else to_json_bytes(envelope)
            sys.stdout.buffer.write(data)
        else:
            emit(envelope, cfg.format, out)
        print(f"{cfg.experiment} finished in {envelope.duration_s:.2f}s",
              file=sys.stderr)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ContractError as exc:
        print(f"numerical contract violation: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
