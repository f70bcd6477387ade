"""Command-line entry point: ``blockchaos <command> [flags]``.

Exit codes: 0 success, 1 configuration or validation error, 2 numerical or
I/O failure (a JSON diagnostic is written to stderr).
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from typing import List, Optional

import numpy as np

from . import que, resolvent, spectral
from .config import COMMAND_FIELDS, MODEL_FIELDS, RUNTIME_FIELDS, REQUIRED, ExperimentConfig, build_config, load_config_file
from .dyson import (DysonModel, density_table, flow_integrate, quantiles, residual, solve_m,
                    two_point_kernel)
from .errors import BlockChaosError, ConfigError, ContractError, NumericalError
from .io import Dataset, emit, infer_format, metadata, to_jsonable
from .model import MatrixLabel, build_interaction, block_diagonal, sample_h_lambda
from .parallel import ordered_map, resolve_threads, default_threads

log = logging.getLogger("blockchaos")

COMMANDS = ("sample", "dyson", "spectrum", "gaps", "que", "twores", "flow", "sweep")


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so usage errors map to exit code 1."""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _add_fields(parser, fields):
    for name, f in fields.items():
        flag = "--" + name.replace("_", "-")
        if f.parse.__name__ == "_bool":
            parser.add_argument(flag, dest=name, action="store_const", const=True, default=None, help=f.help)
        else:
            default = "required" if f.default is REQUIRED else f.default
            parser.add_argument(flag, dest=name, default=None, metavar=name.upper(),
                                help=f"{f.help} (default: {default})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="blockchaos", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="command")
    for cmd in COMMANDS:
        p = sub.add_parser(cmd, help=_HELP[cmd])
        p.add_argument("--config", default=None, help="JSON config file; flags override its values")
        _add_fields(p, MODEL_FIELDS)
        _add_fields(p, COMMAND_FIELDS[cmd])
        _add_fields(p, RUNTIME_FIELDS)
    return parser


_HELP = {
    "sample": "sample one realization of H, Lambda or H + Lambda (JSON matrix)",
    "dyson": "solve the Dyson equation; optional kernels, density table and quantiles",
    "spectrum": "eigenvalues and block-mass statistics of one realization",
    "gaps": "normalized bulk gaps pooled over realizations (and a histogram)",
    "que": "block masses of one eigenvector per realization",
    "twores": "Monte-Carlo two-resolvent trace against the deterministic kernel",
    "flow": "integrate the characteristic flow",
    "sweep": "localization / chaos sweep over the interaction strength",
}


# ---------------------------------------------------------------------------
# commands; each returns (Dataset, extra metadata) or a list of (path, Dataset, extra)


def _cmd_sample(cfg: ExperimentConfig):
    model = cfg.model
    model.check_budget()
    lam = build_interaction(model.interaction, model.d_blocks, model.block_size)
    blocks, h = sample_h_lambda(model, model.streams("sample").child(cfg.params["realization"]), lam)
    label = MatrixLabel(cfg.params["matrix"])
    if label is MatrixLabel.H:
        mat = block_diagonal(blocks)
    elif label is MatrixLabel.LAMBDA:
        mat = lam
    else:
        mat = h
    payload = {"label": label.value, "d_blocks": model.d_blocks, "block_size": model.block_size,
               "dim": mat.dim, "hermitian_deviation": mat.hermitian_deviation(), "entries": mat.entries}
    return Dataset("matrix", payload=payload), {}


def _cmd_dyson(cfg: ExperimentConfig):
    model = cfg.model
    dm = DysonModel.from_spec(model.interaction, model.d_blocks, model.block_size)
    outputs = []
    zs = cfg.params.get("z")
    if zs:
        sols = [solve_m(z, dm) for z in zs]
        items = [{"z": s.z, "m": s.m, "residual": residual(s), "iterations": s.iterations,
                  "block_traces": s.block_traces()} for s in sols]
        payload = {"solutions": items}
        if cfg.params.get("z2") is not None:
            s2 = solve_m(cfg.params["z2"], dm)
            kern = two_point_kernel(sols[0], s2)
            payload["kernel"] = {"z1": kern.z1, "z2": kern.z2, "mhat": kern.mhat, "K": kern.kernel_k,
                                 "eigenvalues": kern.eigenvalues, "flatness": kern.flatness}
        outputs.append(("out", Dataset("dyson", payload=payload), {}))
    if cfg.params.get("energies"):
        es = cfg.params["energies"]
        rho = density_table(es, dm, eta0=cfg.params["eta0"])
        ds = Dataset("density", ("E", "rho"), [(e, r) for e, r in zip(es, rho)])
        outputs.append(("density", ds, {}))
    if cfg.params.get("quantiles"):
        ks = cfg.params["quantiles"]
        gam = quantiles(ks, dm)
        outputs.append(("quantiles", Dataset("quantiles", ("k", "gamma_k"), list(zip(ks, gam))), {}))
    return outputs


def _cmd_spectrum(cfg: ExperimentConfig):
    model = cfg.model
    model.check_budget()
    _, h = sample_h_lambda(model, model.streams("spectrum").child(cfg.params["realization"]))
    dec = spectral.eig_hermitian(h)
    masses = que.mass_matrix(dec, model.d_blocks)
    qs = np.max(np.abs(masses - 1.0 / model.d_blocks), axis=0)
    loc = masses.max(axis=0)
    rows = [(k, lam, q, l) for k, (lam, q, l) in enumerate(zip(dec.eigenvalues, qs, loc))]
    return Dataset("spectrum", ("k", "lambda_k", "que_stat", "loc_stat"), rows), {}


def _cmd_gaps(cfg: ExperimentConfig):
    model = cfg.model
    model.check_budget()
    streams = model.streams("gaps")
    lam = build_interaction(model.interaction, model.d_blocks, model.block_size)
    kappa = cfg.params["kappa"]

    def one(r):
        _, h = sample_h_lambda(model, streams.child(r), lam)
        return spectral.normalized_gaps(spectral.eig_hermitian(h, vectors=False), kappa)

    samples = ordered_map(one, range(cfg.params["realizations"]), cfg.params.get("threads"))
    rows = [row for s in samples for row in s.rows()]
    pooled = np.concatenate([s.normalized_gaps for s in samples])
    surmise = spectral.surmise_for(model.ensemble)
    extra = {
        "realizations": cfg.params["realizations"],
        "ks_exponential": spectral.ks_distance(pooled, spectral.ReferenceKind.EXPONENTIAL),
        "ks_surmise": spectral.ks_distance(pooled, surmise),
        "surmise": surmise.value,
        "mean_normalized_gap": float(pooled.mean()),
    }
    outputs = [("out", Dataset("gaps", ("k", "lambda_k", "gap", "normalized_gap"), rows), extra)]
    if cfg.params.get("hist_out"):
        hist = spectral.gap_histogram(pooled)
        cols = ("bin_left", "bin_right", "density", "ref_exponential", "ref_goe", "ref_gue")
        outputs.append(("hist_out", Dataset("gap_histogram", cols, list(zip(*(hist[c] for c in cols)))), extra))
    return outputs


def _cmd_que(cfg: ExperimentConfig):
    model = cfg.model
    model.check_budget()
    d, dim = model.d_blocks, model.dim
    k = cfg.params.get("k")
    k = dim // 2 - 1 if k is None else k
    if not 0 <= k < dim:
        raise ConfigError(f"config.k: index {k} out of range [0, {dim})")
    streams = model.streams("que")
    lam = build_interaction(model.interaction, d, model.block_size)

    def one(r):
        _, h = sample_h_lambda(model, streams.child(r), lam)
        return que.block_masses(spectral.eig_hermitian(h), k, d)

    profiles = ordered_map(one, range(cfg.params["realizations"]), cfg.params.get("threads"))
    cols = ("realization", "k", "que_stat", "loc_stat") + tuple(f"mass_{a}" for a in range(d))
    rows = [(r, p.k, p.que_stat, p.loc_stat, *p.masses) for r, p in enumerate(profiles)]
    extra = {"median_que": float(np.median([p.que_stat for p in profiles])),
             "median_loc": float(np.median([p.loc_stat for p in profiles]))}
    return Dataset("que", cols, rows), extra


def _cmd_twores(cfg: ExperimentConfig):
    model = cfg.model
    model.check_budget()
    est = resolvent.monte_carlo_L(model, cfg.params["z1"], cfg.params["z2"], cfg.params["realizations"],
                                  model.streams("twores"), cfg.params.get("threads"))
    return Dataset("twores", payload=est.to_dict()), {}


def _cmd_flow(cfg: ExperimentConfig):
    model = cfg.model
    dm = DysonModel.from_spec(model.interaction, model.d_blocks, model.block_size)
    z0 = cfg.params["z0"]
    t_end = cfg.params.get("t_end")
    if t_end is None:
        m0 = solve_m(z0, dm).m
        t_end = float(np.log1p(z0.imag / m0.imag)) * 1.05
    t_eval = np.linspace(0.0, t_end, cfg.params["points"])
    traj = flow_integrate(dm, z0, t_end, t_eval=t_eval, im_floor=cfg.params["im_floor"])
    cols = ("t", "z_re", "z_im", "lambda_scale", "m_re", "m_im", "t_c_estimate")
    rows = [(s.t, s.z_t.real, s.z_t.imag, s.lambda_scale, s.m_t.real, s.m_t.imag, s.t_c_estimate)
            for s in traj.states]
    return Dataset("flow", cols, rows), {"truncated": traj.truncated, "t_end": t_end}


def _cmd_sweep(cfg: ExperimentConfig):
    model = cfg.model
    model.check_budget()
    if cfg.params.get("lambda_exponents") is not None:
        grid = que.lambda_grid_from_exponents(cfg.params["lambda_exponents"], model.block_size)
    else:
        grid = np.asarray(cfg.params["lambda_values"], dtype=float)
    summary = que.transition_sweep(model, grid, cfg.params["realizations"], cfg.params["kappa"],
                                   cfg.params["index_mode"], model.streams("sweep"), cfg.params.get("threads"))
    rows = [tuple(row[c] for c in que.SWEEP_COLUMNS) for row in summary.rows]
    extra = {"surmise": summary.surmise.value, "index_mode": summary.index_mode}
    return Dataset("sweep", que.SWEEP_COLUMNS, rows), extra


_COMMANDS = {
    "sample": _cmd_sample, "dyson": _cmd_dyson, "spectrum": _cmd_spectrum, "gaps": _cmd_gaps,
    "que": _cmd_que, "twores": _cmd_twores, "flow": _cmd_flow, "sweep": _cmd_sweep,
}


def _output_path(base: str, key: str, cfg: ExperimentConfig) -> str:
    if key == "out":
        return base
    if key == "hist_out":
        return cfg.params["hist_out"]
    # secondary dyson tables go next to the main output
    stem, dot, ext = base.rpartition(".")
    return f"{stem}.{key}.csv" if dot else f"{base}.{key}.csv"


def execute(cfg: ExperimentConfig) -> List[str]:
    """Run a validated experiment and write its outputs; returns the paths written."""
    result = _COMMANDS[cfg.command](cfg)
    outputs = result if isinstance(result, list) else [("out", *result)]
    deterministic = bool(cfg.params.get("deterministic"))
    written = []
    rendered = []
    base = cfg.params["out"]
    for key, dataset, extra in outputs:
        path = _output_path(base, key, cfg)
        fmt = infer_format(path, cfg.params.get("format") if key == "out" else None)
        if fmt == "csv" and dataset.payload is not None:
            fmt = "json" if key == "out" and cfg.params.get("format") is None else fmt
        meta = metadata(cfg.command, cfg.to_dict(), deterministic, extra)
        rendered.append((dataset, fmt, path, meta))
    for dataset, fmt, path, meta in rendered:
        try:
            emit(dataset, fmt, path, meta)
        except OSError as exc:
            raise NumericalError(f"cannot write {path}: {exc}", path=str(path)) from None
        written.append(str(path))
    return written


_NEGATIVE = re.compile(r"^-[0-9.]")


def _glue_negative_values(argv: List[str]) -> List[str]:
    """Rewrite ``--flag -1,-0.3`` as ``--flag=-1,-0.3`` so argparse keeps negative values."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv) and _NEGATIVE.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(_glue_negative_values(argv))
        if args.command is None:
            raise ConfigError("missing command; choose one of " + ", ".join(COMMANDS))
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(name)s: %(message)s", stream=sys.stderr)
        values = vars(args)
        file_values = load_config_file(values.pop("config")) if values.get("config") else {}
        values.pop("verbose", None)
        command = values.pop("command")
        cfg = build_config(command, file_values, values)
        if cfg.params.get("threads") is None:
            cfg.params["threads"] = default_threads()
        resolve_threads(cfg.params["threads"])
        for path in execute(cfg):
            log.info("wrote %s", path)
        return 0
    except NumericalError as exc:
        diag = {"error": str(exc), "diagnostics": to_jsonable(exc.diagnostics)}
        print(json.dumps(diag), file=sys.stderr)
        return 2
    except (ConfigError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BlockChaosError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
