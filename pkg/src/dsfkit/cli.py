"""Command-line front end.

Every command reads an optional config file (``--config``) plus ``--set
key=value`` overrides, writes its outputs atomically into ``--out`` and
records a manifest with the resolved config and output checksums.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import build_plan
from .config import RunConfig
from .errors import (
    AliasingError,
    ConfigError,
    ConvergenceError,
    DsfError,
    NormalizationError,
    SizeLimitError,
    StructuralError,
)
from .exact import Statevector, lanczos_ground_state, energy as sv_energy
from .metrics import compare
from .mps import MPS, bond_convergence_scan, mps_energy, mps_ground_state
from .noise import noisy_protocol
from .rgf import RgfGrid, run_protocol
from .spectrum import DsfGrid, dsf_pipeline, max1_normalize, resolution_report, sum_rule_normalize

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class InputError(DsfError):
    """Missing or malformed input file."""


# ---------------------------------------------------------------------------
# file helpers


def atomic_write(path: Path, data: bytes | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _text_of(writer) -> str:
    buf = io.StringIO()
    writer(buf)
    return buf.getvalue()


def gnuplot_matrix(grid: DsfGrid) -> str:
    """``matrix nonuniform`` layout: first row q values, then one row per omega."""
    lines = [" ".join([str(len(grid.q_axis))] + [f"{q:.17g}" for q in grid.q_axis])]
    for i, w in enumerate(grid.omega_axis):
        lines.append(" ".join([f"{w:.17g}"] + [f"{x:.17g}" for x in grid.values[:, i]]))
    return "\n".join(lines) + "\n"


class Run:
    """Output directory bookkeeping for one command."""

    def __init__(self, out: Path, command: str, cfg: RunConfig | None, argv: list[str]):
        self.out = Path(out)
        self.command = command
        self.cfg = cfg
        self.argv = argv
        self.files: dict[str, str] = {}

    def write(self, name: str, data: bytes | str) -> Path:
        path = self.out / name
        atomic_write(path, data)
        raw = data.encode() if isinstance(data, str) else data
        self.files[name] = hashlib.sha256(raw).hexdigest()
        return path

    def finish(self) -> None:
        """Record this run in ``manifest.txt``.

        Runs sharing a directory each get a ``[run]`` block; re-running the
        same command line replaces its block, so repeated pipelines give
        identical manifests.
        """
        lines = ["[run]", f"command = {self.command}", f"dsfkit_version = {__version__}",
                 "argv = " + " ".join(self.argv)]
        if self.cfg is not None:
            lines.append("[config]")
            lines.append(self.cfg.to_text().rstrip("\n"))
        lines.append("[outputs]")
        lines += [f"{name} sha256={digest}" for name, digest in sorted(self.files.items())]
        block = "\n".join(lines) + "\n"
        path = self.out / "manifest.txt"
        blocks = read_manifest(path) if path.exists() else []
        argv_line = lines[3]
        blocks = [b for b in blocks if argv_line not in b.splitlines()]
        atomic_write(path, "".join(blocks + [block]))


def read_manifest(path) -> list[str]:
    """Run blocks of a manifest file."""
    text = Path(path).read_text()
    parts = text.split("[run]\n")
    return ["[run]\n" + p for p in parts[1:]]


def _load_config(args) -> RunConfig:
    text = ""
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise InputError(f"cannot read config: {exc}") from exc
    return RunConfig.load(text, getattr(args, "set", None) or [])


def _read_rgf(path) -> RgfGrid:
    try:
        with open(path) as fh:
            return RgfGrid.read_csv(fh)
    except OSError as exc:
        raise InputError(f"cannot read RGF file: {exc}") from exc
    except (StructuralError, ValueError) as exc:
        raise InputError(f"malformed RGF file {path}: {exc}") from exc


def _read_dsf(path) -> DsfGrid:
    try:
        with open(path) as fh:
            return DsfGrid.read_csv(fh)
    except OSError as exc:
        raise InputError(f"cannot read DSF file: {exc}") from exc
    except (StructuralError, ValueError) as exc:
        raise InputError(f"malformed DSF file {path}: {exc}") from exc


def _load_state(out: Path, cfg: RunConfig, checkpoint: str | None):
    paths = [Path(checkpoint)] if checkpoint else [out / "ground_state.mps", out / "ground_state.npy"]
    for p in paths:
        if p.exists():
            if p.suffix == ".npy":
                data = np.load(p)
                return Statevector(int(round(math.log2(data.size))), data)
            with open(p, "rb") as fh:
                try:
                    return MPS.read(fh)
                except StructuralError as exc:
                    raise InputError(f"bad checkpoint {p}: {exc}") from exc
    raise InputError(f"no ground-state checkpoint found (looked for {', '.join(map(str, paths))})")


def _prep_gates(out: Path, cfg: RunConfig):
    """Ansatz gates of a variational preparation, if one was recorded."""
    from .vqe import AnsatzSpec, ansatz_gates, read_parameters

    path = out / "vqe_params.txt"
    if cfg["run.prep"] != "vqe" or not path.exists():
        return []
    with open(path) as fh:
        entries = read_parameters(fh)
    (_, _, layers), params = next(iter(entries.items()))
    return ansatz_gates(AnsatzSpec(cfg["vqe.initial"], layers), cfg.model(), params)


# ---------------------------------------------------------------------------
# commands


def cmd_groundstate(args) -> None:
    cfg = _load_config(args)
    run = Run(args.out, "groundstate", cfg, args.argv)
    model = cfg.model()
    prep = cfg["run.prep"]
    report = {"n": model.n, "prep": prep}
    if prep == "lanczos":
        state, e = lanczos_ground_state(model)
        report["energy"] = e
    elif prep == "mps":
        ramp = [int(x) for x in cfg["mps.chi_ramp"].split(",") if x.strip()]
        state = mps_ground_state(
            model, chi_max=cfg["run.chi_max"], convergence_tol=cfg["mps.convergence_tol"],
            truncation_tol=cfg["run.truncation_tol"], chi_ramp=ramp,
        )
        report["energy"] = mps_energy(state, model)
        report["max_bond"] = max(state.bond_dims) if state.bond_dims else 1
    else:
        from .vqe import AnsatzSpec, apply_ansatz, optimize_fidelity, reference_states, write_parameters

        spec = AnsatzSpec(cfg["vqe.initial"], cfg["vqe.layers"])
        refs = reference_states(model)
        res = optimize_fidelity(spec, model, refs, budget=cfg["vqe.budget"], seed=cfg["run.seed"])
        state = apply_ansatz(spec, model, res.params)
        report["energy"] = sv_energy(model, state)
        report["fidelity"] = res.fidelity
        report["evaluations"] = res.evaluations
        report["budget_exhausted"] = int(res.budget_exhausted)
        key = (cfg["model.preset"] or "custom", model.n, spec.layers)
        run.write("vqe_params.txt", _text_of(lambda fh: write_parameters(fh, {key: res.params})))
    if model.n <= 14:
        from .model import ground_energy_dense

        report["reference_energy"] = ground_energy_dense(model)
        if isinstance(state, Statevector) and prep != "vqe":
            ref, _ = lanczos_ground_state(model) if prep != "lanczos" else (state, None)
            report["fidelity"] = float(abs(np.vdot(ref.data, state.data)) ** 2)
    engine = cfg["run.engine"]
    if engine == "mps" and isinstance(state, Statevector):
        state = MPS.from_statevector(state, cfg["run.chi_max"], cfg["run.truncation_tol"])
    elif engine == "exact" and isinstance(state, MPS):
        state = state.to_statevector()
    if isinstance(state, MPS):
        run.write("ground_state.mps", state.to_bytes())
    else:
        buf = io.BytesIO()
        np.save(buf, state.data)
        run.write("ground_state.npy", buf.getvalue())
    text = "".join(
        f"{k} = {v:.17g}\n" if isinstance(v, float) else f"{k} = {v}\n" for k, v in report.items()
    )
    run.write("energy.txt", text)
    run.finish()
    print(text, end="")


def cmd_rgf(args) -> None:
    cfg = _load_config(args)
    run = Run(args.out, "rgf", cfg, args.argv)
    model = cfg.model()
    state = _load_state(Path(args.out), cfg, args.checkpoint)
    if state.n != model.n:
        raise ConfigError(f"checkpoint has n={state.n}, config n={model.n}")
    plan = build_plan(model, cfg["run.dt"], cfg["run.steps"], cfg["run.order"])
    for ch in cfg.channels:
        grid = run_protocol(
            state, model, plan, ch[0], ch[1], engine=cfg["run.engine"],
            chi_max=cfg["run.chi_max"], truncation_tol=cfg["run.truncation_tol"],
        )
        run.write(f"rgf_{ch}.csv", _text_of(grid.write_csv))
    run.finish()


def cmd_noise_sim(args) -> None:
    cfg = _load_config(args)
    noise = cfg.noise()
    if noise is None:
        raise ConfigError("noise-sim needs noise.mean")
    run = Run(args.out, "noise-sim", cfg, args.argv)
    model = cfg.model()
    state = _load_state(Path(args.out), cfg, args.checkpoint)
    plan = build_plan(model, cfg["run.dt"], cfg["run.steps"], cfg["run.order"])
    prep = _prep_gates(Path(args.out), cfg)
    for ch in cfg.channels:
        grid = noisy_protocol(state, model, plan, noise, ch[0], ch[1], prep_gates=prep)
        run.write(f"rgf_noisy_{ch}.csv", _text_of(grid.write_csv))
    run.finish()


def _flag(value: str, default: bool) -> bool:
    return default if value == "auto" else value == "true"


def cmd_dsf(args) -> None:
    if args.sum_rule:
        args.set = (args.set or []) + ["dsf.normalization=sum_rule"]
    cfg = _load_config(args)
    run = Run(args.out, "dsf", cfg, args.argv)
    grids = [_read_rgf(p) for p in args.rgf]
    window = None if cfg["dsf.window"] == "none" else cfg["dsf.window"]
    dsfs = {}
    for g in grids:
        mirror = _flag(cfg["dsf.mirror"], g.n % 2 == 0)
        dsfs[g.alpha + g.beta] = dsf_pipeline(g, cfg["dsf.temperature"], mirror, window, cfg["dsf.pad"])
    norm = cfg["dsf.normalization"]
    if norm == "sum_rule":
        iso = _flag(cfg["dsf.isotropic"], len(dsfs) < 3)
        if len(dsfs) == 1:
            dsfs = {k: sum_rule_normalize(v, isotropic=iso) for k, v in dsfs.items()}
        else:
            dsfs = sum_rule_normalize(dsfs, isotropic=iso)
    elif norm == "max1":
        dsfs = {k: max1_normalize(v) if np.max(v.values) > 0 else v for k, v in dsfs.items()}
    prefix = args.prefix
    for ch, d in dsfs.items():
        run.write(f"{prefix}_{ch}.csv", _text_of(d.write_csv))
        if args.plot_data:
            run.write(f"{prefix}_{ch}.dat", gnuplot_matrix(d))
    run.finish()


def cmd_compare(args) -> None:
    cfg = _load_config(args)
    run = Run(args.out, "compare", cfg, args.argv)
    a, b = _read_dsf(args.a), _read_dsf(args.b)
    iso = _flag(cfg["dsf.isotropic"], True)
    report = compare(a, b, allow_align=args.align, isotropic=iso)
    run.write("report.txt", report.to_text())
    run.write("report.csv", _text_of(report.csv_row))
    run.write("nqfi.csv", _text_of(report.write_nqfi_csv))
    run.write("peaks.csv", _text_of(report.write_peaks_csv))
    run.finish()
    print(report.to_text(), end="")


def cmd_resolution(args) -> None:
    rep = resolution_report(
        args.n, args.steps, args.dt, args.e_max, args.dim, args.gates, args.depth, args.ny
    )
    text = rep.to_text()
    if args.out:
        run = Run(args.out, "resolution", None, args.argv)
        run.write("resolution.txt", text)
        run.finish()
    print(text, end="")


def cmd_scan(args) -> None:
    cfg = _load_config(args)
    run = Run(args.out, "scan", cfg, args.argv)
    model = cfg.model()
    if cfg["scan.kind"] == "bond":
        res = bond_convergence_scan(
            model, cfg.int_list("scan.chis"), cfg["run.steps"], cfg["run.dt"], cfg["run.order"],
            gs_chi=cfg["run.chi_max"], truncation_tol=cfg["run.truncation_tol"],
            substeps=cfg["scan.substeps"],
        )
        lines = ["t," + ",".join(f"chi{c}" for c in res["chis"])]
        for i, t in enumerate(res["times"]):
            lines.append(",".join([f"{t:.17g}"] + [f"{res['series'][c][i]:.17g}" for c in res["chis"]]))
        run.write("bond_scan.csv", "\n".join(lines) + "\n")
        res_lines = ["chi,residual,discarded_weight"] + [
            f"{c},{res['residuals'][c]:.17g},{res['discarded'][c]:.17g}" for c in res["chis"]
        ]
        run.write("bond_residuals.csv", "\n".join(res_lines) + "\n")
    else:
        from .vqe import fidelity_vs_layers_scan

        preset = cfg["model.preset"]
        if not preset:
            raise ConfigError("fidelity scans need model.preset")
        from .model import preset_model

        res = fidelity_vs_layers_scan(
            lambda n: preset_model(preset, n, cfg["model.J"]), cfg.int_list("scan.ns"),
            cfg.int_list("scan.layers"), cfg["vqe.initial"], cfg["vqe.budget"], cfg["run.seed"],
        )
        lines = ["n,layers,fidelity"] + [f"{n},{L},{f:.17g}" for (n, L), f in sorted(res["fidelity"].items())]
        run.write("fidelity_scan.csv", "\n".join(lines) + "\n")
    run.finish()


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsfkit", description="Dynamical structure factors of spin chains")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--out", required=out_required, help="output directory")

    p = sub.add_parser("groundstate", help="prepare and checkpoint a ground state")
    common(p)
    p.set_defaults(func=cmd_groundstate)

    p = sub.add_parser("rgf", help="run the perturbation protocol")
    common(p)
    p.add_argument("--checkpoint", help="ground-state file (default: from --out)")
    p.set_defaults(func=cmd_rgf)

    p = sub.add_parser("noise-sim", help="shot-sampled noisy protocol")
    common(p)
    p.add_argument("--checkpoint")
    p.set_defaults(func=cmd_noise_sim)

    p = sub.add_parser("dsf", help="RGF grid(s) to DSF grid(s)")
    common(p)
    p.add_argument("rgf", nargs="+", help="RGF CSV files (one per channel)")
    p.add_argument("--prefix", default="dsf")
    p.add_argument("--sum-rule", action="store_true", help="shorthand for --set dsf.normalization=sum_rule")
    p.add_argument("--plot-data", action="store_true", help="also write gnuplot matrix files")
    p.set_defaults(func=cmd_dsf)

    p = sub.add_parser("compare", help="metrics report for two DSF grids")
    common(p)
    p.add_argument("a", help="reference DSF CSV")
    p.add_argument("b", help="compared DSF CSV")
    p.add_argument("--align", action="store_true", help="bilinearly resample b onto a's axes")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("resolution", help="resolution and gate-budget arithmetic")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ny", type=int)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--e-max", type=float)
    p.add_argument("--dim", type=int, default=1, choices=(1, 2))
    p.add_argument("--gates", type=float)
    p.add_argument("--depth", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_resolution)

    p = sub.add_parser("scan", help="bond-dimension or fidelity-vs-layers scan")
    common(p)
    p.set_defaults(func=cmd_scan)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (ConfigError, AliasingError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConvergenceError, NormalizationError, SizeLimitError, DsfError, ValueError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
