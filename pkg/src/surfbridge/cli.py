"""Command-line entry point: ``surfbridge <verb> ...``.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("surfbridge")


class UsageError(Exception):
    pass


def _float_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values or any(not np.isfinite(v) or v <= 0 for v in values):
        raise argparse.ArgumentTypeError("times must be positive and finite")
    return values


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return v


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("seed must be nonnegative")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="surfbridge", description="Surface-bridged peptide generation toolkit.")
    p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1,
                   help="worker threads for independent candidates (results do not depend on it)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    k = sub.add_parser("kernels", help="tabulate diffusion kernels")
    ksub = k.add_subparsers(dest="kernel", required=True)
    ig = ksub.add_parser("igso3", help="IGSO(3) density, angle marginal and CDF")
    ig.add_argument("--t", type=_float_list, required=True, help="comma-separated times")
    ig.add_argument("--out", type=Path, required=True)
    ig.add_argument("--n-omega", type=_positive_int, default=1000)

    s = sub.add_parser("sample", help="generate peptides for a receptor")
    s.add_argument("--receptor-surface", type=Path, required=True)
    s.add_argument("--receptor-pdb", type=Path, required=True)
    s.add_argument("--length", type=_positive_int, required=True)
    s.add_argument("--count", type=_positive_int, default=40)
    s.add_argument("--params", type=Path, required=True)
    s.add_argument("--seed", type=_seed, required=True)
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--steps", type=_positive_int, default=None, help="override the checkpoint's sampling steps")
    s.add_argument("--n-surface", type=_positive_int, default=None,
                   help="resample the receptor surface to this many points")

    t = sub.add_parser("train", help="train on a directory of complexes")
    t.add_argument("--config", type=Path, required=True)
    t.add_argument("--data", type=Path, required=True)
    t.add_argument("--out", type=Path, required=True)

    e = sub.add_parser("eval", help="score generated candidates against a native complex")
    e.add_argument("--gen", type=Path, required=True)
    e.add_argument("--native", type=Path, required=True)
    e.add_argument("--report", type=Path, required=True)
    e.add_argument("--k", type=_positive_int, default=5, help="clusters for the consistency metric")
    e.add_argument("--seed", type=_seed, default=0, help="clustering seed")

    y = sub.add_parser("synth", help="write a synthetic dataset")
    y.add_argument("--seed", type=_seed, required=True)
    y.add_argument("--n", type=_positive_int, required=True)
    y.add_argument("--out", type=Path, required=True)
    y.add_argument("--n-surface", type=_positive_int, default=128)
    y.add_argument("--length", type=_positive_int, default=8)
    return p


def _print_resolved(args, extra=None):
    resolved = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    if extra:
        resolved.update(extra)
    print("# resolved: " + json.dumps(resolved, sort_keys=True))


def cmd_kernels(args):
    from .io.atomic import atomic_write
    from .kernels.igso3 import angle_marginal_pdf, igso3_density

    _print_resolved(args)
    omega = np.linspace(0.0, np.pi, args.n_omega + 1)
    h = np.diff(omega)
    lines = []
    for t in args.t:
        dens = igso3_density(omega, t)
        pdf = angle_marginal_pdf(omega, t)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * h * (pdf[1:] + pdf[:-1]))])
        lines.append(f"# t={t!r}")
        lines.append("omega\tdensity\tmarginal_pdf\tcdf")
        lines += [f"{w:.10e}\t{d:.10e}\t{p:.10e}\t{c:.10e}" for w, d, p, c in zip(omega, dens, pdf, cdf)]
        lines.append("")
    atomic_write(args.out, "\n".join(lines))
    return EXIT_OK


def _limit_threads():
    """Single-threaded kernels keep results independent of ``--threads``."""
    import torch
    from threadpoolctl import threadpool_limits

    torch.set_num_threads(1)
    return threadpool_limits(1)


def cmd_sample(args):
    from .io.atomic import atomic_directory, atomic_write
    from .io.checkpoint import load_checkpoint
    from .io.pdb import read_pdb_chain, residues_from_chain, write_pdb_backbone
    from .io.surface import format_surface, format_torsions, read_surface
    from .pipeline.sampler import sample_complex

    receptor = read_surface(args.receptor_surface)
    read_pdb_chain(args.receptor_pdb)  # validated; the sampler conditions on the surface
    model, config = load_checkpoint(args.params)
    if args.steps is not None:
        config = type(config)(**{**config.to_dict(), "sample_steps": args.steps})
    _print_resolved(args, {"config": config.to_dict()})

    def one(i):
        rng = np.random.default_rng([args.seed, i])
        return sample_complex(receptor, model, config, rng, length=args.length, n_surface=args.n_surface)

    with _limit_threads():
        if args.threads > 1 and args.count > 1:
            with ThreadPoolExecutor(args.threads) as pool:
                results = list(pool.map(one, range(args.count)))
        else:
            results = [one(i) for i in range(args.count)]

    with atomic_directory(args.out) as tmp:
        manifest = ["candidate\tpdb\tsurface\ttorsions\tseed\tstream"]
        for i, gen in enumerate(results):
            name = f"candidate_{i:03d}"
            atomic_write(tmp / f"{name}.pdb", write_pdb_backbone(residues_from_chain(gen.chain, "P")))
            atomic_write(tmp / f"{name}.surf", format_surface(gen.surface))
            atomic_write(tmp / f"{name}.tor", format_torsions(gen.chain.torsions))
            manifest.append(f"{name}\t{name}.pdb\t{name}.surf\t{name}.tor\t{args.seed}\t{i}")
        atomic_write(tmp / "manifest.tsv", "\n".join(manifest) + "\n")
    return EXIT_OK


def cmd_train(args):
    from .io.atomic import atomic_write
    from .io.checkpoint import save_checkpoint
    from .io.complex import read_dataset
    from .io.config import read_config
    from .pipeline.train import COMPONENTS, train_toy

    config = read_config(args.config)
    dataset = read_dataset(args.data)
    if not dataset:
        raise UsageError(f"no complexes found under {args.data}")
    _print_resolved(args, {"config": config.to_dict(), "complexes": len(dataset)})

    def progress(step, loss):
        if step % 50 == 0 or step == config.train_steps - 1:
            log.info("step %d loss %.6f", step, loss)

    with _limit_threads():
        model, trace = train_toy(dataset, config, progress=progress)
    save_checkpoint(args.out, model, config)
    rows = ["step\ttotal\t" + "\t".join(COMPONENTS) + "\tlr"]
    for i, (tot, comp, lr) in enumerate(zip(trace.total, trace.components, trace.lr)):
        rows.append(f"{i}\t{tot:.10e}\t" + "\t".join(f"{c:.10e}" for c in comp) + f"\t{lr:.6e}")
    atomic_write(Path(str(args.out) + ".loss.tsv"), "\n".join(rows) + "\n")
    return EXIT_OK


def _candidates(gen_dir: Path):
    from .io.pdb import read_pdb_chain
    from .io.surface import read_surface, read_torsions

    if not gen_dir.is_dir():
        raise FileNotFoundError(f"{gen_dir} is not a directory")
    out = []
    for pdb in sorted(gen_dir.glob("*.pdb")):
        if pdb.stem == "receptor":
            continue
        tor = pdb.with_suffix(".tor")
        chain = read_pdb_chain(pdb, read_torsions(tor) if tor.exists() else None)
        surf = pdb.with_suffix(".surf")
        out.append((pdb.stem, chain, read_surface(surf) if surf.exists() else None))
    if not out:
        raise UsageError(f"no candidate PDB files in {gen_dir}")
    return out


def cmd_eval(args):
    from types import SimpleNamespace

    from . import metrics
    from .errors import SurfBridgeError
    from .io.atomic import atomic_write
    from .io.complex import read_complex

    native = read_complex(args.native)
    cands = _candidates(args.gen)
    _print_resolved(args, {"candidates": len(cands)})
    rows = []
    for name, chain, _ in cands:
        try:
            r = metrics.rmsd_ca(chain, native.peptide)
            t = metrics.tm_score(chain, native.peptide)
        except SurfBridgeError:
            r = t = float("nan")
        b = metrics.bsr(SimpleNamespace(peptide=chain), native)
        rows.append((name, r, t, b))

    chains = [c for _, c, _ in cands]
    surfaces = [s for _, _, s in cands if s is not None]

    def guarded(fn, *a):
        try:
            return fn(*a)
        except SurfBridgeError:
            return None

    summary = {
        "n_candidates": float(len(cands)),
        "diversity": guarded(metrics.diversity, chains),
        "surface_diversity": guarded(metrics.surface_diversity, surfaces),
        "consistency": None,
        "tm_d0": metrics.tm_d0(len(native.peptide)),
    }
    if len(surfaces) == len(chains) and len(chains) >= 2:
        summary["consistency"] = guarded(metrics.consistency, surfaces, chains, min(args.k, len(chains)), args.seed)
    atomic_write(args.report, metrics.evaluation_report(rows, summary))
    return EXIT_OK


def cmd_synth(args):
    from .io.atomic import atomic_directory
    from .io.complex import write_complex
    from .pipeline.synth import synthetic_pairs

    _print_resolved(args)
    pairs = synthetic_pairs(args.seed, args.n, args.n_surface, args.length)
    with atomic_directory(args.out) as tmp:
        for i, pair in enumerate(pairs):
            write_complex(tmp / f"complex_{i:03d}", pair)
    return EXIT_OK


COMMANDS = {"kernels": cmd_kernels, "sample": cmd_sample, "train": cmd_train, "eval": cmd_eval, "synth": cmd_synth}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    from .errors import EmptyInput, SurfBridgeError

    try:
        return COMMANDS[args.verb](args)
    except (UsageError, EmptyInput) as exc:
        parser.print_usage(sys.stderr)
        print(f"surfbridge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SurfBridgeError, OSError) as exc:
        print(f"surfbridge: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
