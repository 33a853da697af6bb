"""Command-line interface: ``qubo-denoise {gen-data,train,denoise,bench,verify}``.

Exit codes: 0 success, 2 invalid configuration or usage, 3 runtime or data
error, 4 a verification criterion failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import BinaryImage
from .data import DataFormatError, Dataset, gen_bas, idx_to_dataset, read_pbm, write_pbm
from .noise import NoiseSpec, apply_noise

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VERIFY = 0, 2, 3, 4
OUTPUT_ENV = "QUBO_DENOISE_OUTPUT_DIR"

log = logging.getLogger("qubo_denoise")


class ConfigError(Exception):
    """Invalid flag combination, detected before any work starts."""


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return v


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="master random seed (default 0)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: all cores); never changes results")
    p.add_argument("--output-dir", type=Path, default=None,
                   help=f"output directory (default ${OUTPUT_ENV} or the current directory)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="qubo-denoise",
                                     description="Binary denoising with RBMs and penalized QUBOs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", parents=[common], help="generate or import datasets")
    gsub = g.add_subparsers(dest="source", required=True)
    bas = gsub.add_parser("bas", parents=[common], help="Bars-and-Stripes images")
    bas.add_argument("--width", type=_positive_int, default=12)
    bas.add_argument("--height", type=_positive_int, default=12)
    bas.add_argument("--train", type=_nonneg_int, default=4000)
    bas.add_argument("--test", type=_nonneg_int, default=1000)
    bas.add_argument("--name", default="bas")
    bas.add_argument("--pbm-dir", type=Path, default=None, help="also dump every image as PBM")
    idx = gsub.add_parser("idx", parents=[common], help="import an IDX image file (e.g. MNIST)")
    idx.add_argument("--images", type=Path, required=True)
    idx.add_argument("--width", type=_positive_int, default=12)
    idx.add_argument("--height", type=_positive_int, default=12)
    idx.add_argument("--threshold", type=int, default=128, help="binarization threshold, 0-255")
    idx.add_argument("--split", choices=("train", "test"), default="train")
    idx.add_argument("--limit", type=_positive_int, default=None)
    idx.add_argument("--name", default="mnist")
    idx.add_argument("--pbm-dir", type=Path, default=None)

    t = sub.add_parser("train", parents=[common], help="train an RBM by contrastive divergence")
    t.add_argument("--data", type=Path, required=True, help="native .qdb dataset")
    t.add_argument("--hidden", type=_positive_int, default=50)
    t.add_argument("--epochs", type=_nonneg_int, default=50)
    t.add_argument("--learning-rate", type=float, default=0.05)
    t.add_argument("--cd-steps", type=_positive_int, default=1)
    t.add_argument("--batch-size", type=_positive_int, default=64)
    t.add_argument("--out", type=Path, default=None, help="model file (default <output-dir>/model.npz)")

    d = sub.add_parser("denoise", parents=[common], help="denoise one image")
    d.add_argument("--model", type=Path, required=True)
    d.add_argument("--input", type=Path, required=True, help="PBM image, or .qdb with --index")
    d.add_argument("--index", type=_nonneg_int, default=0)
    d.add_argument("--out", type=Path, default=None, help="output PBM (default <output-dir>/denoised.pbm)")
    d.add_argument("--original", type=Path, default=None, help="clean PBM for a match rate")
    d.add_argument("--add-noise", type=float, default=None, metavar="SIGMA",
                   help="corrupt the input with salt-and-pepper noise first")
    _add_solver_flags(d)
    d.add_argument("--sigma", type=float, default=None, help="noise level estimate")
    d.add_argument("--bias-factor", type=float, default=0.75)
    d.add_argument("--rho", type=float, default=None, help="explicit penalty (overrides --sigma)")
    d.add_argument("--num-reads", type=_positive_int, default=100)

    b = sub.add_parser("bench", parents=[common], help="run a noise sweep and write CSV/SVG")
    b.add_argument("--config", type=Path, default=None,
                   help="JSON file with any of the options below (flags win)")
    b.add_argument("--model", type=Path, default=None)
    b.add_argument("--data", type=Path, default=None, help="test set, native .qdb")
    b.add_argument("--methods", default=None,
                   help="comma list, e.g. qubo-sa,qubo-sa-guess,gibbs,median,gaussian,graphcut")
    b.add_argument("--preset", choices=("comparison", "bias-sweep"), default=None)
    b.add_argument("--sigma-grid", type=_floats, default=None)
    b.add_argument("--images", type=_positive_int, default=None)
    b.add_argument("--resamples", type=_positive_int, default=None)
    b.add_argument("--num-reads", type=_positive_int, default=None)
    b.add_argument("--stem", default=None, help="output file stem (default 'report')")
    _add_solver_flags(b, with_choice=False)

    v = sub.add_parser("verify", parents=[common], help="run the built-in self-checks")
    v.add_argument("--only", default=None, help="comma list of criteria to run")
    v.add_argument("--list", action="store_true", help="list criteria and exit")
    return parser


def _add_solver_flags(p, with_choice=True):
    if with_choice:
        p.add_argument("--solver", choices=("exhaustive", "sa", "remote"), default="sa")
    p.add_argument("--endpoint", default=None, help="remote sampler URL")
    p.add_argument("--sweeps", type=_nonneg_int, default=None, help="SA sweeps (default 1000)")
    p.add_argument("--restarts", type=_nonneg_int, default=None, help="extra SA chains")
    p.add_argument("--beta-range", type=_floats, default=None, help="SA beta_start,beta_end")


def _sa_config(args, cfg=None):
    from .solvers import SaConfig

    cfg = cfg or {}
    sweeps = args.sweeps if args.sweeps is not None else cfg.get("sweeps", 1000)
    restarts = args.restarts if args.restarts is not None else cfg.get("restarts", 0)
    betas = args.beta_range or cfg.get("beta_range") or [0.1, 10.0]
    if len(betas) != 2:
        raise ConfigError("--beta-range needs exactly two values")
    try:
        return SaConfig(sweeps=int(sweeps), beta_start=betas[0], beta_end=betas[1],
                        restarts=int(restarts), seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _output_dir(args) -> Path:
    out = args.output_dir or Path(os.environ.get(OUTPUT_ENV, "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _threads(args) -> int:
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return args.threads or (os.cpu_count() or 1)


# ----------------------------------------------------------------------------- commands

def cmd_gen_data(args) -> int:
    out = _output_dir(args)
    written = []
    if args.source == "bas":
        for split, count, off in (("train", args.train, 0), ("test", args.test, 1)):
            if count == 0:
                continue
            ds = gen_bas(args.width, args.height, count, seed=[args.seed, off],
                         name=args.name, split=split)
            written.append(_save_dataset(ds, out, args.pbm_dir))
    else:
        if not 0 <= args.threshold <= 255:
            raise ConfigError("--threshold must lie in [0, 255]")
        ds = idx_to_dataset(args.images, args.width, args.height, args.threshold,
                            name=args.name, split=args.split, limit=args.limit)
        written.append(_save_dataset(ds, out, args.pbm_dir))
    for path, ds in written:
        print(f"wrote {path}: {len(ds)} images of {ds.width}x{ds.height}")
    return EXIT_OK


def _save_dataset(ds: Dataset, out: Path, pbm_dir):
    path = out / f"{ds.name}_{ds.split}.qdb"
    ds.save(path)
    if pbm_dir is not None:
        d = Path(pbm_dir) / f"{ds.name}_{ds.split}"
        d.mkdir(parents=True, exist_ok=True)
        for k in range(len(ds)):
            write_pbm(d / f"{k:06d}.pbm", ds[k])
    return path, ds


def cmd_train(args) -> int:
    from .rbm import MAX_ENUM, TrainConfig, exact_log_likelihood, reconstruction_error, train_cd

    if not args.learning_rate > 0:
        raise ConfigError("--learning-rate must be positive")
    cfg = TrainConfig(cd_steps=args.cd_steps, learning_rate=args.learning_rate,
                      epochs=args.epochs, batch_size=args.batch_size, seed=args.seed)
    out = args.out or _output_dir(args) / "model.npz"
    ds = Dataset.load(args.data)
    if len(ds) == 0:
        raise DataFormatError(f"{args.data}: dataset is empty")
    v = ds.width * ds.height
    params = train_cd(ds.pixels, v, args.hidden, cfg)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    params.save(out)
    print(f"wrote {out}: v={params.num_visible} h={params.num_hidden}")
    if v + args.hidden <= MAX_ENUM:
        ll = exact_log_likelihood(params, ds.pixels)
        print(f"exact log-likelihood: {ll:.6f} (mean {ll / len(ds):.6f} per image)")
    else:
        err = reconstruction_error(params, ds.pixels, seed=args.seed)
        print(f"reconstruction error: {err:.6f}")
    return EXIT_OK


def _load_image(path: Path, index: int) -> BinaryImage:
    if path.suffix == ".qdb":
        ds = Dataset.load(path)
        if index >= len(ds):
            raise ConfigError(f"--index {index} out of range for {len(ds)} images")
        return ds[index]
    return read_pbm(path)


def cmd_denoise(args) -> int:
    from .denoise import DenoiseConfig, denoise
    from .rbm import RbmParams
    from .solvers import make_solver
    from .bench import pixel_match_rate

    if args.rho is None and args.sigma is None:
        raise ConfigError("give --sigma (noise estimate) or --rho")
    if args.solver == "remote" and not args.endpoint:
        raise ConfigError("--solver remote needs --endpoint")
    try:
        cfg = DenoiseConfig(sigma_estimate=args.sigma, bias_factor=args.bias_factor,
                            rho_override=args.rho, num_reads=args.num_reads)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.add_noise is not None and not 0 <= args.add_noise <= 0.5:
        raise ConfigError("--add-noise must lie in [0, 0.5]")
    solver = make_solver(args.solver, _sa_config(args), args.endpoint)

    params = RbmParams.load(args.model)
    img = _load_image(args.input, args.index)
    if img.width * img.height != params.num_visible:
        raise DataFormatError(
            f"image has {img.width * img.height} pixels, model expects {params.num_visible}")
    pixels = img.pixels
    if args.add_noise is not None:
        pixels = apply_noise(pixels, NoiseSpec(args.add_noise, args.seed))
    result = denoise(params, pixels, cfg, solver, seed=args.seed)
    out = args.out or _output_dir(args) / "denoised.pbm"
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    write_pbm(out, BinaryImage(img.width, img.height, result.denoised_visible))
    if args.add_noise is not None:
        write_pbm(Path(out).with_name(Path(out).stem + "_noisy.pbm"),
                  BinaryImage(img.width, img.height, pixels))
    print(f"rho={result.rho_used:.6f}")
    print(f"changed_pixels={int(np.count_nonzero(result.denoised_visible != pixels))}")
    if args.original is not None:
        orig = read_pbm(args.original)
        if orig.pixels.size != pixels.size:
            raise DataFormatError("--original has different dimensions")
        print(f"noisy_match={pixel_match_rate(pixels, orig.pixels):.6f}")
        print(f"match_rate={pixel_match_rate(result.denoised_visible, orig.pixels):.6f}")
    print(f"wrote {out}")
    return EXIT_OK


_BENCH_KEYS = ("model", "data", "methods", "preset", "sigma_grid", "images", "resamples",
               "num_reads", "stem", "sweeps", "restarts", "beta_range", "endpoint")


def _bench_options(args) -> dict:
    cfg = {}
    if args.config is not None:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("bench config must be a JSON object")
        unknown = set(cfg) - set(_BENCH_KEYS) - {"seed"}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if "sigma_grid" in cfg and isinstance(cfg["sigma_grid"], str):
            cfg["sigma_grid"] = _floats(cfg["sigma_grid"])
        base = args.config.parent
        for key in ("model", "data"):
            if key in cfg and not Path(cfg[key]).is_absolute():
                cfg[key] = str(base / cfg[key])
    opts = {}
    for key in _BENCH_KEYS:
        val = getattr(args, key)
        opts[key] = val if val is not None else cfg.get(key)
    if "seed" in cfg and args.seed == 0:
        args.seed = int(cfg["seed"])
    return opts


def cmd_bench(args) -> int:
    from .bench import (ExperimentSpec, bias_sweep_methods, comparison_methods, emit_report,
                        parse_method, run_experiment)
    from .rbm import RbmParams

    opts = _bench_options(args)
    if opts["data"] is None:
        raise ConfigError("bench needs --data (or 'data' in the config)")
    methods = []
    if opts["preset"] == "comparison":
        methods += comparison_methods()
    elif opts["preset"] == "bias-sweep":
        methods += bias_sweep_methods()
    if opts["methods"]:
        names = opts["methods"]
        if isinstance(names, str):
            names = [m for m in names.split(",") if m.strip()]
        try:
            methods += [parse_method(m) for m in names]
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    grid = opts["sigma_grid"] or [0.05, 0.1, 0.15, 0.2, 0.25]
    for s in grid:
        if not 0 < s <= 0.5:
            raise ConfigError(f"sigma {s} outside (0, 0.5]")
    sa = _sa_config(args, {k: opts[k] for k in ("sweeps", "restarts", "beta_range") if opts[k] is not None})
    threads = _threads(args)
    out = _output_dir(args)

    dataset = Dataset.load(opts["data"])
    model = RbmParams.load(opts["model"]) if opts["model"] else None
    images = opts["images"] or min(200, len(dataset))
    try:
        spec = ExperimentSpec(dataset, grid, methods, model=model, images_per_sigma=images,
                              bootstrap_resamples=opts["resamples"] or 10000,
                              master_seed=args.seed, num_reads=opts["num_reads"] or 100,
                              sa=sa, endpoint=opts["endpoint"], n_jobs=threads)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    def progress(row):
        log.info("sigma=%s %s mean=%.4f [%.4f, %.4f]", row.sigma, row.method,
                 row.mean_overlap, row.ci_low, row.ci_high)

    report = run_experiment(spec, progress=progress)
    files = emit_report(report, out, stem=opts["stem"] or "report")
    sys.stdout.write(report.to_csv())
    for kind, path in files.items():
        print(f"wrote {path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import CRITERIA, run_all

    if args.list:
        for key, fn in CRITERIA.items():
            print(f"{key}: {(fn.__doc__ or '').strip().splitlines()[0] if fn.__doc__ else ''}")
        return EXIT_OK
    only = [k.strip() for k in args.only.split(",")] if args.only else None
    if only:
        unknown = [k for k in only if k not in CRITERIA]
        if unknown:
            raise ConfigError(f"unknown criteria: {', '.join(unknown)}")
    results = run_all(only, seed=args.seed)
    failed = [r.key for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_VERIFY if failed else EXIT_OK


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "denoise": cmd_denoise,
            "bench": cmd_bench, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
