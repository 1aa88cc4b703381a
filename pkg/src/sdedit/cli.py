"""Command-line entry point.

Subcommands: sample (unconditional, t0=1), edit (guide + optional mask),
sweep (t0 grid -> trade-off report), guide-search (interactive t0 bisection),
stroke-sim (simulate a stroke painting from a photo), train (fit the MLP
score net), serve (HTTP service). Guides and masks are binary PPM/PGM files
or whitespace-separated text vectors; results are written the same way plus a
JSON run manifest.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .metrics import faithfulness, tradeoff_sweep
from .netpbm import read_netpbm, write_netpbm
from .presets import PRESET_DIR_ENV, resolve_presets
from .sampler import (
    FEEDBACK_ACCEPT,
    FEEDBACK_MORE_FAITHFUL,
    FEEDBACK_MORE_REALISTIC,
    EditMask,
    Guide,
    SdeditConfig,
    T0SearchState,
    sdedit,
    sdedit_class_conditional,
    sdedit_masked,
    t0_binary_search,
)
from .scores import GmmClassifier
from .strokes import simulate_stroke

_IMAGE_SUFFIXES = (".ppm", ".pgm", ".pnm")


def _load_guide(path: str) -> Guide:
    if path.lower().endswith(_IMAGE_SUFFIXES):
        return Guide.from_image(read_netpbm(path))
    return Guide.from_vector(np.loadtxt(path).ravel())


def _load_mask(path: str, guide: Guide) -> EditMask:
    if path.lower().endswith(_IMAGE_SUFFIXES):
        img = np.rint(read_netpbm(path))
        channels = guide.shape[2] if len(guide.shape) == 3 else None
        return EditMask.from_image(img, channels)
    return EditMask(np.loadtxt(path).ravel(), guide.shape)


def _write_output(path: str, guide: Guide, output: np.ndarray) -> None:
    if guide.kind == "image":
        write_netpbm(path, np.clip(output.reshape(guide.shape), 0.0, 1.0))
    else:
        np.savetxt(path, output.reshape(1, -1))


def _write_manifest(path, preset_name, config: SdeditConfig, metrics: dict) -> None:
    payload = {
        "preset": preset_name,
        "config": {"t0": config.t0, "n_steps": config.n_steps,
                   "repeats": config.repeats, "seed": config.seed,
                   "label": config.label, "hard_restore": config.hard_restore},
        "metrics": metrics,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _get_preset(args):
    presets = resolve_presets(getattr(args, "preset_dir", None))
    if args.preset not in presets:
        sys.exit(f"unknown preset {args.preset!r}; known: {', '.join(sorted(presets))}")
    return presets[args.preset]


def _run_and_write(args, preset, guide, mask=None, classifier=None, t0=None):
    config = SdeditConfig(
        t0=args.t0 if t0 is None else t0,
        n_steps=args.n_steps, repeats=args.repeats, seed=args.seed,
        label=getattr(args, "label", None),
        hard_restore=getattr(args, "hard_restore", False),
    )
    score = preset.score()
    if classifier is not None:
        result = sdedit_class_conditional(guide, score, classifier, preset.schedule, config)
    elif mask is not None:
        result = sdedit_masked(guide, mask, score, preset.schedule, config)
    else:
        result = sdedit(guide, score, preset.schedule, config)
    fs = faithfulness(guide, result.output)
    _write_output(args.out, guide, result.output)
    if args.manifest:
        _write_manifest(args.manifest, preset.name, config,
                        {"l2": fs.l2, "l2_squared": fs.l2_squared})
    print(f"wrote {args.out}  t0={config.t0} seed={config.seed} "
          f"l2={fs.l2:.4f} l2_squared={fs.l2_squared:.4f}")
    return result


def cmd_sample(args):
    preset = _get_preset(args)
    guide = Guide(np.zeros(preset.dim), tuple(preset.shape),
                  "image" if len(preset.shape) > 1 else "vector")
    _run_and_write(args, preset, guide, t0=1.0)


def cmd_edit(args):
    preset = _get_preset(args)
    guide = _load_guide(args.guide)
    mask = _load_mask(args.mask, guide) if args.mask else None
    classifier = None
    if args.label is not None:
        if mask is not None:
            sys.exit("--label and --mask cannot be combined")
        if preset.kind != "analytic-gmm":
            sys.exit("--label needs an analytic mixture preset")
        classifier = GmmClassifier(preset.gmm, preset.schedule)
    _run_and_write(args, preset, guide, mask=mask, classifier=classifier)


def cmd_sweep(args):
    preset = _get_preset(args)
    guides = [_load_guide(p) for p in args.guide]
    if preset.kind != "analytic-gmm":
        sys.exit("sweep needs an analytic mixture preset for reference samples")
    rng = np.random.default_rng(args.seed)
    reference = preset.gmm.sample(args.ref_samples, rng)
    grid = [float(v) for v in args.t0_grid.split(",")]
    report = tradeoff_sweep(guides, preset.score(), preset.schedule, grid,
                            args.runs, reference, seed=args.seed,
                            n_steps=args.n_steps)
    report.to_json(args.out)
    if args.csv:
        report.to_csv(args.csv)
    print(f"wrote {args.out}" + (f" and {args.csv}" if args.csv else ""))
    for p in report.points:
        print(f"  t0={p.t0:.2f}  l2sq={p.l2sq_mean:.4f}±{p.l2sq_stderr:.4f}"
              f"  mmd={p.mmd_mean:.5f}±{p.mmd_stderr:.5f}")


def cmd_guide_search(args):
    preset = _get_preset(args)
    guide = _load_guide(args.guide)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    state = T0SearchState()
    suffix = ".ppm" if guide.kind == "image" else ".txt"
    score = preset.score()
    for i in range(args.max_iterations):
        config = SdeditConfig(t0=state.probe, n_steps=args.n_steps, seed=args.seed + i)
        result = sdedit(guide, score, preset.schedule, config)
        fs = faithfulness(guide, result.output)
        path = outdir / f"candidate_{i:02d}{suffix}"
        _write_output(str(path), guide, result.output)
        print(f"[{i}] t0={state.probe:.4f}  l2_squared={fs.l2_squared:.4f}  -> {path}")
        answer = input("more [r]ealistic / more [f]aithful / [a]ccept? ").strip().lower()
        verdict = {"r": FEEDBACK_MORE_REALISTIC, "f": FEEDBACK_MORE_FAITHFUL,
                   "a": FEEDBACK_ACCEPT}.get(answer)
        if verdict is None:
            print("unrecognized; treating as accept")
            verdict = FEEDBACK_ACCEPT
        state = t0_binary_search(state, verdict)
        if state.accepted:
            break
    final = state.history[-1][0] if state.accepted else state.probe
    print(f"final t0 = {final:.4f}")


def cmd_stroke_sim(args):
    img = read_netpbm(args.input)
    out = simulate_stroke(img, kernel=args.kernel, k=args.colors, seed=args.seed)
    write_netpbm(args.output, out)
    print(f"wrote {args.output}")


def cmd_train(args):
    from .scorenet import MlpScoreNet, save_weights, train_score

    preset = _get_preset(args)
    if preset.kind != "analytic-gmm":
        sys.exit("train needs an analytic mixture preset as the data source")
    hidden = tuple(int(h) for h in args.hidden.split(",")) if args.hidden else (64, 64)
    net = MlpScoreNet(preset.dim, preset.schedule, hidden=hidden, seed=args.seed)
    history = train_score(net, preset.gmm, preset.schedule, steps=args.steps,
                          lr=args.lr, batch_size=args.batch, seed=args.seed)
    save_weights(net, args.out)
    tail = float(np.mean(history[-100:])) if history else float("nan")
    print(f"wrote {args.out}  final loss (100-step mean) = {tail:.4f}")


def cmd_serve(args):
    from .service import serve

    serve(addr=args.addr, preset_dir=args.preset_dir, frontend_dir=args.frontend)


def _add_run_args(p, default_t0=0.45, default_steps=500, with_t0=True):
    if with_t0:
        p.add_argument("--t0", type=float, default=default_t0)
    p.add_argument("--n-steps", type=int, default=default_steps)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None, help="also write a JSON run manifest")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdedit")
    parser.add_argument("--preset-dir", default=None,
                        help=f"extra model presets (default ${PRESET_DIR_ENV})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="unconditional synthesis (t0 = 1)")
    p.add_argument("--preset", required=True)
    _add_run_args(p, with_t0=False)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("edit", help="guided edit from a guide file")
    p.add_argument("--preset", required=True)
    p.add_argument("--guide", required=True)
    p.add_argument("--mask", default=None)
    p.add_argument("--label", type=int, default=None,
                   help="class-conditional guidance toward this mixture component")
    p.add_argument("--hard-restore", action="store_true",
                   help="copy the guide back into the unmasked region at the end")
    _add_run_args(p)
    p.set_defaults(fn=cmd_edit)

    p = sub.add_parser("sweep", help="t0 grid -> trade-off report (JSON + CSV)")
    p.add_argument("--preset", required=True)
    p.add_argument("--guide", required=True, nargs="+")
    p.add_argument("--t0-grid", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    p.add_argument("--runs", type=int, default=200)
    p.add_argument("--n-steps", type=int, default=300)
    p.add_argument("--ref-samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", default=None)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("guide-search", help="interactive t0 bisection loop")
    p.add_argument("--preset", required=True)
    p.add_argument("--guide", required=True)
    p.add_argument("--outdir", default="candidates")
    p.add_argument("--n-steps", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iterations", type=int, default=10)
    p.set_defaults(fn=cmd_guide_search)

    p = sub.add_parser("stroke-sim", help="simulate a stroke painting from a photo")
    p.add_argument("--kernel", type=int, default=None,
                   help="odd median kernel (default: scaled from image height)")
    p.add_argument("--colors", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(fn=cmd_stroke_sim)

    p = sub.add_parser("train", help="train the MLP score net on a mixture preset")
    p.add_argument("--preset", required=True)
    p.add_argument("--steps", type=int, default=5000)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--hidden", default="64,64")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("serve", help="run the HTTP editing service")
    p.add_argument("--addr", default="127.0.0.1:8000")
    p.add_argument("--frontend", default=None, help="static UI bundle to serve at /")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> None:
    args = build_parser().parse_args(argv)
    args.fn(args)


if __name__ == "__main__":
    main()
