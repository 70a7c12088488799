"""Command-line interface: train, infer, eval, ablate, gradcheck, synth."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .evaluate import (
    ablate,
    baseline_report,
    evaluate_checkpoint,
    infer,
    write_report_csv,
)
from .faces import face_corpus
from .imageops import load_image, save_image
from .model import AblationVariant
from .trainer import TrainConfig, load_checkpoint, train, write_loss_log


def parse_config(path) -> TrainConfig:
    """JSON or key=value lines; dotted keys (model.feat_channels) nest."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        raw = json.loads(text)
    else:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            target = raw
            while "." in key:
                head, key = key.split(".", 1)
                target = target.setdefault(head, {})
            try:
                target[key] = json.loads(value)
            except json.JSONDecodeError:
                target[key] = value
    return TrainConfig.from_dict(raw)


def load_corpus(data_dir) -> list:
    """Sorted (name, Image) pairs for every PNG/PPM in a directory."""
    paths = sorted(p for p in Path(data_dir).iterdir()
                   if p.suffix.lower() in (".png", ".ppm"))
    if not paths:
        raise SystemExit(f"no .png/.ppm images found in {data_dir}")
    return [(p.stem, load_image(p)) for p in paths]


def parse_scales(text) -> list:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def cmd_train(args):
    cfg = parse_config(args.config)
    corpus = [img for _name, img in load_corpus(args.data)]
    last = [0]

    def progress(row):
        if row.iteration - last[0] >= args.log_every or row.iteration == 0:
            last[0] = row.iteration
            print(f"iter {row.iteration} epoch {row.epoch} "
                  f"scale {row.scale_y:.3f} loss {row.loss:.6f}", flush=True)

    model, adam, log = train(cfg, corpus, checkpoint_path=args.out, progress=progress)
    out = Path(args.out)
    loss_csv = out.with_suffix(out.suffix + ".loss.csv")
    write_loss_log(loss_csv, log)

    from .reporting import save_loss_curve

    figure = out.with_suffix(out.suffix + ".loss.png")
    save_loss_curve(log, figure)
    print(f"checkpoint: {out}\nloss log:   {loss_csv}\nloss curve: {figure}")


def cmd_infer(args):
    ckpt = load_checkpoint(args.ckpt)
    lr = load_image(args.input)
    variant = AblationVariant.from_label(args.variant) if args.variant else None
    sr = infer(ckpt, lr, args.scale, args.scale_x, variant=variant)
    save_image(sr, args.out)
    print(f"{args.input} {lr.height}x{lr.width} -> {args.out} {sr.height}x{sr.width}")


def cmd_eval(args):
    ckpt = load_checkpoint(args.ckpt)
    corpus = load_corpus(args.data)
    scales = parse_scales(args.scales)
    report = evaluate_checkpoint(ckpt, corpus, scales, lr_size=args.lr_size)
    write_report_csv(args.report, [report])
    reports = {report.variant: report}
    if not args.no_baseline:
        reports["bicubic"] = baseline_report(corpus, scales, ckpt.config,
                                             lr_size=args.lr_size)

    from .reporting import save_psnr_figure

    figure = Path(args.report).with_suffix(".psnr.png")
    save_psnr_figure(reports, figure)
    for scale in scales:
        line = f"x{scale:g}: psnr {report.mean_psnr(scale):.4f} dB ssim {report.mean_ssim(scale):.6f}"
        if "bicubic" in reports:
            line += f"  (bicubic {reports['bicubic'].mean_psnr(scale):.4f} dB)"
        print(line)
    print(f"report: {args.report}\nfigure: {figure}")


def cmd_ablate(args):
    pairs = {}
    for token in args.ckpts.split(","):
        if "=" not in token:
            raise SystemExit(f"--ckpts entries must be label=path, got {token!r}")
        label, path = token.split("=", 1)
        pairs[label.strip()] = load_checkpoint(path.strip())
    corpus = load_corpus(args.data)
    scales = parse_scales(args.scales)
    diff_dir = None
    if args.diffmaps:
        diff_dir = Path(args.diffmaps)
        diff_dir.mkdir(parents=True, exist_ok=True)
    reports = ablate(pairs, corpus, scales, diffmap_dir=diff_dir, lr_size=args.lr_size)
    write_report_csv(args.report, list(reports.values()))

    from .reporting import save_ablation_figure

    figure = Path(args.report).with_suffix(".ablation.png")
    save_ablation_figure(reports, figure)
    for label, report in reports.items():
        for scale in scales:
            print(f"{label:5s} x{scale:g}: psnr {report.mean_psnr(scale):.4f} dB "
                  f"ssim {report.mean_ssim(scale):.6f}")
    print(f"report: {args.report}\nfigure: {figure}")


def cmd_gradcheck(args):
    from .gradcheck import run_gradient_suite

    results = run_gradient_suite(trials=args.trials)
    failed = False
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        failed = failed or not r.passed
        print(f"{status} {r.name:26s} trials={r.trials} max_rel_err={r.max_error:.3e} "
              f"({r.seconds:.1f}s)")
    total = sum(r.seconds for r in results)
    print(f"{'FAILED' if failed else 'OK'}: {len(results)} checks in {total:.1f}s")
    return 1 if failed else 0


def cmd_synth(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(face_corpus(args.count, size=args.size, seed=args.seed)):
        save_image(img, out / f"face_{i:04d}.png")
    print(f"wrote {args.count} images of {args.size}x{args.size} to {out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anysr",
        description="Arbitrary-scale face super-resolution: training, inference, "
                    "evaluation, and ablations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config and an image directory")
    p.add_argument("--config", required=True, help="JSON or key=value config file")
    p.add_argument("--data", required=True, help="directory of training images")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--log-every", type=int, default=50)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("infer", help="super-resolve one image")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="input", required=True, help="input image (png/ppm)")
    p.add_argument("--scale", type=float, required=True, help="vertical scale factor")
    p.add_argument("--scale-x", type=float, default=None,
                   help="horizontal scale factor (defaults to --scale)")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--variant", default=None, choices=["full", "-L", "-G", "-S"])
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("eval", help="PSNR/SSIM report over an image directory")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--scales", required=True, help="comma-separated, e.g. 1.5,2,4")
    p.add_argument("--report", required=True, help="CSV output path")
    p.add_argument("--lr-size", type=int, default=None,
                   help="override the checkpoint's LR size for the protocol")
    p.add_argument("--no-baseline", action="store_true",
                   help="skip the bicubic baseline in the figure")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("ablate", help="evaluate per-variant checkpoints side by side")
    p.add_argument("--ckpts", required=True,
                   help="comma-separated label=path, e.g. full=a.ckpt,-L=b.ckpt")
    p.add_argument("--data", required=True)
    p.add_argument("--scales", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--diffmaps", default=None,
                   help="directory for |SR - bicubic| difference maps")
    p.add_argument("--lr-size", type=int, default=None)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification suite")
    p.add_argument("--trials", type=int, default=25)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("synth", help="write a procedural face-like image corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--size", type=int, default=144)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    code = args.fn(args)
    return int(code) if code else 0


if __name__ == "__main__":
    sys.exit(main())
