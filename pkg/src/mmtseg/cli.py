"""Command-line front-end.

Subcommands: ``segment`` (train on one image and write label maps),
``eval`` (pixel accuracy between two raw label maps), ``baseline kmeans``
(color clustering), ``compare`` (manifest-driven method comparison) and
``selftest`` (gradient and assignment-solver checks). Exit codes: 0 on
success, 1 on usage errors, 2 on runtime failures. All defaults match
the standard training recipe (1000 iterations, 100 channels, 3 layers,
EMA 0.999, lr 0.1, momentum 0.9).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import evaluation, image_io, trainer
from .alignment import brute_force_assignment, overlap_matrix, solve_assignment
from .losses import sim_loss, tv_loss
from .alignment import OverlapMatrix
from .network import NetworkConfig, assign_labels, count_labels, forward, init_params
from .ops import (
    ParamTensor,
    channel_norm,
    channel_norm_backward,
    channel_norm_forward,
    conv2d,
    conv2d_backward,
    finite_diff_check,
)
from .trainer import TrainerConfig


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_training_flags(p):
    p.add_argument("--iters", type=int, default=1000, help="training iterations T")
    p.add_argument("--q", type=int, default=100, help="output channels / max clusters")
    p.add_argument("--layers", type=int, default=3, help="number of conv blocks")
    p.add_argument("--beta", type=float, default=5.0, help="total-variation weight")
    p.add_argument("--alpha", type=float, default=0.999, help="EMA coefficient")
    p.add_argument("--lr", type=float, default=0.1, help="learning rate")
    p.add_argument("--momentum", type=float, default=0.9, help="SGD momentum")


def build_parser() -> _Parser:
    parser = _Parser(prog="mmtseg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    seg = sub.add_parser("segment", parents=[], help="segment one image")
    seg.add_argument("image", help="input image (PNG or binary PPM)")
    _add_training_flags(seg)
    seg.add_argument("--seed1", type=int, default=0, help="seed for network 1")
    seg.add_argument("--seed2", type=int, default=1, help="seed for network 2")
    seg.add_argument("--out-png", help="write colorized labels here")
    seg.add_argument("--out-raw", help="write raw 16-bit label map here")
    seg.add_argument("--out-model", choices=trainer.OUTPUT_MODELS, default="mean1",
                     help="which model produces the final labels")
    seg.add_argument("--metrics", help="write per-step metrics records here")

    ev = sub.add_parser("eval", help="pixel accuracy under the best label permutation")
    ev.add_argument("--pred", required=True, help="predicted raw label map")
    ev.add_argument("--gt", required=True, help="ground-truth raw label map")

    base = sub.add_parser("baseline", help="classic baselines")
    base_sub = base.add_subparsers(dest="baseline", metavar="method")
    km = base_sub.add_parser("kmeans", help="k-means color clustering")
    km.add_argument("image", help="input image (PNG or binary PPM)")
    km.add_argument("--k", type=int, required=True, help="number of clusters")
    km.add_argument("--seed", type=int, default=0)
    km.add_argument("--max-iters", type=int, default=100)
    km.add_argument("--out-png", help="write colorized labels here")
    km.add_argument("--out-raw", help="write raw 16-bit label map here")

    cmp_ = sub.add_parser("compare", help="compare methods over a corpus manifest")
    cmp_.add_argument("--manifest", required=True,
                      help="lines of image_path<TAB>gt_path[,gt_path...]")
    cmp_.add_argument("--seeds", default="0,1,2", help="comma-separated seed list")
    _add_training_flags(cmp_)
    cmp_.add_argument("--kmeans-grid", default=",".join(str(k) for k in evaluation.KMEANS_GRID),
                      help="comma-separated k values for the k-means baseline")
    cmp_.add_argument("--max-side", type=int, default=0,
                      help="downscale images so max(H, W) <= this (0 = keep size)")
    cmp_.add_argument("--out-table", help="write the human-readable table here")
    cmp_.add_argument("--out-records", help="write per-(method,image,seed) records here")

    sub.add_parser("selftest", help="run gradient and assignment-solver checks")
    return parser


def _network_config(args):
    return NetworkConfig(n_layers=args.layers, n_channels=args.q)


def _cmd_segment(args) -> int:
    image = image_io.load_image(args.image)
    config = TrainerConfig(
        iterations=args.iters, learning_rate=args.lr, momentum=args.momentum,
        ema_alpha=args.alpha, tv_weight=args.beta,
        seed1=args.seed1, seed2=args.seed2,
        network=_network_config(args), output_model=args.out_model,
    )
    result = trainer.train(image, config)
    if args.out_png:
        image_io.write_label_png(result.labels, args.out_png)
    if args.out_raw:
        image_io.write_label_raw(result.labels, args.out_raw)
    if args.metrics:
        with open(args.metrics, "w", encoding="ascii") as fh:
            for line in trainer.metrics_lines(result.metrics):
                fh.write(line + "\n")
    status = "collapsed" if result.collapsed else "done"
    print(f"{status}: {count_labels(result.labels)} clusters "
          f"({result.labels.shape[0]}x{result.labels.shape[1]} pixels)")
    return 0


def _cmd_eval(args) -> int:
    pred = image_io.read_label_raw(args.pred)
    gt = image_io.read_label_raw(args.gt)
    acc = evaluation.optimal_pixel_accuracy(pred, gt)
    print(f"{acc:.6f}")
    return 0


def _cmd_kmeans(args) -> int:
    image = image_io.load_image(args.image)
    labels = evaluation.kmeans_segment(image, args.k, seed=args.seed, max_iters=args.max_iters)
    if args.out_png:
        image_io.write_label_png(labels, args.out_png)
    if args.out_raw:
        image_io.write_label_raw(labels, args.out_raw)
    print(f"done: {count_labels(labels)} clusters")
    return 0


def _parse_int_list(text, flag):
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ValueError(f"{flag} expects comma-separated integers, got {text!r}") from None
    if not values:
        raise ValueError(f"{flag} is empty")
    return values


def _downscale(image, max_side):
    if max_side <= 0 or max(image.shape[1:]) <= max_side:
        return image
    from PIL import Image as PILImage

    h, w = image.shape[1], image.shape[2]
    scale = max_side / max(h, w)
    nh, nw = max(1, int(round(h * scale))), max(1, int(round(w * scale)))
    arr = np.rint(image.transpose(1, 2, 0) * 255.0).astype(np.uint8)
    small = PILImage.fromarray(arr, "RGB").resize((nw, nh), PILImage.BILINEAR)
    return np.asarray(small, dtype=np.float64).transpose(2, 0, 1) / 255.0


def _cmd_compare(args) -> int:
    seeds = _parse_int_list(args.seeds, "--seeds")
    grid = _parse_int_list(args.kmeans_grid, "--kmeans-grid")
    entries = image_io.read_manifest(args.manifest)
    if not entries:
        raise ValueError(f"manifest {args.manifest} lists no images")
    items = []
    for e in entries:
        image = _downscale(image_io.load_image(e.image_path), args.max_side)
        gts = [image_io.read_label_raw(p) for p in e.gt_paths]
        items.append(evaluation.EvalItem(name=e.image_path, image=image, ground_truths=gts))

    net = _network_config(args)

    def mmt_fn(image, seed):
        config = TrainerConfig(
            iterations=args.iters, learning_rate=args.lr, momentum=args.momentum,
            ema_alpha=args.alpha, tv_weight=args.beta,
            seed1=seed, seed2=seed + 1000003, network=net,
        )
        return trainer.train(image, config).labels

    def single_fn(image, seed):
        config = TrainerConfig(
            iterations=args.iters, learning_rate=args.lr, momentum=args.momentum,
            tv_weight=args.beta, seed1=seed, seed2=seed, network=net,
        )
        return trainer.self_train(image, config).labels

    methods = {
        "mmt": (mmt_fn, {"iters": args.iters, "q": args.q, "layers": args.layers,
                         "beta": args.beta, "alpha": args.alpha}),
        "single": (single_fn, {"iters": args.iters, "q": args.q, "layers": args.layers,
                               "beta": args.beta}),
    }
    for k in grid:
        methods[f"kmeans-k{k}"] = (
            lambda image, seed, k=k: evaluation.kmeans_segment(image, k, seed),
            {"k": k},
        )
    reports = evaluation.run_comparison(items, methods, seeds)
    best_km = evaluation.best_kmeans_report(reports)
    table = evaluation.format_report_table(reports)
    table += (f"\n\nbest k-means: {best_km.method} "
              f"(mean {best_km.mean_accuracy:.4f}, std {best_km.std_accuracy:.4f})")
    print(table)
    if args.out_table:
        with open(args.out_table, "w", encoding="utf-8") as fh:
            fh.write(table + "\n")
    if args.out_records:
        with open(args.out_records, "w", encoding="ascii") as fh:
            for line in evaluation.report_records(reports):
                fh.write(line + "\n")
    return 0


def _cmd_selftest(args) -> int:
    rng = np.random.Generator(np.random.PCG64(7))
    failures = 0

    def check(name, ok):
        nonlocal failures
        print(f"{name}: {'pass' if ok else 'FAIL'}")
        failures += 0 if ok else 1

    x = rng.normal(size=(2, 5, 5))
    kernels = ParamTensor(rng.normal(size=(3, 2, 3, 3)))
    bias = ParamTensor(rng.normal(size=3))
    w = rng.normal(size=(3, 5, 5))

    def conv_scalar(p):
        return float((conv2d(p, kernels, bias, 1) * w).sum())

    grad = conv2d_backward(w, x, kernels, bias, 1)
    check("conv2d gradient", finite_diff_check(conv_scalar, x, grad) <= 1e-6)

    gamma = ParamTensor(rng.normal(size=2) + 1.0)
    beta2 = ParamTensor(rng.normal(size=2))

    def norm_scalar(p):
        return float((channel_norm(p, gamma, beta2, 1e-5) * w[:2]).sum())

    _, cache = channel_norm_forward(x, gamma, beta2, 1e-5)
    gamma.zero_grad()
    beta2.zero_grad()
    gnorm = channel_norm_backward(w[:2], cache, gamma, beta2)
    check("channel_norm gradient", finite_diff_check(norm_scalar, x, gnorm) <= 1e-5)

    feats = rng.normal(size=(4, 6, 6))
    targets = rng.integers(0, 4, size=(6, 6))
    loss = sim_loss(feats, targets)
    check("softmax-CE gradient",
          finite_diff_check(lambda p: sim_loss(p, targets).value, feats, loss.grad) <= 1e-5)
    tv = tv_loss(feats)
    check("tv gradient",
          finite_diff_check(lambda p: tv_loss(p).value, feats, tv.grad) <= 1e-5)

    ok = True
    for _ in range(50):
        counts = rng.integers(0, 30, size=(rng.integers(1, 6), rng.integers(1, 6)))
        m = OverlapMatrix(rows=np.arange(counts.shape[0]), cols=np.arange(counts.shape[1]),
                          counts=counts.astype(np.int64))
        ok = ok and solve_assignment(m).score == brute_force_assignment(m).score
    check("assignment vs brute force", ok)

    cfg = NetworkConfig(n_layers=1, n_channels=4)
    params = init_params(cfg, 3)
    img = rng.random(size=(3, 8, 8))
    labels = assign_labels(forward(params, img))
    check("forward/labels shape", labels.shape == (8, 8))
    return 0 if failures == 0 else 2


def run_cli(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    if args.command == "baseline" and args.baseline is None:
        parser.print_usage(sys.stderr)
        print("mmtseg baseline: error: choose a baseline method", file=sys.stderr)
        return 1
    handlers = {
        "segment": _cmd_segment,
        "eval": _cmd_eval,
        "baseline": _cmd_kmeans,
        "compare": _cmd_compare,
        "selftest": _cmd_selftest,
    }
    try:
        return handlers[args.command](args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"mmtseg: error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
