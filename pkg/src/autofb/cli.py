"""Command-line interface: ``autofb <subcommand> ...``."""
from __future__ import annotations

import argparse
import logging
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AutoFBError, ShapeMismatch
from .evaluation import (
    CLINICAL_TOLERANCE,
    aggregate_miou,
    assign_folds,
    class_weights,
    error_stats,
    within_tolerance,
)
from .geometry import AnatomyClass
from .io import (
    list_images,
    load_gray,
    load_mask,
    read_clinical,
    read_counts,
    read_json,
    read_manifest,
    save_gray,
    save_mask,
    validate_report,
    write_csv,
    write_json,
)

log = logging.getLogger("autofb")

_CLASS_ALIASES = {}
for _c in AnatomyClass:
    for _alias in (_c.name, _c.short, str(int(_c))):
        _CLASS_ALIASES[_alias.lower()] = _c


def parse_class(name: str) -> AnatomyClass:
    try:
        return _CLASS_ALIASES[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown anatomy class {name!r}") from None


def _fmt(v) -> str:
    return f"{float(v):.6g}"


# ---------------------------------------------------------------- measure
def cmd_measure(args) -> int:
    from .batch import RunConfig, run_measure_batch

    if args.scale == "fixed" and args.px_per_mm is None:
        raise SystemExit("--scale fixed needs --px-per-mm")
    config = RunConfig(
        masks_dir=Path(args.masks),
        images_dir=Path(args.images) if args.images else None,
        px_per_mm=args.px_per_mm,
        ncc_threshold=args.ncc_threshold,
        band_fraction=args.band_fraction,
        interval_mm=args.interval_mm,
        template_dir=Path(args.templates) if args.templates else None,
        min_area=args.min_area,
        boundary_offset=args.boundary_offset,
        workers=args.workers,
    )
    doc = run_measure_batch(config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_json(out, doc)

    rows = []
    for image_id, e in doc["entries"].items():
        if e["status"] != "ok":
            rows.append([image_id, "", "", "", "", e["error"]["code"]])
            continue
        for name, m in e["measurements"].items():
            rows.append([image_id, e["plane"], name, _fmt(m["value_px"]), _fmt(m["value_mm"]),
                         ";".join(e["flags"])])
    write_csv(out.with_suffix(".csv"), ["image_id", "plane", "measurement", "value_px", "value_mm", "flags"], rows)
    s = doc["summary"]
    print(f"measured {s['n_images']} images: {s['n_ok']} ok, {s['n_failed']} failed -> {out}")
    return 0


# ---------------------------------------------------------------- eval
def cmd_eval(args) -> int:
    from .plotting import confusion_heatmap, iou_bars

    pred, gt = list_images(args.pred), list_images(args.gt)
    ids = sorted(set(pred) & set(gt))
    missing = sorted(set(pred) ^ set(gt))
    if missing:
        log.warning("%d ids present in only one directory, skipped: %s", len(missing), ", ".join(missing[:5]))
    if not ids:
        raise SystemExit("no matching prediction/ground-truth pairs")
    pairs = []
    for i in ids:
        p, g = load_mask(pred[i]), load_mask(gt[i])
        if p.shape != g.shape:
            raise ShapeMismatch(f"{i}: prediction {p.shape} vs ground truth {g.shape}")
        pairs.append((p, g))
    metrics = aggregate_miou(pairs, per_image=args.per_image).to_dict()
    metrics["n_pairs"] = len(pairs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_json(out, metrics)
    write_csv(out.with_name(out.stem + "_iou.csv"), ["class", "iou"],
              [[k, _fmt(v)] for k, v in metrics["per_class_iou"].items()] + [["mIoU", _fmt(metrics["miou"])]])
    if not args.no_figures:
        iou_bars(metrics, out.with_name(out.stem + "_iou.png"))
        confusion_heatmap(metrics["confusion"], out.with_name(out.stem + "_confusion.png"))
    print(f"mIoU {metrics['miou']:.4f} over {len(pairs)} pairs ({metrics['mode']}) -> {out}")
    return 0


# ---------------------------------------------------------------- errors
def _pairs_from_report(report_path, clinical_path):
    doc = read_json(report_path)
    clinical = read_clinical(clinical_path)
    rows = []
    for image_id, name, value in clinical:
        entry = doc["entries"].get(image_id)
        if entry is None or entry["status"] != "ok" or name not in entry["measurements"]:
            log.warning("no prediction for %s %s", image_id, name)
            continue
        rows.append((image_id, name, entry["measurements"][name]["value_mm"], value))
    return rows


def _pairs_from_csv(path):
    import csv

    with open(path, newline="") as fh:
        return [(row.get("image_id", ""), row["measurement"], float(row["predicted_mm"]),
                 float(row["clinical_mm"])) for row in csv.DictReader(fh)]


def cmd_errors(args) -> int:
    from .plotting import error_boxplot

    if args.pairs:
        rows = _pairs_from_csv(args.pairs)
    elif args.report and args.clinical:
        rows = _pairs_from_report(args.report, args.clinical)
    else:
        raise SystemExit("give --report with --clinical, or --pairs")
    grouped = defaultdict(list)
    for _, name, pred, clin in rows:
        grouped[name].append((pred, clin))
    if not grouped:
        raise SystemExit("no predicted/clinical pairs to compare")
    stats = {name: error_stats(p, name, args.tolerance).to_dict() for name, p in sorted(grouped.items())}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_json(out, {"tolerance": args.tolerance, "stats": stats})
    write_csv(out.with_name(out.stem + "_errors.csv"),
              ["image_id", "measurement", "predicted_mm", "clinical_mm", "abs_error_mm", "within_tolerance"],
              [[i, n, _fmt(p), _fmt(c), _fmt(abs(p - c)), int(within_tolerance(p, c, args.tolerance))]
               for i, n, p, c in rows])
    if not args.no_figures:
        error_boxplot(stats, out.with_name(out.stem + "_boxplot.png"))
    for name, s in stats.items():
        print(f"{name:5s} n={s['n']:4d} median={s['median']:.3f} mm IQR=[{s['q1']:.3f}, {s['q3']:.3f}] "
              f"outliers={len(s['outliers'])} within±{args.tolerance:.0%}={s['within_tolerance_rate']:.3f}")
    return 0


# ---------------------------------------------------------------- weights
def cmd_weights(args) -> int:
    raw = read_counts(args.counts)
    counts = {parse_class(k): v for k, v in raw.items()}
    weights = class_weights(counts)
    rows = [[c.short, _fmt(counts[c]), repr(weights[c])] for c in sorted(weights)]  # full precision for loss configs
    write_csv(sys.stdout, ["class", "count", "weight"], rows)
    if args.out:
        write_csv(args.out, ["class", "count", "weight"], rows)
    return 0


# ---------------------------------------------------------------- folds
def cmd_folds(args) -> int:
    manifest = read_manifest(args.manifest)
    folds = assign_folds(manifest, args.k, args.seed)
    counts = dict(manifest)
    rows = [[s, counts[s], folds.mapping[s]] for s, _ in manifest]
    write_csv(sys.stdout, ["subject_id", "image_count", "fold"], rows)
    if args.out:
        write_json(args.out, folds.to_dict())
    print("fold images: " + " ".join(str(n) for n in folds.fold_images), file=sys.stderr)
    return 0


# ---------------------------------------------------------------- phantom
def cmd_phantom(args) -> int:
    from .phantom import random_spec, render_frame, render_mask

    out = Path(args.out)
    for sub in ("masks", "images", "truth"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    kinds = ["head", "abdomen", "femur"] if args.kind == "mixed" else [args.kind]
    for i in range(args.n):
        kind = kinds[i % len(kinds)]
        spec = random_spec(kind, rng, width=args.width, height=args.height, noise_radius=args.noise_radius)
        mask, truth = render_mask(spec)
        image_id = f"{kind}_{i:04d}"
        save_mask(out / "masks" / f"{image_id}.png", mask)
        save_gray(out / "images" / f"{image_id}.png", render_frame(spec, mask))
        write_json(out / "truth" / f"{image_id}.json", truth.to_dict())
    print(f"wrote {args.n} phantom triplets to {out}")
    return 0


# ---------------------------------------------------------------- overlay
def cmd_overlay(args) -> int:
    from .overlay import render_overlay

    doc = read_json(args.report)
    validate_report(doc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    images = list_images(args.images) if args.images else {}
    n = 0
    for image_id, entry in doc["entries"].items():
        if entry["status"] != "ok":
            continue
        image = load_gray(images[image_id]) if image_id in images else None
        if image is None:
            log.warning("%s: no frame found, drawing on a blank canvas", image_id)
            fit = entry["fit"]
            extent = [fit.get(k, 0) for k in ("max_x", "max_y")] if fit["type"] == "bbox" else \
                [fit["cx"] + fit["a"], fit["cy"] + fit["a"]]
            svg = render_overlay(None, entry, width=int(extent[0]) + 10, height=int(extent[1]) + 10)
        else:
            svg = render_overlay(image, entry)
        (out / f"{image_id}.svg").write_text(svg)
        n += 1
    print(f"wrote {n} overlays to {out}")
    return 0


# ---------------------------------------------------------------- templates
def cmd_templates(args) -> int:
    from .scale import write_templates

    write_templates(args.out)
    print(f"wrote default marker templates to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="autofb", description="Fetal biometry from ultrasound label masks.")
    p.add_argument("--version", action="version", version=f"autofb {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("measure", help="measure every mask in a directory")
    m.add_argument("--masks", required=True, help="directory of label-mask PNGs (values 0..3)")
    m.add_argument("--images", help="directory of frames with the on-screen ruler (same file names)")
    m.add_argument("--scale", choices=["ruler", "fixed"], default=None,
                   help="scale source; defaults to ruler unless --px-per-mm is given")
    m.add_argument("--px-per-mm", type=float, help="fixed scale override")
    m.add_argument("--templates", help="marker template directory (default: $AUTOFB_TEMPLATE_DIR or bundled)")
    m.add_argument("--ncc-threshold", type=float, default=0.7)
    m.add_argument("--band-fraction", type=float, default=0.12, help="left band searched for the ruler")
    m.add_argument("--interval-mm", type=float, help="force the tick interval instead of inferring it")
    m.add_argument("--min-area", type=int, default=50, help="TinyRegion flag threshold, pixels")
    m.add_argument("--boundary-offset", type=float, default=0.5,
                   help="px added to fitted semi-axes (contour runs through pixel centres)")
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--out", required=True, help="report JSON; a CSV with the same stem is written alongside")
    m.set_defaults(func=cmd_measure)

    e = sub.add_parser("eval", help="segmentation IoU / mIoU")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--per-image", action="store_true", help="average IoU over images instead of pooling pixels")
    e.add_argument("--no-figures", action="store_true")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("errors", help="absolute-error statistics against clinical values")
    r.add_argument("--report")
    r.add_argument("--clinical", help="CSV: image_id,measurement,value_mm")
    r.add_argument("--pairs", help="CSV: measurement,predicted_mm,clinical_mm (alternative input)")
    r.add_argument("--tolerance", type=float, default=CLINICAL_TOLERANCE)
    r.add_argument("--no-figures", action="store_true")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_errors)

    w = sub.add_parser("weights", help="weighted cross-entropy class weights")
    w.add_argument("--counts", required=True, help="CSV: class,count")
    w.add_argument("--out")
    w.set_defaults(func=cmd_weights)

    f = sub.add_parser("folds", help="subject-disjoint fold assignment")
    f.add_argument("--manifest", required=True, help="CSV: subject_id,image_count")
    f.add_argument("--k", type=int, default=4)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out")
    f.set_defaults(func=cmd_folds)

    ph = sub.add_parser("phantom", help="write synthetic mask/frame/truth triplets")
    ph.add_argument("--kind", choices=["head", "abdomen", "femur", "mixed"], required=True)
    ph.add_argument("--n", type=int, default=1)
    ph.add_argument("--seed", type=int, default=0)
    ph.add_argument("--width", type=int, default=640)
    ph.add_argument("--height", type=int, default=512)
    ph.add_argument("--noise-radius", type=int, default=0)
    ph.add_argument("--out", required=True)
    ph.set_defaults(func=cmd_phantom)

    o = sub.add_parser("overlay", help="SVG overlays of fitted shapes")
    o.add_argument("--report", required=True)
    o.add_argument("--images")
    o.add_argument("--out", required=True)
    o.set_defaults(func=cmd_overlay)

    t = sub.add_parser("templates", help="write the default ruler marker templates")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_templates)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "scale", None) == "ruler" and getattr(args, "px_per_mm", None) is not None:
        parser.error("--scale ruler conflicts with --px-per-mm")
    try:
        return args.func(args)
    except AutoFBError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
