"""Command-line entry point: ``medevalkit SUBCOMMAND ...``.

Exit codes: 0 success, 1 invalid input or usage, 2 runtime or endpoint failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import warnings
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import load_config
from .errors import EndpointError, TemplateIntegrityError, TransportError, ValidationError

logger = logging.getLogger("medevalkit")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1 instead of argparse's 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _subdirs_with(root: Path, pattern: str) -> list[Path]:
    if any(root.glob(pattern)):
        return [root]
    return sorted(p for p in root.iterdir() if p.is_dir() and any(p.glob(pattern)))


def cmd_prep_volume(args, cfg) -> int:
    from .volgrid import CT_WINDOWS, Modality, StackCriteria, WindowSpec, render_sequence, vision_token_count
    from .volgrid.io import read_study, write_sequence

    vcfg = cfg["volume"]
    in_dir = Path(args.in_dir)
    if not in_dir.is_dir():
        raise ValidationError(f"input directory not found: {in_dir}")
    studies = _subdirs_with(in_dir, "*.meta")
    if not studies:
        raise ValidationError(f"no volumes (*.meta) under {in_dir}")
    windows = tuple(WindowSpec(*w) for w in vcfg["ct_windows"]) if vcfg["ct_windows"] else CT_WINDOWS
    if len(windows) != 3:
        raise ValidationError("volume.ct_windows needs three [lo, hi] pairs")
    criteria = StackCriteria(max_slice_px=vcfg["max_slice_px"], min_slices=vcfg["min_slices"],
                             thickness_tol_mm=vcfg["thickness_tol_mm"])
    cap = args.cap if args.cap is not None else vcfg["cap"]
    failed = 0
    for study_dir in studies:
        volumes = read_study(study_dir)
        if args.modality != "auto":
            volumes = [v for v in volumes if v.modality is Modality(args.modality)]
        try:
            seq = render_sequence(volumes, criteria, windows, cap=cap, size=vcfg["image_size"])
        except ValidationError as exc:
            failed += 1
            print(f"{study_dir.name}: skipped: {exc}", file=sys.stderr)
            continue
        write_sequence(seq, args.out, study_dir.name)
        n = len(seq.entries)
        print(f"{study_dir.name}: {n} slices from {len(seq.source_series)} series, "
              f"{vision_token_count(n)} vision tokens")
    return EXIT_INVALID if failed else EXIT_OK


def cmd_prep_wsi(args, cfg) -> int:
    from .slidegrid import MagnificationDistribution, MaskParams, process_slide
    from .slidegrid.io import load_slide_dir, write_patchset

    wcfg = cfg["wsi"]
    in_dir = Path(args.in_dir)
    if not in_dir.is_dir():
        raise ValidationError(f"input directory not found: {in_dir}")
    slides = _subdirs_with(in_dir, "slide.json")
    if not slides:
        raise ValidationError(f"no slide directories (slide.json) under {in_dir}")
    dist = MagnificationDistribution(*wcfg["magnification_probs"])
    params = MaskParams(s_min=wcfg["s_min"], v_min=wcfg["v_min"], v_max=wcfg["v_max"],
                        struct_size=wcfg["struct_size"], min_component=wcfg["min_component"])
    cap = args.cap if args.cap is not None else wcfg["cap"]
    seed = _seed(args, cfg)
    failed = 0
    for slide_dir in slides:
        slide = load_slide_dir(slide_dir)
        patchset = process_slide(slide, seed=seed, cap=cap, dist=dist, params=params,
                                 min_fraction=wcfg["min_tissue_fraction"], max_workers=wcfg["workers"])
        write_patchset(patchset, args.out, slide.slide_id)
        print(f"{slide.slide_id}: {len(patchset.patches)} patches at {patchset.magnification:g}x"
              + (f", {len(patchset.errors)} failed reads" if patchset.errors else ""))
        failed += bool(patchset.errors)
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_render_prompt(args, cfg) -> int:
    from .promptforge import ImageRef, load_templates, render_template, resolve_system_text, template_digests

    if args.list:
        digests = template_digests()
        for tid, tpl in sorted(load_templates().items()):
            print(f"{tid}\t{tpl.source}\t{','.join(tpl.slots) or '-'}\t{digests[tid + '.txt'][:16]}")
        return EXIT_OK
    if not args.template:
        raise ValidationError("--template is required unless --list is given")
    slots = {}
    for item in args.slot:
        if "=" not in item:
            raise ValidationError(f"--slot expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        slots[key] = value
    from .promptforge import get_template

    tpl = get_template(args.template)
    system = resolve_system_text(args.model_kind, args.task or args.template, tpl.thinking)
    prompt = render_template(args.template, [ImageRef(path=p) for p in args.image], fix_typos=args.fix_typos,
                             system_text=system, temperature=cfg["endpoint"]["temperature"], **slots)
    if args.format == "json":
        parts = [{"type": "text", "text": p.text} if p.text is not None else {"type": "image", "path": p.image.path}
                 for p in prompt.parts]
        print(json.dumps({"template_id": prompt.template_id, "system_text": prompt.system_text,
                          "temperature": prompt.temperature, "parts": parts, "digest": prompt.digest()},
                         indent=2, ensure_ascii=False))
    else:
        if prompt.system_text:
            print(f"[system] {prompt.system_text}")
        for p in prompt.parts:
            print(p.text if p.text is not None else f"<image {p.image.path}>")
    return EXIT_OK


def _seed(args, cfg) -> int:
    for value in (getattr(args, "seed", None), args.global_seed):
        if value is not None:
            return value
    return cfg["seed"]


def _invocation(args) -> dict:
    skip = {"func", "out", "config", "log_level"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def cmd_run(args, cfg) -> int:
    from .evalrunner import EndpointConfig, emit_report, load_manifest, make_endpoint, run_evaluation
    from .evalrunner.manifest import TaskKind

    ecfg = dict(cfg["endpoint"])
    for key in ("temperature", "max_in_flight", "model", "model_kind", "max_output_tokens", "retries"):
        value = getattr(args, key)
        if value is not None:
            ecfg[key] = value
    ecfg["seed"] = _seed(args, cfg)
    try:
        config = EndpointConfig(base_url=args.endpoint, **ecfg)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid endpoint settings: {exc}") from None
    records = load_manifest(args.manifest)
    tasks = None if args.task == "all" else [TaskKind(args.task)]
    endpoint = make_endpoint(config)
    started = time.time()
    try:
        report = run_evaluation(records, endpoint, config, tasks=tasks, global_config=cfg,
                                jaccard_threshold=cfg["scoring"]["jaccard_threshold"])
    finally:
        endpoint.close()
    report.metadata["invocation"] = _invocation(args)
    report.timing = {"started_at": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(started)),
                     "elapsed_s": round(time.time() - started, 3)}
    paths = emit_report(report, args.out)
    for block in report.aggregates:
        print(f"{block['task']}\t{block['metric']}\t{block['value']:.6f}\t"
              f"calls={block['n_calls']} parse_miss={block['n_parse_miss']} errors={block['n_errors']}")
    print(f"wrote {paths['report']}")
    n_err = sum(b["n_errors"] for b in report.aggregates)
    if n_err:
        print(f"{n_err} calls failed; see the error column in {paths['report']}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_score(args, cfg) -> int:
    from .evalrunner.offline import score_files
    from .evalrunner.report import report_bytes

    report = score_files(args.task, args.pred, args.gold, cfg["scoring"]["jaccard_threshold"])
    out = Path(args.out)
    if out.suffix != ".json":
        out = out / "report.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(report_bytes(report))
    block = report.aggregates[0]
    print(f"{block['metric']}\t{block['value']:.6f}\tn={block['n_calls']}\tparse_miss={block['n_parse_miss']}")
    return EXIT_OK


def cmd_verify_report(args, cfg) -> int:
    from .evalrunner import load_report, verify_report

    report = load_report(args.report)
    problems = verify_report(report)
    if problems:
        for p in problems:
            print(f"mismatch: {p}", file=sys.stderr)
        return EXIT_INVALID
    print(f"OK: {len(report.aggregates)} aggregate block(s) and {len(report.per_example)} rows verified")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    from .evalrunner.manifest import TaskKind
    from .evalrunner.offline import SCORE_TASKS

    parser = _Parser(
        prog="medevalkit",
        description="Volume and slide preprocessing, prompt rendering, model evaluation and scoring.",
        epilog="Exit codes: 0 success, 1 invalid input or usage, 2 runtime or endpoint failure.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON file overriding defaults (see README for keys)")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--seed", dest="global_seed", type=int, help="seed used when a subcommand has none")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prep-volume", help="CT/MR volumes to capped PNG slice sequences")
    p.add_argument("--in", dest="in_dir", required=True, help="study directory, or a directory of studies")
    p.add_argument("--out", required=True, help="output directory (PNGs and manifest.jsonl)")
    p.add_argument("--cap", type=int, help="maximum slices per study (default 85)")
    p.add_argument("--modality", choices=("auto", "CT", "MR"), default="auto",
                   help="keep only volumes of this modality")
    p.set_defaults(func=cmd_prep_volume)

    p = sub.add_parser("prep-wsi", help="slide pyramid to a capped, ordered PNG patch set")
    p.add_argument("--in", dest="in_dir", required=True, help="slide directory, or a directory of slides")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--cap", type=int, help="maximum patches per slide (default 126)")
    p.add_argument("--seed", type=int, help="seed for magnification choice and subsampling")
    p.set_defaults(func=cmd_prep_wsi)

    p = sub.add_parser("render-prompt", help="render a template to text or JSON")
    p.add_argument("--template", help="template id (see --list)")
    p.add_argument("--list", action="store_true", help="list templates, slots and digests")
    p.add_argument("--image", action="append", default=[], help="image path, repeatable, in order")
    p.add_argument("--slot", action="append", default=[], help="KEY=VALUE slot binding, repeatable")
    p.add_argument("--model-kind", choices=("MEDGEMMA", "GENERAL"), default="MEDGEMMA")
    p.add_argument("--task", help="task name used to pick the system text")
    p.add_argument("--fix-typos", action="store_true", help="correct known template typos")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_render_prompt)

    p = sub.add_parser("run", help="evaluate a manifest against an endpoint")
    p.add_argument("--task", default="all", choices=["all"] + [k.value for k in TaskKind])
    p.add_argument("--manifest", required=True, help="JSONL manifest")
    p.add_argument("--endpoint", required=True, help="http(s) base URL or mock:NAME")
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-in-flight", type=int)
    p.add_argument("--max-output-tokens", type=int)
    p.add_argument("--retries", type=int)
    p.add_argument("--model", help="model name sent in requests")
    p.add_argument("--model-kind", choices=("MEDGEMMA", "GENERAL"))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory for report.json and summary.csv")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("score", help="score prediction JSONL against gold JSONL")
    p.add_argument("--task", required=True, choices=sorted(SCORE_TASKS))
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True, help="report path (.json) or directory")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("verify-report", help="recompute aggregates of a report and compare")
    p.add_argument("report", help="report.json or the directory containing it")
    p.set_defaults(func=cmd_verify_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.log_level:
            cfg["log_level"] = args.log_level.upper()
        if args.global_seed is not None:
            cfg["seed"] = args.global_seed
        level = getattr(logging, cfg["log_level"].upper(), None)
        if not isinstance(level, int):
            raise ValidationError(f"unknown log level {cfg['log_level']!r}")
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args, cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (TransportError, EndpointError, TemplateIntegrityError, OSError, RuntimeError) as exc:
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
