"""Command-line entry points.

Verbs: ``datagen generate|suggestify|eod-pairs|judge-pairs``,
``eval run|talker``, ``serve``, ``report render``. Every subcommand accepts
``--config``, ``--seed`` and ``--out``; dataset verbs additionally read
``--in``. Dataset outputs get a ``<out>.manifest.json`` sidecar with
counts, drop statistics and the seed used.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import datagen
from .backends import BackendConfig, make_backend
from .core import (
    Split,
    load_default_registry,
    load_registry,
    parse_dialogue_record,
    serialize_annotated_record,
    serialize_dialogue_record,
)
from .errors import SitudialError
from .evaluation import (
    EvalReport,
    eval_config_from_file,
    render_report_table,
    run_evaluation,
    run_talker_eval,
)
from .prompts import DIALOGUE_GENERATION_TEMPLATE


def _load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _read_dialogues(path, registry):
    dialogues = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if line.strip():
                dialogues.append(parse_dialogue_record(line, registry, line_number=i))
    return dialogues


def _write_manifest(out_path: Path, payload: dict) -> None:
    manifest_path = out_path.with_name(out_path.name + ".manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def _registry_for(config: dict):
    if config.get("registry"):
        return load_registry(config["registry"])
    return load_default_registry()


def cmd_datagen_generate(args) -> int:
    config = _load_json(args.config)
    registry = _registry_for(config)
    base_dir = Path(args.config).parent
    backend_config = BackendConfig.from_dict(config["backend"], base_dir)
    topic_ids = config.get("topics") or [t.id for t in registry.split(Split.IN_DOMAIN)]
    per_topic = int(config.get("per_topic", 150))
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    out_path = Path(args.out)

    # fan out over topics; each task gets its own backend instance and a
    # seed derived from the run seed, so parallelism cannot perturb output
    def generate(topic_id):
        topic = registry.get(topic_id)
        return datagen.generate_topic_dialogues(
            topic,
            per_topic,
            make_backend(backend_config),
            DIALOGUE_GENERATION_TEMPLATE,
            rng_seed=seed + topic_ids.index(topic_id),
        )

    workers = min(len(topic_ids), 8)
    if workers <= 1:
        results = [generate(tid) for tid in topic_ids]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(generate, topic_ids))

    counts: dict[str, int] = {}
    dropped = 0
    errors: list[str] = []
    with open(out_path, "w", encoding="utf-8") as fh:
        for topic_id, result in zip(topic_ids, results):
            counts[topic_id] = len(result.dialogues)
            dropped += result.dropped
            errors.extend(result.errors)
            for dialogue in result.dialogues:
                fh.write(serialize_dialogue_record(dialogue) + "\n")
    _write_manifest(
        out_path,
        {
            "counts": counts,
            "total": sum(counts.values()),
            "dropped": dropped,
            "backend_errors": errors,
            "seed": seed,
        },
    )
    print(f"wrote {sum(counts.values())} dialogues to {out_path} ({dropped} dropped)")
    return 0


def cmd_datagen_suggestify(args) -> int:
    registry = load_default_registry()
    dialogues = _read_dialogues(args.infile, registry)
    seed = args.seed or 0
    out_path = Path(args.out)
    inserted = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for i, dialogue in enumerate(dialogues):
            annotated = datagen.insert_suggestion_turns(
                dialogue, args.prob, rng_seed=seed + i
            )
            inserted += annotated.suggestion_count()
            fh.write(serialize_annotated_record(annotated) + "\n")
    _write_manifest(
        out_path,
        {
            "counts": {"dialogues": len(dialogues), "suggestion_turns": inserted},
            "insertion_prob": args.prob,
            "seed": seed,
        },
    )
    print(f"wrote {len(dialogues)} annotated dialogues to {out_path}")
    return 0


def cmd_datagen_eod_pairs(args) -> int:
    registry = load_default_registry()
    dialogues = _read_dialogues(args.infile, registry)
    seed = args.seed or 0
    examples = datagen.build_eod_examples(dialogues, args.per_dialogue, rng_seed=seed)
    out_path = Path(args.out)
    datagen.write_jsonl(out_path, (e.as_dict() for e in examples))
    complete = sum(1 for e in examples if e.label is datagen.EodLabel.COMPLETE)
    _write_manifest(
        out_path,
        {
            "counts": {
                "examples": len(examples),
                "complete": complete,
                "incomplete": len(examples) - complete,
            },
            "seed": seed,
        },
    )
    print(f"wrote {len(examples)} end-of-dialogue examples to {out_path}")
    return 0


def cmd_datagen_judge_pairs(args) -> int:
    registry = load_default_registry()
    dialogues = _read_dialogues(args.infile, registry)
    seed = args.seed or 0
    pairs = datagen.build_judge_pairs(
        dialogues, args.pairs, kind_mix=args.kind_mix, rng_seed=seed
    )
    out_path = Path(args.out)
    datagen.write_jsonl(out_path, (p.as_dict() for p in pairs))
    appropriate = sum(1 for p in pairs if p.label is datagen.PairLabel.APPROPRIATE)
    _write_manifest(
        out_path,
        {
            "counts": {
                "pairs": len(pairs),
                "appropriate": appropriate,
                "inappropriate": len(pairs) - appropriate,
            },
            "kind_mix": args.kind_mix,
            "seed": seed,
        },
    )
    print(f"wrote {len(pairs)} judge pairs to {out_path}")
    return 0


def _finish_eval(report: EvalReport, args) -> int:
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(report.to_json_bytes())
            fh.write(b"\n")
    print(render_report_table(report))
    if report.backend_failures:
        print(f"{report.backend_failures} sessions hit backend failures", file=sys.stderr)
        return 1
    return 0


def cmd_eval(args, talker: bool) -> int:
    config = eval_config_from_file(args.config)
    if args.seed is not None:
        from dataclasses import replace

        config = replace(config, seed=args.seed)
    report = run_talker_eval(config) if talker else run_evaluation(config)
    return _finish_eval(report, args)


def cmd_report_render(args) -> int:
    payload = _load_json(args.infile)
    from .evaluation import EvalMode

    report = EvalReport(
        mode=EvalMode(payload["mode"]),
        seed=payload["seed"],
        config=payload["config"],
        overall=payload["overall"],
        per_topic=payload["per_topic"],
    )
    print(render_report_table(report))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app, service_config_from_file

    app = create_app(service_config_from_file(args.config))
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="situdial")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output path")

    datagen_parser = sub.add_parser("datagen", help="dataset pipeline")
    datagen_sub = datagen_parser.add_subparsers(dest="verb", required=True)

    p = datagen_sub.add_parser("generate", help="generate dialogues per topic")
    common(p, config_required=True)

    p = datagen_sub.add_parser("suggestify", help="insert suggestion turns")
    common(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--prob", type=float, default=0.2)

    p = datagen_sub.add_parser("eod-pairs", help="build end-of-dialogue examples")
    common(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--per-dialogue", type=int, default=2)

    p = datagen_sub.add_parser("judge-pairs", help="build judge pairs")
    common(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--pairs", type=int, required=True)
    p.add_argument("--kind-mix", type=float, default=0.5)

    eval_parser = sub.add_parser("eval", help="self-play evaluation")
    eval_sub = eval_parser.add_subparsers(dest="verb", required=True)
    for verb in ("run", "talker"):
        p = eval_sub.add_parser(verb)
        common(p, config_required=True)

    p = sub.add_parser("serve", help="run the practice-session HTTP service")
    common(p, config_required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    report_parser = sub.add_parser("report", help="report utilities")
    report_sub = report_parser.add_subparsers(dest="verb", required=True)
    p = report_sub.add_parser("render", help="render a report file as a table")
    common(p)
    p.add_argument("--in", dest="infile", required=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "datagen":
            handler = {
                "generate": cmd_datagen_generate,
                "suggestify": cmd_datagen_suggestify,
                "eod-pairs": cmd_datagen_eod_pairs,
                "judge-pairs": cmd_datagen_judge_pairs,
            }[args.verb]
            return handler(args)
        if args.command == "eval":
            return cmd_eval(args, talker=args.verb == "talker")
        if args.command == "serve":
            return cmd_serve(args)
        if args.command == "report":
            return cmd_report_render(args)
    except SitudialError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
