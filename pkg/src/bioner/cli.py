"""Command-line pipeline: validate, build-prompts, infer, decode, evaluate,
gen-selector-data, select.

Exit codes: 0 success, 1 data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path

from . import codec
from .corpus import LoadStats, bundled_schemas, dumps_sentence, load_corpus, load_schemas, write_corpus
from .errors import BionerError
from .evaluation import evaluate_corpus, render_report
from .inference import DEFAULT_RETRIES, DEFAULT_TIMEOUT, EchoGoldBackend, PerturbingBackend, WireBackend, run_batch
from .prompts import PromptTemplate, build_training_records, emit_finetune_file, mix_datasets, render_prompt
from .selector import (
    ChatScorer,
    ConstantScorer,
    GoldOracleScorer,
    emit_selector_file,
    filter_predictions,
    gen_selector_dataset,
)

log = logging.getLogger("bioner")

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def read_config(path) -> dict:
    """``key=value`` lines (``#`` comments) or a JSON object; keys use flag names."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        raw = json.loads(text)
    else:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            raw[k.strip()] = v.strip()
    return {k.lstrip("-").replace("-", "_"): v for k, v in raw.items()}


# --- shared helpers ---------------------------------------------------------


def _schemas(args):
    return load_schemas(args.schemas) if args.schemas else bundled_schemas()


def _corpus(path, schemas, strict=True):
    return load_corpus(path, schemas, strict=strict)


def _template(args) -> PromptTemplate:
    if args.template:
        return PromptTemplate.load(args.template, args.strategy)
    return PromptTemplate.default(args.strategy)


def _write_jsonl(path, records):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r, ensure_ascii=False))
            fh.write("\n")


def _read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _chat_backend(args):
    if not args.endpoint or not args.model:
        raise UsageError("the wire backend needs --endpoint and --model")
    return WireBackend(args.endpoint, args.model, args.api_key_env, args.temperature, args.timeout)


# --- subcommands ------------------------------------------------------------


def cmd_validate(args) -> int:
    schemas = _schemas(args)
    stats = LoadStats()
    load_corpus(args.corpus, schemas, strict=False, stats=stats)
    for problem in stats.problems:
        print(problem, file=sys.stderr)
    print(f"{stats.loaded} valid, {stats.skipped} invalid")
    return EXIT_OK if stats.skipped == 0 else EXIT_DATA


def cmd_build_prompts(args) -> int:
    schemas = _schemas(args)
    sentences = _corpus(args.corpus, schemas)
    if args.mix:
        by_dataset: dict[str, list] = {}
        for s in sentences:
            by_dataset.setdefault(s.dataset, []).append(s)
        sentences = mix_datasets(by_dataset, args.seed)
    records, skipped = build_training_records(sentences, schemas, _template(args), args.strategy)
    emit_finetune_file(records, args.output)
    for sid, reason in skipped:
        print(f"skipped {sid}: {reason}", file=sys.stderr)
    print(f"wrote {len(records)} records to {args.output} ({len(skipped)} skipped)")
    return EXIT_OK


def cmd_infer(args) -> int:
    schemas = _schemas(args)
    sentences = _corpus(args.corpus, schemas)
    tmpl = _template(args)
    prompts = [render_prompt(s, schemas[s.dataset], tmpl) for s in sentences]
    if args.backend == "echo-gold":
        backend = EchoGoldBackend(sentences, schemas, args.strategy, tmpl)
    else:
        backend = _chat_backend(args)
    if args.noise_rate:
        backend = PerturbingBackend(backend, args.noise_rate, args.seed)
    outputs = run_batch(prompts, backend, args.parallelism, args.retries, args.backoff, args.temperature)
    records, failures = [], 0
    for s, prompt, out in zip(sentences, prompts, outputs):
        rec = {"id": s.id, "dataset": s.dataset, "strategy": args.strategy, "prompt": prompt}
        if isinstance(out, str):
            rec.update(output=out, error=None)
        else:
            failures += 1
            rec.update(output=None, error=str(out))
        records.append(rec)
    _write_jsonl(args.output, records)
    print(f"wrote {len(records)} outputs to {args.output} ({failures} failed)")
    return EXIT_OK


def cmd_decode(args) -> int:
    schemas = _schemas(args)
    sentences = _corpus(args.corpus, schemas)
    by_id = {s.id: s for s in sentences}
    raw = {}
    for rec in _read_jsonl(args.raw):
        if rec["id"] not in by_id:
            raise BionerError(f"raw output for unknown sentence {rec['id']!r}")
        raw[rec["id"]] = rec
    kinds, failed, missing = Counter(), 0, 0
    diag_records, predictions = [], []
    for s in sentences:
        rec = raw.get(s.id)
        if rec is None or rec.get("output") is None:
            missing += 1
            predictions.append(s.with_entities(()))
            continue
        strategy = args.strategy or rec.get("strategy") or "symbolic"
        out = codec.decode(strategy, rec["output"], s, schemas[s.dataset], args.max_ratio)
        failed += out.failed
        for d in out.diagnostics:
            kinds[d.kind] += 1
            diag_records.append({"id": s.id, "severity": d.severity, "kind": d.kind, "message": d.message})
        predictions.append(s.with_entities(out.entities))
    write_corpus(predictions, args.output)
    if args.diagnostics:
        _write_jsonl(args.diagnostics, diag_records)
    n_ent = sum(len(p.entities) for p in predictions)
    summary = ", ".join(f"{k}={v}" for k, v in sorted(kinds.items())) or "none"
    print(f"decoded {len(predictions)} sentences, {n_ent} entities; "
          f"{failed} unparseable, {missing} without output; diagnostics: {summary}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    schemas = _schemas(args)
    gold = _corpus(args.corpus, schemas)
    preds = load_corpus(args.predictions, schemas, strict=True)
    report, _ = evaluate_corpus(preds, gold)
    sys.stdout.write(render_report(report, "text"))
    if args.output:
        Path(args.output).write_text(render_report(report, "machine"), encoding="utf-8")
    return EXIT_OK


def cmd_gen_selector_data(args) -> int:
    schemas = _schemas(args)
    sentences = _corpus(args.corpus, schemas)
    samples = gen_selector_dataset(sentences, schemas, args.seed, args.total, args.neg_ratio)
    emit_selector_file(samples, args.output)
    pos = sum(s.label for s in samples)
    print(f"wrote {len(samples)} samples to {args.output} ({pos} positive, {len(samples) - pos} negative)")
    return EXIT_OK


def cmd_select(args) -> int:
    schemas = _schemas(args)
    gold = _corpus(args.corpus, schemas)
    preds = load_corpus(args.predictions, schemas, strict=True)
    if args.backend == "oracle":
        scorer = GoldOracleScorer(gold)
    elif args.backend == "constant":
        scorer = ConstantScorer(args.constant)
    else:
        scorer = ChatScorer(_chat_backend(args), args.temperature)
    result = filter_predictions(preds, scorer, args.threshold, parallelism=args.parallelism)
    write_corpus(result.sentences, args.output)
    if args.audit:
        _write_jsonl(args.audit, [r.to_dict() for r in result.audit])
    kept = sum(r.kept for r in result.audit)
    print(f"kept {kept} of {len(result.audit)} candidates ({len(result.diagnostics)} unscored)")
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def _add_backend_flags(p, choices, default):
    p.add_argument("--backend", choices=choices, default=default)
    p.add_argument("--endpoint", help="base URL of a chat-completions server")
    p.add_argument("--model")
    p.add_argument("--api-key-env", default="LLM_API_KEY", help="environment variable holding the token")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--parallelism", type=int, default=4)
    p.add_argument("--retries", type=int, default=DEFAULT_RETRIES)
    p.add_argument("--backoff", type=float, default=0.5)
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bioner", description="Generative biomedical NER pipeline.")
    parser.add_argument("--config", help="key=value or JSON file supplying flag defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--schemas", help="directory of schema JSON files (default: bundled)")
        p.set_defaults(func=func)
        return p

    p = command("validate", cmd_validate, "check a corpus against its schemas")
    p.add_argument("corpus")

    p = command("build-prompts", cmd_build_prompts, "write a fine-tuning file")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--strategy", choices=codec.STRATEGIES, default="symbolic")
    p.add_argument("--template")
    p.add_argument("--mix", action="store_true", help="pool, shuffle and alternate zh/en")
    p.add_argument("--seed", type=int, default=0)

    p = command("infer", cmd_infer, "run prompts through a backend")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--strategy", choices=codec.STRATEGIES, default="symbolic")
    p.add_argument("--template")
    _add_backend_flags(p, ("echo-gold", "wire"), "wire")
    p.add_argument("--noise-rate", type=float, default=0.0, help="character noise applied to outputs")
    p.add_argument("--seed", type=int, default=0)

    p = command("decode", cmd_decode, "turn raw outputs into predictions")
    p.add_argument("raw")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--strategy", choices=codec.STRATEGIES, help="override the strategy recorded in RAW")
    p.add_argument("--max-ratio", type=float, default=0.5, help="alignment rejection threshold")
    p.add_argument("--diagnostics", help="write per-item decode diagnostics here")

    p = command("evaluate", cmd_evaluate, "score predictions against gold")
    p.add_argument("predictions")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", help="write the machine-readable report here")

    p = command("gen-selector-data", cmd_gen_selector_data, "write selector training samples")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--total", type=int, default=10000)
    p.add_argument("--neg-ratio", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)

    p = command("select", cmd_select, "filter predictions with the entity selector")
    p.add_argument("predictions")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--audit", help="write per-candidate scores here")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--constant", type=float, default=1.0, help="score used by --backend constant")
    _add_backend_flags(p, ("oracle", "constant", "wire"), "wire")
    return parser


_INPUTS = ("corpus", "raw", "predictions", "template", "schemas")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        if known.config:
            cfg = read_config(known.config)
            for action in parser._subparsers._group_actions:
                for sp in action.choices.values():
                    dests = {a.dest for a in sp._actions}
                    sp.set_defaults(**{k: v for k, v in cfg.items() if k in dests})
    except (OSError, ValueError, UsageError) as exc:
        print(f"bioner: config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    for name in _INPUTS:
        path = getattr(args, name, None)
        if path and not Path(path).exists():
            print(f"bioner: {name} path does not exist: {path}", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"bioner: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BionerError, ValueError, KeyError, OSError) as exc:
        print(f"bioner: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
