import json
import subprocess
import sys

import pytest

from bioner.cli import main, read_config
from bioner.corpus import load_corpus, write_corpus
from bioner.evaluation import load_report
from bioner.synthetic import random_corpus


@pytest.fixture
def corpus_file(tmp_path, schemas):
    corpus = random_corpus(21, [schemas["GENIA"], schemas["CMeEE-V2"]], 30)
    p = tmp_path / "gold.jsonl"
    write_corpus(corpus, p)
    return p


@pytest.mark.parametrize("strategy", ["json", "html", "symbolic"])
def test_pipeline_perfect_backend(tmp_path, corpus_file, capsys, strategy):
    raw, pred, rep = tmp_path / "raw.jsonl", tmp_path / "pred.jsonl", tmp_path / "rep.jsonl"
    assert main(["infer", str(corpus_file), "-o", str(raw), "--backend", "echo-gold", "--strategy", strategy]) == 0
    assert main(["decode", str(raw), str(corpus_file), "-o", str(pred)]) == 0
    assert main(["evaluate", str(pred), str(corpus_file), "-o", str(rep)]) == 0
    overall = load_report(rep.read_text())[0]
    assert overall["f1"] == 1.0 or overall["n_gold"] == 0
    assert "overall" in capsys.readouterr().out


def test_validate(tmp_path, corpus_file, capsys):
    assert main(["validate", str(corpus_file)]) == 0
    bad = tmp_path / "bad.jsonl"
    bad.write_text(json.dumps({"id": "x", "dataset": "GENIA", "language": "en", "text": "ab",
                               "entities": [{"start": 0, "end": 5, "type": "DNA", "text": "ab"}]}) + "\n")
    assert main(["validate", str(bad)]) == 1
    assert "OffsetOutOfRange" in capsys.readouterr().err


def test_build_prompts_mix_deterministic(tmp_path, corpus_file):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (a, b):
        assert main(["build-prompts", str(corpus_file), "-o", str(out), "--mix", "--seed", "4"]) == 0
    assert a.read_bytes() == b.read_bytes()
    langs = [json.loads(line)["meta"]["language"] for line in a.read_text(encoding="utf-8").splitlines()]
    assert langs[:2] == ["zh", "en"]


def test_selector_commands(tmp_path, corpus_file, schemas):
    sel = tmp_path / "sel.jsonl"
    assert main(["gen-selector-data", str(corpus_file), "-o", str(sel), "--total", "50", "--seed", "1"]) == 0
    assert len(sel.read_text(encoding="utf-8").splitlines()) == 50

    gold = load_corpus(corpus_file, schemas)
    noisy = [s.with_entities(list(s.entities) + [s.span(0, 1, s.entities[0].etype)]) if s.entities and
             all(e.key != (0, 1, s.entities[0].etype) for e in s.entities) else s for s in gold]
    pred, out, audit = tmp_path / "p.jsonl", tmp_path / "f.jsonl", tmp_path / "audit.jsonl"
    write_corpus(noisy, pred)
    assert main(["select", str(pred), str(corpus_file), "-o", str(out), "--backend", "oracle", "--audit", str(audit)]) == 0
    assert load_corpus(out, schemas) == gold
    assert audit.read_text().count("\n") == sum(len(s.entities) for s in noisy)


def test_usage_errors(tmp_path, corpus_file, capsys):
    assert main([]) == 2
    assert main(["evaluate", str(tmp_path / "missing.jsonl"), str(corpus_file)]) == 2
    assert main(["infer", str(corpus_file), "-o", str(tmp_path / "r.jsonl"), "--backend", "wire"]) == 2
    assert main(["decode", "--bogus"]) == 2


def test_data_error(tmp_path, corpus_file):
    broken = tmp_path / "broken.jsonl"
    broken.write_text("{nope\n")
    assert main(["evaluate", str(broken), str(corpus_file)]) == 1


def test_config_file(tmp_path, corpus_file):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nbackend = echo-gold\nstrategy=json\n")
    assert read_config(cfg) == {"backend": "echo-gold", "strategy": "json"}
    raw = tmp_path / "raw.jsonl"
    assert main(["--config", str(cfg), "infer", str(corpus_file), "-o", str(raw)]) == 0
    assert json.loads(raw.read_text(encoding="utf-8").splitlines()[0])["strategy"] == "json"
    (tmp_path / "bad.cfg").write_text("just words\n")
    assert main(["--config", str(tmp_path / "bad.cfg"), "validate", str(corpus_file)]) == 2


def test_module_entry_point(corpus_file):
    proc = subprocess.run([sys.executable, "-m", "bioner", "validate", str(corpus_file)], capture_output=True, text=True)
    assert proc.returncode == 0 and "30 valid" in proc.stdout
