#!/usr/bin/env python3
"""Builds the annotation-ledger fixtures from a finished demo run.

usage: make_label_fixtures.py <run_dir> <fixtures_dir>

Writes:
  ledger_self.jsonl       two annotators copy every model verdict (full agreement)
  ledger_conflicts.jsonl  10 items, 3 disagreements, 1 arbitration
  sft_labels.jsonl        30 agreed items across stages 1, 2 and 3
"""
import json
import sys
from pathlib import Path


def read_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def label_from_verdict(v, stage):
    if stage == 1:
        target = v["system_id"]
        payload = {"level": v["quality"]["level"], "scores": v["dimension_scores"]["scores"],
                   "rationale": v["rationale"]}
    elif stage == 2:
        target = [v["system_a"], v["system_b"]]
        payload = {"consistency": v["consistency"], "superior": v["superior"],
                   "error_attributions": v["error_attributions"], "rationale": v["rationale"]}
    elif "system_id" in v:
        target = v["system_id"]
        payload = {"satisfaction": v["satisfaction"], "causes": v["causes"], "explanation": v["explanation"]}
    else:
        target = [v["system_a"], v["system_b"]]
        payload = {"preferred": v["preferred"], "rationale": v["rationale"]}
    return {"format_version": 1, "sample_id": v["sample_id"], "stage": stage, "target": target,
            "payload": payload, "annotator_id": "", "is_final": False}


class Ledger:
    def __init__(self):
        self.entries = []

    def add(self, label, annotator, kind="label"):
        label = dict(label, annotator_id=annotator, is_final=(kind == "arbitration"))
        self.entries.append({"format_version": 1, "seq": len(self.entries) + 1, "kind": kind, "label": label})

    def write(self, path):
        Path(path).write_text("".join(json.dumps(e, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n" for e in self.entries))


def main():
    run_dir, out_dir = Path(sys.argv[1]), Path(sys.argv[2])
    by_stage = {
        1: read_jsonl(run_dir / "verdicts_stage1.jsonl"),
        2: read_jsonl(run_dir / "verdicts_stage2.jsonl"),
        3: read_jsonl(run_dir / "verdicts_stage3.jsonl"),
    }
    labels = {s: [label_from_verdict(v, s) for v in vs] for s, vs in by_stage.items()}

    full = Ledger()
    for stage in (1, 2, 3):
        for label in labels[stage]:
            full.add(label, "ann-1")
            full.add(label, "ann-2")
    full.write(out_dir / "ledger_self.jsonl")

    # Items 0..9: stage-3 satisfaction labels of the first ten single verdicts.
    singles = [l for l in labels[3] if isinstance(l["target"], str)]
    flip = {"highly_satisfied": "satisfied", "satisfied": "highly_satisfied",
            "unsatisfied": "highly_unsatisfied", "highly_unsatisfied": "unsatisfied"}
    conflicts = Ledger()
    for i, label in enumerate(singles[:10]):
        conflicts.add(label, "ann-1")
        other = json.loads(json.dumps(label))
        if i in (2, 5, 7):
            other["payload"]["satisfaction"] = flip[label["payload"]["satisfaction"]]
        conflicts.add(other, "ann-2")
    arbitrated = json.loads(json.dumps(singles[5]))
    arbitrated["payload"]["explanation"] = "Arbitrated after review."
    conflicts.add(arbitrated, "arb-1", kind="arbitration")
    conflicts.write(out_dir / "ledger_conflicts.jsonl")

    sft = Ledger()
    for label in labels[1][:10] + labels[2][:10] + singles[:10]:
        sft.add(label, "ann-1")
        sft.add(label, "ann-2")
    sft.write(out_dir / "sft_labels.jsonl")


if __name__ == "__main__":
    main()
