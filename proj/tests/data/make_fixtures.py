#!/usr/bin/env python3
"""Regenerates the synthetic fixtures in this directory. Deterministic."""

import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent

# Hand parse of the long news sentence used by the compression examples.
NEWS = [
    ("Pakistan", 2, "nsubj"), ("launched", 0, "root"), ("a", 4, "det"),
    ("search", 2, "dobj"), ("for", 8, "case"), ("its", 8, "nmod:poss"),
    ("missing", 8, "amod"), ("ambassador", 4, "nmod"), ("to", 10, "case"),
    ("Afghanistan", 8, "nmod"), ("on", 12, "case"), ("Tuesday", 2, "nmod"),
    (",", 2, "punct"), ("a", 15, "det"), ("day", 2, "nmod:tmod"),
    ("after", 18, "mark"), ("he", 18, "nsubj"), ("disappeared", 15, "acl"),
    ("in", 22, "case"), ("a", 22, "det"), ("Taliban", 22, "compound"),
    ("area", 18, "nmod"), (".", 2, "punct"),
]

# Sentence templates: (form or slot, head, deprel). Slots are filled from
# the word lists below; heads and relations stay fixed.
SLOTS = {
    "NAME": ["Maria", "Ahmed", "Chen", "Olga", "Tom", "Priya", "Kofi", "Lena"],
    "VERB": ["visited", "praised", "criticized", "joined", "left", "watched"],
    "NOUN": ["team", "council", "company", "school", "museum", "band"],
    "ADJ": ["local", "new", "small", "famous", "old", "busy"],
    "PLACE": ["Paris", "Lagos", "Lima", "Oslo", "Delhi", "Quito"],
    "DAY": ["Monday", "Friday", "Sunday", "Tuesday"],
    "ADV": ["quickly", "recently", "quietly", "finally"],
}

TEMPLATES = [
    [("NAME", 2, "nsubj"), ("VERB", 0, "root"), ("the", 5, "det"), ("ADJ", 5, "amod"),
     ("NOUN", 2, "dobj"), ("in", 7, "case"), ("PLACE", 5, "nmod"), ("on", 9, "case"),
     ("DAY", 2, "nmod"), (".", 2, "punct")],
    [("NAME", 3, "nsubj"), ("ADV", 3, "advmod"), ("VERB", 0, "root"), ("the", 5, "det"),
     ("NOUN", 3, "dobj"), ("and", 7, "cc"), ("VERB", 3, "conj"), ("the", 9, "det"),
     ("NOUN", 7, "dobj"), (".", 3, "punct")],
    [("NAME", 6, "nsubj"), (",", 1, "punct"), ("a", 5, "det"), ("ADJ", 5, "amod"),
     ("NOUN", 1, "appos"), ("VERB", 0, "root"), ("PLACE", 6, "dobj"), ("as", 9, "advmod"),
     ("well", 6, "advmod"), (".", 6, "punct")],
    [("the", 2, "det"), ("NOUN", 3, "nsubj"), ("VERB", 0, "root"), ("a", 6, "det"),
     ("home", 6, "compound"), ("run", 3, "dobj"), ("after", 9, "mark"), ("NAME", 9, "nsubj"),
     ("VERB", 3, "advcl"), ("the", 11, "det"), ("NOUN", 9, "dobj"), (".", 3, "punct")],
]

# Latent endorsement propensity by relation, used to draw labels.
PROPENSITY = {
    "det": -1.5, "amod": 0.6, "nmod": 0.3, "advmod": 0.8, "conj": 0.2, "cc": -1.8,
    "dobj": -2.0, "nsubj": -2.5, "appos": 0.9, "advcl": 0.5, "case": -1.7,
    "compound": -0.8, "mark": -1.6, "punct": -0.4, "nmod:tmod": 0.4,
    "nmod:poss": -0.5, "acl": 0.3,
}


def fill(template, rng):
    return [(rng.choice(SLOTS[f]) if f in SLOTS else f, h, d) for f, h, d in template]


def conllu(sent_id, toks):
    lines = [f"# sent_id = {sent_id}"]
    for i, (form, head, rel) in enumerate(toks, 1):
        lines.append(f"{i}\t{form}\t_\t_\t_\t_\t{head}\t{rel}\t_\t_")
    return "\n".join(lines) + "\n\n"


def subtree(toks, v):
    out, stack = set(), [v]
    while stack:
        u = stack.pop()
        out.add(u)
        stack.extend(i for i, (_, h, _) in enumerate(toks, 1) if h == u)
    return out


def detok(forms):
    s = ""
    for f in forms:
        if s and f not in {".", ",", ";", ":", "!", "?", "%", ")", "''"} and not s.endswith(("(", "``")):
            s += " "
        s += f
    return s


def main():
    rng = random.Random(20170801)
    (HERE / "news.conllu").write_text(conllu("news1", NEWS))

    sentences = [(f"s{i:03d}", fill(TEMPLATES[i % len(TEMPLATES)], rng)) for i in range(48)]
    with open(HERE / "treebank.conllu", "w") as f:
        for sid, toks in sentences:
            f.write(conllu(sid, toks))

    # LM corpus: the treebank sentences, the long sentence, and extra template
    # fills so that "as well" and "home run" are frequent fixed-offset pairs.
    lm_lines = [" ".join(t[0] for t in NEWS)]
    for _ in range(6):
        lm_lines.append(" ".join(t[0] for t in NEWS[:12]) + " .")
    for _, toks in sentences:
        lm_lines.append(" ".join(t[0] for t in toks))
    for i in range(220):
        lm_lines.append(" ".join(t[0] for t in fill(TEMPLATES[i % len(TEMPLATES)], rng)))
    (HERE / "lm_corpus.txt").write_text("\n".join(lm_lines) + "\n")

    workers = [f"w{k:02d}" for k in range(12)]
    bias = {w: rng.gauss(0.0, 0.7) for w in workers}
    records = []
    multi = []
    for sid, toks in sentences:
        ref = f"treebank.conllu#{sid}"
        root = next(i for i, t in enumerate(toks, 1) if t[1] == 0)
        for v in range(1, len(toks) + 1):
            if v == root:
                continue
            pair = f"{sid}-p{v}"
            split = "test" if rng.random() < 0.25 else "train"
            raters = rng.sample(workers, 3)
            for w in raters:
                z = PROPENSITY.get(toks[v - 1][2], 0.0) + bias[w] + rng.gauss(0.0, 0.8)
                records.append({"pair_id": pair, "sentence_id": sid, "conllu_ref": ref,
                                "pruned_vertex": v, "worker_id": w, "label": int(z > 0),
                                "split": split})
        # Multi-prune chains over prunable non-root vertices.
        for k in range(4):
            candidates = [v for v in range(1, len(toks) + 1) if v != root]
            rng.shuffle(candidates)
            kept = set(range(1, len(toks) + 1))
            chain = []
            for v in candidates[: rng.randint(1, 4)]:
                if v in kept:
                    kept -= subtree(toks, v)
                    chain.append(v)
            pair = f"{sid}-m{k}"
            z0 = 0.5 - 0.6 * len(chain)
            for w in rng.sample(workers, 3):
                z = z0 + sum(PROPENSITY.get(toks[v - 1][2], 0.0) for v in chain) * 0.5 + rng.gauss(0, 0.8)
                multi.append({"pair_id": pair, "sentence_id": sid, "conllu_ref": ref,
                              "kept": sorted(kept), "chain": chain, "worker_id": w,
                              "label": int(z > 0), "split": "test"})

    # Every test worker must also appear in train.
    with open(HERE / "judgments.jsonl", "w") as f:
        for r in records:
            f.write(json.dumps(r) + "\n")
    with open(HERE / "multi.jsonl", "w") as f:
        for r in multi:
            f.write(json.dumps(r) + "\n")

    gold = []
    for sid, toks in sentences[:20]:
        forms = [t[0] for t in toks]
        root = next(i for i, t in enumerate(toks, 1) if t[1] == 0)
        # Reachable: drop one non-root subtree.
        v = next(i for i in range(len(toks), 0, -1) if i != root and toks[i - 1][2] != "punct")
        keep = sorted(set(range(1, len(toks) + 1)) - subtree(toks, v))
        gold.append({"conllu_ref": f"treebank.conllu#{sid}",
                     "compression_text": detok([forms[i - 1] for i in keep])})
    for sid, toks in sentences[20:25]:
        # Unreachable: keep a dependent while dropping its head.
        forms = [t[0] for t in toks]
        root = next(i for i, t in enumerate(toks, 1) if t[1] == 0)
        keep = [i for i in range(1, len(toks) + 1) if toks[i - 1][1] in (0, root) or i == root]
        dropped_head = next(i for i in keep if i != root and any(t[1] == i for t in toks))
        keep = [i for i in range(1, len(toks) + 1)
                if i != dropped_head]
        gold.append({"conllu_ref": f"treebank.conllu#{sid}",
                     "compression_text": detok([forms[i - 1] for i in keep])})
    gold.append({"conllu_ref": "treebank.conllu#s030", "compression_text": "Entirely unrelated words ."})
    with open(HERE / "gold.jsonl", "w") as f:
        for g in gold:
            f.write(json.dumps(g) + "\n")


if __name__ == "__main__":
    main()
