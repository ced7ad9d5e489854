#!/usr/bin/env python3
"""Writes the 500-record end-to-end fixture under fixtures/e2e.

Every record is built for one pipeline outcome, so the expected ledger,
stage counts and confusion counts follow from construction alone.
Rerunning the script reproduces the committed files byte for byte.
"""

import os
import random

HERE = os.path.join(os.path.dirname(os.path.abspath(__file__)), "e2e")
rng = random.Random(20231016)

NEUTRAL_TOPICS = [
    "soil erosion in river basins", "groundwater nitrate leaching", "wheat yield under drought",
    "coastal sediment transport", "rainfall variability in monsoon regions", "polymer membrane fouling",
    "corrosion of welded steel joints", "alloy fatigue at high temperature", "cohort outcomes after hip surgery",
    "household energy consumption", "urban heat islands", "rural migration and remittances",
    "tourism demand after reform", "catalyst stability in ethanol reforming", "bridge deck cracking",
    "dairy herd fertility", "wetland carbon storage", "pediatric asthma therapy", "municipal waste policy",
    "glacier mass balance",
]
NEUTRAL_OPENERS = ["Effects of", "A field study of", "Long-term trends in", "Assessing", "Drivers of", "Notes on"]
NEUTRAL_KEYWORDS = [
    "hydrology", "agronomy", "climate", "sediment", "membranes", "corrosion", "public health",
    "surgery", "energy policy", "urban planning", "tourism", "catalysis", "fatigue", "wetlands",
]

CORE_TERMS = [
    "deep learning", "machine learning", "random forest", "convolutional networks", "reinforcement learning",
    "neural networks", "computer vision", "sentiment analysis", "support vector machine", "natural language processing",
]
CORE_KEYWORDS = [
    "deep learning", "machine learning", "neural network", "neural networks", "convolutional neural network",
    "reinforcement learning", "computer vision", "transfer learning", "feature extraction", "classification",
]
CANDIDATE_TERMS = [
    "an adaptive algorithm", "kalman filter estimation", "anomaly detection", "a bootstrap procedure",
    "time-series forecasting", "least-squares calibration", "a genetic algorithm", "cluster analysis",
]
CANDIDATE_KEYWORDS = ["optimization", "classification", "scheduling", "estimation", "forecasting", "heuristics"]
CT_TOPICS = ["4.17.128", "4.48.672", "4.17.118", "4.116.862", "4.61.1234", "4.17.953"]
OTHER_TOPICS = ["1.2.33", "5.8.101", "3.14.77"]
CATEGORY_WC = ["Computer Science, Artificial Intelligence", "Computer Science, Artificial Intelligence; Engineering, Electrical & Electronic"]
PLAIN_WC = ["Water Resources", "Agronomy", "Materials Science, Multidisciplinary", "Surgery", "Economics", "Environmental Sciences"]
CS_WC = ["Computer Science, Information Systems", "Engineering, Electrical & Electronic", "Automation & Control Systems"]

INSTITUTIONS = [
    ("Tsinghua Univ", "Beijing", "Peoples R China"), ("Zhejiang Univ", "Hangzhou", "Peoples R China"),
    ("Stanford Univ", "Stanford, CA 94305", "USA"), ("MIT", "Cambridge, MA 02139", "USA"),
    ("Univ Oxford", "Oxford", "England"), ("Tech Univ Munich", "Munich", "Germany"),
    ("Indian Inst Technol", "Delhi", "India"), ("Univ Tokyo", "Tokyo", "Japan"),
    ("Univ Toronto", "Toronto, ON", "Canada"), ("KAIST", "Daejeon", "South Korea"),
]

# (outcome, count): outcome is the ledger stage or "outside" for records no
# preliminary strategy retrieves.
PLAN = [
    ("citation_topic", 70),
    ("core_lexical", 130),
    ("category", 50),
    ("classifier", 60),
    ("rejected", 90),
    ("outside", 100),
]
UNMAPPABLE = 2  # rejected records whose cached reply is not a label


def neutral_title():
    return f"{rng.choice(NEUTRAL_OPENERS)} {rng.choice(NEUTRAL_TOPICS)}"


def addresses():
    out = []
    for inst, city, country in rng.sample(INSTITUTIONS, rng.choice([1, 1, 2, 3])):
        out.append(f"[{rng.choice(['Li, W', 'Smith, J', 'Muller, K', 'Rao, P'])}] {inst}, Dept {rng.choice(['Phys', 'Engn', 'Med', 'Math'])}, {city}, {country}.")
    return out


def citations():
    return int(rng.paretovariate(1.3)) - 1 + (rng.random() < 0.3) * rng.randint(0, 40)


def build(outcome, ut):
    r = {"ut": ut, "topic": None, "wc": rng.choice(PLAIN_WC)}
    if outcome == "citation_topic":
        r["topic"] = rng.choice(CT_TOPICS)
        # Some also carry a core term, so precedence decides their stage.
        if rng.random() < 0.3:
            r["title"] = f"{rng.choice(CORE_TERMS).capitalize()} for {rng.choice(NEUTRAL_TOPICS)}"
            r["kw"] = rng.sample(CORE_KEYWORDS, 2)
        else:
            r["title"] = f"{rng.choice(CANDIDATE_TERMS).capitalize()} for {rng.choice(NEUTRAL_TOPICS)}"
            r["kw"] = rng.sample(CANDIDATE_KEYWORDS, 2)
        r["wc"] = rng.choice(CS_WC + CATEGORY_WC)
    elif outcome == "core_lexical":
        r["title"] = f"{rng.choice(CORE_TERMS).capitalize()} applied to {rng.choice(NEUTRAL_TOPICS)}"
        r["kw"] = rng.sample(CORE_KEYWORDS, rng.randint(2, 4))
        r["wc"] = rng.choice(CS_WC + CATEGORY_WC + PLAIN_WC)
        if rng.random() < 0.2:
            r["topic"] = rng.choice(OTHER_TOPICS)
    elif outcome == "category":
        r["title"] = f"{rng.choice(['Scheduling heuristics for', 'Ontology design for', 'Planning under uncertainty for'])} {rng.choice(NEUTRAL_TOPICS)}"
        r["kw"] = rng.sample(CANDIDATE_KEYWORDS, 2)
        r["wc"] = rng.choice(CATEGORY_WC)
    elif outcome in ("classifier", "rejected"):
        r["title"] = f"{rng.choice(CANDIDATE_TERMS).capitalize()} for {rng.choice(NEUTRAL_TOPICS)}"
        r["kw"] = rng.sample(CANDIDATE_KEYWORDS + NEUTRAL_KEYWORDS, 2)
        r["wc"] = rng.choice(CS_WC + PLAIN_WC)
        if rng.random() < 0.2:
            r["topic"] = rng.choice(OTHER_TOPICS)
    else:
        r["title"] = neutral_title()
        r["kw"] = rng.sample(NEUTRAL_KEYWORDS, 2)
    r["abstract"] = f"We study {rng.choice(NEUTRAL_TOPICS)} using data from {rng.randint(3, 90)} sites."
    r["kwp"] = rng.sample(NEUTRAL_KEYWORDS, 1)
    r["year"] = rng.randint(2013, 2022)
    r["tc"] = citations()
    r["c1"] = addresses()
    r["outcome"] = outcome
    return r


def tagged(records):
    lines = ["FN Clarivate Analytics Web of Science", "VR 1.0"]
    for r in records:
        lines.append("PT J")
        lines.append(f"TI {r['title']}")
        lines.append(f"AB {r['abstract']}")
        lines.append("DE " + "; ".join(r["kw"]))
        lines.append("ID " + "; ".join(k.upper() for k in r["kwp"]))
        lines.append(f"WC {r['wc']}")
        for i, a in enumerate(r["c1"]):
            lines.append(("C1 " if i == 0 else "   ") + a)
        lines.append(f"PY {r['year']}")
        lines.append(f"TC {r['tc']}")
        lines.append(f"UT {r['ut']}")
        lines.append("ER")
        lines.append("")
    lines.append("EF")
    return "\n".join(lines) + "\n"


def main():
    outcomes = [o for o, n in PLAN for _ in range(n)]
    rng.shuffle(outcomes)
    records = [build(o, f"WOS:{100000000 + 7919 * i:015d}") for i, o in enumerate(outcomes)]
    os.makedirs(os.path.join(HERE, "expected"), exist_ok=True)

    def write(name, text):
        with open(os.path.join(HERE, name), "w", newline="\n") as f:
            f.write(text)

    write("export_a.txt", tagged(records[:250]))
    write("export_b.txt", tagged(records[250:]))
    write("topics.csv", "ut,topic\n" + "".join(f"{r['ut']},{r['topic']}\n" for r in records if r["topic"]))

    # Classifier replies for every candidate the first three stages leave.
    replay = ["ut,label"]
    rejected = [r for r in records if r["outcome"] == "rejected"]
    odd = {r["ut"] for r in rejected[:UNMAPPABLE]}
    for r in records:
        if r["outcome"] == "classifier":
            replay.append(f"{r['ut']},ai")
        elif r["outcome"] == "rejected":
            replay.append(f"{r['ut']},{'not sure' if r['ut'] in odd else 'other'}")
    write("replay.csv", "\n".join(replay) + "\n")

    # Subfield replies for every record, so any sample can be labeled.
    sub = ["ut,response"]
    pool = ["Machine Learning", "Computer Vision", "NLP", "Robotics", "Optimization", "Knowledge Representation", "Deep Learning"]
    for r in records:
        sub.append(f"{r['ut']},\"{', '.join(rng.sample(pool, rng.randint(1, 3)))}\"")
    write("subfield_responses.csv", "\n".join(sub) + "\n")

    # Ground truth: admitted records are mostly AI, rejected and outside
    # records mostly not.
    truth = {}
    for r in records:
        p = {"citation_topic": 0.95, "core_lexical": 0.92, "category": 0.8, "classifier": 0.85,
             "rejected": 0.1, "outside": 0.04}[r["outcome"]]
        truth[r["ut"]] = "ai" if rng.random() < p else "other"

    gold_uts = sorted(rng.sample([r["ut"] for r in records], 200))
    gold = ["ut,expert_id,label"]
    ties = set(gold_uts[:3])
    for ut in gold_uts:
        t = truth[ut]
        flip = "other" if t == "ai" else "ai"
        if ut in ties:
            votes = [("e1", t), ("e2", flip)]
        else:
            votes = [("e1", t), ("e2", t), ("e3", t)]
            if rng.random() < 0.15:
                i = rng.randrange(3)
                votes[i] = (votes[i][0], flip)
        gold += [f"{ut},{e},{l}" for e, l in votes]
    write("gold.csv", "\n".join(gold) + "\n")
    tie_list = sorted(ties)
    write("resolutions.csv", "ut,label\n" + "".join(f"{ut},{truth[ut]}\n" for ut in tie_list[:2]))

    stage_of = {r["ut"]: r["outcome"] for r in records if r["outcome"] != "outside"}
    write("expected/ledger_body.csv", "ut,stage\n" + "".join(f"{u},{s}\n" for u, s in sorted(stage_of.items())))
    counts = {o: n for o, n in PLAN}
    final = sum(counts[s] for s in ("citation_topic", "core_lexical", "category", "classifier"))
    summary = [f"initial_size={len(stage_of)}"]
    summary += [f"{s}={counts[s]}" for s in ("citation_topic", "core_lexical", "category", "classifier", "rejected")]
    summary.append(f"final_size={final}")
    write("expected/stage_counts.txt", "\n".join(summary) + "\n")

    admitted = {u for u, s in stage_of.items() if s != "rejected"}
    scored = [u for u in gold_uts if u not in ties or u in tie_list[:2]]
    tp = sum(1 for u in scored if u in admitted and truth[u] == "ai")
    fp = sum(1 for u in scored if u in admitted and truth[u] == "other")
    fn = sum(1 for u in scored if u not in admitted and truth[u] == "ai")
    tn = sum(1 for u in scored if u not in admitted and truth[u] == "other")
    p = tp / (tp + fp)
    rc = tp / (tp + fn)
    f1 = 2 * p * rc / (p + rc)
    write("expected/eval.txt", f"tp={tp}\nfp={fp}\nfn={fn}\ntn={tn}\nprecision={p:.6f}\nrecall={rc:.6f}\nf1={f1:.6f}\npending={len(ties) - 2}\n")


if __name__ == "__main__":
    main()
