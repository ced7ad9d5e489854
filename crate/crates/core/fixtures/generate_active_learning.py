#!/usr/bin/env python3
"""Writes the active-learning fixture under fixtures/active_learning.

pool.csv holds synthetic titles with their true label (`ut,title,label`);
seed.jsonl is the hand-labeled starting set in prompt/completion form.
Titles mix class-specific and shared vocabulary so a title-only model
keeps making mistakes for many review rounds.
"""

import json
import os
import random

HERE = os.path.join(os.path.dirname(os.path.abspath(__file__)), "active_learning")
rng = random.Random(1014)

POOL_SIZE = 6000
AI_FRACTION = 0.29

AI_METHODS = [
    "deep learning", "neural network", "transformer", "reinforcement learning", "graph neural network",
    "convolutional network", "language model", "attention mechanism", "knowledge graph embedding",
    "federated learning", "generative model", "object detector", "speech recognizer", "autoencoder",
]
OTHER_METHODS = [
    "finite element", "field survey", "randomized trial", "life cycle assessment", "spectroscopy",
    "panel regression", "case study", "laboratory experiment", "numerical simulation", "questionnaire",
    "isotope analysis", "cost benefit analysis", "historical analysis", "mass balance",
]
SHARED = [
    "model", "prediction", "optimization", "analysis", "framework", "approach", "estimation", "data",
    "system", "network", "detection", "classification", "control", "monitoring", "forecasting",
]
DOMAINS = [
    "crop yield", "traffic flow", "power grids", "breast cancer", "river discharge", "student performance",
    "stock returns", "air quality", "wind turbines", "protein folding", "urban mobility", "retail demand",
    "seismic hazard", "hospital readmission", "coral reefs", "supply chains", "battery ageing", "wildfire risk",
    "drug discovery", "smart buildings",
]
LINKS = ["for", "of", "in", "applied to", "based on"]


def title(label):
    # A fraction of titles use the other class's method words, which is
    # where the model keeps disagreeing with the reviewer.
    own, other = (AI_METHODS, OTHER_METHODS) if label == "ai" else (OTHER_METHODS, AI_METHODS)
    method = rng.choice(other if rng.random() < 0.12 else own)
    words = [rng.choice(SHARED)] if rng.random() < 0.7 else []
    parts = [method.capitalize()] + words + [rng.choice(LINKS), rng.choice(DOMAINS)]
    if rng.random() < 0.5:
        parts += ["using", rng.choice(SHARED), "data"]
    return " ".join(parts)


def main():
    os.makedirs(HERE, exist_ok=True)
    rows = ["ut,title,label"]
    seen = set()
    i = 0
    while len(rows) <= POOL_SIZE:
        label = "ai" if rng.random() < AI_FRACTION else "other"
        t = title(label)
        if t in seen:
            continue
        seen.add(t)
        rows.append(f"AL{i:05d},{t},{label}")
        i += 1
    with open(os.path.join(HERE, "pool.csv"), "w", newline="\n") as f:
        f.write("\n".join(rows) + "\n")

    seed = []
    for label in ["ai"] * 10 + ["other"] * 10:
        t = title(label)
        seed.append(json.dumps({"prompt": t + "\n\n###\n\n", "completion": " " + label}))
    with open(os.path.join(HERE, "seed.jsonl"), "w", newline="\n") as f:
        f.write("\n".join(seed) + "\n")


if __name__ == "__main__":
    main()
