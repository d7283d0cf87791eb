"""Stream one dataset through the Naive, MAP and Incremental learners.

Prints the mean normalized loss (nats per instance) over blocks of 1000
instances, plus the final structures.

Run: python demos/02_three_learners.py
"""
import numpy as np

from seqbn import networks
from seqbn.evaluation import prequential_run, windowed_average
from seqbn.harness import build_learner, sample_dataset

net = networks.load("mix5")
complete, _ = sample_dataset(net, 5000, seed=1)

rows = {}
for strategy in ("naive", "map", "incremental"):
    learner = build_learner(strategy, net.variables, k=100)
    trace = prequential_run(learner, complete, net)
    rows[strategy] = windowed_average(trace.normloss, 1000).means
    print(f"{strategy:>12} final structure: {learner.structure}")

print("\nblock starting at", *(f"{n:>8}" for n in range(1, 5001, 1000)))
for strategy, means in rows.items():
    print(f"{strategy:>17}", *(f"{m:8.4f}" for m in means))
print("\ntruth:", net.structure)
