"""Sample from a shipped network and compare structures by score.

Run: python demos/01_sample_and_score.py
"""
import numpy as np

from seqbn import networks
from seqbn.network import NetworkStructure
from seqbn.scoring import DataSource, ScoreConfig, total_score
from seqbn.search import equivalent, hill_climb

net = networks.load("diamond4")
print("generating network:", net.structure)
data = net.sample(np.random.default_rng(0), 2000)
src = DataSource(data, net.cards)

candidates = {
    "truth": net.structure,
    "empty": NetworkStructure.empty(net.n),
    "missing B->D": NetworkStructure(((), (0,), (0,), (2,))),
}
for label, g in candidates.items():
    scores = {k: total_score(g, src, ScoreConfig(k)) for k in ("mdl", "bde")}
    print(f"{label:>14}: MDL {scores['mdl']:10.1f} bits   BDe {scores['bde']:10.1f} nats")

found = hill_climb(NetworkStructure.empty(net.n), src, ScoreConfig("bde"))
print("hill climbing from the empty graph:", found)
print("same equivalence class as the truth:", equivalent(found, net.structure))
