"""Learning from a stream with values missing completely at random.

The EM learner is run on the masked stream and on the complete stream;
the loss is always taken on the complete instances.

Run: python demos/04_missing_data_em.py
"""
import numpy as np

from seqbn import networks
from seqbn.em import EmConfig, EmLearner
from seqbn.evaluation import kl_divergence, prequential_run, windowed_average
from seqbn.harness import sample_dataset

net = networks.load("diamond4")
complete, masked = sample_dataset(net, 4000, seed=3, missing=0.2)
print(f"fraction missing: {np.mean(masked < 0):.3f}")

for label, stream in (("complete", complete), ("20% missing", masked)):
    learner = EmLearner(net.variables, EmConfig(alpha=1.0, k=100))
    trace = prequential_run(learner, stream, net, complete=complete)
    means = windowed_average(trace.normloss, 1000).means
    print(f"{label:>12}: block losses", " ".join(f"{m:.4f}" for m in means),
          f"| final KL {kl_divergence(net, learner.network):.4f} | structure {learner.structure}")
