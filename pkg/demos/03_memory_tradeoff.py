"""Memory used by each learner as the stream grows.

Memory is counted in stored values: buffered instance values for Naive and
MAP plus the prior network's parameters for MAP, and statistics cells for
Incremental. Each column is the peak reached up to that point.

Run: python demos/03_memory_tradeoff.py
"""
from seqbn import networks
from seqbn.evaluation import prequential_run
from seqbn.harness import build_learner, sample_dataset

net = networks.load("sparse8")
complete, _ = sample_dataset(net, 6000, seed=2)
checkpoints = [500, 1000, 2000, 4000, 6000]

print(f"{'n':>12}", *(f"{c:>8}" for c in checkpoints))
for strategy in ("naive", "map", "incremental"):
    trace = prequential_run(build_learner(strategy, net.variables, k=100), complete, net)
    print(f"{strategy:>12}", *(f"{max(trace.memory[:c]):>8}" for c in checkpoints))
