import numpy as np

from dblsh import Dataset, generate_synthetic


def make_world(n_data: int, n_queries: int, seed: int = 601):
    """Clustered synthetic world rescaled so the mean NN distance is about 1.

    Clusters hold ~50 points each so the k=50 neighborhood of a query is a
    tight, well-separated set, the distance profile real ANN workloads have.
    """
    total = n_data + n_queries
    n_clusters = max(1, n_data // 50)
    raw = generate_synthetic(
        total, 32, "gaussian-clusters", seed=seed, n_clusters=n_clusters, spread=0.03
    )
    rng = np.random.default_rng(0)
    picks = rng.choice(total, 100, replace=False)
    nn = []
    for p in picks:
        d = np.linalg.norm(raw.coords - raw.coords[p], axis=1)
        d[p] = np.inf
        nn.append(d.min())
    coords = raw.coords / float(np.mean(nn))
    return Dataset(32, coords[:n_data], "acceptance"), coords[n_data:]
