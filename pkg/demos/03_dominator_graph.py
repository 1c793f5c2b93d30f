"""The dominator graph on toy 2-D data, and its two structural properties.

A point is a self-dominator when it beats every other point on its own
query: <x,x> > <x,y> for all y. The dominator graph links every node to
its best inner-product candidate plus all self-dominators it scans, which
makes the graph strongly connected and keeps edges beyond the first
pointing only at self-dominators.
"""

import numpy as np

import magsearch as ms
from magsearch.construction import build_exact_ndg, count_strong_components

# the classic 3-point picture: a and b dominate, c is inside a's cell
toy = ms.Dataset.from_array([[2.0, 0.0], [0.0, 2.0], [0.9, 0.9]])
print("self-dominators of {a=(2,0), b=(0,2), c=(0.9,0.9)}:",
      ms.self_dominator_set(toy), "(c is dominated: <c,a>=1.8 > <c,c>=1.62)")

ndg = build_exact_ndg(toy)
print("edges:", {i: row.tolist() for i, row in enumerate(ndg.ip)})
print("strongly connected:", count_strong_components(ndg.ip, toy.n) == 1)

# the same properties on random data
rng = np.random.default_rng(4)
data = ms.Dataset(rng.standard_normal((300, 6)).astype(np.float32))
census = set(ms.self_dominator_set(data).tolist())
ndg = build_exact_ndg(data)
print(f"\nrandom n=300 d=6: {len(census)} self-dominators "
      f"({len(census) / 3:.0f}% of points)")
print("strongly connected:", count_strong_components(ndg.ip, data.n) == 1)

base = data.data.astype(np.float64)
ids = np.arange(data.n)
bad = 0
for i in range(data.n):
    ips = base @ base[i]
    others = ids[ids != i]
    order = others[np.lexsort((others, -ips[others]))]
    accepted = ms.ndg_select(i, order, data, None)
    bad += sum(1 for j in accepted[1:] if int(j) not in census)
print("accepted-beyond-first outside the census:", bad)

# Euclidean pruning, for contrast: keep a candidate only when it is closer
# to the node than to everything already kept
node = 0
diff = base - base[node]
d2 = np.einsum("ij,ij->i", diff, diff)
others = ids[ids != node]
order = others[np.lexsort((others, d2[others]))]
kept = ms.mrng_prune(node, order, d2[order], data, 8)
print(f"\nnode 0 keeps {len(kept)} of {len(order)} Euclidean candidates:",
      kept.tolist())
