"""Builds cells_2023q2.csv: a 2023Q2 cell set whose city-pair contact
counts reproduce table1_ek_2023q2.csv exactly.

Carrier subsets are packed greedily (largest residual pair first, grown into
a clique of carriers with positive residual contact), then each carrier's
remaining network is filled with city pairs it serves alone.
"""
import csv
import itertools
import random

rows = list(csv.reader(open("table1_ek_2023q2.csv")))
carriers = rows[0][1:]
n = len(carriers)
ek = [[int(v) for v in r[1:]] for r in rows[1:]]
need = [row[:] for row in ek]
left = [ek[i][i] for i in range(n)]
for i in range(n):
    need[i][i] = 0

groups = []
while True:
    best = None
    for i, j in itertools.combinations(range(n), 2):
        if need[i][j] > 0 and (best is None or need[i][j] > need[best[0]][best[1]]):
            best = (i, j)
    if best is None:
        break
    clique = list(best)
    cand = [k for k in range(n) if k not in clique]
    while True:
        ok = [k for k in cand if all(need[k][m] > 0 for m in clique)]
        if not ok:
            break
        k = max(ok, key=lambda k: min(need[k][m] for m in clique))
        clique.append(k)
        cand.remove(k)
    mult = min(need[a][b] for a, b in itertools.combinations(clique, 2))
    mult = min(mult, min(left[a] for a in clique))
    assert mult > 0
    for a, b in itertools.combinations(clique, 2):
        need[a][b] -= mult
        need[b][a] -= mult
    for a in clique:
        left[a] -= mult
    groups.extend([tuple(clique)] * mult)
for i in range(n):
    groups.extend([(i,)] * left[i])

rng = random.Random(20230402)
letters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
airports = sorted({"".join(rng.choice(letters) for _ in range(3)) for _ in range(400)})[:180]
pairs = [(o, d) for o in airports for d in airports if o != d]
rng.shuffle(pairs)
assert len(pairs) >= len(groups)

out = []
for (origin, dest), group in zip(pairs, groups):
    for ci in group:
        u = rng.random()
        markets = [True] if u < 0.3 else [False] if u < 0.8 else [True, False]
        for nonstop in markets:
            pax = 30 + int(rng.expovariate(1 / 150))
            fare = round(rng.uniform(80, 600), 2)
            out.append((2023, 2, origin, dest, int(nonstop), carriers[ci], fare, pax))
out.sort(key=lambda r: (r[2], r[3], r[4], r[5]))
with open("cells_2023q2.csv", "w") as f:
    f.write("year,quarter,origin,dest,nonstop,carrier,mean_fare,passengers\n")
    for r in out:
        f.write(",".join(map(str, r)) + "\n")
