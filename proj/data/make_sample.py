"""Regenerates sample_panel.csv and sample_trade.csv (fixed seed)."""
import numpy as np

rng = np.random.default_rng(20110709)
units = ["Sudan", "Chad", "Egypt", "Ethiopia", "Eritrea", "Kenya", "Uganda",
         "CentralAfricanRep", "Libya", "DRCongo", "Niger"]
years = list(range(2000, 2016))
t0 = 11
n = len(units) - 1

flows = rng.gamma(1.5, 2.0, size=(n + 1, n + 1))
flows = (flows + flows.T) / 2
np.fill_diagonal(flows, 0.0)
flows[0, 1:4] *= 4.0
flows[1:4, 0] *= 4.0

block = flows[1:, :] / flows[1:, :].sum(axis=1, keepdims=True)
w, W = block[:, 0], block[:, 1:]
alpha = np.zeros(n)
alpha[[0, 1, 2, 4]] = [0.35, 0.25, 0.3, 0.2]
rho = 0.3
beta = np.array([0.05, -0.03])
base = rng.uniform(-0.4, 0.4, size=n)

full = np.eye(n) - rho * np.outer(w, alpha) - rho * W
spatial = np.eye(n) - rho * W
rows = []
for t, year in enumerate(years):
    x = np.column_stack([rng.normal(5, 2, n), rng.normal(20, 4, n)])
    shock = base + 0.02 * t + x @ beta + rng.normal(0, 0.05, n)
    yc0 = np.linalg.solve(full, shock)
    y00 = alpha @ yc0
    if t < t0:
        y0, yc = y00, yc0
    else:
        y0 = y00 - 0.25 - 0.02 * (t - t0)
        yc = np.linalg.solve(spatial, rho * w * y0 + shock)
    rows.append((units[0], year, 1, None if year == 2011 else y0, None, None))
    for i in range(n):
        rows.append((units[i + 1], year, 0, yc[i], x[i, 0], x[i, 1]))

def fmt(v):
    return "NA" if v is None else f"{v:.6f}"

with open("sample_panel.csv", "w") as f:
    f.write("unit,time,treated,outcome,inflation,investment\n")
    for u, y, tr, out, a, b in rows:
        f.write(f"{u},{y},{tr},{fmt(out)},{fmt(a)},{fmt(b)}\n")

with open("sample_trade.csv", "w") as f:
    f.write("unit," + ",".join(units) + "\n")
    for i, u in enumerate(units):
        f.write(u + "," + ",".join(f"{v:.4f}" for v in flows[i]) + "\n")
