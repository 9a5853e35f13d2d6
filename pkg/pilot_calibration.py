"""Calibration pilots for acceptance-test constants (not part of the package)."""
import json
import time

import numpy as np

import seqfisher as sf
from seqfisher import diagnostics, fisher

results = {}

def log(name, **kw):
    results[name] = kw
    print(name, json.dumps(kw, default=str), flush=True)

t0 = time.time()

# --- memory loss, three Fig-1-style cases, quarter scale ---
cases = {
    "heisenberg": sf.ModelSpec(family="heisenberg", N=6, J=1.0, B=0.0, tau=6.0),
    "ising": sf.ModelSpec(family="ising", N=6, J=1.0, B=1.0, tau=6.0),
    "random": sf.ModelSpec(family="random_unitary", N=6, unitary_seed=7),
}
for name, m in cases.items():
    c = diagnostics.memory_loss_curve(m, n_seq=560, n_traj=2500, seed=2, threads=2)
    y = c.y
    crossing = int(np.argmax(y > 0.99)) + 1 if np.any(y > 0.99) else -1
    log(f"memory_{name}", fid_at=[float(y[i]) for i in (99, 199, 299, 399, 499, 559)],
        first_above_099=crossing, t=round(time.time() - t0, 1))

# --- rank collapse ---
for name, m in cases.items():
    r = diagnostics.rank_collapse_curve(m, n_seq=400, n_traj=300, seed=3, threads=2)
    y = r.y
    crossing = int(np.argmax(y < 0.05)) + 1 if np.any(y < 0.05) else -1
    log(f"rank_{name}", ratio_at=[float(y[i]) for i in (99, 199, 299, 399)],
        first_below_005=crossing, t=round(time.time() - t0, 1))

# --- Heisenberg N=4 information series (criterion-5 shape, pilot scale) ---
m4 = sf.ModelSpec(family="heisenberg", N=4, J=1.0, tau=4.0, lambda_name="B")
s = fisher.mc_fisher(m4, lam=0.05, n_seq=600, mu_max=10000, base_seed=11, threads=2)
d = s.delta
def slope(lo, hi):
    n = np.arange(lo, hi + 1)
    return float(np.polyfit(n, s.cum[lo - 1:hi], 1)[0])
log("heis_fisher_B005",
    early=float(d[:10].mean()), tail=float(d[399:].mean()),
    slope_400_600=slope(400, 600), slope_500_600=slope(500, 600),
    delta_at=[float(d[i]) for i in (0, 9, 49, 99, 199, 399, 599)],
    t=round(time.time() - t0, 1))

for b in (0.1, 0.2):
    s_b = fisher.mc_fisher(m4, lam=b, n_seq=600, mu_max=10000, base_seed=11, threads=2)
    g = fisher.gain_analysis(s_b)
    log(f"heis_gain_B{b}", n_star=g.n_star, t=round(time.time() - t0, 1))
g005 = fisher.gain_analysis(s)
log("heis_gain_B0.05", n_star=g005.n_star, t=round(time.time() - t0, 1))

# --- JC coherent plateau ---
for om in (0.08, 0.15):
    jc = sf.ModelSpec(family="jaynes_cummings", omega=1.0, alpha=2.0, n_max=26,
                      lambda_name="Omega")
    sj = fisher.mc_fisher(jc, lam=om, n_seq=140, mu_max=2000, base_seed=13, threads=2)
    d = sj.delta
    win = d[59:120]
    log(f"jc_coherent_Om{om}",
        delta_at=[float(d[i]) for i in (0, 9, 29, 59, 99, 139)],
        win_mean=float(win.mean()), win_rel_spread=float((win.max() - win.min()) / win.mean()),
        aborted=sj.aborted, t=round(time.time() - t0, 1))

# --- Lindblad tail ---
ml = sf.ModelSpec(family="lindblad_chain", N=4, J=1.0, n_th=0.2, tau=1.0,
                  lambda_name="kappa")
sl = fisher.mc_fisher(ml, lam=0.1, n_seq=300, mu_max=1000, base_seed=17, threads=2)
d = sl.delta
def slope_l(lo, hi):
    n = np.arange(lo, hi + 1)
    return float(np.polyfit(n, sl.cum[lo - 1:hi], 1)[0])
log("lindblad_k01", early=float(d[:10].mean()), tail=float(d[199:].mean()),
    slope_200_300=slope_l(200, 300), slope_250_300=slope_l(250, 300),
    delta_at=[float(d[i]) for i in (0, 9, 49, 99, 199, 299)],
    aborted=sl.aborted, t=round(time.time() - t0, 1))

with open("/root/pilot_results.json", "w") as fh:
    json.dump(results, fh, indent=1, default=str)
print("TOTAL", time.time() - t0, flush=True)
