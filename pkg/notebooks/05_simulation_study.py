# %% [markdown]
# # A small Monte Carlo study
#
# Each replication draws a panel, fits the dense model and scores the
# reconstruction by the time-integrated `d_W1` error. Replications use
# independent PCG64 streams spawned from one master seed.

# %%
from otfpca.simulation import SimConfig, run_study, sweep

base = SimConfig(n=50, m=50, reps=5, seed=11)
for cfg in sweep(base, N=[3, 10]):
    res = run_study(cfg)
    print(f"N={cfg.N:>2}  IMSE {res.mean:.4f} ({res.sd:.4f})  failures {res.failures}  {res.wall_time:.1f} s")

# %% [markdown]
# The same study runs from the command line:
#
# ```
# otfpca simulate --config study.toml --out results/
# ```
