# %% [markdown]
# # Centring a panel of distributions
#
# A panel holds, for each subject, a few observation times and a sample (or
# quantile function) at each time. Centring replaces every observation by the
# optimal transport from the cross-sectional barycenter at that time.

# %%
import numpy as np

from otfpca import center_panel, norm1, sign
from otfpca.frechet import default_bandwidth
from otfpca.simulation import SimConfig, generate_truth

rng = np.random.default_rng(1)
panel, truth = generate_truth(SimConfig(n=60, N=5, m=100), rng)
print(len(panel), "subjects, counts", set(panel.counts.tolist()))

# %% [markdown]
# ## Barycenter path by local Fréchet regression
#
# Random designs need a bandwidth; the default shrinks like `(n N^2)^(-1/6)`.

# %%
h = default_bandwidth(panel.counts)
centred = center_panel(panel, h=h, G=21)
path = centred.barycenter
print("bandwidth", round(h, 4))
for t in (0.0, 0.5, 1.0):
    q = path(t).qvals
    print(f"t={t:.1f}  barycenter median {q[q.size // 2]:.4f}")

# %% [markdown]
# ## Signs and transported mass

# %%
s = centred.subjects[0]
for t, T in zip(s.times, s.payloads):
    print(f"t={t:.3f}  sign={sign(T):+d}  mass={norm1(T):.4f}")
