# %% [markdown]
# # Dense design: multiplier process and reconstruction
#
# With many observations per subject, the signed transport sizes are smoothed
# into a covariance surface whose eigenfunctions describe how subjects'
# transports grow and shrink over time.

# %%
import numpy as np

from otfpca import GridMeasure, center_panel, fit_dense, predict_dense
from otfpca.grid import integrate, unit_grid
from otfpca.simulation import SimConfig, generate_truth

rng = np.random.default_rng(3)
panel, truth = generate_truth(SimConfig(n=80, N=20, m=None), rng)
centred = center_panel(panel, reference=GridMeasure.uniform(101))
model = fit_dense(centred)
print("components kept:", model.J)
print("leading eigenvalues:", np.round(model.eig.values[:4], 6))

# %% [markdown]
# ## Reconstruction error for one subject

# %%
times = unit_grid(11)
true_paths = truth.path(0, times)
for t, row in zip(times, true_paths):
    pred = predict_dense(model, "s0000", t)
    print(f"t={t:.1f}  d_W1(pred, truth) = {integrate(np.abs(pred.tvals - row)):.5f}")
