# %% [markdown]
# # Sparse design: conditional expectation scores
#
# With only a few observations per subject, scores of the latent Gaussian
# process are predicted from its covariance at the observed times.

# %%
import numpy as np

from otfpca import AnalyticBasis, GridMeasure, center_panel, fit_sparse, pace_scores
from otfpca.sparse import predict_sparse
from otfpca.simulation import SimConfig, generate_truth

basis = AnalyticBasis([1.0, 0.25], [np.ones_like, lambda t: np.sqrt(2) * np.cos(2 * np.pi * t)])
t_obs = np.array([0.1, 0.6])
z_obs = np.array([0.8, -0.4])
chi = pace_scores(t_obs, z_obs, basis.values, basis, basis.covariance)
print("scores", chi)
print("reconstruction at the observed times", basis.reconstruct(chi, t_obs))

# %% [markdown]
# ## Fitting a sparse panel

# %%
rng = np.random.default_rng(4)
panel, truth = generate_truth(SimConfig(n=200, N=3, m=None), rng)
centred = center_panel(panel, reference=GridMeasure.uniform(101))
model = fit_sparse(centred, norm_T0=truth.norm)
print("J =", model.J, " leading eigenvalues", np.round(model.eig.values[:3], 4))
pred = predict_sparse(model, "s0000", 0.5)
print("predicted transport at t=0.5, first values:", np.round(pred.tvals[:5], 4))
