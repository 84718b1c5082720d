# %% [markdown]
# # Transport geometry on a quantile grid
#
# Measures on [0, 1] are stored as quantile functions on `j / (M - 1)`.
# Optimal transport maps between them are monotone maps of the unit interval,
# and the scalar multiplication `alpha (.) T` moves a map along its geodesic
# through the identity.

# %%
import numpy as np

from otfpca import GridMeasure, TransportMap, optimal_transport, wasserstein_distance
from otfpca import equiv_class_distance, geodesic, invert, norm1, scalar_mult, sign
from otfpca.grid import unit_grid

M = 1001
u = unit_grid(M)

# %% [markdown]
# ## Distances between a uniform and a skewed measure

# %%
uniform = GridMeasure(u)
skewed = GridMeasure(u**2)
print("d_W1 =", wasserstein_distance(uniform, skewed, p=1), "(1/6 =", 1 / 6, ")")
print("d_W2 =", wasserstein_distance(uniform, skewed, p=2), "(sqrt(1/30) =", np.sqrt(1 / 30), ")")

# %% [markdown]
# ## The transport map and its sign
#
# Mass moves left when going from the uniform measure to the one with
# quantile function `u^2`, so the map has negative sign.

# %%
T = optimal_transport(uniform, skewed)
print("sign(T) =", sign(T), " ||T||_1 =", norm1(T), " ||T^-1||_1 =", norm1(invert(T)))

# %% [markdown]
# ## Scalar multiples and the geodesic

# %%
for alpha in (-1.0, -0.5, 0.0, 0.5, 1.0):
    A = scalar_mult(alpha, T)
    print(f"alpha={alpha:+.1f}  sign={sign(A):+d}  norm={norm1(A):.5f}")

for s in (0.0, 0.25, 0.5, 0.75, 1.0):
    print(f"s={s:.2f}  distance to identity {norm1(geodesic(T, s)):.5f}")

# %% [markdown]
# Maps that differ only by a positive multiple are equivalent; the class
# distance of `0.3 (.) T` to `T` vanishes up to the line-search tolerance.

# %%
print(equiv_class_distance(scalar_mult(0.3, T), T))
print(equiv_class_distance(TransportMap(np.sqrt(u)), T))
