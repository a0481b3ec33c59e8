# %% [markdown]
# Cancelling opposite charges inside a ball
#
# monopole(k) ⊕ monopole(−k) has total gerbe charge 0, but its lower and
# upper band pairs still touch at the marked point.  Inside a ball B around
# that point we pin all four bands to 0 (flatten), rebuild a frame for the
# upper pair that continues its outside eigenbundle (possible because the
# pair has Chern number 0 on ∂B), then lift the upper pair (scale).  The
# invariants are recomputed after every move.

# %%
import numpy as np

from specflow.cover import build_cover, star_cover_sets
from specflow.deformation import (crossing_locus, flatten, is_separated, scale,
                                  sep1_pipeline)
from specflow.errors import ChernObstructionError
from specflow.family import direct_sum, monopole_center, monopole_family
from specflow.mesh import BallRegion, s3_mesh

mesh = s3_mesh()
ball = BallRegion.geodesic(mesh, mesh.positions[monopole_center(mesh)], 1.2, 0.8)
sets = star_cover_sets(mesh)

# %%
k = 1
fam = direct_sum(monopole_family(mesh, k), monopole_family(mesh, -k))
cover = build_cover(fam, sets=sets)
out, steps = sep1_pipeline(fam, ball, cover=cover)
for s in steps:
    print(s)

# %%
before = crossing_locus(fam, (0, 1), (2, 3))
after = crossing_locus(out, (0, 1), (2, 3))
print("locus before", before.vertices.tolist(), "after", after.vertices.tolist())
print("separated:", is_separated(out, (0, 1), (2, 3)))
lower = np.maximum(out.band(0), out.band(1))
upper = np.minimum(out.band(2), out.band(3))
print("smallest gap on B:", np.min(upper[ball.vertices] - lower[ball.vertices]))

# %% [markdown]
# A single monopole cannot be treated this way: its upper line carries
# Chern number −k on ∂B, so no frame of it extends over the ball.

# %%
single = monopole_family(mesh, 2)
flat = flatten(flatten(single, 0, ball, 0.0), 1, ball, 0.0)
try:
    scale(flat, 1, None, ball)
except ChernObstructionError as err:
    print(err, err.details)
