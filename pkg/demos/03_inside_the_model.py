"""Look inside one synthesis: neighbourhoods, learned weights, confidences.

Run:  python demos/03_inside_the_model.py [checkpoint]

Without a checkpoint the model is freshly initialised, which is enough to
see the structure: every target pixel gathers a short run of source-row
pixels whose length grows with the angular distance, the weights over that
run sum to one, and the two per-source estimates are blended with
confidences that also sum to one.  The refinement stage starts as an exact
identity.  The script ends with the finite-difference gradient table.
"""
import sys

import numpy as np

from dynlf import ModelParams, SparseInput, WarpConfig, gen_scene, reconstruct
from dynlf.gradcheck import format_table, run_all
from dynlf.interp import prepare_sources, synthesize_region
from dynlf.warp import neighborhood

params = (ModelParams.load(sys.argv[1]) if len(sys.argv) > 1
          else ModelParams(warp=WarpConfig(d_max=3.0)))
warp = params.warp
scene = gen_scene(seed=3, U=5, H=48, W=48, d_max=warp.d_max, n_layers=2)
inputs = SparseInput.from_lightfield(scene.lightfield, (0, 4))

y, x = 20, 24
for t in (1, 2, 3):
    for s in (0, 4):
        nb = neighborhood(x, y, s, t, warp, 48)
        print(f"target {t} from source {s}: K = {nb.K:2d}  columns {nb.coords.tolist()}")

ctx = prepare_sources(inputs, params, params.arch)[0]
img, logits, weights = synthesize_region(ctx, 1, (y, y + 1, x, x + 1), params, params.arch,
                                         warp.d_max)
w = weights.data[0]
print(f"\nweights for pixel ({y}, {x}) of view 1 from view 0: {np.round(w, 3).tolist()}")
print(f"sum {w.sum():.15f}; true disparity there {scene.gt_disparity[1, y, x]:+.2f}")

res = reconstruct(inputs, [2], params, warp=warp)[2]
conf = np.stack([c.data for c in res.confidences])
print(f"\nconfidence sums over the view: min {conf.sum(0).min():.15f} "
      f"max {conf.sum(0).max():.15f}")
print(f"refinement changed {np.count_nonzero(res.final.data != res.blended.data)} values")

print("\nfinite-difference gradient checks (about half a minute):")
print(format_table(run_all()))
