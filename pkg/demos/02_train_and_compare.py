"""Train the learned-interpolation model and the warping baseline, then compare.

Run:  python demos/02_train_and_compare.py [steps] [output_dir]

This is the same experiment the acceptance suite runs, driven through the
``dynlf`` command line: eight training scenes, two held-out scenes, views
0 and 4 as sources and 1-3 as targets, noisy disparity.  With the default
1000 steps per model it takes roughly a quarter of an hour on one core;
try 200 steps for a quick look.
"""
import sys
from pathlib import Path

import numpy as np

from dynlf.experiment import ExperimentSettings, run_experiment

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
root = Path(sys.argv[2] if len(sys.argv) > 2 else "demo_out/experiment")

result = run_experiment(root, ExperimentSettings(steps=steps))

print(f"\n{'model':<10}{'refined':>10}{'unrefined':>12}{'SSIM':>8}{'train s':>10}")
for mode in ("dynamic", "baseline"):
    print(f"{mode:<10}{result.avg(mode, True):>10.2f}{result.avg(mode, False):>12.2f}"
          f"{np.mean(result.ssim[mode, True]):>8.3f}{result.train_seconds[mode]:>10.0f}")
gap = result.avg("dynamic") - result.avg("baseline")
print(f"\nlearned interpolation vs fixed-kernel warping: {gap:+.2f} dB")

log = result.log("dynamic")
print("dynamic training loss: " + "  ".join(
    f"step {r['step']}: {r['total']:.4f}" for r in log[:: max(1, len(log) // 5)]))
print(f"reconstructions and metrics.json files are under {root / 'recon'}")
