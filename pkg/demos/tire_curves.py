"""Lateral force curves of the simplified tire model for the three axle groups.

    python demos/tire_curves.py [out_dir]

The cornering stiffness rises with load and then falls off again past the
c2 load, while the peak force keeps growing with mu * F_z.
"""
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from semitrailer import default_params  # noqa: E402
from semitrailer.model import cornering_stiffness, lateral_tire_force_static  # noqa: E402

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)

params = default_params()
alpha = np.radians(np.linspace(-15, 15, 601))
loads = np.array([10e3, 25e3, 40e3, 60e3])

fig, axes = plt.subplots(1, 3, figsize=(13, 4), sharey=True)
for ax, axle in zip(axes, ("front", "rear", "trailer")):
    tire = params.tire(axle)
    for fz in loads:
        ax.plot(np.degrees(alpha), lateral_tire_force_static(tire, alpha, fz) / 1e3, label=f"{fz / 1e3:.0f} kN")
    ax.set_title(axle)
    ax.set_xlabel("slip angle [deg]")
    peak = loads[np.argmax(cornering_stiffness(tire, loads))]
    print(f"{axle:8s} cornering stiffness [kN/rad] at", ", ".join(
        f"{fz / 1e3:.0f} kN: {cornering_stiffness(tire, fz) / 1e3:.0f}" for fz in loads),
        f"(largest at {peak / 1e3:.0f} kN of those)")
axes[0].set_ylabel("F_y [kN]")
axes[-1].legend(title="F_z")
fig.tight_layout()
fig.savefig(out / "tire_curves.png", dpi=120)
print(f"figure written to {out / 'tire_curves.png'}")
