"""Drive the 115 s validation sequence with the default vehicle and look at the response.

    python demos/validation_drive.py [out_dir]

Prints peak values per section and saves a figure of steering, yaw rates,
articulation angle and the left/right load split on the last trailer axle.
"""
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from semitrailer import default_params, simulate  # noqa: E402
from semitrailer.maneuvers import KMH, VALIDATION_SECTIONS, generate, validation_sequence  # noqa: E402

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)

params = default_params()
inputs = generate(validation_sequence())
res = simulate(None, inputs, params, dt=1e-3)
print(f"simulated {res.t[-1]:.0f} s in {res.diagnostics['steps']} steps, "
      f"worst constraint residual {res.diagnostics['constraint_drift_max']:.1e} m/s")

# Each section is a different driving situation: lane changes at walking pace,
# a right turn, a tight left turn and faster lane changes.
t = res.t
yaw1, yaw2 = np.degrees(res.output("yawrate_1")), np.degrees(res.output("yawrate_2"))
theta = np.degrees(res.output("theta"))
fz_r, fz_l = res.output("F_z23R") / 1e3, res.output("F_z23L") / 1e3
v = np.interp(t, inputs.t, inputs.v_x2) / KMH
print(f"{'section':8s} {'speed km/h':>11s} {'|yaw 1| deg/s':>14s} {'|yaw 2| deg/s':>14s} "
      f"{'|theta| deg':>12s} {'dFz 23 kN':>10s}")
for label, (a, b) in VALIDATION_SECTIONS.items():
    m = (t >= a) & (t <= b)
    print(f"{label:8s} {v[m].mean():11.1f} {np.abs(yaw1[m]).max():14.2f} {np.abs(yaw2[m]).max():14.2f} "
          f"{np.abs(theta[m]).max():12.2f} {np.abs(fz_r[m] - fz_l[m]).max():10.2f}")

# The trailer lags the tractor in yaw; the left turn in section III almost
# reverses the direction of travel.
m = (t >= 63.0) & (t <= 81.0)
print(f"heading change in section III: {np.trapezoid(yaw1[m], t[m]):.0f} deg")

fig, axes = plt.subplots(4, 1, sharex=True, figsize=(10, 9))
axes[0].plot(inputs.t, np.degrees(inputs.delta))
axes[0].set_ylabel("steer [deg]")
axes[1].plot(t, yaw1, label="tractor")
axes[1].plot(t, yaw2, label="trailer")
axes[1].set_ylabel("yaw rate [deg/s]")
axes[1].legend(loc="upper right")
axes[2].plot(t, theta)
axes[2].set_ylabel("articulation [deg]")
axes[3].plot(t, fz_r, label="23R")
axes[3].plot(t, fz_l, label="23L")
axes[3].set_ylabel("F_z [kN]")
axes[3].set_xlabel("t [s]")
axes[3].legend(loc="upper right")
for ax in axes:
    for a, _ in VALIDATION_SECTIONS.values():
        ax.axvline(a, color="0.8", lw=0.8)
fig.tight_layout()
fig.savefig(out / "validation_drive.png", dpi=120)
print(f"figure written to {out / 'validation_drive.png'}")
