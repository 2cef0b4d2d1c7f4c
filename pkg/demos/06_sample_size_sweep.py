"""
Sample-size sweep through the experiment runner
===============================================

The same config file format the ``rfan run`` command reads. Sweeping N
changes the number of steps at a fixed batch size; the two-stage design
switches halfway. Writes results.csv, results.json and one curve file per
metric. Three seeds keep this to a few minutes.
"""

import tempfile
from pathlib import Path

from rfan.harness import run_from_config

out = Path(tempfile.mkdtemp())
config = out / "sweep.ini"
config.write_text(
    f"""
[experiment]
dataset = synthetic
n_seeds = 3
out = {out / "results"}
sweep_over = N
sweep_values = 100, 200, 300

[design rct]
mode = rct
b = 10

[design two-stage]
mode = fixed
b = 10
switch_fraction = 0.5
acquisition = mu_pi_unf
"""
)

status = run_from_config(config)
print("exit status", status)
print((out / "results" / "curve_wc_policy_value.csv").read_text())
