"""
Laying out one page under channel prices
========================================

A single request carries candidates from several channels. The primal layer
fills the page slots to maximise utility minus the priced exposure each
channel receives. Raising a channel's price pushes its items down or off the
page; a negative price pulls them up.
"""

import numpy as np

from mirec import Candidate, ExposureModel, Request
from mirec.primal import SlotWeights, layout_value, solve

# five candidates from two channels; channel 1 is the weaker one
request = Request.from_candidates(1, [
    Candidate(10, 0, 0.90),
    Candidate(11, 0, 0.70),
    Candidate(12, 0, 0.55),
    Candidate(20, 1, 0.60),
    Candidate(21, 1, 0.35),
])

# three slots whose exposure decays with position
weights = SlotWeights.from_model(ExposureModel.position_decayed(3))
print("slot weights:", np.round(weights.exposure, 3))

for mu in ([0.0, 0.0], [0.3, 0.0], [0.0, -0.4]):
    mu = np.array(mu)
    layout = solve(request, mu, weights)
    v = layout_value(layout, mu, weights)
    print(f"mu={mu}  page={layout.item_ids.tolist()}  channels={layout.channels.tolist()}  "
          f"utility={v.f:.3f}  exposure={np.round(v.g, 3)}")

# the assignment solver is exact; the brute-force enumerator agrees
mu = np.array([0.2, -0.1])
a = layout_value(solve(request, mu, weights, "assignment"), mu, weights).value
b = layout_value(solve(request, mu, weights, "brute"), mu, weights).value
print(f"assignment {a:.6f}  brute force {b:.6f}")
