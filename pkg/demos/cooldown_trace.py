"""Hot-soaked cabin cool-down under the four baseline controllers.

Starts every controller from a cabin at 55 C on a 35 C day and prints the
cabin and equivalent temperature once a minute for the first ten minutes.
"""

from cabinrl.controllers import CONTROLLER_NAMES, make_controller
from cabinrl.harness import rollout_trace
from cabinrl.model import CabinState

start = CabinState(T_c=55.0, T_m=55.0, T_amb=35.0)

for name in CONTROLLER_NAMES:
    rows = rollout_trace(make_controller(name, "et"), start)
    print(f"\n{name} (sensor: et)")
    print("  min   T_c    T_e   flow  vent")
    for row in rows[29:300:30]:
        t, T_c, _, _, T_e, v, T_i, *_ = row
        print(f"  {t / 60:3.0f}  {T_c:5.1f}  {T_e:5.1f}  {v:5.1f}  {T_i:4.1f}")
