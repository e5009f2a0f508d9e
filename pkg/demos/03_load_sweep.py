"""
Clarification time under load
=============================

Runs the shipped benchmark scenario at a few drone counts and prints the
box-plot statistics per protocol. Then puts the single-drone figure into the
end-to-end reaction budget.

The full sweep (1 to 250 drones) is ``cuasutm run`` with the built-in
scenario; here the counts are cut down so the script finishes in a second.
"""

from cuasutm.bench import Scenario, builtin, delay_budget, run_sweep, to_csv

scenario = Scenario.load(builtin("paper")).with_counts([1, 25, 50])
sweep = run_sweep(scenario)
print(to_csv(sweep.summaries))
print("expectation mismatches:", len(sweep.mismatches))

# Mean over every protocol at each count.
for count in scenario.counts:
    xs = [x.delta_ms for r in sweep.runs if r.count == count for x in r.result.samples]
    print(f"{count:>3} drones: mean {sum(xs) / len(xs) / 1000:.2f} s over {len(xs)} sessions")

# 50 drones share the authority, so they take far less than 50 separate runs.
lone, crowd = sweep.run("P3", 1).result, sweep.run("P3", 50).result
print(f"P3: one drone {lone.duration_ms} ms, fifty drones {crowd.duration_ms} ms")

# How much of the reaction time is spent asking questions.
detect = 1.16
clarify = lone.samples[0].delta_ms / 1000
print(f"budget, immediate: {delay_budget(detect, clarify, 0, 0, False):.0%}")
print(f"budget, 25 s landing grace: {delay_budget(detect, clarify, 25, 0, False):.0%}")
print(f"budget, tolerated: {delay_budget(detect, clarify, 0, 0, True):.0%}")
