"""Two phones chat over a lossy radio; the inbox still sees each message once, in order."""

from mym import netsim

path = next(p for p in netsim.bundled_scenarios() if p.stem == "lossy_chat")
cfg = netsim.load_scenario(path)
sim = netsim.Simulator(cfg)
log, report = sim.run()

print(f"loss={cfg.loss_prob} dup={cfg.dup_prob} jitter={cfg.jitter} ms, seed {cfg.seed}")
print("frames sent/delivered/dropped on short range:",
      report.frames_sent["short_range"], report.frames_delivered["short_range"], report.frames_dropped["short_range"])
for node, eng in sim.engines.items():
    for m in eng.inbox:
        print(f"  node {node} <- {m.peer}: #{m.n} {m.text!r} after {m.delivered_at - m.sent_at:.3f}s")
print(f"latency min/mean/max: {report.chat_latency_min:.3f} / {report.chat_latency_mean:.3f} / {report.chat_latency_max:.3f} s")
