"""The campus uplink fails for ten seconds. Nearby chats switch to the radio, the rest wait."""

from mym import netsim

path = next(p for p in netsim.bundled_scenarios() if p.stem == "failover")
cfg = netsim.load_scenario(path)
log, report = netsim.run(cfg)

for start, end in cfg.wide_area_outages:
    print(f"wide-area outage from {start:g} s to {end:g} s")
for e in log:
    if e["kind"] in ("OutageStart", "OutageEnd"):
        print(f"{e['t']:7.3f}  {e['kind']}")
    elif e["kind"] == "ChatDelivered":
        print(f"{e['t']:7.3f}  {e['src']} -> {e['node']} via {e['transport']:11} "
              f"(written at {e['sent_at']:g} s): {e['text']}")
print(f"{report.chats_delivered} of {report.chats_sent} chats delivered")
