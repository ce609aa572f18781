"""Generate a synthetic enterprise graph and walk through what is in it.

The generator plants communities, draws typed edges with per-type intra and
inter-community probabilities, flags bond issuers, and runs an independent
cascade of defaults across the edges. Everything is a pure function of the
config, so re-running this script prints identical numbers.
"""


from riskprop import GenConfig, community_assignment, generate_graph, simulate_cascade
from riskprop.graph import save_events, save_graph

cfg = GenConfig(num_nodes=120, rng_seed=7)
g = generate_graph(cfg)
comm = community_assignment(cfg)

print(f"nodes: {g.num_nodes}, feature dim: {g.d_in}, issuers: {int(g.issuer_flags.sum())}")
print(f"edge types: {g.edge_type_names}")
for k, name in enumerate(g.edge_type_names):
    edges = g.edge_lists[k]
    same = comm[edges[:, 0]] == comm[edges[:, 1]]
    print(f"  {name:<20} {edges.shape[0]:4d} edges, {int(same.sum()):4d} intra-community")

print("\nThe first relation type is sparse and stays inside communities; the")
print("last is dense community-agnostic noise. The cascade below travels")
print("almost exclusively along the first type.\n")

events = simulate_cascade(g, cfg)
by_tick = {}
for ev in events:
    by_tick.setdefault(ev.default_time, []).append(ev.node_id)
for tick in sorted(by_tick):
    kind = "seed defaults" if tick == 0 else "infected"
    print(f"tick {tick}: {len(by_tick[tick]):3d} {kind}")
print(f"total defaulted: {len(events)} of {g.num_nodes}")

defaulted_issuers = sum(1 for ev in events if g.issuer_flags[ev.node_id])
print(f"defaulted issuers (stage-2 pair sources): {defaulted_issuers}")

save_graph(g, "demo_out/world")
save_events(events, "demo_out/world/events.tsv")
print("\nwrote demo_out/world/{nodes.tsv, edges.tsv, events.tsv}")

# determinism: same config, same world
again = generate_graph(cfg)
assert again.node_features.tobytes() == g.node_features.tobytes()
print("re-generation is bit-identical")
