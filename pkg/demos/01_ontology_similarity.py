"""How close are two interests? Walk the bundled campus taxonomy."""

from mym.ontology import sample_taxonomy

t = sample_taxonomy()
print(f"campus taxonomy: {len(t)} concepts, root {t.label(t.root)!r}")

pairs = [
    ("Music/Jazz", "Music/Jazz"),
    ("Music/Jazz", "Music/Highlife"),
    ("Academics/Science/ComputerScience", "Technology/Programming"),
    ("Music/Jazz", "Sport/Soccer"),
]
print(f"{'a':36} {'b':24} lca          dist  sim")
for a, b in pairs:
    x, y = t.resolve(a), t.resolve(b)
    m = t.lca(x, y)
    print(f"{a:36} {b:24} {t.label(m):12} {t.concept_distance(x, y):4}  {t.concept_similarity(x, y):.3f}")

# siblings share a parent, so they sit closer than concepts that only meet at the root
