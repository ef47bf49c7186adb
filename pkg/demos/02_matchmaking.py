"""Score a few students against Nkechi, then watch the score fade with distance."""

from importlib.resources import files

from mym.matchmaking import is_match, load_profile, rank_candidates, relevance
from mym.ontology import sample_taxonomy

t = sample_taxonomy()
profiles = files("mym") / "data" / "profiles"
nkechi = load_profile(profiles / "nkechi.json", t)
others = [load_profile(profiles / f"{name}.json", t) for name in ("john", "ada", "emeka", "jazz_only")]

print("candidates around Nkechi, all at 5 m:")
for pid, score in rank_candidates(nkechi, [(p, 5.0) for p in others], t):
    print(f"  {pid:10} relevance={score.value:.4f}  {is_match(score)}")

john = others[0]
print("\nNkechi and John as they drift apart:")
for d in (0, 10, 50, 100, 200, 400):
    s = relevance(nkechi, john, d, t)
    print(f"  {d:4} m  proximity={s.proximity_factor:.4f}  relevance={s.value:.4f}  {is_match(s)}")
