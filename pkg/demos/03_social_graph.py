"""A small campus network: friends, a course group, a post that gets moderated away."""

from mym.matchmaking import Profile
from mym.socialgraph import Role, SocialGraph, load_log, replay

g = SocialGraph()
for pid, role in (("admin", Role.SUPER), ("nkechi", Role.BASIC), ("john", Role.BASIC), ("ada", Role.BASIC)):
    g.incarnate(Profile(pid, pid.title()), role)

g.befriend("nkechi", "john")
g.befriend("john", "ada")
print("mutual friends of Nkechi and Ada:", g.mutual_friends("nkechi", "ada"))

gid = g.form_group("nkechi", "CSC 301")
g.join_group("john", gid)
print("CSC 301 members:", sorted(g.groups[gid].members))

post = g.post_content("john", "post", "selling exam answers, DM me")
g.like("ada", post)
g.post_content("nkechi", "comment", "reported", parent=post)
g.vote("nkechi", post, -1)
print("before moderation:", len(g.content), "content nodes,", g.likes(post), "like")

removed = g.moderate("admin", "remove_content", post)
print("moderator removed", removed, "-> content left:", len(g.content))

# the operation log is enough to rebuild the graph
again = replay(load_log(g.dump_log()))
print("replayed graph identical:", again.snapshot() == g.snapshot())
