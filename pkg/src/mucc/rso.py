"""Rotation swaps: let cycles of envious RDs trade providers without hurting anyone.

A cabal is a cycle of RDs in which each member prefers its predecessor's RP
to its own. Rotating the cycle makes every member better off; RDs whose
submitted preferences would block the rotation (accomplices) move the
offending RPs below their anchor, and deferred acceptance is re-run on the
modified lists to realize the rotation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

from .matching import Association, gale_shapley
from .pairwise import PreferenceList

Graph = dict[int, tuple[int, ...]]
Guard = Callable[[Association, Association], bool]


@dataclass(frozen=True)
class Cabal:
    """RDs in cyclic order; member ``x`` envies the RP of member ``x - 1``."""

    members: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.members) < 2:
            raise ValueError("a cabal has at least two members")

    def predecessor(self, x: int) -> int:
        return self.members[x - 1]

    def successor(self, x: int) -> int:
        return self.members[(x + 1) % len(self.members)]

    def is_valid(self, association: Association, rd_prefs: Mapping[int, PreferenceList]) -> bool:
        omega = association.partner_map()
        return all(
            k in omega
            and omega.get(self.predecessor(x)) is not None
            and rd_prefs[k].prefers(omega[self.predecessor(x)], omega[k])
            for x, k in enumerate(self.members)
        )


@dataclass(frozen=True)
class FalsifiedLists:
    lists: dict[int, PreferenceList]  # submitted lists for every RD
    true_lists: dict[int, PreferenceList]
    anchors: dict[int, int | None]  # participants only
    demoted: dict[int, tuple[int, ...]]  # participants only


def envy_graph(association: Association, rd_prefs: Mapping[int, PreferenceList]) -> Graph:
    """Edge ``a -> b`` when RD ``b`` strictly prefers ``a``'s RP to its own."""
    omega = association.partner_map()
    graph = {}
    for a in sorted(rd_prefs):
        ra = omega.get(a)
        if ra is None:
            graph[a] = ()
            continue
        graph[a] = tuple(
            b for b in sorted(rd_prefs) if b != a and rd_prefs[b].prefers(ra, omega.get(b))
        )
    return graph


def find_cabal(graph: Graph, banned: frozenset[tuple[int, int]] = frozenset()) -> Cabal | None:
    """First directed cycle met by depth-first search from the lowest id.

    The cycle is the stack segment closed by the first back edge; ``banned``
    edges are ignored.
    """
    state: dict[int, int] = {}  # 1 on stack, 2 finished
    for root in sorted(graph):
        if root in state:
            continue
        stack = [root]
        pos = {root: 0}
        iters = [iter(graph[root])]
        state[root] = 1
        while stack:
            node = stack[-1]
            nxt = next(iters[-1], None)
            if nxt is None:
                state[node] = 2
                stack.pop()
                iters.pop()
                del pos[node]
                continue
            if (node, nxt) in banned:
                continue
            s = state.get(nxt)
            if s == 1:
                return Cabal(tuple(stack[pos[nxt]:]))
            if s is None:
                state[nxt] = 1
                pos[nxt] = len(stack)
                stack.append(nxt)
                iters.append(iter(graph.get(nxt, ())))
    return None


def rotation_target(cabal: Cabal, association: Association) -> dict[int, int | None]:
    """Partner of every RD after rotating ``cabal``."""
    omega = association.partner_map()
    target: dict[int, int | None] = dict(omega)
    for x, k in enumerate(cabal.members):
        target[k] = omega[cabal.predecessor(x)]
    return target


def find_accomplices(
    cabal: Cabal,
    association: Association,
    rd_prefs: Mapping[int, PreferenceList],
    rp_prefs: Mapping[int, PreferenceList],
) -> frozenset[int]:
    """RDs whose preferences interfere with the rotation of ``cabal``.

    Outside RD ``h`` qualifies when it prefers some cabal RP ``Omega(k_x)`` to
    its own and that RP ranks ``h`` above ``k_x`` or above ``k_{x+1}``, the
    member the rotation brings in. Cabal member ``k_l`` qualifies when it
    prefers another cabal RP ``Omega(k_x)`` to its rotation target
    ``Omega(k_{l-1})`` and that RP ranks ``k_l`` above ``k_{x+1}``.
    """
    omega = association.partner_map()
    members = cabal.members
    inside = set(members)
    out = set()
    for h in rd_prefs:
        if h in inside:
            continue
        for x, k in enumerate(members):
            r = omega[k]
            if not rd_prefs[h].prefers(r, omega.get(h)):
                continue
            pl = rp_prefs[r]
            if pl.prefers(h, k) or pl.prefers(h, cabal.successor(x)):
                out.add(h)
                break
    for l, kl in enumerate(members):
        anchor = omega[cabal.predecessor(l)]
        for x, k in enumerate(members):
            if x == l:
                continue
            r = omega[k]
            if rd_prefs[kl].prefers(r, anchor) and rp_prefs[r].prefers(kl, cabal.successor(x)):
                out.add(kl)
                break
    return frozenset(out)


def rebuild_list(
    base: PreferenceList,
    anchor: int | None,
    demote: tuple[int, ...],
    true_list: PreferenceList,
) -> PreferenceList:
    """``(left - demote, anchor, right + demote)`` with both segments in true order.

    ``left``/``right`` are the candidates before/after ``anchor`` in ``base``.
    With no anchor the demoted candidates go to the end.
    """
    if anchor is not None and anchor not in base:
        raise AssertionError(f"anchor {anchor} missing from list of RD {base.owner}")
    cut = len(base) if anchor is None else base.ranked.index(anchor)
    left = [c for c in base.ranked[:cut] if c not in demote]
    right = [c for c in base.ranked[cut + 1:]] + [c for c in demote]
    left.sort(key=true_list.rank)
    right.sort(key=true_list.rank)
    middle = [] if anchor is None else [anchor]
    return PreferenceList(base.owner, tuple(left + middle + right))


def falsify(
    base_lists: Mapping[int, PreferenceList],
    cabal: Cabal,
    accomplices: frozenset[int],
    association: Association,
    rd_prefs: Mapping[int, PreferenceList],
    rp_prefs: Mapping[int, PreferenceList],
    quotas: Mapping[int, int],
) -> FalsifiedLists:
    """Submitted lists that make deferred acceptance realize the rotation.

    Accomplices keep their current RP as anchor; cabal members anchor on their
    predecessor's RP. Each participant demotes the cabal RPs ranked above its
    anchor that would take it in preference to the RDs the rotation assigns there.
    """
    omega = association.partner_map()
    target = rotation_target(cabal, association)
    assigned: dict[int, list[int]] = {}
    for i, j in target.items():
        if j is not None:
            assigned.setdefault(j, []).append(i)
    cabal_rps = {omega[k] for k in cabal.members}

    lists = dict(base_lists)
    anchors: dict[int, int | None] = {}
    demoted: dict[int, tuple[int, ...]] = {}
    for i in sorted(set(cabal.members) | set(accomplices)):
        anchor = target.get(i)
        base = base_lists[i]
        cut = len(base) if anchor is None else base.ranked.index(anchor)
        theta = []
        for r in base.ranked[:cut]:
            if r not in cabal_rps or i not in rp_prefs[r]:
                continue
            held = [m for m in assigned.get(r, []) if m != i]
            if len(held) < quotas[r] or any(rp_prefs[r].prefers(i, m) for m in held):
                theta.append(r)
        anchors[i] = anchor
        demoted[i] = tuple(theta)
        lists[i] = rebuild_list(base, anchor, tuple(theta), rd_prefs[i])
    return FalsifiedLists(lists, dict(rd_prefs), anchors, demoted)


def weakly_improves(
    old: Association, new: Association, rd_prefs: Mapping[int, PreferenceList]
) -> bool:
    """True when no RD ends up strictly worse under its true preferences."""
    a, b = old.partner_map(), new.partner_map()
    return not any(rd_prefs[i].prefers(a.get(i), b.get(i)) for i in rd_prefs)


def ordinal_rp_guard(
    rp_prefs: Mapping[int, PreferenceList], quotas: Mapping[int, int]
) -> Guard:
    """Reject when a full RP now holds an RD it ranks below one it lost."""

    def guard(old: Association, new: Association) -> bool:
        before, after = old.as_dict(), new.as_dict()
        for j, pl in rp_prefs.items():
            now = after.get(j, ())
            if len(now) < quotas[j]:
                continue
            lost = [i for i in before.get(j, ()) if i not in now]
            gained = [i for i in now if i not in before.get(j, ())]
            if any(pl.prefers(o, g) for o in lost for g in gained):
                return False
        return True

    return guard


@dataclass
class RsoResult:
    association: Association
    rounds: int
    accepted: int
    truncated: bool
    submitted: dict[int, PreferenceList]
    trace: list[dict] = field(default_factory=list)


def rso_loop(
    rd_prefs: Mapping[int, PreferenceList],
    rp_prefs: Mapping[int, PreferenceList],
    quotas: Mapping[int, int],
    association: Association | None = None,
    max_rounds: int = 50,
    guard: Guard | None = None,
) -> RsoResult:
    """Repeat cabal detection, falsification and deferred acceptance.

    A round's matching is kept only if every RD weakly improves under its true
    list and ``guard(old, new)`` approves the RP side. A rejected cabal's
    closing edge is skipped until the matching changes; the loop ends when no
    cabal remains or after ``max_rounds`` rounds.
    """
    current = gale_shapley(rd_prefs, rp_prefs, quotas) if association is None else association
    submitted = dict(rd_prefs)
    banned: set[tuple[int, int]] = set()
    trace: list[dict] = []
    rounds = accepted = 0
    truncated = False
    while True:
        cabal = find_cabal(envy_graph(current, rd_prefs), frozenset(banned))
        if cabal is None:
            break
        if rounds >= max_rounds:
            truncated = True
            break
        rounds += 1
        assert cabal.is_valid(current, rd_prefs)
        helpers = find_accomplices(cabal, current, rd_prefs, rp_prefs)
        fl = falsify(submitted, cabal, helpers, current, rd_prefs, rp_prefs, quotas)
        proposal = gale_shapley(fl.lists, rp_prefs, quotas)
        if proposal == current:
            ok, reason = False, "no change"
        elif not weakly_improves(current, proposal, rd_prefs):
            ok, reason = False, "an RD would be worse off"
        elif guard is not None and not guard(current, proposal):
            ok, reason = False, "an RP would be worse off"
        else:
            ok, reason = True, "accepted"
        trace.append(
            {
                "round": rounds,
                "cabal": list(cabal.members),
                "accomplices": sorted(helpers),
                "demoted": {str(i): list(t) for i, t in fl.demoted.items() if t},
                "before": {str(j): list(ms) for j, ms in current.groups},
                "after": {str(j): list(ms) for j, ms in proposal.groups},
                "accepted": ok,
                "reason": reason,
            }
        )
        if ok:
            current, submitted = proposal, fl.lists
            banned.clear()
            accepted += 1
        else:
            ms = cabal.members
            banned.add((ms[-1], ms[0]))
    return RsoResult(current, rounds, accepted, truncated, submitted, trace)
