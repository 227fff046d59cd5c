"""Bundled example models.

``three-state``
    Three states ``s0, s1, s2`` with initial state ``s1``; events ``a, b, c``
    are controllable and ``err`` is not; ``r`` holds only in ``s2``.  Used
    with ``G F r`` and K = 1.

    ======  =====  ====================================
    state   event  successors
    ======  =====  ====================================
    s0      a      s2
    s0      b      s1 (0.5), s2 (0.5)
    s0      err    s0
    s1      a      s0
    s1      b      s2
    s2      a      s1
    s2      b      s0
    s2      c      s1 (0.7), s2 (0.3)
    ======  =====  ====================================

    Event probabilities are uniform over the allowed events except at
    ``s0``, where ``{a,err}`` and ``{b,err}`` split 0.5/0.5, ``{a,b,err}``
    gives 0.4/0.4/0.2 and ``{err}`` gives 1.

``two-robot``
    Two robots in seven rooms ``R0..R6``.  A state ``Ri-Rj`` has robot 1 in
    ``Ri`` and robot 2 in ``Rj``.  Rooms are connected as follows::

        R5
        |
        R1 --- R2
                |
               R0 --- R3
                |    / |
               R4 --+  |
                |      |
               R6 -----+

    i.e. doors R1-R2, R1-R5, R2-R0, R0-R3, R0-R4, R3-R4, R4-R6, R3-R6.
    Event ``e1_k`` moves robot 1 into room ``Rk`` through a door (robot 1
    never enters R5); ``e2_k`` does the same for robot 2 (robot 2 never
    enters R3).  From R3, ``e1_4`` is unreliable: robot 1 ends up in R0 or R4
    with probability 0.5 each.  ``e2_u`` is uncontrollable and enabled when
    robot 2 is in R0 (to R2/R3/R4 with 0.1/0.2/0.7) or R4 (to R0/R6 with
    0.5/0.5).  Robot 1 recharges in R3 (``r1``), robot 2 in R1 (``r2``);
    ``u`` holds when both robots share a room.  Events are uniform over
    the allowed ones.  The initial state is ``R0-R3``, used with
    ``GF r1 & GF r2 & G !u`` and K = 10.
"""

from __future__ import annotations

from .sdes import EventProb, Sdes

__all__ = ["three_state", "two_robot", "FIXTURES", "ROOM_DOORS"]

THREE_STATE_SPEC = "G F r"
THREE_STATE_K = 1


def three_state() -> Sdes:
    trans = [
        ("s0", "a", "s2", 1.0),
        ("s0", "b", "s1", 0.5),
        ("s0", "b", "s2", 0.5),
        ("s0", "err", "s0", 1.0),
        ("s1", "a", "s0", 1.0),
        ("s1", "b", "s2", 1.0),
        ("s2", "a", "s1", 1.0),
        ("s2", "b", "s0", 1.0),
        ("s2", "c", "s1", 0.7),
        ("s2", "c", "s2", 0.3),
    ]
    explicit = {
        ("s0", frozenset({"a", "err"})): {"a": 0.5, "err": 0.5},
        ("s0", frozenset({"b", "err"})): {"b": 0.5, "err": 0.5},
        ("s0", frozenset({"a", "b", "err"})): {"a": 0.4, "b": 0.4, "err": 0.2},
        ("s0", frozenset({"err"})): {"err": 1.0},
    }
    return Sdes(
        states=["s0", "s1", "s2"],
        events=[("a", True), ("b", True), ("c", True), ("err", False)],
        initial="s1",
        labels={"s2": ["r"]},
        transitions=trans,
        event_prob=EventProb(mode="explicit", explicit=explicit),
    )


ROOM_DOORS = [(1, 2), (1, 5), (2, 0), (0, 3), (0, 4), (3, 4), (4, 6), (3, 6)]
ROBOT1_ROOMS = (0, 1, 2, 3, 4, 6)
ROBOT2_ROOMS = (0, 1, 2, 4, 5, 6)
TWO_ROBOT_SPEC = "GF r1 & GF r2 & G !u"
TWO_ROBOT_K = 10


def _neighbours(doors) -> dict[int, set[int]]:
    nb: dict[int, set[int]] = {r: set() for r in range(7)}
    for a, b in doors:
        nb[a].add(b)
        nb[b].add(a)
    return nb


def two_robot(doors=ROOM_DOORS) -> Sdes:
    nb = _neighbours(doors)
    name = lambda i, j: f"R{i}-R{j}"  # noqa: E731
    states = [name(i, j) for i in range(7) for j in range(7)]
    events = [(f"e1_{k}", True) for k in ROBOT1_ROOMS]
    events += [(f"e2_{k}", True) for k in ROBOT2_ROOMS] + [("e2_u", False)]
    unreliable = {0: 0.5, 4: 0.5}
    random_moves = {0: {2: 0.1, 3: 0.2, 4: 0.7}, 4: {0: 0.5, 6: 0.5}}
    trans = []
    labels = {}
    for i in range(7):
        for j in range(7):
            s = name(i, j)
            labels[s] = [p for p, ok in (("r1", i == 3), ("r2", j == 1), ("u", i == j)) if ok]
            for k in sorted(nb[i]):
                if k not in ROBOT1_ROOMS:
                    continue
                if i == 3 and k == 4:
                    trans += [(s, "e1_4", name(t, j), p) for t, p in unreliable.items()]
                else:
                    trans.append((s, f"e1_{k}", name(k, j), 1.0))
            for k in sorted(nb[j]):
                if k in ROBOT2_ROOMS:
                    trans.append((s, f"e2_{k}", name(i, k), 1.0))
            for t, p in random_moves.get(j, {}).items():
                trans.append((s, "e2_u", name(i, t), p))
    return Sdes(
        states=states,
        events=events,
        initial=name(0, 3),
        labels=labels,
        transitions=trans,
        event_prob=EventProb(mode="uniform"),
    )


FIXTURES = {
    "three-state": (three_state, THREE_STATE_SPEC, THREE_STATE_K),
    "two-robot": (two_robot, TWO_ROBOT_SPEC, TWO_ROBOT_K),
}
