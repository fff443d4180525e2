"""A toy chain-propagation protocol that is *not* grassroots.

Agents mine blocks onto their own chain; bootnodes propagate longer chains
to each other through an unguarded binary transaction. Splitting the
bootnodes across two groups leaves a propagation obligation that no
interleaving of the groups' runs can discharge.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from itertools import permutations

from .kernel import AgentId, ClassKey, Configuration, GuardedTransaction, MachineTransaction, VMTSError
from .protocols import GenerationBounds, ProtocolSpec

GENESIS = "genesis"


@dataclass(frozen=True)
class ChainState:
    chain: tuple = (GENESIS,)
    is_bootnode: bool = False

    def __post_init__(self):
        if not isinstance(self.chain, tuple):
            object.__setattr__(self, "chain", tuple(self.chain))
        if not self.chain or self.chain[0] != GENESIS:
            raise ValueError("a chain starts with the genesis block")


def block_id(p: AgentId, chain: tuple) -> str:
    """Fresh id for the block ``p`` mines on top of ``chain``."""
    return f"{p}:{len(chain)}"


def _extends(longer: tuple, shorter: tuple) -> bool:
    return len(longer) > len(shorter) and longer[: len(shorter)] == shorter


def _mine(p: AgentId, machines) -> GuardedTransaction:
    s = machines[p]
    new = ChainState(s.chain + (block_id(p, s.chain),), s.is_bootnode)
    return GuardedTransaction(MachineTransaction(("mine", p, new.chain[-1]), {p: s}, {p: new}), frozenset({p}))


def _propagate(p: AgentId, q: AgentId, machines):
    sp, sq = machines[p], machines[q]
    if not (sp.is_bootnode and sq.is_bootnode and _extends(sp.chain, sq.chain)):
        return None
    post = ChainState(sp.chain, sq.is_bootnode)
    return GuardedTransaction(MachineTransaction(("propagate", p, q), {p: sp, q: sq}, {p: sp, q: post}), frozenset())


def toychain_generate(agents, c, bounds: GenerationBounds | None = None) -> list[GuardedTransaction]:
    machines = c.machines() if isinstance(c, Configuration) else c
    out = [_mine(p, machines) for p in sorted(agents)]
    for p, q in permutations(sorted(agents), 2):
        gt = _propagate(p, q, machines)
        if gt is not None:
            out.append(gt)
    return out


def toychain_class_of(t: MachineTransaction) -> ClassKey:
    a = t.action
    if a and a[0] == "mine" and len(a) == 3:
        return a
    if a and a[0] == "propagate" and len(a) == 3:
        return ("propagate", a[1], a[2], t.pre[a[1]].chain)
    raise VMTSError(f"{a!r} is not a toy-chain transaction")


class ToyChain(ProtocolSpec):
    name = "toychain"

    def __init__(self, bootnodes: Iterable[AgentId]):
        self.bootnodes = frozenset(bootnodes)

    def initial_state(self, p):
        return ChainState((GENESIS,), p in self.bootnodes)

    def state_valid(self, agents, state) -> bool:
        return isinstance(state, ChainState)

    def generate(self, agents, machines, bounds):
        return toychain_generate(agents, machines, bounds)

    def unguarded(self, agents, machines, bounds):
        return [gt for gt in toychain_generate(agents, machines, bounds) if not gt.guard]

    def class_of(self, txn):
        return toychain_class_of(txn)

    def key_participants(self, key):
        if not isinstance(key, tuple) or not key:
            return None
        if key[0] == "mine" and len(key) == 3 and isinstance(key[1], str) and isinstance(key[2], str):
            return frozenset({key[1]})
        if key[0] == "propagate" and len(key) == 4:
            _, p, q, chain = key
            if p == q or p not in self.bootnodes or q not in self.bootnodes:
                return None
            if not (isinstance(chain, tuple) and chain and chain[0] == GENESIS):
                return None
            return frozenset({p, q})
        return None

    def instantiate(self, key, agents, machines):
        if not self.key_valid(agents, key):
            return []
        if key[0] == "mine":
            gt = _mine(key[1], machines)
            return [gt] if gt.txn.action == key else []
        gt = _propagate(key[1], key[2], machines)
        return [gt] if gt is not None and toychain_class_of(gt.txn) == key else []

    def build(self, action, agents, machines):
        if not action or action[0] not in ("mine", "propagate"):
            raise VMTSError(f"unknown toy-chain action {action!r}")
        participants = {action[1]} if action[0] == "mine" else set(action[1:3])
        if not participants <= agents:
            return []
        if action[0] == "mine":
            gt = _mine(action[1], machines)
            return [gt] if len(action) == 2 or gt.txn.action == tuple(action) else []
        gt = _propagate(action[1], action[2], machines)
        return [gt] if gt is not None else []

    def key_of_action(self, action, agents, machines):
        if action and action[0] == "mine":
            return ("mine", action[1], action[2] if len(action) == 3 else block_id(action[1], machines[action[1]].chain))
        if action and action[0] == "propagate" and len(action) >= 3:
            return ("propagate", action[1], action[2], machines[action[1]].chain)
        raise VMTSError(f"unknown toy-chain action {action!r}")

    def state_to_json(self, state: ChainState):
        return {"chain": list(state.chain), "bootnode": state.is_bootnode}

    def state_from_json(self, obj) -> ChainState:
        return ChainState(tuple(obj["chain"]), bool(obj["bootnode"]))
