"""Parent-linked blocks, block stores, and hash-chain bit strings.

Chains are identified by the concatenation of fixed-width per-block labels
(simulated hash values).  Labels are assigned by a deterministic injective
scrambling of block ids, so "hash values are unique" holds by construction;
a real truncated hash can be selected instead, in which case the store
verifies uniqueness on admission.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Optional

__all__ = ["Block", "BlockStore", "label_for", "make_genesis", "hash_chain",
           "chain_of", "reduct", "last_block"]

# Odd multiplier => bijective modulo any power of two.
_LABEL_MULT = 0x9E3779B97F4A7C15
_LABEL_XOR = 0x5DEECE66D


def label_for(block_id: int, bits: int, mode: str = "scramble") -> str:
    """The L-bit label (simulated hash) of a block id.

    "scramble" is injective for ids below 2**bits; "sha256" truncates a real
    hash and relies on the store's collision check.
    """
    if bits < 1:
        raise ValueError("label width must be >= 1")
    if block_id < 0:
        raise ValueError("block ids are non-negative")
    if mode == "scramble":
        if block_id >= 1 << bits:
            raise ValueError(f"block id {block_id} not representable in {bits} label bits")
        v = ((block_id * _LABEL_MULT) ^ _LABEL_XOR) & ((1 << bits) - 1)
    elif mode == "sha256":
        digest = hashlib.sha256(block_id.to_bytes(8, "big")).digest()
        v = int.from_bytes(digest, "big") >> (256 - bits)
    else:
        raise ValueError(f"unknown label mode {mode!r}")
    return format(v, f"0{bits}b")


@dataclass(frozen=True)
class Block:
    id: int
    parent: Optional[int]  # None only for genesis
    height: int
    label: str
    payload: bytes = b""

    def __post_init__(self) -> None:
        if (self.parent is None) != (self.height == 0):
            raise ValueError("exactly the height-0 genesis block has no parent")


def make_genesis(bits: int, mode: str = "scramble") -> Block:
    return Block(id=0, parent=None, height=0, label=label_for(0, bits, mode))


class BlockStore:
    """Blocks known to one processor, in a stable total insertion order.

    A block is admitted only once its parent is present; early arrivals are
    parked and drained when the parent shows up.
    """

    def __init__(self, genesis: Block):
        self.genesis = genesis
        self.label_bits = len(genesis.label)
        self._blocks: dict[int, Block] = {}
        self._seq: dict[int, int] = {}
        self._children: dict[int, list[int]] = {}
        self._by_label: dict[str, Block] = {}
        self._parked: dict[int, list[Block]] = {}
        self._admit(genesis)

    def __contains__(self, block_id: int) -> bool:
        return block_id in self._blocks

    def __len__(self) -> int:
        return len(self._blocks)

    def get(self, block_id: int) -> Block:
        return self._blocks[block_id]

    def seq(self, block_id: int) -> int:
        return self._seq[block_id]

    def children(self, block_id: int) -> list[Block]:
        """Children in insertion order."""
        return [self._blocks[c] for c in self._children.get(block_id, [])]

    def by_label(self, label: str) -> Optional[Block]:
        return self._by_label.get(label)

    def in_insertion_order(self) -> list[Block]:
        return sorted(self._blocks.values(), key=lambda b: self._seq[b.id])

    def _admit(self, block: Block) -> None:
        if block.label in self._by_label and self._by_label[block.label].id != block.id:
            raise ValueError(f"label collision on {block.label!r}")
        self._blocks[block.id] = block
        self._seq[block.id] = len(self._seq)
        self._by_label[block.label] = block
        if block.parent is not None:
            self._children.setdefault(block.parent, []).append(block.id)

    def add(self, block: Block) -> bool:
        """Admit a block (or park it until its parent arrives).

        Returns True if the block entered the store during this call.
        """
        if block.id in self._blocks:
            return False
        if block.parent is None:
            raise ValueError("a second genesis block cannot be admitted")
        if block.parent not in self._blocks:
            parked = self._parked.setdefault(block.parent, [])
            if all(b.id != block.id for b in parked):
                parked.append(block)
            return False
        if block.height != self._blocks[block.parent].height + 1:
            raise ValueError(f"block {block.id} height {block.height} does not "
                             f"follow its parent")
        self._admit(block)
        for waiting in self._parked.pop(block.id, []):
            self.add(waiting)
        return True

    def add_all(self, blocks: Iterable[Block]) -> None:
        for b in blocks:
            self.add(b)


def hash_chain(chain: list[Block]) -> str:
    """Concatenated labels of a genesis-rooted chain; "" for non-chains."""
    if not chain or chain[0].parent is not None:
        return ""
    for prev, nxt in zip(chain, chain[1:]):
        if nxt.parent != prev.id:
            return ""
    return "".join(b.label for b in chain)


def chain_of(sigma: str, store: BlockStore) -> list[Block]:
    """The longest stored chain b0*...*bh whose label string prefixes sigma.

    Falls back to the genesis chain when sigma does not even start with the
    genesis label.
    """
    width = store.label_bits
    chain = [store.genesis]
    if not sigma.startswith(store.genesis.label):
        return chain
    pos = width
    while pos + width <= len(sigma):
        candidate = store.by_label(sigma[pos : pos + width])
        if candidate is None or candidate.parent != chain[-1].id:
            break
        chain.append(candidate)
        pos += width
    return chain


def reduct(sigma: str, store: BlockStore) -> str:
    return "".join(b.label for b in chain_of(sigma, store))


def last_block(sigma: str, store: BlockStore) -> Block:
    return chain_of(sigma, store)[-1]


def find_chain_extending(sigma: str, store: BlockStore) -> Optional[list[Block]]:
    """A stored chain B with hash_chain(B) extending sigma, if one exists.

    Prefers the earliest-inserted child at each step; the search only has to
    cover the bits of sigma past the last fully matched block.
    """
    def compatible(label: str, remaining: str) -> bool:
        overlap = min(len(label), len(remaining))
        return label[:overlap] == remaining[:overlap]

    def extend(prefix_chain: list[Block], pos: int) -> Optional[list[Block]]:
        if pos >= len(sigma):
            return prefix_chain
        for child in store.children(prefix_chain[-1].id):
            if compatible(child.label, sigma[pos:]):
                found = extend(prefix_chain + [child], pos + store.label_bits)
                if found is not None:
                    return found
        return None

    if not compatible(store.genesis.label, sigma):
        return None
    return extend([store.genesis], store.label_bits)
