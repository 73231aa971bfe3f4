"""
Type definitions for labeled Yang-Feldman trees.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional, Tuple

Label = Tuple[int, ...]


class FieldType(str, Enum):
    IN = "in"
    LOC = "loc"
    OUT = "out"


@dataclass(frozen=True)
class TreeNode:
    """
    A leaf (an in-field) or an internal vertex with p-1 ordered children.

    The label is the path of 1-based child positions from the root node; the
    root node has the empty label.
    """
    label: Label
    children: Tuple["TreeNode", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def walk(self) -> Iterator["TreeNode"]:
        """Depth-first, children in position order (operator order of the leaves)."""
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class Tree:
    root_type: FieldType
    order: int
    p: int
    root: TreeNode

    @property
    def trunk(self) -> Optional[str]:
        """Propagator kind between the external point and the root vertex."""
        if self.order == 0:
            return None
        return "Gr" if self.root_type == FieldType.LOC else "D"

    def vertices(self) -> Tuple[TreeNode, ...]:
        return tuple(node for node in self.root.walk() if not node.is_leaf)

    def leaves(self) -> Tuple[TreeNode, ...]:
        return tuple(node for node in self.root.walk() if node.is_leaf)

    def labels(self) -> Tuple[Label, ...]:
        return tuple(node.label for node in self.root.walk())

    def sort_key(self) -> Tuple[Label, ...]:
        return tuple(sorted(node.label for node in self.vertices()))
