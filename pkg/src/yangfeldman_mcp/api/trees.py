"""
Tree expansion of the interacting and outgoing fields.
"""

import logging
from functools import lru_cache
from itertools import product
from typing import Iterator, List, Tuple, Union

from ..utils.label_utils import extend_label, format_label
from .errors import ConfigError
from .types import FieldType, Label, Tree, TreeNode

logger = logging.getLogger(__name__)


def _field_type(a: Union[str, FieldType]) -> FieldType:
    try:
        return FieldType(a)
    except ValueError:
        raise ConfigError(f"Unknown field type '{a}'. Use one of: in, loc, out") from None


def compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    """All ordered tuples of `parts` nonnegative integers summing to `total`."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def _nodes(label: Label, order: int, p: int) -> List[TreeNode]:
    if order == 0:
        return [TreeNode(label)]
    out = []
    for orders in compositions(order - 1, p - 1):
        options = [_nodes(extend_label(label, i + 1), sub, p) for i, sub in enumerate(orders)]
        for children in product(*options):
            out.append(TreeNode(label, tuple(children)))
    return out


def expand_field(a: Union[str, FieldType], sigma: int, p: int) -> List[Tree]:
    """
    Enumerate all labeled trees of the field phi^a at order sigma.

    Args:
        a: Field type, one of in, loc, out.
        sigma: Perturbative order (number of internal vertices).
        p: Power of the interaction phi^p/p; every vertex has p-1 children.

    Returns:
        Trees in canonical order (lexicographic on their vertex labels). The in
        field has only the bare leaf at sigma = 0 and no trees above.

    Raises:
        ConfigError: If sigma < 0, p < 3 or the field type is unknown.
    """
    a = _field_type(a)
    if sigma < 0 or p < 3:
        raise ConfigError(f"expand_field needs sigma >= 0 and p >= 3, got sigma={sigma}, p={p}")
    if a == FieldType.IN and sigma > 0:
        return []
    trees = [Tree(a, sigma, p, node) for node in _nodes((), sigma, p)]
    trees.sort(key=Tree.sort_key)
    logger.debug("Expanded %s field at order %d (p=%d): %d trees", a.value, sigma, p, len(trees))
    return trees


@lru_cache(maxsize=None)
def _count(sigma: int, p: int) -> int:
    if sigma == 0:
        return 1
    total = 0
    for orders in compositions(sigma - 1, p - 1):
        term = 1
        for sub in orders:
            term *= _count(sub, p)
        total += term
    return total


def tree_count(a: Union[str, FieldType], sigma: int, p: int) -> int:
    """N(sigma) = sum over sigma_1+...+sigma_{p-1} = sigma-1 of prod N(sigma_i)."""
    a = _field_type(a)
    if a == FieldType.IN and sigma > 0:
        return 0
    return _count(sigma, p)


def leaf_count(sigma: int, p: int) -> int:
    return sigma * (p - 2) + 1


def format_tree(tree: Tree) -> str:
    """Indented text rendering, one node per line."""
    lines = [f"phi^{tree.root_type.value}_{tree.order} (p={tree.p}, trunk={tree.trunk or '-'})"]
    for node in tree.root.walk():
        depth = len(node.label)
        kind = "leaf" if node.is_leaf else "vertex"
        lines.append("  " * (depth + 1) + f"{format_label(node.label)} {kind}")
    return "\n".join(lines)


def tree_to_dot(tree: Tree, name: str = "tree") -> str:
    """DOT description; edges point toward the root, like the causal flow."""
    lines = [f"digraph {name} {{", '  x [shape=box, label="x"];']
    for node in tree.root.walk():
        node_id = "n_" + "_".join(str(part) for part in node.label) if node.label else "n_root"
        shape = "point" if node.is_leaf else "circle"
        lines.append(f'  {node_id} [shape={shape}, label="{format_label(node.label)}"];')
    root_id = "n_root"
    if tree.trunk is not None:
        lines.append(f'  {root_id} -> x [label="{tree.trunk}"];')
    else:
        lines.append(f"  {root_id} -> x;")
    for node in tree.root.walk():
        parent_id = "n_" + "_".join(str(part) for part in node.label) if node.label else "n_root"
        for child in node.children:
            child_id = "n_" + "_".join(str(part) for part in child.label)
            edge = "" if child.is_leaf else ' [label="Gr"]'
            lines.append(f"  {child_id} -> {parent_id}{edge};")
    lines.append("}")
    return "\n".join(lines)
