"""Incremental 2-d tree for point membership queries within a radius.

Built for the stroke classifier, which asks "did any earlier event happen
at (or within tolerance of) this canvas position?" while sweeping a stream
in time order. Points are inserted as they become "earlier"; the tree is
unbalanced, which is fine for the short, spatially spread event traces it
indexes.
"""
from __future__ import annotations


class _Node:
    __slots__ = ("x", "y", "left", "right")

    def __init__(self, x: float, y: float):
        self.x = x
        self.y = y
        self.left: _Node | None = None
        self.right: _Node | None = None


class KDTree2:
    def __init__(self):
        self._root: _Node | None = None
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def insert(self, x: float, y: float) -> None:
        self._size += 1
        if self._root is None:
            self._root = _Node(x, y)
            return
        node = self._root
        axis = 0
        while True:
            key = node.x if axis == 0 else node.y
            value = x if axis == 0 else y
            if value < key:
                if node.left is None:
                    node.left = _Node(x, y)
                    return
                node = node.left
            else:
                if node.right is None:
                    node.right = _Node(x, y)
                    return
                node = node.right
            axis ^= 1

    def any_within(self, x: float, y: float, radius: float = 0.0) -> bool:
        """True when some stored point lies within ``radius`` (Euclidean).

        radius 0 degenerates to exact coordinate equality.
        """
        r2 = radius * radius
        stack = [(self._root, 0)]
        while stack:
            node, axis = stack.pop()
            if node is None:
                continue
            dx = x - node.x
            dy = y - node.y
            if dx * dx + dy * dy <= r2:
                return True
            key = node.x if axis == 0 else node.y
            value = x if axis == 0 else y
            diff = value - key
            # the near side always qualifies; the far side only when the
            # splitting plane is within the query radius
            if diff < 0:
                stack.append((node.left, axis ^ 1))
                if diff * diff <= r2:
                    stack.append((node.right, axis ^ 1))
            else:
                stack.append((node.right, axis ^ 1))
                if diff * diff <= r2:
                    stack.append((node.left, axis ^ 1))
        return False
