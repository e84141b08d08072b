"""Tree encodings, offspring laws and linear subtree statistics.

Binary trees are identified with their preorder extended code over
{1, 0} (1 = node, 0 = empty slot); ordered trees with their depth-first
degree sequence. Encoding equality is tree isomorphism everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, SpecFileError


@dataclass(frozen=True, order=True)
class BinaryTree:
    code: str

    def __post_init__(self):
        if set(self.code) - {"0", "1"}:
            raise DomainError(f"binary tree code {self.code!r} must use only 0 and 1")
        if complete_length(self.code, 0) != len(self.code):
            raise DomainError(f"{self.code!r} is not a complete preorder code")

    @classmethod
    def empty(cls) -> "BinaryTree":
        return cls("0")

    @classmethod
    def leaf(cls) -> "BinaryTree":
        return cls("100")

    @classmethod
    def node(cls, left: "BinaryTree", right: "BinaryTree") -> "BinaryTree":
        return cls("1" + left.code + right.code)

    @classmethod
    def right_path(cls, k: int) -> "BinaryTree":
        return cls("10" * k + "0")

    @property
    def size(self) -> int:
        return self.code.count("1")

    @property
    def is_empty(self) -> bool:
        return self.code == "0"

    def children(self) -> tuple["BinaryTree", "BinaryTree"]:
        if self.is_empty:
            raise DomainError("the empty tree has no children")
        cut = 1 + complete_length(self.code, 1)
        return BinaryTree(self.code[1:cut]), BinaryTree(self.code[cut:])

    def fringe_count(self, pattern: "BinaryTree") -> int:
        """Number of nodes whose fringe subtree equals ``pattern``.

        Complete codes are prefix-free, so the subtree rooted at a node
        equals ``pattern`` iff the code continues with ``pattern.code``.
        """
        if pattern.is_empty:
            raise DomainError("fringe patterns must be non-empty")
        c, p = self.code, pattern.code
        return sum(1 for i, ch in enumerate(c) if ch == "1" and c.startswith(p, i))

    def intervals(self) -> list[tuple[int, int, int]]:
        """(root position, lo, hi) in inorder positions for every node's subtree."""
        out = []

        def walk(code: str, offset: int) -> None:
            if code == "0":
                return
            left, right = BinaryTree(code).children()
            root = offset + left.size
            out.append((root, offset, offset + BinaryTree(code).size - 1))
            walk(left.code, offset)
            walk(right.code, root + 1)

        walk(self.code, 0)
        return out

    def heap_ranks(self) -> list[int]:
        """A rank sequence (inorder) whose min-rooted Cartesian tree is this tree."""
        ranks = [0] * self.size
        counter = 0

        def walk(code: str, offset: int) -> None:
            nonlocal counter
            if code == "0":
                return
            left, right = BinaryTree(code).children()
            root = offset + left.size
            ranks[root] = counter
            counter += 1
            walk(left.code, offset)
            walk(right.code, root + 1)

        walk(self.code, 0)
        return ranks

    def __str__(self) -> str:
        return self.code


def complete_length(code: str, start: int) -> int:
    """Length of the complete preorder code beginning at ``start`` (-1 if none)."""
    need = 1
    for i in range(start, len(code)):
        need += 1 if code[i] == "1" else -1
        if need == 0:
            return i - start + 1
    return -1


def all_binary_trees(k: int) -> list[BinaryTree]:
    if k == 0:
        return [BinaryTree.empty()]
    out = []
    for i in range(k):
        for left in all_binary_trees(i):
            for right in all_binary_trees(k - 1 - i):
                out.append(BinaryTree.node(left, right))
    return sorted(out)


def cartesian_code(seq: Sequence[float]) -> BinaryTree:
    """Shape of the min-rooted Cartesian tree of ``seq`` (root = argmin)."""
    n = len(seq)
    left = [-1] * n
    right = [-1] * n
    stack: list[int] = []
    for i in range(n):
        last = -1
        while stack and seq[stack[-1]] > seq[i]:
            last = stack.pop()
        left[i] = last
        if stack:
            right[stack[-1]] = i
        stack.append(i)
    if not stack:
        return BinaryTree.empty()
    return BinaryTree(_preorder(stack[0], left, right))


def _preorder(root: int, left: list[int], right: list[int]) -> str:
    parts = []
    todo = [root]
    while todo:
        v = todo.pop()
        if v == -1:
            parts.append("0")
            continue
        parts.append("1")
        todo.append(right[v])
        todo.append(left[v])
    return "".join(parts)


@dataclass(frozen=True, order=True)
class OrderedTree:
    degrees: tuple

    def __post_init__(self):
        d = tuple(int(x) for x in self.degrees)
        object.__setattr__(self, "degrees", d)
        if not d or any(x < 0 for x in d):
            raise DomainError("degree sequence must be non-empty and nonnegative")
        if not is_tree_sequence(d):
            raise DomainError(f"{d} is not the depth-first degree sequence of a tree")

    @classmethod
    def parse(cls, text: str) -> "OrderedTree":
        try:
            return cls(tuple(int(t) for t in text.split(",")))
        except ValueError:
            raise DomainError(f"cannot parse degree sequence {text!r}") from None

    @classmethod
    def leaf(cls) -> "OrderedTree":
        return cls((0,))

    @property
    def size(self) -> int:
        return len(self.degrees)

    @property
    def code(self) -> str:
        return ",".join(map(str, self.degrees))

    def fringe_count(self, pattern: "OrderedTree") -> int:
        d, p = self.degrees, pattern.degrees
        return sum(1 for i in range(len(d) - len(p) + 1) if d[i:i + len(p)] == p)

    def __str__(self) -> str:
        return self.code


def is_tree_sequence(d: Sequence[int]) -> bool:
    """Lukasiewicz test: partial sums of (d_i - 1) stay >= 0 and end at -1."""
    s = 0
    for i, x in enumerate(d):
        s += x - 1
        if s < 0:
            return i == len(d) - 1 and s == -1
    return False


def all_ordered_trees(k: int, support: Sequence[int] | None = None) -> list[OrderedTree]:
    """Every ordered tree with ``k`` nodes (degrees restricted to ``support``)."""
    from itertools import product

    alphabet = [d for d in (support if support is not None else range(k)) if d < k]
    return sorted(OrderedTree(d) for d in product(alphabet, repeat=k) if is_tree_sequence(d))


@dataclass(frozen=True)
class OffspringDistribution:
    """Offspring law p_k = P(xi = k).

    ``probs`` is the (possibly truncated and renormalized) finite table used
    for exact computations. Presets sample from the untruncated law and
    record the mass cut off in ``truncated_mass``.
    """

    probs: tuple
    preset: str | None = None
    truncate: int | None = None
    truncated_mass: float = 0.0

    def __post_init__(self):
        p = self.probs
        if len(p) < 1 or any(x < 0 for x in p):
            raise DomainError("offspring probabilities must be nonnegative")
        if abs(math.fsum(float(x) for x in p) - 1.0) > 1e-12:
            raise DomainError("offspring probabilities must sum to 1")
        if not p[0] > 0:
            raise DomainError("p_0 must be positive")
        if self.preset is None and abs(self.mean - 1.0) > 1e-9:
            raise DomainError(f"offspring mean is {self.mean}, criticality needs 1")

    @classmethod
    def from_probs(cls, probs: Sequence) -> "OffspringDistribution":
        probs = list(probs)
        while len(probs) > 1 and probs[-1] == 0:
            probs.pop()
        return cls(tuple(probs))

    @classmethod
    def poisson1(cls, truncate: int = 30) -> "OffspringDistribution":
        raw = [math.exp(-1.0) / math.factorial(k) for k in range(truncate + 1)]
        kept = math.fsum(raw)
        tail = math.fsum(math.exp(-1.0 - math.lgamma(k + 1)) for k in range(truncate + 1, truncate + 200))
        return cls(tuple(x / kept for x in raw), "poisson1", truncate, tail)

    @classmethod
    def geom_half(cls, truncate: int = 30) -> "OffspringDistribution":
        raw = [0.5 ** (k + 1) for k in range(truncate + 1)]
        kept = math.fsum(raw)
        return cls(tuple(x / kept for x in raw), "geom-half", truncate, 0.5 ** (truncate + 1))

    @classmethod
    def parse(cls, obj) -> "OffspringDistribution":
        """Accept {"p": [...]}, a preset name, or {"preset": name, "truncate": k}."""
        if isinstance(obj, str):
            obj = {"preset": obj}
        if not isinstance(obj, dict):
            raise SpecFileError("offspring must be an object or preset name", field="offspring")
        if "p" in obj:
            try:
                from fractions import Fraction
                return cls.from_probs([Fraction(x) if isinstance(x, str) else x for x in obj["p"]])
            except (DomainError, ValueError) as exc:
                raise SpecFileError(str(exc), field="offspring.p") from None
        name = obj.get("preset")
        trunc = obj.get("truncate", 30)
        if name == "poisson1":
            return cls.poisson1(trunc)
        if name == "geom-half":
            return cls.geom_half(trunc)
        raise SpecFileError(f"unknown offspring preset {name!r}", field="offspring.preset")

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(k for k, x in enumerate(self.probs) if x > 0)

    @property
    def mean(self) -> float:
        """Mean of the finite table (the truncated law for presets)."""
        return math.fsum(k * float(x) for k, x in enumerate(self.probs))

    @property
    def variance(self) -> float:
        return math.fsum(k * k * float(x) for k, x in enumerate(self.probs)) - self.mean ** 2

    @property
    def approximate(self) -> bool:
        """Exact computations use a truncated table."""
        return self.preset is not None

    def float_probs(self) -> np.ndarray:
        return np.array([float(x) for x in self.probs])

    def head_probs(self) -> np.ndarray:
        """Untruncated probabilities of 0..len(probs)-1 (sum < 1 for presets)."""
        p = self.float_probs()
        return p if self.preset is None else p * (1.0 - self.truncated_mass)

    def sample_tail(self, gen: np.random.Generator, size: int) -> np.ndarray:
        """Draw from the untruncated law conditioned on exceeding the table."""
        from scipy import stats

        k = len(self.probs)
        law = stats.poisson(1.0) if self.preset == "poisson1" else stats.geom(0.5, loc=-1)
        support = np.arange(k, k + 400)
        logw = law.logpmf(support) - law.logpmf(k)
        w = np.exp(logw[logw > -60])
        return gen.choice(support[:len(w)], size=size, p=w / w.sum())

    def sample(self, gen: np.random.Generator, shape) -> np.ndarray:
        """Draw from the untruncated law."""
        if self.preset == "poisson1":
            return gen.poisson(1.0, shape)
        if self.preset == "geom-half":
            return gen.geometric(0.5, shape) - 1
        cdf = np.cumsum(self.float_probs())
        cdf[-1] = 1.0
        return np.searchsorted(cdf, gen.random(shape), side="right")

    def describe(self) -> dict:
        if self.preset is not None:
            return {"preset": self.preset, "truncate": self.truncate,
                    "truncated_mass": self.truncated_mass}
        return {"p": [float(x) for x in self.probs]}


@dataclass(frozen=True)
class LinearSubtreeStatistic:
    """F = sum_j a_j n_{T_j}; trees kept sorted by (size, code)."""

    trees: tuple
    coefficients: tuple = field(default=())

    def __post_init__(self):
        trees = tuple(self.trees)
        coeffs = tuple(self.coefficients) or (1,) * len(trees)
        if len(trees) != len(coeffs) or not trees:
            raise DomainError("need one coefficient per tree and at least one tree")
        kinds = {type(t) for t in trees}
        if len(kinds) != 1:
            raise DomainError("all trees must be of the same kind")
        if len({t.code for t in trees}) != len(trees):
            raise DomainError("trees must be pairwise distinct")
        if all(a == 0 for a in coeffs):
            raise DomainError("coefficients must not all be zero")
        if any(t.size < 1 for t in trees):
            raise DomainError("trees must be non-empty")
        pairs = sorted(zip(trees, coeffs), key=lambda tc: (tc[0].size, tc[0].code))
        object.__setattr__(self, "trees", tuple(t for t, _ in pairs))
        object.__setattr__(self, "coefficients", tuple(a for _, a in pairs))

    @classmethod
    def single(cls, tree) -> "LinearSubtreeStatistic":
        return cls((tree,), (1,))

    @property
    def max_size(self) -> int:
        return max(t.size for t in self.trees)

    def nonzero(self) -> "LinearSubtreeStatistic":
        keep = [(t, a) for t, a in zip(self.trees, self.coefficients) if a != 0]
        return LinearSubtreeStatistic(tuple(t for t, _ in keep), tuple(a for _, a in keep))

    def evaluate(self, tree) -> float:
        return sum(a * tree.fringe_count(t) for t, a in zip(self.trees, self.coefficients))


def parse_binary_tree(text: str) -> BinaryTree:
    return BinaryTree(text.strip())


def parse_ordered_tree(text: str) -> OrderedTree:
    return OrderedTree.parse(text.strip())
