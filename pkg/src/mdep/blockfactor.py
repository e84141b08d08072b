"""Sources, block factors and sample paths.

A block factor turns an i.i.d. source ``xi_1, xi_2, ...`` into the
stationary sequence ``X_k = f(xi_k, ..., xi_{k+ell-1})``. Finite sources
carry a dense lookup table indexed in mixed radix (last coordinate
fastest); everything else is a vectorized callable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import rng as _rng
from .errors import ArityError, DomainError, SpecFileError

PROB_TOL = 1e-12
# max number of float cells materialized at once while simulating
BLOCK_CELLS = 4_000_000

COMPONENTS = ("uniform", "normal")


def _is_rational(x) -> bool:
    return isinstance(x, Rational) and not isinstance(x, bool)


@dataclass(frozen=True, eq=False)
class SourceDistribution:
    """Law of one source value ``xi_k``.

    ``kind`` is one of ``"finite"``, ``"uniform"`` (on (0, 1)),
    ``"composite"`` (a tuple of independent uniform/normal coordinates) or
    ``"sampler"`` (host-supplied draw function, for laws such as Poisson
    offspring that are not finite).
    """

    kind: str
    values: tuple = ()
    probs: tuple = ()
    components: tuple = ()
    sampler: Callable[[np.random.Generator, tuple], np.ndarray] | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind == "finite":
            if len(self.values) == 0 or len(self.values) != len(self.probs):
                raise DomainError("finite source needs matching non-empty values and probs")
            if len(set(self.values)) != len(self.values):
                raise DomainError("atom values must be pairwise distinct")
            if any(not p > 0 for p in self.probs):
                raise DomainError("atom probabilities must be strictly positive")
            if all(_is_rational(p) for p in self.probs):
                if sum(self.probs) != 1:
                    raise DomainError(f"atom probabilities sum to {sum(self.probs)}, not 1")
            elif abs(math.fsum(float(p) for p in self.probs) - 1.0) > PROB_TOL:
                raise DomainError("atom probabilities must sum to 1 within 1e-12")
        elif self.kind == "composite":
            if not self.components or any(c not in COMPONENTS for c in self.components):
                raise DomainError(f"composite components must be drawn from {COMPONENTS}")
        elif self.kind == "sampler":
            if self.sampler is None:
                raise DomainError("sampler source needs a sampler callable")
        elif self.kind != "uniform":
            raise DomainError(f"unknown source kind {self.kind!r}")

    @classmethod
    def finite(cls, values: Sequence, probs: Sequence, name: str = "") -> "SourceDistribution":
        return cls("finite", tuple(values), tuple(probs), name=name)

    @classmethod
    def bernoulli(cls, p=Fraction(1, 2)) -> "SourceDistribution":
        return cls.finite((0, 1), (1 - p, p), name=f"bernoulli({p})")

    @classmethod
    def uniform_on(cls, values: Sequence) -> "SourceDistribution":
        k = len(values)
        return cls.finite(values, [Fraction(1, k)] * k)

    @classmethod
    def uniform(cls) -> "SourceDistribution":
        return cls("uniform", name="uniform(0,1)")

    @classmethod
    def composite(cls, *components: str) -> "SourceDistribution":
        return cls("composite", components=tuple(components), name="x".join(components))

    @classmethod
    def from_sampler(cls, sampler, name: str = "") -> "SourceDistribution":
        return cls("sampler", sampler=sampler, name=name)

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    @property
    def is_exact(self) -> bool:
        return self.is_finite and all(_is_rational(p) for p in self.probs)

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def dimension(self) -> int:
        return len(self.components) if self.kind == "composite" else 1

    def prob_array(self) -> np.ndarray:
        return np.array([float(p) for p in self.probs])

    def value_array(self) -> np.ndarray:
        return np.array([float(v) for v in self.values])

    def index_of(self, value) -> int:
        try:
            return self.values.index(value)
        except ValueError:
            raise DomainError(f"{value!r} is not an atom of the source") from None

    def draw_indices(self, gen: np.random.Generator, shape) -> np.ndarray:
        if not self.is_finite:
            raise DomainError("only finite sources have atom indices")
        cdf = np.cumsum(self.prob_array())
        cdf[-1] = 1.0
        return np.searchsorted(cdf, gen.random(shape), side="right").astype(np.intp)

    def draw(self, gen: np.random.Generator, shape) -> np.ndarray:
        """Draw source values; composite sources add a trailing coordinate axis."""
        shape = tuple(np.atleast_1d(shape))
        if self.kind == "finite":
            return self.value_array()[self.draw_indices(gen, shape)]
        if self.kind == "uniform":
            return gen.random(shape)
        if self.kind == "composite":
            cols = [gen.random(shape) if c == "uniform" else gen.standard_normal(shape)
                    for c in self.components]
            return np.stack(cols, axis=-1)
        return np.asarray(self.sampler(gen, shape))

    def describe(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind}
        if self.name:
            out["name"] = self.name
        if self.is_finite:
            out["values"] = [_jsonable(v) for v in self.values]
            out["probs"] = [_jsonable(p) for p in self.probs]
        if self.kind == "composite":
            out["components"] = list(self.components)
        return out


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else int(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


@dataclass(frozen=True, eq=False)
class BlockFactor:
    """Window function ``f`` of length ``ell``.

    Table factors hold ``table`` with shape ``(K,) * ell`` over ``alphabet``.
    Function factors hold ``func``, which maps an array of windows with
    shape ``(..., ell)`` (or ``(..., ell, d)`` for composite sources) to
    values of shape ``(...)``.
    ``locally_constant`` declares that ``func`` is constant near every
    window with distinct coordinates (true for order-pattern indicators).
    """

    ell: int
    table: np.ndarray | None = None
    alphabet: tuple = ()
    func: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""
    locally_constant: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.ell < 1:
            raise DomainError("window length ell must be >= 1")
        if (self.table is None) == (self.func is None):
            raise DomainError("give exactly one of table or func")
        if self.table is not None:
            k = len(self.alphabet)
            if self.table.shape != (k,) * self.ell:
                raise DomainError(
                    f"table must have {k}^{self.ell} entries in shape {(k,) * self.ell}, "
                    f"got {self.table.shape}")
            if self.table.dtype != object and not np.all(np.isfinite(self.table)):
                raise DomainError("table entries must be finite")

    @property
    def m(self) -> int:
        return self.ell - 1

    @property
    def is_table(self) -> bool:
        return self.table is not None

    @property
    def is_exact(self) -> bool:
        return self.is_table and self.table.dtype == object

    @classmethod
    def from_table(cls, alphabet: Sequence, ell: int, table, name: str = "") -> "BlockFactor":
        """Build from a flat or nested table in mixed-radix order."""
        entries = list(np.asarray(table, dtype=object).ravel())
        k = len(alphabet)
        if len(entries) != k**ell:
            raise DomainError(f"table needs {k}**{ell} = {k**ell} entries, got {len(entries)}")
        if all(_is_rational(e) for e in entries):
            arr = np.empty(len(entries), dtype=object)
            arr[:] = [Fraction(e) for e in entries]
        else:
            arr = np.array([float(e) for e in entries])
        return cls(ell, table=arr.reshape((k,) * ell), alphabet=tuple(alphabet), name=name)

    @classmethod
    def tabulate(cls, fn: Callable, alphabet: Sequence, ell: int, name: str = "") -> "BlockFactor":
        """Tabulate a scalar function of ``ell`` source values."""
        alphabet = tuple(alphabet)
        grid = np.array(np.meshgrid(*[np.arange(len(alphabet))] * ell, indexing="ij"))
        idx = grid.reshape(ell, -1).T
        vals = [fn(*(alphabet[i] for i in row)) for row in idx]
        return cls.from_table(alphabet, ell, vals, name=name)

    @classmethod
    def from_function(cls, func, ell: int, name: str = "", locally_constant: bool = False,
                      **meta) -> "BlockFactor":
        return cls(ell, func=func, name=name, locally_constant=locally_constant, meta=meta)

    def float_table(self) -> np.ndarray:
        return self.table.astype(float)

    def check_source(self, src: SourceDistribution) -> None:
        if self.is_table:
            if not src.is_finite or tuple(src.values) != self.alphabet:
                raise DomainError("table factor alphabet does not match the source atoms")

    def encode(self, idx: np.ndarray) -> np.ndarray:
        """Mixed-radix codes of index windows with shape ``(..., ell)``."""
        k = len(self.alphabet)
        weights = k ** np.arange(self.ell - 1, -1, -1)
        return idx @ weights

    def evaluate(self, windows) -> np.ndarray:
        """Vectorized evaluation on value windows (last axis = window)."""
        if self.is_table:
            w = np.asarray(windows, dtype=object)
            idx = np.vectorize(self._atom_index, otypes=[np.intp])(w)
            return self.float_table()[tuple(np.moveaxis(idx, -1, 0))]
        return np.asarray(self.func(np.asarray(windows, dtype=float)), dtype=float)

    def _atom_index(self, v) -> int:
        for i, a in enumerate(self.alphabet):
            if a == v:
                return i
        raise DomainError(f"{v!r} is not an atom of the factor alphabet")


def evaluate_window(bf: BlockFactor, window: Sequence):
    """Return ``f(window)``; exact tables return the stored (rational) entry."""
    w = list(window) if not isinstance(window, np.ndarray) else window
    if len(w) != bf.ell:
        raise ArityError(f"window has length {len(w)}, factor needs {bf.ell}")
    if bf.is_table:
        idx = tuple(bf._atom_index(v) for v in w)
        out = bf.table[idx]
        return out if bf.is_exact else float(out)
    return float(bf.func(np.asarray([w], dtype=float))[0])


@dataclass(frozen=True, eq=False)
class SamplePath:
    seed: int
    n: int
    draws: np.ndarray
    values: np.ndarray
    sums: np.ndarray

    @property
    def total(self) -> float:
        return float(self.sums[-1])


def windows_of(draws: np.ndarray, ell: int, count: int | None = None) -> np.ndarray:
    """Sliding windows along axis 1 of ``draws`` (rows, length[, d]).

    Returns shape (rows, count, ell[, d]); no copy is made.
    """
    v = sliding_window_view(draws, ell, axis=1)
    if draws.ndim == 3:
        v = np.swapaxes(v, -1, -2)
    return v if count is None else v[:, :count]


def factor_values(bf: BlockFactor, draws: np.ndarray, count: int, indices: bool = False) -> np.ndarray:
    """Values X_1..X_count for each row of ``draws``.

    With ``indices=True`` the draws are atom indices of a finite source.
    """
    if bf.is_table and indices:
        codes = sum(draws[:, t:t + count] * len(bf.alphabet) ** (bf.ell - 1 - t)
                    for t in range(bf.ell))
        return bf.float_table().ravel()[codes]
    if bf.is_table:
        raise DomainError("table factors are evaluated on atom indices")
    return np.asarray(bf.func(windows_of(draws, bf.ell, count)), dtype=float)


def sample_path(bf: BlockFactor, src: SourceDistribution, n: int, seed: int) -> SamplePath:
    """Draw one path of length ``n`` from the stream seeded by ``seed``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    bf.check_source(src)
    gen = _rng.generator(seed)
    length = n + bf.ell - 1
    if bf.is_table:
        idx = src.draw_indices(gen, (1, length))
        x = factor_values(bf, idx, n, indices=True)[0]
        draws = np.asarray(src.values, dtype=object)[idx[0]] if src.is_exact else src.value_array()[idx[0]]
    else:
        raw = src.draw(gen, (1, length))
        x = factor_values(bf, raw, n)[0]
        draws = raw[0]
    return SamplePath(seed=seed, n=n, draws=draws, values=x, sums=np.cumsum(x))


def simulate_sums(factors: Sequence[BlockFactor], src: SourceDistribution, n: int,
                  reps: int, seed: int, workers: int = 1, stream: int = 0) -> np.ndarray:
    """S_n for ``reps`` independent paths, coupled across ``factors``.

    Returns shape ``(reps, len(factors))``; every factor reads the same
    source draws within a replica.
    """
    for bf in factors:
        bf.check_source(src)
    ell = max(bf.ell for bf in factors)
    length = n + ell - 1
    use_idx = any(bf.is_table for bf in factors)
    cells = length * src.dimension * ell
    block = max(1, BLOCK_CELLS // max(cells, 1))

    def chunk(gen, size):
        out = np.empty((size, len(factors)))
        for lo in range(0, size, block):
            rows = min(block, size - lo)
            if use_idx:
                draws = src.draw_indices(gen, (rows, length))
            else:
                draws = src.draw(gen, (rows, length))
            for j, bf in enumerate(factors):
                if bf.is_table:
                    x = factor_values(bf, draws, n, indices=True)
                else:
                    vals = src.value_array()[draws] if use_idx else draws
                    x = factor_values(bf, vals, n)
                out[lo:lo + rows, j] = x.sum(axis=1)
        return out

    parts = _rng.run_chunks(chunk, reps, seed, workers=workers, stream=stream)
    return np.concatenate(parts, axis=0)


# --- specification files -------------------------------------------------

def _number(x, fld: str):
    if isinstance(x, bool):
        raise SpecFileError("booleans are not numbers", field=fld)
    if isinstance(x, int):
        return x
    if isinstance(x, float):
        return x
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            raise SpecFileError(f"cannot parse {x!r} as a number", field=fld) from None
    raise SpecFileError(f"expected a number, got {type(x).__name__}", field=fld)


def parse_source(obj: Any, fld: str = "source") -> SourceDistribution:
    if not isinstance(obj, dict):
        raise SpecFileError("expected an object", field=fld)
    kind = obj.get("kind", "finite")
    if kind == "finite":
        if "atoms" in obj:
            atoms = obj["atoms"]
            if not isinstance(atoms, list) or not all(isinstance(a, list) and len(a) == 2 for a in atoms):
                raise SpecFileError("atoms must be a list of [value, probability] pairs", field=f"{fld}.atoms")
            values = [_number(a[0], f"{fld}.atoms[{i}][0]") for i, a in enumerate(atoms)]
            probs = [_number(a[1], f"{fld}.atoms[{i}][1]") for i, a in enumerate(atoms)]
        else:
            for key in ("values", "probs"):
                if not isinstance(obj.get(key), list):
                    raise SpecFileError("missing list", field=f"{fld}.{key}")
            values = [_number(v, f"{fld}.values[{i}]") for i, v in enumerate(obj["values"])]
            probs = [_number(p, f"{fld}.probs[{i}]") for i, p in enumerate(obj["probs"])]
        try:
            return SourceDistribution.finite(values, probs, name=obj.get("name", ""))
        except DomainError as exc:
            raise SpecFileError(str(exc), field=fld) from None
    if kind == "uniform":
        return SourceDistribution.uniform()
    if kind == "composite":
        comps = obj.get("components")
        if not isinstance(comps, list):
            raise SpecFileError("missing list", field=f"{fld}.components")
        try:
            return SourceDistribution.composite(*comps)
        except DomainError as exc:
            raise SpecFileError(str(exc), field=f"{fld}.components") from None
    raise SpecFileError(f"unknown source kind {kind!r}", field=f"{fld}.kind")


def parse_factor_spec(text: str) -> tuple[BlockFactor, SourceDistribution]:
    """Parse the JSON factor format documented in docs/formats.md."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecFileError(exc.msg, line=exc.lineno) from None
    if not isinstance(obj, dict):
        raise SpecFileError("top level must be an object")
    if "catalog" in obj:
        from .catalog import build

        try:
            return build(obj["catalog"], obj.get("params", {}))
        except KeyError:
            raise SpecFileError(f"unknown catalog entry {obj['catalog']!r}", field="catalog") from None
    if "source" not in obj:
        raise SpecFileError("missing", field="source")
    src = parse_source(obj["source"])
    ell = obj.get("ell")
    if not isinstance(ell, int) or isinstance(ell, bool) or ell < 1:
        raise SpecFileError("must be a positive integer", field="ell")
    if not src.is_finite:
        raise SpecFileError("table factors need a finite source", field="source.kind")
    table = obj.get("table")
    if not isinstance(table, list):
        raise SpecFileError("missing list", field="table")
    entries = [_number(t, f"table[{i}]") for i, t in enumerate(table)]
    try:
        bf = BlockFactor.from_table(src.values, ell, entries, name=obj.get("name", ""))
    except DomainError as exc:
        raise SpecFileError(str(exc), field="table") from None
    return bf, src


def load_factor_spec(path: str | Path) -> tuple[BlockFactor, SourceDistribution]:
    return parse_factor_spec(Path(path).read_text())


def dump_factor_spec(bf: BlockFactor, src: SourceDistribution) -> str:
    if not bf.is_table:
        raise DomainError("only table factors serialize to the factor file format")
    obj = {"source": src.describe(), "ell": bf.ell,
           "table": [_jsonable(v) for v in bf.table.ravel()]}
    if bf.name:
        obj["name"] = bf.name
    return json.dumps(obj, indent=2)
