"""Heavy-hex topologies with the three-frequency allocation pattern.

Layout
------
A lattice with ``R`` dense rows of ``W`` qubits.  Dense row ``r`` is a path;
odd columns are ``F2`` and even column ``c`` is ``F0`` when
``(c // 2 + r)`` is even and ``F1`` otherwise.  Below every dense row sits a
sparse row of ``F2`` connectors at columns ``c = 0 (mod 4)`` (``r`` even) or
``c = 2 (mod 4)`` (``r`` odd); a connector joins column ``c`` of dense rows
``r`` and ``r + 1``.  Connectors under the last dense row dangle: they are
the bottom link stubs.  The last qubit of every dense row (odd column, so
``F2``) is a right link stub.

With ``R`` even and ``W`` a multiple of 4 the pattern is periodic, so a
``k x m`` grid of ``(R, W)`` blocks is exactly the ``(k R, m W)`` lattice.
A block holds ``R * W * 5 / 4`` qubits, which covers every supported
chiplet size without trimming.

Qubit ids are row-major over the global layout: dense row ``r`` left to
right, then sparse row ``r`` left to right.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from pathlib import Path
from typing import Iterable

import networkx as nx
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path


class FrequencyClass(IntEnum):
    F0 = 0
    F1 = 1
    F2 = 2


DENSE = "d"
SPARSE = "s"

SUPPORTED_CHIPLET_SIZES = (10, 20, 40, 60, 90, 120, 160, 200, 250)

# size -> (dense rows, dense-row length).  Squarest block per size with
# rows even and length divisible by 4.
CHIPLET_LAYOUTS: dict[int, tuple[int, int]] = {
    10: (2, 4),
    20: (2, 8),
    40: (4, 8),
    60: (4, 12),
    90: (6, 12),
    120: (6, 16),
    160: (8, 16),
    200: (8, 20),
    250: (10, 20),
}

DEFAULT_QUBIT_CAP = 500

Edge = tuple[int, int]
Site = tuple[str, int, int]


def _sorted_edge(a: int, b: int) -> Edge:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class Topology:
    """Qubit coupling graph with frequency classes and chiplet bookkeeping.

    ``controls[i]`` is the cross-resonance control qubit of ``edges[i]``.
    ``sites`` carries the (kind, row, col) layout coordinate of each qubit;
    hand-built topologies may leave it empty.
    """

    qubit_count: int
    edges: tuple[Edge, ...]
    class_of: tuple[FrequencyClass, ...]
    controls: tuple[int, ...]
    chiplet_of: tuple[int, ...]
    link_edges: frozenset[Edge] = frozenset()
    sites: tuple[Site, ...] = ()
    right_stubs: tuple[int, ...] = ()
    bottom_stubs: tuple[int, ...] = ()
    block: tuple[int, int] = (0, 0)
    grid: tuple[int, int] = (1, 1)

    def __post_init__(self):
        n = self.qubit_count
        if len(self.class_of) != n or len(self.chiplet_of) != n:
            raise ValueError("class_of and chiplet_of must cover every qubit")
        if len(self.controls) != len(self.edges):
            raise ValueError("one control per edge required")
        if self.sites and len(self.sites) != n:
            raise ValueError("sites must cover every qubit when given")
        seen = set()
        for (a, b), c in zip(self.edges, self.controls):
            if not (0 <= a < b < n):
                raise ValueError(f"edge {(a, b)} is not a sorted pair of qubit ids < {n}")
            if (a, b) in seen:
                raise ValueError(f"duplicate edge {(a, b)}")
            seen.add((a, b))
            if c not in (a, b):
                raise ValueError(f"control {c} is not an endpoint of edge {(a, b)}")
        if not self.link_edges <= seen:
            raise ValueError("link_edges must be a subset of edges")

    @classmethod
    def from_edges(
        cls,
        classes: Iterable[int],
        edges: Iterable[Edge],
        chiplet_of: Iterable[int] | None = None,
        controls: dict[Edge, int] | None = None,
    ) -> "Topology":
        """Hand-build a topology.

        Controls default to the higher-class endpoint (lower id on ties);
        link edges are inferred from ``chiplet_of``.
        """
        class_of = tuple(FrequencyClass(c) for c in classes)
        n = len(class_of)
        chip = tuple(chiplet_of) if chiplet_of is not None else (0,) * n
        es = sorted({_sorted_edge(a, b) for a, b in edges})
        ctl = []
        for a, b in es:
            if controls and (a, b) in controls:
                ctl.append(controls[(a, b)])
            else:
                ctl.append(b if class_of[b] > class_of[a] else a)
        links = frozenset(e for e in es if chip[e[0]] != chip[e[1]])
        return cls(n, tuple(es), class_of, tuple(ctl), chip, links)

    def control_of(self, edge: Edge) -> int:
        return self.controls[self.edge_index[_sorted_edge(*edge)]]

    @cached_property
    def edge_index(self) -> dict[Edge, int]:
        return {e: i for i, e in enumerate(self.edges)}

    @cached_property
    def link_qubits(self) -> frozenset[int]:
        return frozenset(q for e in self.link_edges for q in e)

    @cached_property
    def is_link(self) -> np.ndarray:
        return np.array([e in self.link_edges for e in self.edges], dtype=bool)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.qubit_count)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return tuple(tuple(sorted(x)) for x in adj)

    @cached_property
    def control_array(self) -> np.ndarray:
        return np.asarray(self.controls, dtype=np.intp)

    @cached_property
    def target_array(self) -> np.ndarray:
        return np.array(
            [b if c == a else a for (a, b), c in zip(self.edges, self.controls)], dtype=np.intp
        )

    @cached_property
    def spectator_triples(self) -> np.ndarray:
        """Rows ``(control, j, k)`` with ``j < k`` neighbors of a control qubit.

        A qubit counts as a control if it is the designated control of at
        least one incident edge.
        """
        ctl_set = sorted(set(self.controls))
        rows = []
        for c in ctl_set:
            nb = self.neighbors[c]
            for x in range(len(nb)):
                for y in range(x + 1, len(nb)):
                    rows.append((c, nb[x], nb[y]))
        return np.array(rows, dtype=np.intp).reshape(-1, 3)

    @cached_property
    def graph(self) -> nx.Graph:
        g = nx.Graph()
        for q in range(self.qubit_count):
            g.add_node(q, cls=int(self.class_of[q]), chiplet=self.chiplet_of[q])
        for e, c in zip(self.edges, self.controls):
            g.add_edge(*e, control=c, is_link=e in self.link_edges)
        return g

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        n = self.qubit_count
        if not self.edges:
            d = np.full((n, n), -1, dtype=np.int64)
            np.fill_diagonal(d, 0)
            return d
        a, b = np.array(self.edges).T
        adj = coo_matrix((np.ones(len(a)), (a, b)), shape=(n, n)).tocsr()
        dist = shortest_path(adj, directed=False, unweighted=True)
        return np.where(np.isinf(dist), -1, dist).astype(np.int64)

    def is_connected(self) -> bool:
        return self.qubit_count <= 1 or nx.is_connected(self.graph)


@dataclass(frozen=True)
class ChipletSpec:
    size: int
    dense_rows: int = field(default=0)
    row_length: int = field(default=0)

    def __post_init__(self):
        if self.size not in SUPPORTED_CHIPLET_SIZES:
            raise ValueError(
                f"unsupported chiplet size {self.size}; supported sizes are "
                f"{', '.join(map(str, SUPPORTED_CHIPLET_SIZES))}"
            )
        rows, length = CHIPLET_LAYOUTS[self.size]
        if self.dense_rows == 0:
            object.__setattr__(self, "dense_rows", rows)
        if self.row_length == 0:
            object.__setattr__(self, "row_length", length)
        _check_block(self.dense_rows, self.row_length)
        if lattice_size(self.dense_rows, self.row_length) != self.size:
            raise ValueError(
                f"layout {self.dense_rows}x{self.row_length} holds "
                f"{lattice_size(self.dense_rows, self.row_length)} qubits, not {self.size}"
            )


@dataclass(frozen=True)
class McmSpec:
    chiplet: ChipletSpec
    rows: int = 1
    cols: int = 1
    qubit_cap: int | None = DEFAULT_QUBIT_CAP

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"MCM dims must be >= 1, got {self.rows}x{self.cols}")
        if self.qubit_cap is not None and self.total_qubits > self.qubit_cap:
            raise ValueError(
                f"{self.rows}x{self.cols} MCM of {self.chiplet.size}q chiplets has "
                f"{self.total_qubits} qubits, above the cap of {self.qubit_cap}"
            )

    @classmethod
    def of(cls, chiplet_size: int, rows: int, cols: int, qubit_cap: int | None = DEFAULT_QUBIT_CAP):
        return cls(ChipletSpec(chiplet_size), rows, cols, qubit_cap)

    @property
    def slots(self) -> int:
        return self.rows * self.cols

    @property
    def total_qubits(self) -> int:
        return self.slots * self.chiplet.size


@dataclass(frozen=True)
class Violation:
    rule: str
    qubits: tuple[int, ...]

    def __str__(self):
        return f"{self.rule}: {list(self.qubits)}"


def lattice_size(dense_rows: int, row_length: int) -> int:
    return dense_rows * row_length + sum(
        len(_connector_cols(r, row_length)) for r in range(dense_rows)
    )


def _check_block(dense_rows: int, row_length: int):
    if dense_rows < 2 or dense_rows % 2:
        raise ValueError(f"dense row count must be even and >= 2, got {dense_rows}")
    if row_length < 4 or row_length % 4:
        raise ValueError(f"dense row length must be a multiple of 4, got {row_length}")


def _connector_cols(r: int, row_length: int) -> range:
    return range(0 if r % 2 == 0 else 2, row_length, 4)


def _site_class(site: Site) -> FrequencyClass:
    kind, r, c = site
    if kind == SPARSE or c % 2:
        return FrequencyClass.F2
    return FrequencyClass.F0 if (c // 2 + r) % 2 == 0 else FrequencyClass.F1


def _site_key(site: Site):
    kind, r, c = site
    return (r, 0 if kind == DENSE else 1, c)


def _lattice(dense_rows: int, row_length: int):
    """Sites in id order and site-pair edges of the full lattice."""
    sites: list[Site] = []
    edges: list[tuple[Site, Site]] = []
    for r in range(dense_rows):
        for c in range(row_length):
            sites.append((DENSE, r, c))
            if c + 1 < row_length:
                edges.append(((DENSE, r, c), (DENSE, r, c + 1)))
        for c in _connector_cols(r, row_length):
            s = (SPARSE, r, c)
            sites.append(s)
            edges.append(((DENSE, r, c), s))
            if r + 1 < dense_rows:
                edges.append((s, (DENSE, r + 1, c)))
    return sites, edges


def _assemble(sites, site_edges, chiplet_of_site, block, grid, right_stubs, bottom_stubs) -> Topology:
    order = sorted(sites, key=_site_key)
    ids = {s: i for i, s in enumerate(order)}
    class_of = tuple(_site_class(s) for s in order)
    chip = tuple(chiplet_of_site(s) for s in order)
    edges = sorted(_sorted_edge(ids[a], ids[b]) for a, b in site_edges)
    controls = tuple(b if class_of[b] == FrequencyClass.F2 else a for a, b in edges)
    links = frozenset(e for e in edges if chip[e[0]] != chip[e[1]])
    return Topology(
        qubit_count=len(order),
        edges=tuple(edges),
        class_of=class_of,
        controls=controls,
        chiplet_of=chip,
        link_edges=links,
        sites=tuple(order),
        right_stubs=tuple(sorted(ids[s] for s in right_stubs)),
        bottom_stubs=tuple(sorted(ids[s] for s in bottom_stubs)),
        block=block,
        grid=grid,
    )


def _outer_stubs(dense_rows: int, row_length: int):
    right = [(DENSE, r, row_length - 1) for r in range(dense_rows)]
    bottom = [(SPARSE, dense_rows - 1, c) for c in _connector_cols(dense_rows - 1, row_length)]
    return right, bottom


def build_chiplet(spec: ChipletSpec | int) -> Topology:
    """Single chiplet; right and bottom ``F2`` stubs are left unlinked."""
    if isinstance(spec, int):
        spec = ChipletSpec(spec)
    rows, length = spec.dense_rows, spec.row_length
    sites, edges = _lattice(rows, length)
    right, bottom = _outer_stubs(rows, length)
    return _assemble(sites, edges, lambda s: 0, (rows, length), (1, 1), right, bottom)


def stitch_mcm(spec: McmSpec) -> Topology:
    """Place ``rows x cols`` copies of a chiplet and bond their stubs.

    The right stub of dense row ``r`` in cell ``(i, j)`` couples to the
    first qubit of row ``r`` in cell ``(i, j + 1)``; bottom stub at column
    ``c`` of cell ``(i, j)`` couples to column ``c`` of the top dense row of
    cell ``(i + 1, j)``.
    """
    chip = build_chiplet(spec.chiplet)
    R, W = chip.block
    k, m = spec.rows, spec.cols

    def shift(site: Site, i: int, j: int) -> Site:
        kind, r, c = site
        return (kind, i * R + r, j * W + c)

    sites: list[Site] = []
    edges: list[tuple[Site, Site]] = []
    owner: dict[Site, int] = {}
    for i in range(k):
        for j in range(m):
            for s in chip.sites:
                g = shift(s, i, j)
                sites.append(g)
                owner[g] = i * m + j
            for a, b in chip.edges:
                edges.append((shift(chip.sites[a], i, j), shift(chip.sites[b], i, j)))
    for i in range(k):
        for j in range(m):
            if j + 1 < m:
                for q in chip.right_stubs:
                    _, r, _ = chip.sites[q]
                    edges.append((shift(chip.sites[q], i, j), shift((DENSE, r, 0), i, j + 1)))
            if i + 1 < k:
                for q in chip.bottom_stubs:
                    _, _, c = chip.sites[q]
                    edges.append((shift(chip.sites[q], i, j), shift((DENSE, 0, c), i + 1, j)))
    right, bottom = _outer_stubs(k * R, m * W)
    return _assemble(sites, edges, owner.__getitem__, (R, W), (k, m), right, bottom)


def squarest_layout(total_qubits: int) -> tuple[int, int]:
    """(dense rows, row length) holding ``total_qubits`` with the squarest footprint."""
    if total_qubits < 10 or total_qubits % 10:
        lo = max(10, total_qubits // 10 * 10)
        hi = (total_qubits // 10 + 1) * 10
        near = sorted({lo, hi})
        raise ValueError(
            f"{total_qubits} qubits is not expressible by the heavy-hex tiling; "
            f"nearest expressible counts: {near}"
        )
    area = total_qubits * 4 // 5
    best = None
    for rows in range(2, area + 1, 2):
        if area % rows:
            continue
        length = area // rows
        if length % 4:
            continue
        # each dense row plus its sparse row spans two lattice rows
        score = abs(np.log(length / (2 * rows)))
        if best is None or score < best[0] - 1e-12:
            best = (score, rows, length)
    assert best is not None
    return best[1], best[2]


def build_monolithic(total_qubits: int, dims: McmSpec | None = None) -> Topology:
    """One-piece device.

    With ``dims`` the lattice is the same ``(k R, m W)`` layout as the
    corresponding stitched MCM; otherwise the squarest expressible layout.
    """
    if dims is not None:
        if dims.total_qubits != total_qubits:
            raise ValueError(
                f"{dims.rows}x{dims.cols} tiling of {dims.chiplet.size}q tiles holds "
                f"{dims.total_qubits} qubits, not {total_qubits}"
            )
        rows = dims.rows * dims.chiplet.dense_rows
        length = dims.cols * dims.chiplet.row_length
    else:
        rows, length = squarest_layout(total_qubits)
    sites, edges = _lattice(rows, length)
    right, bottom = _outer_stubs(rows, length)
    return _assemble(sites, edges, lambda s: 0, (rows, length), (1, 1), right, bottom)


def squarest_dims(slots: int) -> tuple[int, int]:
    """``k x m`` with ``k * m == slots``, ``k <= m`` and ``m - k`` minimal."""
    k = int(np.floor(np.sqrt(slots)))
    while slots % k:
        k -= 1
    return k, slots // k


def validate_frequency_pattern(t: Topology) -> list[Violation]:
    out: list[Violation] = []
    F2 = FrequencyClass.F2
    for (a, b), c in zip(t.edges, t.controls):
        ca, cb = t.class_of[a], t.class_of[b]
        if ca == cb:
            out.append(Violation("adjacent same class", (a, b)))
            continue
        if (ca == F2) == (cb == F2):
            out.append(Violation("edge lacks exactly one F2 endpoint", (a, b)))
            continue
        f2_end = a if ca == F2 else b
        if c != f2_end:
            out.append(Violation("control is not the F2 endpoint", (a, b)))
    for q in range(t.qubit_count):
        if t.class_of[q] != F2:
            continue
        nb = t.neighbors[q]
        if len(nb) > 2:
            out.append(Violation("F2 degree", (q, *nb)))
        seen: dict[FrequencyClass, int] = {}
        for x in nb:
            cx = t.class_of[x]
            if cx in seen:
                out.append(Violation("F2 neighbors share a class", (q, seen[cx], x)))
            else:
                seen[cx] = x
    expected_links = {e for e in t.edges if t.chiplet_of[e[0]] != t.chiplet_of[e[1]]}
    for e in sorted(expected_links ^ set(t.link_edges)):
        out.append(Violation("link edge marking", e))
    if not t.is_connected():
        comps = sorted(nx.connected_components(t.graph), key=min)
        out.append(Violation("disconnected", tuple(min(c) for c in comps)))
    return out


# ---------------------------------------------------------------- export

TOPOLOGY_FORMAT = "chipletsim-topology"
TOPOLOGY_VERSION = 1


def topology_to_dict(t: Topology) -> dict:
    return {
        "format": TOPOLOGY_FORMAT,
        "version": TOPOLOGY_VERSION,
        "block": list(t.block),
        "grid": list(t.grid),
        "qubits": [
            {
                "id": q,
                "class": t.class_of[q].name,
                "chiplet": t.chiplet_of[q],
                **({"site": list(t.sites[q])} if t.sites else {}),
            }
            for q in range(t.qubit_count)
        ],
        "edges": [
            {"endpoints": list(e), "control": c, "is_link": e in t.link_edges}
            for e, c in zip(t.edges, t.controls)
        ],
        "right_stubs": list(t.right_stubs),
        "bottom_stubs": list(t.bottom_stubs),
    }


def topology_from_dict(data: dict) -> Topology:
    if data.get("format") != TOPOLOGY_FORMAT:
        raise ValueError(f"not a {TOPOLOGY_FORMAT} document")
    if data.get("version") != TOPOLOGY_VERSION:
        raise ValueError(f"unsupported topology version {data.get('version')}")
    qubits = sorted(data["qubits"], key=lambda r: r["id"])
    if [r["id"] for r in qubits] != list(range(len(qubits))):
        raise ValueError("qubit ids must be 0..n-1")
    edges = [tuple(r["endpoints"]) for r in data["edges"]]
    return Topology(
        qubit_count=len(qubits),
        edges=tuple(_sorted_edge(a, b) for a, b in edges),
        class_of=tuple(FrequencyClass[r["class"]] for r in qubits),
        controls=tuple(r["control"] for r in data["edges"]),
        chiplet_of=tuple(r["chiplet"] for r in qubits),
        link_edges=frozenset(
            _sorted_edge(*r["endpoints"]) for r in data["edges"] if r["is_link"]
        ),
        sites=tuple((r["site"][0], r["site"][1], r["site"][2]) for r in qubits)
        if all("site" in r for r in qubits)
        else (),
        right_stubs=tuple(data.get("right_stubs", ())),
        bottom_stubs=tuple(data.get("bottom_stubs", ())),
        block=tuple(data.get("block", (0, 0))),
        grid=tuple(data.get("grid", (1, 1))),
    )


def write_topology(t: Topology, path: str | Path) -> None:
    Path(path).write_text(json.dumps(topology_to_dict(t), indent=1) + "\n")


def read_topology(path: str | Path) -> Topology:
    return topology_from_dict(json.loads(Path(path).read_text()))
